//! Region-dispatching node that joins local maps to a global one.
//!
//! Around each representative `z`, with `r2 = exp(-3/ε) τ` and
//! `r3 = exp(-2/ε) τ`: the local map on `B(z, r2)`, the blend on the annulus
//! `r2 <= |x - z| < r3`, and the global map everywhere else.

use serde::{Deserialize, Serialize};

use super::SmoothMap;
use crate::error::{Error, Result};
use crate::geometry::{check_dim, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlueRegion {
    Local(usize),
    Blend(usize),
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GlueRepr", into = "GlueRepr")]
pub struct GlueNode {
    reps: Vec<Vector>,
    tau: f64,
    epsilon: f64,
    locals: Vec<SmoothMap>,
    blends: Vec<SmoothMap>,
    global: Box<SmoothMap>,
    r2: f64,
    r3: f64,
}

#[derive(Serialize, Deserialize)]
struct GlueRepr {
    #[serde(with = "crate::serde_util::vectors")]
    representatives: Vec<Vector>,
    tau: f64,
    epsilon: f64,
    locals: Vec<SmoothMap>,
    blends: Vec<SmoothMap>,
    global: Box<SmoothMap>,
}

impl TryFrom<GlueRepr> for GlueNode {
    type Error = Error;

    fn try_from(r: GlueRepr) -> Result<Self> {
        GlueNode::new(r.representatives, r.tau, r.epsilon, r.locals, r.blends, *r.global)
    }
}

impl From<GlueNode> for GlueRepr {
    fn from(g: GlueNode) -> Self {
        GlueRepr {
            representatives: g.reps,
            tau: g.tau,
            epsilon: g.epsilon,
            locals: g.locals,
            blends: g.blends,
            global: g.global,
        }
    }
}

/// `exp((i - 5)/ε) τ`, the radius of `B_i`.
pub fn glue_radius(i: i32, epsilon: f64, tau: f64) -> f64 {
    ((i - 5) as f64 / epsilon).exp() * tau
}

impl GlueNode {
    /// Structural validation; the region-agreement preconditions are checked by
    /// the gluing builder.
    pub fn new(
        reps: Vec<Vector>,
        tau: f64,
        epsilon: f64,
        locals: Vec<SmoothMap>,
        blends: Vec<SmoothMap>,
        global: SmoothMap,
    ) -> Result<Self> {
        let d = global.dim();
        if locals.len() != reps.len() || blends.len() != reps.len() {
            return Err(Error::InvalidSpec(
                "glue node needs one local map and one blend per representative".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon < 1.0 && tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "glue parameters tau = {tau}, epsilon = {epsilon}"
            )));
        }
        for z in &reps {
            check_dim(d, z)?;
        }
        for m in locals.iter().chain(&blends) {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.dim(),
                });
            }
        }
        let r2 = glue_radius(2, epsilon, tau);
        let r3 = glue_radius(3, epsilon, tau);
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                if (&reps[i] - &reps[j]).norm() <= 2.0 * r3 {
                    return Err(Error::InvalidSpec(format!(
                        "glue representatives {i} and {j} are closer than 2 r3"
                    )));
                }
            }
        }
        Ok(Self {
            reps,
            tau,
            epsilon,
            locals,
            blends,
            global: Box::new(global),
            r2,
            r3,
        })
    }

    pub fn dim(&self) -> usize {
        self.global.dim()
    }

    pub fn representatives(&self) -> &[Vector] {
        &self.reps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn locals(&self) -> &[SmoothMap] {
        &self.locals
    }

    pub fn blends(&self) -> &[SmoothMap] {
        &self.blends
    }

    pub fn global(&self) -> &SmoothMap {
        &self.global
    }

    /// `(r2, r3)`.
    pub fn radii(&self) -> (f64, f64) {
        (self.r2, self.r3)
    }

    pub fn region(&self, x: &Vector) -> GlueRegion {
        for (i, z) in self.reps.iter().enumerate() {
            let t = (x - z).norm();
            if t < self.r2 {
                return GlueRegion::Local(i);
            }
            if t < self.r3 {
                return GlueRegion::Blend(i);
            }
        }
        GlueRegion::Global
    }

    pub fn piece(&self, region: GlueRegion) -> &SmoothMap {
        match region {
            GlueRegion::Local(i) => &self.locals[i],
            GlueRegion::Blend(i) => &self.blends[i],
            GlueRegion::Global => &self.global,
        }
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        self.piece(self.region(x)).apply(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        self.piece(self.region(x)).jac(x)
    }

    /// Inverts each piece and keeps the preimage that lies in that piece's region.
    pub fn invert(&self, y: &Vector, tol: f64) -> Result<Vector> {
        let x = self.global.invert(y, tol)?;
        if self.region(&x) == GlueRegion::Global {
            return Ok(x);
        }
        for i in 0..self.reps.len() {
            for region in [GlueRegion::Local(i), GlueRegion::Blend(i)] {
                if let Ok(x) = self.piece(region).invert(y, tol) {
                    if self.region(&x) == region {
                        return Ok(x);
                    }
                }
            }
        }
        Err(Error::InternalConsistency(
            "no glue region contains a preimage".into(),
        ))
    }
}
