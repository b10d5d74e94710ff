//! Slides: `x -> x + Σ_z d_z θ(|x - z|)` with disjoint cutoff supports.

use serde::{Deserialize, Serialize};

use super::cutoff::CutoffSpec;
use crate::error::{Error, Result};
use crate::geometry::{check_dim, Matrix, Vector};

/// Largest admissible `max |d_z| / (r_out - r_in)`.
pub const SLIDE_GUARD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SlideRepr", into = "SlideRepr")]
pub struct Slide {
    dim: usize,
    centers: Vec<Vector>,
    displacements: Vec<Vector>,
    cutoff: CutoffSpec,
    guarded: bool,
}

#[derive(Serialize, Deserialize)]
struct SlideRepr {
    dimension: usize,
    #[serde(with = "crate::serde_util::vectors")]
    centers: Vec<Vector>,
    #[serde(with = "crate::serde_util::vectors")]
    displacements: Vec<Vector>,
    r_in: f64,
    r_out: f64,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    guarded: bool,
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

impl TryFrom<SlideRepr> for Slide {
    type Error = Error;

    fn try_from(r: SlideRepr) -> Result<Self> {
        let pairs = r.centers.into_iter().zip(r.displacements).collect();
        if r.guarded {
            Slide::new(r.dimension, pairs, r.r_in, r.r_out)
        } else {
            Slide::new_unchecked(r.dimension, pairs, r.r_in, r.r_out)
        }
    }
}

impl From<Slide> for SlideRepr {
    fn from(s: Slide) -> Self {
        SlideRepr {
            dimension: s.dim,
            centers: s.centers,
            displacements: s.displacements,
            r_in: s.cutoff.r_in,
            r_out: s.cutoff.r_out,
            guarded: s.guarded,
        }
    }
}

impl Slide {
    /// Checks disjoint supports and the distortion guard.
    pub fn new(dim: usize, pairs: Vec<(Vector, Vector)>, r_in: f64, r_out: f64) -> Result<Self> {
        let s = Self::new_unchecked(dim, pairs, r_in, r_out)?;
        for i in 0..s.centers.len() {
            for j in i + 1..s.centers.len() {
                let d = (&s.centers[i] - &s.centers[j]).norm();
                if !(d > 2.0 * r_out) {
                    return Err(Error::InvalidSpec(format!(
                        "slide supports overlap: centers {i} and {j} are {d:e} apart, radius {r_out:e}"
                    )));
                }
            }
        }
        let ratio = s.guard_ratio();
        if ratio > SLIDE_GUARD {
            return Err(Error::DistortionTooLarge(format!(
                "slide displacement ratio {ratio:e} exceeds {SLIDE_GUARD}"
            )));
        }
        Ok(Self { guarded: true, ..s })
    }

    /// Structural checks only; supports may overlap and displacements may be large.
    pub fn new_unchecked(
        dim: usize,
        pairs: Vec<(Vector, Vector)>,
        r_in: f64,
        r_out: f64,
    ) -> Result<Self> {
        let cutoff = CutoffSpec::new(r_in, r_out)?;
        let mut centers = Vec::with_capacity(pairs.len());
        let mut displacements = Vec::with_capacity(pairs.len());
        for (c, d) in pairs {
            check_dim(dim, &c)?;
            check_dim(dim, &d)?;
            if c.iter().chain(d.iter()).any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpec("non-finite slide data".into()));
            }
            centers.push(c);
            displacements.push(d);
        }
        Ok(Self {
            dim,
            centers,
            displacements,
            cutoff,
            guarded: false,
        })
    }

    /// Whether the disjointness and distortion guards were enforced.
    pub fn is_guarded(&self) -> bool {
        self.guarded
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centers(&self) -> &[Vector] {
        &self.centers
    }

    pub fn displacements(&self) -> &[Vector] {
        &self.displacements
    }

    pub fn cutoff(&self) -> &CutoffSpec {
        &self.cutoff
    }

    /// `max |d_z| / (r_out - r_in)`.
    pub fn guard_ratio(&self) -> f64 {
        self.displacements
            .iter()
            .map(|d| d.norm())
            .fold(0.0, f64::max)
            / self.cutoff.width()
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        let mut y = x.clone();
        for (c, d) in self.centers.iter().zip(&self.displacements) {
            let t = (x - c).norm();
            if t < self.cutoff.r_out {
                let w = self.cutoff.eval(t);
                if w == 1.0 {
                    y += d;
                } else {
                    y.axpy(w, d, 1.0);
                }
            }
        }
        y
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let mut j = Matrix::identity(self.dim, self.dim);
        for (c, d) in self.centers.iter().zip(&self.displacements) {
            let r = x - c;
            let t = r.norm();
            if t > self.cutoff.r_in && t < self.cutoff.r_out {
                let dt = self.cutoff.derivative(t);
                j += d * (r.transpose() * (dt / t));
            }
        }
        j
    }

    /// Initial guess for `Φ⁻¹(y)`: subtract the displacement of the nearest center.
    pub fn inverse_guess(&self, y: &Vector) -> Vector {
        let mut best: Option<(f64, &Vector)> = None;
        for (c, d) in self.centers.iter().zip(&self.displacements) {
            let t = (y - c - d).norm();
            if t < self.cutoff.r_out && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, d));
            }
        }
        match best {
            Some((_, d)) => y - d,
            None => y.clone(),
        }
    }
}
