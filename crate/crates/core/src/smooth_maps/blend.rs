//! Two-motion blend: equal to `A` near `x0`, to `A*` outside `B(x0, r)`.
//!
//! With `T`, `T*` the linear parts, `R = T* Tᵀ = exp(S)` and
//! `Δa = A*(x0) - A(x0)`,
//!
//! `Φ(x) = exp(ψ_r(ρ) S) T (x - x0) + A(x0) + ψ_t(ρ) Δa`,  `ρ = |x - x0|`,
//!
//! where `ψ_r(ρ) = h(1 + ε ln(ρ/r))` runs from 0 at `exp(-1/ε) r` to 1 at `r`
//! and `ψ_t(ρ) = h(2ρ/r - 1)` runs from 0 at `r/2` to 1 at `r`.

use nalgebra::Schur;
use serde::{Deserialize, Serialize};

use super::cutoff::h_jet;
use crate::error::{Error, Result};
use crate::geometry::{check_dim, EuclideanMotion, Matrix, Vector};

/// Rotation angles closer than this to `π` make the logarithm ambiguous.
pub const ANTIPODAL_MARGIN: f64 = 1e-6;
/// Centre gap allowed relative to `ε r`.
pub const GAP_FACTOR: f64 = 1.01;

/// Principal logarithm of a rotation in real Schur form:
/// `R = Q diag(rot(θ_1), ..., 1, ...) Qᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationLog {
    q: Matrix,
    /// `(i, θ)`: a rotation by `θ` in the plane of columns `i, i+1` of `Q`.
    blocks: Vec<(usize, f64)>,
}

fn rot2(theta: f64) -> (f64, f64) {
    (theta.cos(), theta.sin())
}

impl RotationLog {
    pub fn new(r: &Matrix) -> Result<Self> {
        let d = r.nrows();
        let (q, t) = Schur::new(r.clone()).unpack();
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < d {
            if i + 1 < d && t[(i + 1, i)].abs() > 1e-14 {
                let theta = (t[(i + 1, i)] - t[(i, i + 1)]).atan2(t[(i, i)] + t[(i + 1, i + 1)]);
                if theta.abs() > std::f64::consts::PI - ANTIPODAL_MARGIN {
                    return Err(ambiguous(theta.abs()));
                }
                blocks.push((i, theta));
                i += 2;
            } else {
                if t[(i, i)] < 0.0 {
                    return Err(ambiguous(std::f64::consts::PI));
                }
                i += 1;
            }
        }
        let log = Self { q, blocks };
        let defect = (log.exp(1.0) - r).amax();
        if defect > 1e-9 {
            return Err(Error::InternalConsistency(format!(
                "rotation logarithm does not reproduce the rotation (defect {defect:e})"
            )));
        }
        Ok(log)
    }

    pub fn angles(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.1).collect()
    }

    /// Largest rotation angle.
    pub fn max_angle(&self) -> f64 {
        self.blocks.iter().map(|b| b.1.abs()).fold(0.0, f64::max)
    }

    /// `exp(ψ S)`.
    pub fn exp(&self, psi: f64) -> Matrix {
        let d = self.q.nrows();
        let mut m = Matrix::identity(d, d);
        for &(i, th) in &self.blocks {
            let (c, s) = rot2(psi * th);
            m[(i, i)] = c;
            m[(i, i + 1)] = -s;
            m[(i + 1, i)] = s;
            m[(i + 1, i + 1)] = c;
        }
        &self.q * m * self.q.transpose()
    }

    /// `S exp(ψ S)`.
    pub fn skew_exp(&self, psi: f64) -> Matrix {
        let d = self.q.nrows();
        let mut m = Matrix::zeros(d, d);
        for &(i, th) in &self.blocks {
            let (c, s) = rot2(psi * th);
            // θ J rot(ψθ) with J = [[0, -1], [1, 0]]
            m[(i, i)] = -th * s;
            m[(i, i + 1)] = -th * c;
            m[(i + 1, i)] = th * c;
            m[(i + 1, i + 1)] = -th * s;
        }
        &self.q * m * self.q.transpose()
    }
}

fn ambiguous(angle: f64) -> Error {
    Error::AmbiguousGeodesic {
        angle,
        hint: "perturb one of the motions by a small rotation so the relative angle is below pi".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlendRepr", into = "BlendRepr")]
pub struct MotionBlend {
    a: EuclideanMotion,
    a_star: EuclideanMotion,
    center: Vector,
    radius: f64,
    epsilon: f64,
    // derived
    r_in: f64,
    log: RotationLog,
    a_center: Vector,
    delta_a: Vector,
}

#[derive(Serialize, Deserialize)]
struct BlendRepr {
    a: EuclideanMotion,
    a_star: EuclideanMotion,
    #[serde(with = "crate::serde_util::vector")]
    center: Vector,
    radius: f64,
    epsilon: f64,
}

impl TryFrom<BlendRepr> for MotionBlend {
    type Error = Error;

    fn try_from(r: BlendRepr) -> Result<Self> {
        MotionBlend::new(r.a, r.a_star, r.center, r.radius, r.epsilon)
    }
}

impl From<MotionBlend> for BlendRepr {
    fn from(b: MotionBlend) -> Self {
        BlendRepr {
            a: b.a,
            a_star: b.a_star,
            center: b.center,
            radius: b.radius,
            epsilon: b.epsilon,
        }
    }
}

impl MotionBlend {
    /// Blend between two proper motions; see [`super::motion_blend`] for the
    /// general entry point that also accepts improper pairs.
    pub fn new(
        a: EuclideanMotion,
        a_star: EuclideanMotion,
        center: Vector,
        radius: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let d = a.dim();
        if a_star.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: a_star.dim(),
            });
        }
        check_dim(d, &center)?;
        if a.orientation() != a_star.orientation() {
            return Err(Error::OrientationMismatch);
        }
        if !a.is_proper() {
            return Err(Error::InvalidSpec(
                "blend nodes take proper motions; factor out a reflection first".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "blend epsilon {epsilon} outside (0, 1)"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("blend radius {radius}")));
        }
        let a_center = a.apply(&center);
        let a_star_center = a_star.apply(&center);
        let delta_a = &a_star_center - &a_center;
        let gap = delta_a.norm();
        let limit = GAP_FACTOR * epsilon * radius + 1e-13 * (1.0 + a_star_center.norm());
        if gap > limit {
            return Err(Error::PreconditionViolated(format!(
                "blend centre gap {gap:e} exceeds {limit:e}"
            )));
        }
        let rel = a_star.rotation() * a.rotation().transpose();
        let log = RotationLog::new(&rel)?;
        let r_in = (-1.0 / epsilon).exp() * radius;
        Ok(Self {
            a,
            a_star,
            center,
            radius,
            epsilon,
            r_in,
            log,
            a_center,
            delta_a,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn inner(&self) -> &EuclideanMotion {
        &self.a
    }

    pub fn outer(&self) -> &EuclideanMotion {
        &self.a_star
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    /// Outer radius `r`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Inner radius `exp(-1/ε) r`.
    pub fn inner_radius(&self) -> f64 {
        self.r_in
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn log(&self) -> &RotationLog {
        &self.log
    }

    fn profiles(&self, rho: f64) -> ((f64, f64), (f64, f64)) {
        let s = 1.0 + self.epsilon * (rho / self.radius).ln();
        let (hr, dhr, _) = h_jet(s);
        let sig = 2.0 * rho / self.radius - 1.0;
        let (ht, dht, _) = h_jet(sig);
        (
            (hr, dhr * self.epsilon / rho),
            (ht, dht * 2.0 / self.radius),
        )
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        let w = x - &self.center;
        let rho = w.norm();
        if rho <= self.r_in {
            return self.a.apply(x);
        }
        if rho >= self.radius {
            return self.a_star.apply(x);
        }
        let ((pr, _), (pt, _)) = self.profiles(rho);
        self.log.exp(pr) * (self.a.rotation() * w) + &self.a_center + &self.delta_a * pt
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let w = x - &self.center;
        let rho = w.norm();
        if rho <= self.r_in {
            return self.a.rotation().clone();
        }
        if rho >= self.radius {
            return self.a_star.rotation().clone();
        }
        let ((pr, dpr), (_, dpt)) = self.profiles(rho);
        let u = &w / rho;
        let tw = self.a.rotation() * &w;
        let mut j = self.log.exp(pr) * self.a.rotation();
        j += (self.log.skew_exp(pr) * tw) * (u.transpose() * dpr);
        j += &self.delta_a * (u.transpose() * dpt);
        j
    }

    /// Starting point for Newton inversion of `y`.
    pub fn inverse_guess(&self, y: &Vector) -> Vector {
        let outer = self.a_star.inverse().apply(y);
        if (&outer - &self.center).norm() >= self.radius {
            return outer;
        }
        let inner = self.a.inverse().apply(y);
        if (&inner - &self.center).norm() <= self.r_in {
            return inner;
        }
        // Fixed-point sweeps on the radial structure.
        let mut x = inner;
        for _ in 0..5 {
            let rho = (&x - &self.center).norm().clamp(self.r_in, self.radius);
            let ((pr, _), (pt, _)) = self.profiles(rho);
            let v = y - &self.a_center - &self.delta_a * pt;
            x = self.a.rotation().tr_mul(&self.log.exp(pr).tr_mul(&v)) + &self.center;
        }
        x
    }
}
