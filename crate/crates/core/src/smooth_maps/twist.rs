//! Slow twists: `x -> Θᵀ S(|x|) Θ x`, with `S` block-diagonal 2×2 rotations
//! through angles `f_i(|x|)`. A leftover coordinate in odd dimension is fixed.

use serde::{Deserialize, Serialize};

use super::cutoff::h_jet;
use crate::error::{Error, Result};
use crate::geometry::{Matrix, Vector, ORTHOGONALITY_TOL};

/// Profiles must satisfy `t |f'(t)| < SLOW_TWIST_GUARD * ε` on the sampling grid.
pub const SLOW_TWIST_GUARD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngleProfile {
    Constant {
        angle: f64,
    },
    /// Smooth ramp in `log t` from 0 at `inner` to `rate ln(outer/inner) / 2`
    /// at `outer`, with `max t f'(t) = rate`.
    LogRamp { rate: f64, inner: f64, outer: f64 },
}

impl AngleProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AngleProfile::Constant { angle } if angle.is_finite() => Ok(()),
            AngleProfile::LogRamp { rate, inner, outer }
                if rate.is_finite() && inner > 0.0 && inner < outer && outer.is_finite() =>
            {
                Ok(())
            }
            p => Err(Error::InvalidSpec(format!("invalid angle profile {p:?}"))),
        }
    }

    /// `(f(t), f'(t))`.
    pub fn jet(&self, t: f64) -> (f64, f64) {
        match *self {
            AngleProfile::Constant { angle } => (angle, 0.0),
            AngleProfile::LogRamp { rate, inner, outer } => {
                let l = (outer / inner).ln();
                let amp = 0.5 * rate * l;
                if t <= inner {
                    return (0.0, 0.0);
                }
                if t >= outer {
                    return (amp, 0.0);
                }
                let (h, dh, _) = h_jet((t / inner).ln() / l);
                (amp * h, 0.5 * rate * dh / t)
            }
        }
    }

    /// Radii at which `t |f'(t)|` is sampled by the guard.
    fn grid(&self) -> Vec<f64> {
        match *self {
            AngleProfile::Constant { .. } => vec![],
            AngleProfile::LogRamp { inner, outer, .. } => {
                let n = 2000;
                let (a, b) = (inner.ln(), outer.ln());
                (0..=n)
                    .map(|i| (a + (b - a) * i as f64 / n as f64).exp())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TwistRepr", into = "TwistRepr")]
pub struct SlowTwist {
    frame: Matrix,
    profiles: Vec<AngleProfile>,
}

#[derive(Serialize, Deserialize)]
struct TwistRepr {
    #[serde(with = "crate::serde_util::matrix")]
    frame: Matrix,
    profiles: Vec<AngleProfile>,
}

impl TryFrom<TwistRepr> for SlowTwist {
    type Error = Error;

    fn try_from(r: TwistRepr) -> Result<Self> {
        SlowTwist::new(r.profiles, r.frame)
    }
}

impl From<SlowTwist> for TwistRepr {
    fn from(t: SlowTwist) -> Self {
        TwistRepr {
            frame: t.frame,
            profiles: t.profiles,
        }
    }
}

fn block(f: f64) -> (f64, f64) {
    (f.cos(), f.sin())
}

impl SlowTwist {
    /// Structural validation only: `frame ∈ SO(D)` and `D/2` valid profiles.
    pub fn new(profiles: Vec<AngleProfile>, frame: Matrix) -> Result<Self> {
        let d = frame.nrows();
        if frame.ncols() != d || d < 2 {
            return Err(Error::InvalidSpec("twist frame must be square, D >= 2".into()));
        }
        if profiles.len() != d / 2 {
            return Err(Error::InvalidSpec(format!(
                "expected {} angle profiles for D = {d}, got {}",
                d / 2,
                profiles.len()
            )));
        }
        for p in &profiles {
            p.validate()?;
        }
        let defect = (frame.transpose() * &frame - Matrix::identity(d, d)).amax();
        if defect > ORTHOGONALITY_TOL || frame.determinant() < 0.0 {
            return Err(Error::InvalidSpec(
                "twist frame must be a proper rotation".into(),
            ));
        }
        Ok(Self { frame, profiles })
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn frame(&self) -> &Matrix {
        &self.frame
    }

    pub fn profiles(&self) -> &[AngleProfile] {
        &self.profiles
    }

    /// Largest `t |f_i'(t)|` over the guard grid.
    pub fn max_log_slope(&self) -> f64 {
        self.profiles
            .iter()
            .flat_map(|p| p.grid().into_iter().map(move |t| t * p.jet(t).1.abs()))
            .fold(0.0, f64::max)
    }

    fn rotate_blocks(&self, y: &Vector, t: f64, sign: f64) -> Vector {
        let mut out = y.clone();
        for (i, p) in self.profiles.iter().enumerate() {
            let (c, s) = block(sign * p.jet(t).0);
            let (a, b) = (y[2 * i], y[2 * i + 1]);
            out[2 * i] = c * a + s * b;
            out[2 * i + 1] = -s * a + c * b;
        }
        out
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        let y = &self.frame * x;
        let t = y.norm();
        self.frame.tr_mul(&self.rotate_blocks(&y, t, 1.0))
    }

    /// Exact inverse: the radius is preserved, so the angles are known.
    pub fn inverse(&self, x: &Vector) -> Vector {
        let y = &self.frame * x;
        let t = y.norm();
        self.frame.tr_mul(&self.rotate_blocks(&y, t, -1.0))
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        let d = self.dim();
        let y = &self.frame * x;
        let t = y.norm();
        let mut s = Matrix::identity(d, d);
        let mut sy = Vector::zeros(d);
        for (i, p) in self.profiles.iter().enumerate() {
            let (f, df) = p.jet(t);
            let (c, sn) = block(f);
            let (k, l) = (2 * i, 2 * i + 1);
            s[(k, k)] = c;
            s[(k, l)] = sn;
            s[(l, k)] = -sn;
            s[(l, l)] = c;
            // d/dt of the block applied to y
            sy[k] = df * (-sn * y[k] + c * y[l]);
            sy[l] = df * (-c * y[k] - sn * y[l]);
        }
        if t > 0.0 {
            s += sy * (y.transpose() / t);
        }
        self.frame.transpose() * s * &self.frame
    }
}

/// Slow twist admitted at distortion budget `epsilon_budget`.
pub fn make_slow_twist(
    profiles: Vec<AngleProfile>,
    frame: Matrix,
    epsilon_budget: f64,
) -> Result<SlowTwist> {
    let t = SlowTwist::new(profiles, frame)?;
    let slope = t.max_log_slope();
    if !(slope < SLOW_TWIST_GUARD * epsilon_budget) && slope > 0.0 {
        return Err(Error::DistortionTooLarge(format!(
            "twist profile has t|f'| = {slope:e}, limit {:e}",
            SLOW_TWIST_GUARD * epsilon_budget
        )));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_preserves_norm() {
        let t = SlowTwist::new(vec![AngleProfile::Constant { angle: 0.7 }], Matrix::identity(3, 3)).unwrap();
        let x = Vector::from_row_slice(&[0.3, -1.1, 0.5]);
        let y = t.eval(&x);
        assert!((y.norm() - x.norm()).abs() < 1e-15);
        assert_eq!(y[2], 0.5);
        assert!((t.inverse(&y) - x).norm() < 1e-15);
    }

    #[test]
    fn ramp_max_log_slope_is_rate() {
        let p = AngleProfile::LogRamp { rate: 0.03, inner: 0.01, outer: 1.0 };
        let t = SlowTwist::new(vec![p], Matrix::identity(2, 2)).unwrap();
        assert!((t.max_log_slope() - 0.03).abs() < 1e-6);
        assert!(make_slow_twist(vec![p], Matrix::identity(2, 2), 0.2).is_err());
        assert!(make_slow_twist(vec![p], Matrix::identity(2, 2), 0.31).is_ok());
    }

    #[test]
    fn rejects_bad_frames() {
        let mut f = Matrix::identity(2, 2);
        f[(0, 0)] = -1.0;
        assert!(SlowTwist::new(vec![AngleProfile::Constant { angle: 0.0 }], f).is_err());
        assert!(SlowTwist::new(vec![], Matrix::identity(2, 2)).is_err());
    }
}
