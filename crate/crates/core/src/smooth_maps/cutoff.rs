//! The smooth radial cutoff `θ`.
//!
//! `g(x) = exp(-1/x)` for `x > 0`, `h = g / (g + g(1 - ·))`, and
//! `θ(t) = h(σ(t))²` with `σ` affine, sending `[r_in, r_out]` to `[1, 0]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(h, h', h'')` at `x`, evaluated without overflow.
///
/// On `(0, 1)`, `h = 1 / (1 + e^u)` with `u = 1/x - 1/(1-x)`.
pub fn h_jet(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let y = 1.0 - x;
    let u = 1.0 / x - 1.0 / y;
    let (h, hc) = if u > 0.0 {
        let e = (-u).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = u.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    };
    let w = 1.0 / (x * x) + 1.0 / (y * y);
    let dw = -2.0 / (x * x * x) + 2.0 / (y * y * y);
    let hh = h * hc;
    let d1 = hh * w;
    let d2 = d1 * (hc - h) * w + hh * dw;
    (h, d1, d2)
}

pub fn h(x: f64) -> f64 {
    h_jet(x).0
}

/// Radial cutoff equal to 1 on `[0, r_in]` and 0 on `[r_out, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CutoffRepr")]
pub struct CutoffSpec {
    pub r_in: f64,
    pub r_out: f64,
}

#[derive(Deserialize)]
struct CutoffRepr {
    r_in: f64,
    r_out: f64,
}

impl TryFrom<CutoffRepr> for CutoffSpec {
    type Error = Error;

    fn try_from(r: CutoffRepr) -> Result<Self> {
        CutoffSpec::new(r.r_in, r.r_out)
    }
}

impl CutoffSpec {
    pub fn new(r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "cutoff radii must satisfy 0 < r_in < r_out, got {r_in}, {r_out}"
            )));
        }
        Ok(Self { r_in, r_out })
    }

    pub fn width(&self) -> f64 {
        self.r_out - self.r_in
    }

    /// `(θ(t), θ'(t), θ''(t))`.
    pub fn jet(&self, t: f64) -> (f64, f64, f64) {
        if t <= self.r_in {
            return (1.0, 0.0, 0.0);
        }
        if t >= self.r_out {
            return (0.0, 0.0, 0.0);
        }
        let w = self.width();
        let s = (self.r_out - t) / w;
        let (h, d1, d2) = h_jet(s);
        (h * h, -2.0 * h * d1 / w, 2.0 * (d1 * d1 + h * d2) / (w * w))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.jet(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.jet(t).1
    }
}

/// `θ(t)` for the given radii.
pub fn cutoff_eval(spec: &CutoffSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("cutoff argument {t} is negative")));
    }
    Ok(spec.eval(t))
}
