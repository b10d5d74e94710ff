//! Approximation of a map by a single Euclidean motion on a ball.

use crate::error::{Error, Result};
use crate::geometry::{gram_schmidt, EuclideanMotion, Matrix, Vector};
use crate::smooth_maps::SmoothMap;
use crate::verifier::{Region, SamplingDomain, DEFAULT_SEED};

pub fn approximate_by_motion(m: &SmoothMap, z: &Vector, r: f64) -> Result<(EuclideanMotion, f64)> {
    approximate_by_motion_with(m, z, r, 1000, DEFAULT_SEED)
}

/// Motion through `m(z)` whose linear part orthonormalises the secants
/// `(m(z + r e_i) - m(z)) / r`, with its sup error over samples of `B(z, r)`.
pub fn approximate_by_motion_with(
    m: &SmoothMap,
    z: &Vector,
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(EuclideanMotion, f64)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius {r} must be positive")));
    }
    let d = m.dim();
    let mz = m.eval(z)?;
    let secants: Vec<Vector> = (0..d)
        .map(|i| {
            let mut x = z.clone();
            x[i] += r;
            (m.apply(&x) - &mz) / r
        })
        .collect();
    let frame = gram_schmidt(&secants).map_err(|_| {
        Error::DistortionTooLarge("image frame is rank-deficient".into())
    })?;
    let q = Matrix::from_columns(&frame);
    let a = EuclideanMotion::new(q.clone(), &mz - &q * z)?;
    if a.orientation() != m.orientation()? {
        return Err(Error::InternalConsistency(
            "approximating motion and map have different orientations".into(),
        ));
    }
    let ball = SamplingDomain::new(vec![Region::Ball {
        center: z.clone(),
        radius: r,
    }])?;
    let err = ball
        .samples(n_samples, seed)
        .iter()
        .map(|s| (m.apply(&s.x) - a.apply(&s.x)).norm())
        .fold(0.0, f64::max);
    Ok((a, err))
}
