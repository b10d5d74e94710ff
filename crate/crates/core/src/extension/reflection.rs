//! Approximate reflections of nearly flat sets and the improper fix-up map.

use serde::{Deserialize, Serialize};

use crate::clustering::validate_epsilon;
use crate::error::{Error, Result};
use crate::geometry::{
    gram_schmidt, max_simplex_volume, max_volume_or_zero, EuclideanMotion, Matrix, PointConfig,
    Vector,
};
use crate::smooth_maps::{make_slide, Composition, Hyperplane, SmoothMap};

/// Fix-up guard: `η < FIX_GUARD τ ε`.
pub const FIX_GUARD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximateReflection {
    pub motion: EuclideanMotion,
    pub hyperplane: Hyperplane,
    /// `max_z |ρ(z) - z|`.
    pub residual: f64,
    /// `residual / η`.
    pub constant: f64,
}

/// Reflection `ρ` with `|ρ(z) - z| = O(η)` on a set of diameter 1 whose
/// `D`-volume is at most `η^D`.
pub fn approximate_reflection(e: &PointConfig, eta: f64) -> Result<ApproximateReflection> {
    if (e.diam() - 1.0).abs() > 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "set must have diameter 1, has {}",
            e.diam()
        )));
    }
    scaled_reflection(e, eta)
}

/// Same construction for any diameter, with volumes measured relative to
/// `diam(E)`.
pub(crate) fn scaled_reflection(e: &PointConfig, eta: f64) -> Result<ApproximateReflection> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} outside (0, 1)")));
    }
    let d = e.dim();
    let diam = e.diam();
    if e.len() < 2 || diam == 0.0 {
        return Err(Error::InvalidInput(
            "approximate reflection needs two distinct points".into(),
        ));
    }
    let level = |l: usize| (eta * diam).powi(l as i32);
    let vd = max_volume_or_zero(e, d);
    if vd > level(d) {
        return Err(Error::PreconditionViolated(format!(
            "D-volume {vd:e} exceeds eta^D diam^D = {:e}",
            level(d)
        )));
    }
    // Largest l with V_{l-1} above its level; V_1 = diam always is.
    let mut l = 2;
    while l <= d && max_volume_or_zero(e, l) > level(l) {
        l += 1;
    }
    let (_, simplex) = max_simplex_volume(e, l - 1)?;
    let w0 = simplex.vertices()[0].clone();
    let span: Vec<Vector> = simplex.vertices()[1..].iter().map(|w| w - &w0).collect();
    let span = gram_schmidt(&span)?;
    let normal = complement_normal(e, &w0, &span);
    let hyperplane = Hyperplane::through(&w0, normal)?;
    let motion = hyperplane.to_motion();
    let residual = e
        .points()
        .iter()
        .map(|z| (hyperplane.reflect(z) - z).norm())
        .fold(0.0, f64::max);
    Ok(ApproximateReflection {
        motion,
        hyperplane,
        residual,
        constant: residual / (eta * diam),
    })
}

/// Unit normal orthogonal to `span` along which `E - w0` varies least.
fn complement_normal(e: &PointConfig, w0: &Vector, span: &[Vector]) -> Vector {
    let d = e.dim();
    let mut basis = span.to_vec();
    for i in 0..d {
        let mut c = Vector::zeros(d);
        c[i] = 1.0;
        if let Ok(b) = gram_schmidt(&[basis.clone(), vec![c]].concat()) {
            basis = b;
        }
        if basis.len() == d {
            break;
        }
    }
    let comp = &basis[span.len()..];
    let k = comp.len();
    let mut cov = Matrix::zeros(k, k);
    for z in e.points() {
        let q = z - w0;
        let coords = Vector::from_iterator(k, comp.iter().map(|b| b.dot(&q)));
        cov += &coords * coords.transpose();
    }
    let eig = cov.symmetric_eigen();
    let j = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .expect("non-empty complement");
    let w = eig.eigenvectors.column(j);
    comp.iter()
        .zip(w.iter())
        .fold(Vector::zeros(d), |acc, (b, &c)| acc + b * c)
}

/// Improper map fixing a flat set of diameter 1 pointwise: a reflection
/// followed by a slide moving each `ρ(z)` back to `z`.
pub fn fix_set_improperly(e: &PointConfig, tau: f64, epsilon: f64, eta: f64) -> Result<SmoothMap> {
    if (e.diam() - 1.0).abs() > 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "set must have diameter 1, has {}",
            e.diam()
        )));
    }
    fix_set_scaled(e, tau, epsilon, eta)
}

/// Fix-up for any diameter; `tau` is in the units of `E`.
pub(crate) fn fix_set_scaled(e: &PointConfig, tau: f64, epsilon: f64, eta: f64) -> Result<SmoothMap> {
    validate_epsilon(epsilon)?;
    let diam = e.diam();
    if !(tau > 0.0) || e.min_separation() < tau * (1.0 - 1e-12) {
        return Err(Error::PreconditionViolated(format!(
            "points must be {tau:e}-separated, minimum separation is {:e}",
            e.min_separation()
        )));
    }
    let rel_tau = tau / diam;
    if !(eta < FIX_GUARD * rel_tau * epsilon) {
        return Err(Error::PreconditionViolated(format!(
            "eta = {eta:e} must be below {FIX_GUARD} tau epsilon = {:e}",
            FIX_GUARD * rel_tau * epsilon
        )));
    }
    let rho = scaled_reflection(e, eta)?;
    let pins: Vec<(Vector, Vector)> = e
        .points()
        .iter()
        .map(|z| {
            let rz = rho.hyperplane.reflect(z);
            let dz = z - &rz;
            (rz, dz)
        })
        .collect();
    let slide = make_slide(e.dim(), pins, tau / 10.0, tau / 5.0)?;
    Ok(SmoothMap::Composition(Composition::new(vec![
        SmoothMap::Reflection(rho.hyperplane),
        slide,
    ])?))
}
