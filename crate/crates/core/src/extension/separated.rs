//! Extension of correspondences whose points are well separated: a best
//! rigid motion corrected by small pinned slides.

use crate::alignment::{
    best_motion_with_reference, best_proper_motion_with_reference, detect_blocks, Block,
    Correspondence,
};
use crate::clustering::validate_epsilon;
use crate::error::{Error, Result};
use crate::geometry::{max_simplex_volume, EuclideanMotion, Matrix, Vector};
use crate::smooth_maps::{make_slide, Composition, SmoothMap};

use super::reflection::fix_set_scaled;
use super::{finish, ExtensionConfig, ExtensionReport, LocalMotion, Piece};

/// Extends `φ` on a `τ`-separated set and verifies the result.
pub fn extend_separated(
    c: &Correspondence,
    tau: f64,
    epsilon: f64,
    eta: f64,
) -> Result<ExtensionReport> {
    extend_separated_with(c, tau, epsilon, eta, &ExtensionConfig::default())
}

pub fn extend_separated_with(
    c: &Correspondence,
    tau: f64,
    epsilon: f64,
    eta: f64,
    cfg: &ExtensionConfig,
) -> Result<ExtensionReport> {
    let d = c.dim();
    let piece = separated_piece(c, tau, epsilon, eta, &Matrix::identity(d, d), cfg)?;
    finish(piece, c, epsilon, cfg)
}

pub(crate) fn separated_piece(
    c: &Correspondence,
    tau: f64,
    epsilon: f64,
    eta: f64,
    reference: &Matrix,
    cfg: &ExtensionConfig,
) -> Result<Piece> {
    validate_epsilon(epsilon)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} outside (0, 1)")));
    }
    let e = c.source();
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be positive")));
    }
    if e.len() > 1 && e.min_separation() < tau * (1.0 - 1e-12) {
        return Err(Error::PreconditionViolated(format!(
            "points must be {tau:e}-separated, minimum separation is {:e}",
            e.min_separation()
        )));
    }
    let scan = detect_blocks(c, eta)?;
    if let Some(b) = scan.negatives.first() {
        return Err(Error::NegativeBlockDetected {
            witness: Some(Box::new(b.clone())),
        });
    }

    let guard = cfg.residual_guard * epsilon * tau;
    let max_gap = |a: &EuclideanMotion| {
        e.points()
            .iter()
            .zip(c.target().points())
            .map(|(z, y)| (y - a.apply(z)).norm())
            .fold(0.0, f64::max)
    };
    // The proper fit is used whenever it passes the guard, even if the
    // improper one is marginally closer.
    let (proper, _) = best_proper_motion_with_reference(c, reference)?;
    let (best, _) = best_motion_with_reference(c, reference)?;
    let (a, fix) = if max_gap(&proper) <= guard {
        (proper, None)
    } else if best.is_proper() {
        return Err(Error::DeltaTooLarge {
            guard: "residual".into(),
            value: max_gap(&best),
            limit: guard,
        });
    } else {
        let d = e.dim();
        let vd = if e.len() > d {
            max_simplex_volume(e, d)?.0
        } else {
            0.0
        };
        if vd > (eta * e.diam()).powi(d as i32) {
            let (_, s) = max_simplex_volume(e, d)?;
            let indices = s
                .vertices()
                .iter()
                .map(|w| e.points().iter().position(|p| p == w).unwrap_or(0))
                .collect();
            return Err(Error::NegativeBlockDetected {
                witness: Some(Box::new(Block {
                    indices,
                    volume: vd,
                    diam: s.diam(),
                    eta_level: eta,
                    sign: -1,
                })),
            });
        }
        if max_gap(&best) > guard {
            return Err(Error::DeltaTooLarge {
                guard: "residual".into(),
                value: max_gap(&best),
                limit: guard,
            });
        }
        (best, Some(fix_set_scaled(e, tau, epsilon, eta)?))
    };

    let pins: Vec<(Vector, Vector)> = e
        .points()
        .iter()
        .zip(c.target().points())
        .map(|(z, y)| {
            let az = a.apply(z);
            let dz = y - &az;
            (az, dz)
        })
        .collect();
    let displacements: Vec<Vector> = pins.iter().map(|p| p.1.clone()).collect();
    let slide = make_slide(e.dim(), pins, tau / 100.0, tau / 50.0)?;

    // Near z the fix-up map is the rigid ρ followed by the translation
    // z - ρ(z); far away it is ρ alone.
    let (pre_far, pre_local): (EuclideanMotion, Vec<EuclideanMotion>) = match &fix {
        None => {
            let id = EuclideanMotion::identity(e.dim());
            (id.clone(), vec![id; e.len()])
        }
        Some(SmoothMap::Composition(comp)) => {
            let SmoothMap::Reflection(h) = &comp.maps()[0] else {
                unreachable!("fix-up map starts with a reflection")
            };
            let rho = h.to_motion();
            let locals = e
                .points()
                .iter()
                .map(|z| EuclideanMotion::translation_by(z - h.reflect(z)).compose(&rho))
                .collect();
            (rho, locals)
        }
        Some(_) => unreachable!("fix-up map is a composition"),
    };
    let local_motions = e
        .points()
        .iter()
        .zip(&displacements)
        .zip(&pre_local)
        .map(|((z, dz), pre)| LocalMotion {
            center: z.clone(),
            motion: EuclideanMotion::translation_by(dz.clone())
                .compose(&a)
                .compose(pre),
            radius: tau / 100.0,
        })
        .collect();
    let far_motion = a.compose(&pre_far);

    let mut maps = Vec::new();
    maps.extend(fix);
    maps.push(SmoothMap::Motion(a));
    maps.push(slide);
    Ok(Piece {
        map: SmoothMap::Composition(Composition::new(maps)?),
        far_motion,
        local_motions,
        depth: 1,
    })
}
