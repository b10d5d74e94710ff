//! Recursive extension over the cluster hierarchy.

use crate::alignment::{
    best_motion, certify_distortion, detect_blocks, procrustes_rotation, Correspondence,
};
use crate::clustering::{cluster, validate_epsilon};
use crate::error::{Error, Result};
use crate::geometry::{EuclideanMotion, Matrix, PointConfig, Vector};
use crate::smooth_maps::{Composition, Hyperplane, SmoothMap};

use super::glue::{glue, LocalPiece};
use super::separated::separated_piece;
use super::verdict::{check_extendability_with, ExtendabilityStatus};
use super::{finish, ExtensionConfig, ExtensionReport, LocalMotion, Piece};

/// Proper `ε`-distorted extension of `φ` with default thresholds.
pub fn extend(c: &Correspondence, epsilon: f64) -> Result<ExtensionReport> {
    extend_with(c, epsilon, &ExtensionConfig::default())
}

pub fn extend_with(
    c: &Correspondence,
    epsilon: f64,
    cfg: &ExtensionConfig,
) -> Result<ExtensionReport> {
    validate_epsilon(epsilon)?;
    check_size(c, cfg)?;
    if c.len() == 1 {
        return finish(single_point(c), c, epsilon, cfg);
    }
    let delta = certify_distortion(c)?.delta;
    let limit = cfg.delta_limit(epsilon);
    if !(delta <= limit) {
        return Err(Error::DeltaTooLarge {
            guard: "delta".into(),
            value: delta,
            limit,
        });
    }
    let eta = cfg.eta(epsilon);
    let scan = detect_blocks(c, eta)?;
    if let Some(b) = scan.negatives.first() {
        return Err(Error::NegativeBlockDetected {
            witness: Some(Box::new(b.clone())),
        });
    }
    let reference = best_motion(c)?.0.rotation().clone();
    let piece = build(c, epsilon, eta, &reference, cfg)?;
    finish(piece, c, epsilon, cfg)
}

/// Extension of either orientation: improper when only negative blocks
/// exist, through `Φ' ∘ F` with `F` the reflection in `x_1 = 0`.
pub fn extend_oriented(
    c: &Correspondence,
    epsilon: f64,
    cfg: &ExtensionConfig,
) -> Result<ExtensionReport> {
    let verdict = check_extendability_with(c, epsilon, cfg)?;
    match verdict.status {
        ExtendabilityStatus::ExtendableProper => extend_with(c, epsilon, cfg),
        ExtendabilityStatus::Obstructed => Err(Error::NegativeBlockDetected {
            witness: verdict.witness_negative.map(Box::new),
        }),
        ExtendabilityStatus::Inconclusive => Err(Error::DeltaTooLarge {
            guard: "delta".into(),
            value: verdict.delta,
            limit: verdict.delta_limit,
        }),
        ExtendabilityStatus::ExtendableImproper => {
            let d = c.dim();
            let mut e1 = Vector::zeros(d);
            e1[0] = 1.0;
            let h = Hyperplane::new(e1, 0.0)?;
            let f = h.to_motion();
            let flipped = PointConfig::new(c.source().points().iter().map(|z| f.apply(z)).collect())?;
            let inner = extend_with(&Correspondence::new(flipped, c.target().clone())?, epsilon, cfg)?;
            let piece = Piece {
                map: SmoothMap::Composition(Composition::new(vec![
                    SmoothMap::Reflection(h),
                    inner.map,
                ])?),
                far_motion: inner.far_motion.compose(&f),
                local_motions: inner
                    .local_motions
                    .into_iter()
                    .map(|lm| LocalMotion {
                        center: f.apply(&lm.center),
                        motion: lm.motion.compose(&f),
                        radius: lm.radius,
                    })
                    .collect(),
                depth: inner.recursion_depth,
            };
            finish(piece, c, epsilon, cfg)
        }
    }
}

fn check_size(c: &Correspondence, cfg: &ExtensionConfig) -> Result<()> {
    if c.is_empty() || c.len() > cfg.max_points {
        return Err(Error::InvalidInput(format!(
            "need between 1 and {} points, have {}",
            cfg.max_points,
            c.len()
        )));
    }
    Ok(())
}

fn single_point(c: &Correspondence) -> Piece {
    let z = c.source().point(0);
    let a = EuclideanMotion::translation_by(c.target().point(0) - z);
    Piece {
        map: SmoothMap::Motion(a.clone()),
        far_motion: a.clone(),
        local_motions: vec![LocalMotion {
            center: z.clone(),
            motion: a,
            radius: f64::MAX,
        }],
        depth: 1,
    }
}

fn build(
    c: &Correspondence,
    epsilon: f64,
    eta: f64,
    reference: &Matrix,
    cfg: &ExtensionConfig,
) -> Result<Piece> {
    let e = c.source();
    let clustering = cluster(e, epsilon)?;
    if clustering.clusters.iter().all(|m| m.len() == 1) {
        return separated_piece(c, e.min_separation(), epsilon, eta, reference, cfg);
    }
    let reps: Vec<usize> = clustering.clusters.iter().map(|m| m[0]).collect();
    let rep_c = c.subset(&reps)?;
    let tau_sep = rep_c.source().min_separation();

    let mut subs: Vec<Option<Piece>> = Vec::with_capacity(reps.len());
    for (i, members) in clustering.clusters.iter().enumerate() {
        subs.push(if members.len() == 1 {
            None
        } else {
            Some(build(&c.subset(members)?, epsilon, eta, reference, cfg).map_err(|err| err.at_path(i))?)
        });
    }
    // Rotations left free by the representatives are completed toward the
    // mean rotation of the clusters, which keeps the blends short.
    let sum = subs
        .iter()
        .flatten()
        .fold(Matrix::zeros(c.dim(), c.dim()), |acc, p| acc + p.far_motion.rotation());
    let rep_reference = procrustes_rotation(&sum, Some(1));
    let psi = separated_piece(&rep_c, tau_sep, epsilon, eta, &rep_reference, cfg)?;
    let a_star: Vec<EuclideanMotion> = psi.local_motions.iter().map(|l| l.motion.clone()).collect();

    let mut locals = Vec::with_capacity(reps.len());
    let mut local_motions = Vec::new();
    let mut depth = 1;
    for (i, sub) in subs.into_iter().enumerate() {
        match sub {
            None => {
                locals.push(LocalPiece {
                    map: SmoothMap::Motion(a_star[i].clone()),
                    motion: a_star[i].clone(),
                });
                local_motions.push(psi.local_motions[i].clone());
            }
            Some(sub) => {
                depth = depth.max(sub.depth + 1);
                local_motions.extend(sub.local_motions);
                locals.push(LocalPiece {
                    map: sub.map,
                    motion: sub.far_motion,
                });
            }
        }
    }
    let tau_glue = tau_sep.min((1.0 / epsilon).exp() * tau_sep / 100.0);
    let map = glue(&rep_c, tau_glue, epsilon, &locals, &psi.map, &a_star, cfg)?;
    Ok(Piece {
        map,
        far_motion: psi.far_motion,
        local_motions,
        depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::tests::random_rotation;
    use crate::verifier::{verify_motion_agreement, Region};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn single_point_is_a_translation() {
        let c = Correspondence::from_rows(&[vec![1., 2.]], &[vec![3., 5.]]).unwrap();
        let r = extend(&c, 0.5).unwrap();
        assert_eq!(r.map.eval(&v(&[0., 0.])).unwrap(), v(&[2., 3.]));
        assert_eq!(r.measured_distortion, 0.0);
    }

    #[test]
    fn nested_clusters_recurse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = 1e-6;
        let base = [v(&[0., 0., 0.]), v(&[1., 0., 0.]), v(&[0., 1., 0.5])];
        let mut pts = Vec::new();
        for off in [v(&[0., 0., 0.]), v(&[10., 3., -2.])] {
            for b in &base {
                pts.push(&off + b * s);
            }
        }
        let src = PointConfig::new(pts).unwrap();
        let r = random_rotation(&mut rng, 3, true);
        let a = EuclideanMotion::new(r, v(&[0.5, 0., 1.])).unwrap();
        let c = Correspondence::from_map(src, |x| {
            a.apply(x) + Vector::from_fn(3, |_, _| rng.random_range(-1e-13..1e-13))
        })
        .unwrap();
        let eps = 0.5;
        let rep = extend(&c, eps).unwrap();
        assert!(rep.recursion_depth >= 2);
        assert!(rep.interpolation_residual < 1e-12);
        assert_eq!(rep.orientation, 1);
        assert!(rep.distortion.within_budget, "{}", rep.measured_distortion);
        let far = Region::Shell {
            center: c.source().centroid(),
            inner: rep.far_radius,
            outer: 10.0 * rep.far_radius,
        };
        let gap = verify_motion_agreement(&rep.map, &far, &rep.far_motion, 200, 1).unwrap();
        assert!(gap < 1e-9 * rep.far_radius);
    }

    #[test]
    fn reflected_tetrahedron_is_improper_only() {
        let src = PointConfig::new(vec![
            v(&[0., 0., 0.]),
            v(&[1., 0., 0.]),
            v(&[0., 1., 0.]),
            v(&[0., 0., 1.]),
        ])
        .unwrap();
        let c = Correspondence::from_map(src, |x| v(&[x[0], x[1], -x[2]])).unwrap();
        assert!(matches!(
            extend(&c, 0.5),
            Err(Error::NegativeBlockDetected { .. })
        ));
        let r = extend_oriented(&c, 0.5, &ExtensionConfig::default()).unwrap();
        assert_eq!(r.orientation, -1);
        assert!(r.interpolation_residual < 1e-12);
        assert!(r.distortion.within_budget);
    }

    #[test]
    fn delta_guard() {
        let c = Correspondence::from_rows(
            &[vec![0., 0.], vec![1., 0.]],
            &[vec![0., 0.], vec![1.5, 0.]],
        )
        .unwrap();
        let err = extend(&c, 0.5).unwrap_err();
        assert!(matches!(err, Error::DeltaTooLarge { ref guard, .. } if guard == "delta"));
    }

    #[test]
    fn too_many_points() {
        let rows: Vec<Vec<f64>> = (0..33).map(|i| vec![i as f64, 0.]).collect();
        let c = Correspondence::from_rows(&rows, &rows).unwrap();
        assert!(matches!(extend(&c, 0.5), Err(Error::InvalidInput(_))));
    }
}
