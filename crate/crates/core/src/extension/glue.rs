//! Gluing local extensions near cluster representatives into a global one.

use crate::alignment::Correspondence;
use crate::error::{Error, Result};
use crate::geometry::{EuclideanMotion, Vector};
use crate::smooth_maps::{glue_radius, motion_blend, GlueNode, SmoothMap};
use crate::verifier::{Region, SamplingDomain};

use super::ExtensionConfig;

/// The extension `Φ_z` near a representative and the motion `A_z` it agrees
/// with outside `B_1(z)`.
#[derive(Debug, Clone)]
pub struct LocalPiece {
    pub map: SmoothMap,
    pub motion: EuclideanMotion,
}

fn fail(region: &str, detail: String) -> Error {
    Error::GluePrecondition {
        region: region.into(),
        detail,
    }
}

fn close(a: &Vector, b: &Vector, x: &Vector) -> bool {
    (a - b).norm() <= 1e-10 * (1.0 + x.norm().max(a.norm()))
}

/// Glues `Φ_z` on `B_2(z)` to the global map `Ψ` outside `B_3(z)` through a
/// motion blend from `A_z` to `A*_z`. `global_motions[i]` is the motion `Ψ`
/// agrees with on `B_4(z_i)`.
pub fn glue(
    c: &Correspondence,
    tau: f64,
    epsilon: f64,
    locals: &[LocalPiece],
    global: &SmoothMap,
    global_motions: &[EuclideanMotion],
    cfg: &ExtensionConfig,
) -> Result<SmoothMap> {
    let e = c.source();
    let k = e.len();
    if locals.len() != k || global_motions.len() != k {
        return Err(Error::InvalidInput(
            "glue needs one local piece and one global motion per representative".into(),
        ));
    }
    if k > 1 && e.min_separation() < tau * (1.0 - 1e-12) {
        return Err(fail(
            "separation",
            format!(
                "representatives are {:e} apart, below tau = {tau:e}",
                e.min_separation()
            ),
        ));
    }
    let [r1, r2, r3, r4] = [1, 2, 3, 4].map(|i| glue_radius(i, epsilon, tau));
    if global.orientation()? != 1 {
        return Err(fail("orientation", "global map is not proper".into()));
    }
    let n = cfg.glue_check_samples;
    let mut blends = Vec::with_capacity(k);
    for (i, ((z, piece), a_star)) in e
        .points()
        .iter()
        .zip(locals)
        .zip(global_motions)
        .enumerate()
    {
        let seed = cfg.seed.wrapping_add(i as u64);
        if !piece.motion.is_proper() || !a_star.is_proper() || piece.map.orientation()? != 1 {
            return Err(fail("orientation", format!("improper piece at representative {i}")));
        }
        let phi_z = &c.target().points()[i];
        let at_z = piece.map.eval(z)?;
        if (&at_z - phi_z).norm() > 1e-9 * (1.0 + phi_z.norm()) {
            return Err(fail(
                "interpolation",
                format!("local map misses phi at representative {i}"),
            ));
        }
        let outside = Region::Shell {
            center: z.clone(),
            inner: r1,
            outer: r3,
        };
        for s in SamplingDomain::new(vec![outside])?.samples(n, seed) {
            if !close(&piece.map.apply(&s.x), &piece.motion.apply(&s.x), &s.x) {
                return Err(fail(
                    "local",
                    format!("local map differs from its motion outside B1 at representative {i}"),
                ));
            }
        }
        let ball = Region::Ball {
            center: z.clone(),
            radius: r4,
        };
        for s in SamplingDomain::new(vec![ball])?.samples(n, seed) {
            if !close(&global.apply(&s.x), &a_star.apply(&s.x), &s.x) {
                return Err(fail(
                    "global",
                    format!("global map differs from its motion on B4 at representative {i}"),
                ));
            }
        }
        let a_z = piece.motion.apply(z);
        let gap = (&a_z - a_star.apply(z)).norm();
        let limit =
            cfg.gap_constant * epsilon * (-4.0 / epsilon).exp() * tau + 1e-12 * (1.0 + a_z.norm());
        if gap > limit {
            return Err(fail(
                "gap",
                format!("|A_z(z) - A*_z(z)| = {gap:e} exceeds {limit:e} at representative {i}"),
            ));
        }
        let blend = motion_blend(&piece.motion, a_star, z, r3, epsilon)
            .map_err(|err| fail("blend", format!("representative {i}: {err}")))?;
        // Boundary consistency on the spheres |x - z| = r2 and r3.
        let sphere = Region::Shell {
            center: z.clone(),
            inner: 0.5 * r2,
            outer: r2,
        };
        for s in SamplingDomain::new(vec![sphere])?.samples(n.min(32), seed) {
            let u = &s.x - z;
            let u = u.normalize();
            let x2 = z + &u * r2;
            if !close(&piece.map.apply(&x2), &blend.apply(&x2), &x2) {
                return Err(fail("boundary", format!("mismatch at r2 around representative {i}")));
            }
            let x3 = z + &u * r3;
            if !close(&blend.apply(&x3), &global.apply(&x3), &x3) {
                return Err(fail("boundary", format!("mismatch at r3 around representative {i}")));
            }
        }
        blends.push(blend);
    }
    let node = GlueNode::new(
        e.points().to_vec(),
        tau,
        epsilon,
        locals.iter().map(|p| p.map.clone()).collect(),
        blends,
        global.clone(),
    )?;
    Ok(SmoothMap::Glue(node))
}
