//! Acceptance suite: one pass/fail line per criterion.

use std::f64::consts::FRAC_PI_2;
use std::process::Command;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isoext::alignment::{
    affine_from_simplex, best_motion, certify_distortion, exact_motion, Correspondence,
};
use isoext::clustering::{cluster, Clustering};
use isoext::extension::{
    approximate_by_motion, approximate_reflection, check_extendability_by_subsets,
    check_extendability_with, extend_oriented, extend_with, fix_set_improperly,
    ExtendabilityStatus, ExtensionConfig, ExtensionReport,
};
use isoext::geometry::{max_simplex_volume, simplex_volume, EuclideanMotion, Matrix, PointConfig, Simplex, Vector};
use isoext::smooth_maps::{
    make_slide, motion_blend, AngleProfile, Composition, CutoffSpec, Hyperplane, SlowTwist,
    SmoothMap,
};
use isoext::verifier::{verify_distortion, verify_motion_agreement, Region, SamplingDomain};

/// Frozen `epsilon_measured / ε` of the quarter-turn blend.
const BLEND_BASELINE: f64 = 1.693082;
/// Frozen `epsilon_measured / ε` of the flat-case extensions.
const FLAT_BASELINE: f64 = 0.003814;

type Outcome = Result<String, String>;

fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

fn rotation(rng: &mut ChaCha8Rng, d: usize, proper: bool) -> Matrix {
    let m = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let mut q = m.qr().q();
    if (q.determinant() > 0.0) != proper {
        q.column_mut(0).neg_mut();
    }
    q
}

fn motion(rng: &mut ChaCha8Rng, d: usize, proper: bool) -> EuclideanMotion {
    let t = Vector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
    EuclideanMotion::new(rotation(rng, d, proper), t).unwrap()
}

fn point(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vector {
    Vector::from_fn(d, |_, _| rng.random_range(-r..r))
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    loop {
        let p = point(rng, d, 1.0);
        if p.norm() > 0.1 {
            return p.normalize();
        }
    }
}

/// `n` points in `[-1, 1]^d` at mutual distance at least `sep`.
fn separated(rng: &mut ChaCha8Rng, d: usize, n: usize, sep: f64) -> PointConfig {
    let mut pts: Vec<Vector> = Vec::new();
    while pts.len() < n {
        let p = point(rng, d, 1.0);
        if pts.iter().all(|q| (q - &p).norm() >= sep) {
            pts.push(p);
        }
    }
    PointConfig::new(pts).unwrap()
}

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn c1_procrustes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_res, mut worst_rot): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let e = PointConfig::new((0..10).map(|_| point(&mut rng, 3, 2.0)).collect()).unwrap();
        let a = motion(&mut rng, 3, true);
        let c = Correspondence::from_map(e, |x| a.apply(x)).unwrap();
        let (m, res) = best_motion(&c).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(res / c.source().diam());
        worst_rot = worst_rot.max((m.rotation() - a.rotation()).norm());
    }
    check(worst_res <= 1e-9, format!("residual/diam {worst_res:e}"))?;
    check(worst_rot <= 1e-8, format!("rotation error {worst_rot:e}"))?;
    Ok(format!("max residual/diam {worst_res:.2e}, max rotation error {worst_rot:.2e}"))
}

fn c2_distance_gap() -> Outcome {
    let pair = |gap: f64| {
        Correspondence::from_rows(&[vec![0., 0.], vec![1., 0.]], &[vec![2., 1.], vec![2., 2. + gap]])
            .unwrap()
    };
    check(exact_motion(&pair(1e-3), false).is_err(), "mismatch 1e-3 accepted".into())?;
    let m = exact_motion(&pair(1e-12), false).map_err(|e| format!("mismatch 1e-12 rejected: {e}"))?;
    let y = m.apply(&v(&[1., 0.]));
    check((y - v(&[2., 2.])).norm() < 1e-9, "wrong motion at 1e-12".into())?;
    Ok("rejects 1e-3, accepts 1e-12".into())
}

fn c3_cutoff() -> Outcome {
    let spec = CutoffSpec::new(0.5, 2.0).map_err(|e| e.to_string())?;
    let n = 10_000;
    let mut prev = f64::INFINITY;
    let (mut d1, mut d2): (f64, f64) = (0.0, 0.0);
    for i in 0..=n {
        let t = 3.0 * i as f64 / n as f64;
        let (th, dth, ddth) = spec.jet(t);
        check(
            th.is_finite() && dth.is_finite() && ddth.is_finite(),
            format!("non-finite jet at {t}"),
        )?;
        if t <= 0.5 {
            check(th == 1.0, format!("theta({t}) = {th} inside"))?;
        }
        if t >= 2.0 {
            check(th == 0.0, format!("theta({t}) = {th} outside"))?;
        }
        check(th <= prev, format!("not monotone at {t}"))?;
        prev = th;
        d1 = d1.max(dth.abs());
        d2 = d2.max(ddth.abs());
    }
    // Finite differences agree with the analytic derivative.
    let h = 1e-6;
    let mut fd_err: f64 = 0.0;
    for i in 1..1000 {
        let t = 0.5 + 1.5 * i as f64 / 1000.0;
        let fd = (spec.eval(t + h) - spec.eval(t - h)) / (2.0 * h);
        fd_err = fd_err.max((fd - spec.derivative(t)).abs());
    }
    check(fd_err < 1e-6, format!("finite-difference mismatch {fd_err:e}"))?;
    Ok(format!("max |θ'| {d1:.3}, max |θ''| {d2:.3}, fd error {fd_err:.1e}"))
}

fn c4_blend() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let eps = 0.1;
    let r = 1.5;
    let a = motion(&mut rng, 3, true);
    let x0 = v(&[0.3, -0.4, 0.2]);
    let turn = {
        let mut m = Matrix::identity(3, 3);
        m[(0, 0)] = 0.0;
        m[(0, 1)] = -1.0;
        m[(1, 0)] = 1.0;
        m[(1, 1)] = 0.0;
        m
    };
    let rot = &turn * a.rotation();
    let gap = unit(&mut rng, 3) * (0.1 * eps * r);
    let b = EuclideanMotion::new(rot.clone(), a.apply(&x0) + gap - &rot * &x0).unwrap();
    let angle = ((b.rotation() * a.rotation().transpose()).trace() - 1.0) / 2.0;
    check((angle.acos() - FRAC_PI_2).abs() < 1e-12, "rotation gap is not π/2".into())?;
    let m = motion_blend(&a, &b, &x0, r, eps).map_err(|e| e.to_string())?;
    let SmoothMap::MotionBlend(node) = &m else {
        return Err("expected a blend node".into());
    };
    let r_in = node.inner_radius();
    let (mut inner, mut outer): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let u = unit(&mut rng, 3);
        let xi = &x0 + &u * (r_in * rng.random_range(0.0..1.0));
        let xo = &x0 + &u * (r * rng.random_range(1.0..100.0));
        inner = inner.max((m.apply(&xi) - a.apply(&xi)).norm());
        outer = outer.max((m.apply(&xo) - b.apply(&xo)).norm() / (1.0 + xo.norm()));
    }
    check(inner <= 1e-12, format!("inside error {inner:e}"))?;
    check(outer <= 1e-12, format!("outside error {outer:e}"))?;
    let dom = SamplingDomain::for_map(&m, vec![]).map_err(|e| e.to_string())?;
    let rep = verify_distortion(&m, &dom, eps, 4000, 4).map_err(|e| e.to_string())?;
    let constant = rep.epsilon_measured / eps;
    check(rep.epsilon_measured <= 1.0, format!("measured {}", rep.epsilon_measured))?;
    check(
        constant <= 1.25 * BLEND_BASELINE,
        format!("constant {constant:.4} regressed past 1.25 x {BLEND_BASELINE}"),
    )?;
    Ok(format!(
        "endpoint errors {inner:.1e}/{outer:.1e}, measured {:.4} (constant {constant:.6}, baseline {BLEND_BASELINE})",
        rep.epsilon_measured
    ))
}

/// Brute-force check of the clustering contract, independent of the library.
fn clustering_holds(e: &PointConfig, c: &Clustering, eps: f64) -> Result<(), String> {
    let k = e.len();
    let mut seen = vec![0usize; k];
    for m in &c.clusters {
        for &i in m {
            if i >= k {
                return Err(format!("index {i} out of range"));
            }
            seen[i] += 1;
        }
    }
    if seen.iter().any(|&s| s != 1) {
        return Err("not a partition".into());
    }
    let owner = |i: usize| c.clusters.iter().position(|m| m.contains(&i)).unwrap();
    let small = (-5.0 / eps).exp() * c.tau;
    let diam = e.diam();
    for (i, j) in (0..k).tuple_combinations() {
        let d = (e.point(i) - e.point(j)).norm();
        if owner(i) == owner(j) && d > small * (1.0 + 1e-12) {
            return Err(format!("cluster diameter {d:e} > {small:e}"));
        }
        if owner(i) != owner(j) && d < c.tau * (1.0 - 1e-12) {
            return Err(format!("separation {d:e} < tau {:e}", c.tau));
        }
    }
    let pairs = (k * (k - 1) / 2) as f64;
    let lo = (-(5.0 * pairs + 1.0) / eps).exp() * diam;
    let hi = (-1.0 / eps).exp() * diam;
    if !(c.tau >= lo * (1.0 - 1e-12) && c.tau <= hi * (1.0 + 1e-12)) {
        return Err(format!("tau {:e} outside [{lo:e}, {hi:e}]", c.tau));
    }
    if c.clusters.iter().any(|m| m.len() == k) {
        return Err("one cluster holds all of E".into());
    }
    Ok(())
}

fn c5_clustering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut count = 0;
    let mut max_rung = 0;
    for trial in 0..500 {
        let d = 2 + trial % 2;
        let n = rng.random_range(2..=8);
        let eps = rng.random_range(0.3..0.95);
        let pts: Vec<Vector> = if trial % 3 == 0 {
            // Near-band fixture: pairs placed just around a band edge.
            let m = rng.random_range(0..3) as f64;
            let edge = if rng.random_bool(0.5) {
                (-(5.0 * m + 1.0) / eps).exp()
            } else {
                (-(5.0 * m + 6.0) / eps).exp()
            };
            let mut pts = vec![Vector::zeros(d)];
            let mut far = Vector::zeros(d);
            far[0] = 1.0;
            pts.push(far);
            while pts.len() < n {
                let base = pts[rng.random_range(0..pts.len())].clone();
                let f = edge * (1.0 + rng.random_range(-1e-9..1e-9));
                pts.push(base + unit(&mut rng, d) * f);
            }
            pts
        } else {
            (0..n)
                .map(|_| point(&mut rng, d, 1.0) * 10f64.powi(rng.random_range(-10..=0)))
                .collect()
        };
        let e = match PointConfig::new(pts) {
            Ok(e) if !e.has_duplicates() && e.diam() > 0.0 => e,
            _ => continue,
        };
        let c = match cluster(&e, eps) {
            Ok(c) => c,
            Err(err) if err.to_string().contains("underflow") => continue,
            Err(err) => return Err(format!("trial {trial}: {err}")),
        };
        clustering_holds(&e, &c, eps).map_err(|m| format!("trial {trial}: {m}"))?;
        max_rung = max_rung.max(c.rung);
        count += 1;
    }
    check(count >= 450, format!("only {count} sets clustered"))?;
    Ok(format!("{count} sets pass the brute-force checker (max rung {max_rung})"))
}

/// Diameter-1 set with offsets of at most `thickness` from a random hyperplane.
fn near_hyperplane(rng: &mut ChaCha8Rng, d: usize, n: usize, thickness: f64) -> PointConfig {
    let q = rotation(rng, d, true);
    let mut flat: Vec<Vector> = Vec::new();
    while flat.len() < n {
        let mut p = point(rng, d, 1.0);
        p[d - 1] = 0.0;
        if flat.iter().all(|f| (f - &p).norm() >= 0.3) {
            flat.push(p);
        }
    }
    let raw: Vec<Vector> = flat
        .into_iter()
        .map(|mut x| {
            x[d - 1] = rng.random_range(-thickness..thickness);
            &q * x
        })
        .collect();
    let e = PointConfig::new(raw).unwrap();
    let s = 1.0 / e.diam();
    PointConfig::new(e.points().iter().map(|p| p * s).collect()).unwrap()
}

fn c6_reflection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let eta = 1e-3;
    let mut worst: f64 = 0.0;
    for trial in 0..40 {
        let d = 2 + trial % 2;
        let e = near_hyperplane(&mut rng, d, 5, eta);
        // The smallest admissible level for this set.
        let vd = max_simplex_volume(&e, d).map_err(|e| e.to_string())?.0;
        let level = eta.max(vd.powf(1.0 / d as f64) * (1.0 + 1e-9));
        let r = approximate_reflection(&e, level).map_err(|e| format!("trial {trial}: {e}"))?;
        worst = worst.max(r.residual);
        check(r.residual <= 10.0 * eta, format!("trial {trial}: residual {:e}", r.residual))?;
    }
    let mut pin: f64 = 0.0;
    for trial in 0..20 {
        let d = 2 + trial % 2;
        let eps = 0.9;
        // Thin enough that V_D <= η^D with η below 0.01 τ ε.
        let e = near_hyperplane(&mut rng, d, 5, 0.1 * eta.powi(d as i32));
        let tau = e.min_separation();
        let m = fix_set_improperly(&e, tau, eps, eta).map_err(|e| format!("trial {trial}: {e}"))?;
        for z in e.points() {
            pin = pin.max((m.apply(z) - z).norm());
        }
        let o = m.orientation().map_err(|e| e.to_string())?;
        check(o == -1, format!("trial {trial}: orientation {o}"))?;
    }
    check(pin <= 1e-12, format!("pin error {pin:e}"))?;
    Ok(format!("max residual {worst:.2e} <= 10η = 1e-2, pin error {pin:.1e}, orientation -1"))
}

fn far_field_gap(rep: &ExtensionReport, e: &PointConfig) -> Result<f64, String> {
    let region = Region::Shell {
        center: e.centroid(),
        inner: 1e4 * e.diam(),
        outer: 1e6 * e.diam(),
    };
    verify_motion_agreement(&rep.map, &region, &rep.far_motion, 500, 3).map_err(|e| e.to_string())
}

fn item7_checks(rep: &ExtensionReport, e: &PointConfig) -> Result<(), String> {
    check(
        rep.interpolation_residual <= 1e-9,
        format!("interpolation residual {:e}", rep.interpolation_residual),
    )?;
    let far = far_field_gap(rep, e)?;
    check(far <= 1e-9, format!("far-field gap {far:e}"))?;
    check(rep.orientation == 1, format!("orientation {}", rep.orientation))?;
    check(
        rep.measured_distortion <= 2.0,
        format!("measured distortion {}", rep.measured_distortion),
    )
}

fn c7_flat_extension() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = 0.1;
    let cfg = ExtensionConfig::default();
    let mut worst: f64 = 0.0;
    for trial in 0..6 {
        let d = 2 + trial % 2;
        let e = separated(&mut rng, d, 6, 0.3);
        let tau = e.min_separation();
        let a = motion(&mut rng, d, true);
        let c = Correspondence::from_map(e.clone(), |x| a.apply(x) + unit(&mut rng, d) * (1e-6 * tau))
            .unwrap();
        let rep = extend_with(&c, eps, &cfg).map_err(|e| format!("trial {trial}: {e}"))?;
        item7_checks(&rep, &e).map_err(|m| format!("trial {trial}: {m}"))?;
        worst = worst.max(rep.measured_distortion);
    }
    let constant = worst / eps;
    check(
        constant <= 1.25 * FLAT_BASELINE,
        format!("constant {constant:.4} regressed past 1.25 x {FLAT_BASELINE}"),
    )?;
    Ok(format!("6 sets, max measured {worst:.3e} (constant {constant:.6}, baseline {FLAT_BASELINE})"))
}

fn c8_recursive_extension() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // Clusters of relative size 1e-6 only separate from the rest at
    // ε >= 6 / ln(1e6), so the recursive fixture runs at ε = 0.5.
    let eps = 0.5;
    let cfg = ExtensionConfig::default();
    let mut depth = usize::MAX;
    let mut worst: f64 = 0.0;
    for trial in 0..4 {
        let d = 2 + trial % 2;
        let s = 1e-6;
        let mut pts = Vec::new();
        for center in [Vector::zeros(d), unit(&mut rng, d) * 2.0] {
            let shape = separated(&mut rng, d, 3, 0.5);
            pts.extend(shape.points().iter().map(|p| &center + p * s));
        }
        let e = PointConfig::new(pts).unwrap();
        let tau = e.min_separation();
        let a = motion(&mut rng, d, true);
        let c = Correspondence::from_map(e.clone(), |x| a.apply(x) + unit(&mut rng, d) * (1e-6 * tau))
            .unwrap();
        let rep = extend_with(&c, eps, &cfg).map_err(|e| format!("trial {trial}: {e}"))?;
        item7_checks(&rep, &e).map_err(|m| format!("trial {trial}: {m}"))?;
        depth = depth.min(rep.recursion_depth);
        worst = worst.max(rep.measured_distortion);
    }
    check(depth >= 2, format!("recursion depth {depth}"))?;
    Ok(format!("ε = 0.5, min depth {depth}, max measured {worst:.3e}"))
}

/// Two unit simplices 1000 apart, the second reflected in a hyperplane that
/// contains the line through the centroids, plus two points on that line.
fn mixed_fixture() -> Correspondence {
    let simplex = [
        v(&[0., 0., 0.]),
        v(&[1., 0., 0.]),
        v(&[0., 1., 0.]),
        v(&[0., 0., 1.]),
    ];
    let shift = v(&[1000., 0., 0.]);
    let centroid = simplex.iter().fold(Vector::zeros(3), |a, p| a + p) / 4.0;
    // Hyperplane through both centroids with normal orthogonal to e1.
    let h = Hyperplane::through(&centroid, v(&[0., 1., -1.])).unwrap();
    let mut src: Vec<Vector> = simplex.to_vec();
    let mut dst: Vec<Vector> = simplex.to_vec();
    for p in &simplex {
        let q = p + &shift;
        dst.push(h.reflect(&q));
        src.push(q);
    }
    for t in [-700.0, 1900.0] {
        let w = &centroid + v(&[t, 0., 0.]);
        src.push(w.clone());
        dst.push(w);
    }
    Correspondence::from_points(src, dst).unwrap()
}

fn c9_obstruction() -> Outcome {
    let c = mixed_fixture();
    let eps = 0.5;
    let cfg = ExtensionConfig::default();
    let full = check_extendability_with(&c, eps, &cfg).map_err(|e| e.to_string())?;
    check(
        full.status == ExtendabilityStatus::Obstructed,
        format!("status {:?}", full.status),
    )?;
    check(
        full.witness_positive.is_some() && full.witness_negative.is_some(),
        "missing witness".into(),
    )?;
    let sub = check_extendability_by_subsets(&c, eps, &cfg).map_err(|e| e.to_string())?;
    check(
        sub.status == ExtendabilityStatus::Obstructed,
        format!("subset status {:?}", sub.status),
    )?;
    let idx = sub.subset.clone().unwrap_or_default();
    check(
        !idx.is_empty() && idx.len() <= 2 * c.dim() + 2,
        format!("flagged subset of size {}", idx.len()),
    )?;
    Ok(format!(
        "obstructed, witnesses {:?} / {:?}, subset of {} of {} points",
        full.witness_positive.unwrap().indices,
        full.witness_negative.unwrap().indices,
        idx.len(),
        c.len()
    ))
}

fn c10_small_sets() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = ExtensionConfig::default();
    let eps = 0.3;
    let mut runs = 0;
    let mut worst: f64 = 0.0;
    for trial in 0..16 {
        let d = 2 + trial % 2;
        let n = if trial % 4 < 2 { d + 1 } else { rng.random_range(1..=d) };
        let e = loop {
            let e = separated(&mut rng, d, n, 0.5);
            if n < d + 1 || simplex_volume(&Simplex::new(e.points().to_vec()).unwrap()) > 0.05 {
                break e;
            }
        };
        let proper = trial % 2 == 0;
        let a = motion(&mut rng, d, proper);
        let c = Correspondence::from_map(e, |x| a.apply(x)).unwrap();
        let rep = extend_oriented(&c, eps, &cfg).map_err(|e| format!("trial {trial}: {e}"))?;
        let expected = if n == d + 1 && !proper { -1 } else { 1 };
        check(
            rep.orientation == expected,
            format!("trial {trial}: orientation {} expected {expected}", rep.orientation),
        )?;
        check(
            rep.interpolation_residual <= 1e-12 * (1.0 + a.translation().norm()),
            format!("trial {trial}: residual {:e}", rep.interpolation_residual),
        )?;
        check(rep.distortion.within_budget, format!("trial {trial}: over budget"))?;
        worst = worst.max(rep.interpolation_residual);
        runs += 1;
    }
    Ok(format!("{runs} sets of both orientations, max residual {worst:.1e}"))
}

fn c11_local_motion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ratios = Vec::new();
    for eps in [0.02, 0.05, 0.1] {
        let mut err: f64 = 0.0;
        for d in [2, 3] {
            let twist = SlowTwist::new(
                vec![AngleProfile::LogRamp {
                    rate: eps,
                    inner: 1e-2,
                    outer: 1.0,
                }],
                rotation(&mut rng, d, true),
            )
            .map_err(|e| e.to_string())?;
            let m = SmoothMap::SlowTwist(twist);
            let (_, e) = approximate_by_motion(&m, &Vector::zeros(d), 1.0).map_err(|e| e.to_string())?;
            err = err.max(e);
        }
        ratios.push((eps, err / eps));
    }
    let c = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    check(c <= 20.0, format!("fitted constant {c}"))?;
    let spread = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min) / c;
    check(spread > 0.5, format!("error is not linear in ε: ratios {ratios:?}"))?;
    Ok(format!(
        "C' = {c:.3}; err/ε = {}",
        ratios.iter().map(|(e, r)| format!("{e}: {r:.3}")).join(", ")
    ))
}

fn c12_orientation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut disagreements = 0;
    for trial in 0..100 {
        let d = 2 + trial % 2;
        let xs = loop {
            let xs: Vec<Vector> = (0..=d).map(|_| point(&mut rng, d, 1.0)).collect();
            let s = Simplex::new(xs.clone()).unwrap();
            if simplex_volume(&s) > 0.05 * s.diam().powi(d as i32) {
                break xs;
            }
        };
        let base = match trial % 4 {
            0 | 1 => SmoothMap::Motion(motion(&mut rng, d, trial % 4 == 0)),
            _ => SmoothMap::Reflection(Hyperplane::new(unit(&mut rng, d), rng.random_range(-1.0..1.0)).unwrap()),
        };
        let m = if trial % 3 == 0 {
            base
        } else {
            let pins = vec![(xs[0].clone(), unit(&mut rng, d) * 0.005)];
            let slide = make_slide(d, pins, 0.1, 0.2).unwrap();
            let maps = if trial % 3 == 1 { vec![slide, base] } else { vec![base, slide] };
            SmoothMap::Composition(Composition::new(maps).unwrap())
        };
        let ys: Vec<Vector> = xs.iter().map(|x| m.apply(x)).collect();
        let sign = affine_from_simplex(&xs, &ys).map_err(|e| e.to_string())?.sign;
        if sign != m.orientation().map_err(|e| e.to_string())? {
            disagreements += 1;
        }
    }
    check(disagreements == 0, format!("{disagreements} disagreements"))?;
    Ok("100 trials, 0 disagreements".into())
}

fn c13_delta_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let e = separated(&mut rng, 3, 6, 0.4);
    let a = motion(&mut rng, 3, true);
    let noise: Vec<Vector> = (0..e.len()).map(|_| point(&mut rng, 3, 1.0)).collect();
    let with_scale = |s: f64| {
        let mut i = 0;
        Correspondence::from_map(e.clone(), |x| {
            i += 1;
            a.apply(x) + &noise[i - 1] * s
        })
        .unwrap()
    };
    let unit_delta = certify_distortion(&with_scale(1e-8)).unwrap().delta / 1e-8;
    let mut pts = Vec::new();
    for target in [1e-2, 1e-4, 1e-6] {
        let c = with_scale(target / unit_delta);
        let delta = certify_distortion(&c).unwrap().delta;
        let (_, res) = best_motion(&c).map_err(|e| e.to_string())?;
        pts.push((delta, res));
    }
    check(
        pts.windows(2).all(|w| w[1].1 < w[0].1),
        format!("residual not decreasing: {pts:?}"),
    )?;
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(d, r)| (d.ln(), r.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / 3.0;
    let my = ly.iter().sum::<f64>() / 3.0;
    let b = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let a_fit = pts.iter().map(|&(d, r)| r / d.powf(b)).fold(0.0, f64::max);
    check(b > 0.0, format!("exponent {b}"))?;
    Ok(format!(
        "residual <= {a_fit:.3} δ^{b:.4}; (δ, residual) = {}",
        pts.iter().map(|(d, r)| format!("({d:.1e}, {r:.2e})")).join(" ")
    ))
}

fn run_cli(args: &[&str], dir: &std::path::Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_isoext"))
        .args(args)
        .current_dir(dir)
        .env_remove("ISOEXT_SEED")
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn write_correspondence(path: &std::path::Path, c: &Correspondence) {
    let rows = |p: &PointConfig| p.to_rows();
    let text = serde_json::json!({
        "dimension": c.dim(),
        "source": rows(c.source()),
        "target": rows(c.target()),
    });
    std::fs::write(path, text.to_string()).unwrap();
}

fn c14_cli() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let e = separated(&mut rng, 3, 5, 0.4);
    let a = motion(&mut rng, 3, true);
    let c = Correspondence::from_map(e, |x| a.apply(x) + point(&mut rng, 3, 1e-9)).unwrap();
    write_correspondence(&p.join("ok.json"), &c);

    let (code, _) = run_cli(&["extend", "ok.json", "--epsilon", "0.1", "--out", "map.json"], p);
    check(code == 0, format!("extend exited {code}"))?;
    let (code, stdout) = run_cli(&["eval", "map.json", "ok.json"], p);
    check(code == 0, format!("eval exited {code}"))?;
    let images: serde_json::Value = serde_json::from_str(&stdout).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (img, tgt) in images["images"].as_array().unwrap().iter().zip(c.target().points()) {
        let y: Vec<f64> = serde_json::from_value(img.clone()).unwrap();
        worst = worst.max((v(&y) - tgt).norm());
    }
    check(worst <= 1e-9, format!("round-trip error {worst:e}"))?;

    let text = std::fs::read_to_string(p.join("map.json")).unwrap();
    let m: SmoothMap = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let again = format!("{}\n", isoext::json::to_string(&m).unwrap());
    check(again == text, "map JSON is not byte-stable".into())?;

    let mut codes = Vec::new();
    let mut expect = |name: &str, args: &[&str], want: i32| -> Result<(), String> {
        let (code, _) = run_cli(args, p);
        codes.push(format!("{name}={code}"));
        check(code == want, format!("{name}: exit {code}, expected {want}"))
    };
    std::fs::write(p.join("bad.json"), "{ not json").unwrap();
    expect("malformed", &["align", "bad.json"], 2)?;
    expect("epsilon", &["extend", "ok.json", "--epsilon", "1.0"], 2)?;
    let stretched = Correspondence::from_rows(
        &[vec![0., 0.], vec![1., 0.]],
        &[vec![0., 0.], vec![1.5, 0.]],
    )
    .unwrap();
    write_correspondence(&p.join("stretch.json"), &stretched);
    expect("infeasible", &["align", "stretch.json", "--exact"], 3)?;
    write_correspondence(&p.join("mixed.json"), &mixed_fixture());
    expect("negative", &["extend", "mixed.json", "--epsilon", "0.5"], 4)?;
    expect("delta", &["extend", "stretch.json", "--epsilon", "0.5"], 5)?;
    let scale = serde_json::json!({"type": "scaling", "dimension": 2, "factor": 1.5});
    std::fs::write(p.join("scale.json"), scale.to_string()).unwrap();
    expect("over-budget", &["verify", "scale.json", "--epsilon", "0.1"], 6)?;
    expect("samples", &["verify", "scale.json", "--epsilon", "0.1", "--samples", "10"], 2)?;
    Ok(format!("eval error {worst:.1e}, byte-stable, exits {}", codes.join(" ")))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 exact Procrustes recovery", c1_procrustes),
        ("2 distance-gap obstruction", c2_distance_gap),
        ("3 cutoff contract", c3_cutoff),
        ("4 blend endpoints and budget", c4_blend),
        ("5 clustering invariants", c5_clustering),
        ("6 approximate reflection", c6_reflection),
        ("7 full extension, flat case", c7_flat_extension),
        ("8 full extension, recursive case", c8_recursive_extension),
        ("9 obstruction detection", c9_obstruction),
        ("10 small-set extension", c10_small_sets),
        ("11 local motion approximation", c11_local_motion),
        ("12 orientation detection", c12_orientation),
        ("13 residual vs delta scaling", c13_delta_scaling),
        ("14 CLI round trip", c14_cli),
    ];
    // Optional filter: numbers of the criteria to run.
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in criteria {
        let number = name.split(' ').next().unwrap_or_default();
        if !only.is_empty() && !only.iter().any(|o| o == number) {
            continue;
        }
        ran += 1;
        let start = std::time::Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
