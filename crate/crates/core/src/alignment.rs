//! Rigid alignment of labeled correspondences, distortion certificates and
//! η-block detection.

use itertools::Itertools;
use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    simplex_volume, EuclideanMotion, Matrix, PointConfig, Simplex, Vector,
};

/// Relative tolerance for "distances are equal" in [`exact_motion`].
pub const ISOMETRY_TOL: f64 = 1e-9;
/// Singular values below this fraction of the largest are treated as zero when
/// completing a rotation on the null space of the cross-covariance.
const NULL_SINGULAR_TOL: f64 = 1e-10;
/// Residual difference (relative to the diameter) below which the two
/// orientations are considered tied; ties go to the proper motion.
const ORIENTATION_TIE_TOL: f64 = 1e-12;

/// Source and target configurations of a labeled map `φ: E -> R^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    source: PointConfig,
    target: PointConfig,
}

impl Correspondence {
    pub fn new(source: PointConfig, target: PointConfig) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::InvalidInput(format!(
                "source has {} points but target has {}",
                source.len(),
                target.len()
            )));
        }
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: source.dim(),
                found: target.dim(),
            });
        }
        if source.has_duplicates() {
            return Err(Error::InvalidInput("source points are not distinct".into()));
        }
        if target.has_duplicates() {
            return Err(Error::InvalidInput("target points are not distinct".into()));
        }
        Ok(Self { source, target })
    }

    pub fn from_points(source: Vec<Vector>, target: Vec<Vector>) -> Result<Self> {
        Self::new(PointConfig::new(source)?, PointConfig::new(target)?)
    }

    pub fn from_rows(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Self> {
        Self::new(PointConfig::from_rows(source)?, PointConfig::from_rows(target)?)
    }

    /// The correspondence `x -> m(x)` on `source`.
    pub fn from_map(source: PointConfig, m: impl FnMut(&Vector) -> Vector) -> Result<Self> {
        let target = PointConfig::new(source.points().iter().map(m).collect())?;
        Self::new(source, target)
    }

    pub fn source(&self) -> &PointConfig {
        &self.source
    }

    pub fn target(&self) -> &PointConfig {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(self.source.subset(indices)?, self.target.subset(indices)?)
    }

    /// `x -> post(φ(pre⁻¹ x))` on `pre(E)`.
    pub fn conjugate(&self, pre: &EuclideanMotion, post: &EuclideanMotion) -> Result<Self> {
        let s = self.source.points().iter().map(|p| pre.apply(p)).collect();
        let t = self.target.points().iter().map(|p| post.apply(p)).collect();
        Self::from_points(s, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionCertificate {
    pub delta: f64,
    pub worst_pair: (usize, usize),
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// Smallest `δ` with `(1+δ)⁻¹ <= |φ(x)-φ(y)| / |x-y| <= 1+δ` over all pairs.
pub fn certify_distortion(c: &Correspondence) -> Result<DistortionCertificate> {
    if c.len() < 2 {
        return Err(Error::InvalidInput(
            "distortion needs at least two points".into(),
        ));
    }
    let mut cert = DistortionCertificate {
        delta: -1.0,
        worst_pair: (0, 1),
        max_ratio: 0.0,
        min_ratio: f64::INFINITY,
    };
    for (i, j) in (0..c.len()).tuple_combinations() {
        let ds = (c.source.point(i) - c.source.point(j)).norm();
        let dt = (c.target.point(i) - c.target.point(j)).norm();
        let ratio = dt / ds;
        cert.max_ratio = cert.max_ratio.max(ratio);
        cert.min_ratio = cert.min_ratio.min(ratio);
        let d = ratio.max(1.0 / ratio) - 1.0;
        if d > cert.delta {
            cert.delta = d;
            cert.worst_pair = (i, j);
        }
    }
    Ok(cert)
}

/// The motion `A` with `A(y_i) = z_i`, assuming the distances agree.
pub fn exact_motion(c: &Correspondence, require_proper: bool) -> Result<EuclideanMotion> {
    for (i, j) in (0..c.len()).tuple_combinations() {
        let ds = (c.source.point(i) - c.source.point(j)).norm();
        let dt = (c.target.point(i) - c.target.point(j)).norm();
        if (ds - dt).abs() > ISOMETRY_TOL * ds.max(dt) {
            return Err(Error::NotAnIsometry {
                i,
                j,
                source_distance: ds,
                target_distance: dt,
            });
        }
    }
    let (motion, residual) = best_motion(c)?;
    let diam = c.source.diam();
    if residual > ISOMETRY_TOL * diam {
        let cert = certify_distortion(c)?;
        let (i, j) = cert.worst_pair;
        return Err(Error::NotAnIsometry {
            i,
            j,
            source_distance: (c.source.point(i) - c.source.point(j)).norm(),
            target_distance: (c.target.point(i) - c.target.point(j)).norm(),
        });
    }
    if !require_proper || motion.is_proper() {
        return Ok(motion);
    }
    // An improper solution can be made proper only when the source lies in a
    // hyperplane: reflecting through that hyperplane first fixes every y_i.
    let n = least_variance_direction(&c.source);
    let offset = n.dot(&c.source.centroid());
    let flipped = motion.compose(&EuclideanMotion::reflection(&n, offset)?);
    if max_residual(c, &flipped) <= ISOMETRY_TOL * diam {
        Ok(flipped)
    } else {
        Err(Error::OrientationInfeasible)
    }
}

/// Unit direction of least spread of `e` about its centroid.
pub(crate) fn least_variance_direction(e: &PointConfig) -> Vector {
    let d = e.dim();
    let c = e.centroid();
    let mut cov = Matrix::zeros(d, d);
    for p in e.points() {
        let q = p - &c;
        cov += &q * q.transpose();
    }
    let eig = cov.symmetric_eigen();
    let k = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("dimension >= 2");
    eig.eigenvectors.column(k).into_owned()
}

/// Orthogonal `W` maximising `<W, M>_F`, optionally with `sign(det W)` fixed.
/// The sign fix flips the direction of the smallest singular value.
pub(crate) fn procrustes_rotation(m: &Matrix, det_sign: Option<i8>) -> Matrix {
    let n = m.nrows();
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let svd = SVD::new(m.clone(), true, true);
    let mut u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    if let Some(sign) = det_sign {
        let det = (&u * &v_t).determinant();
        if (det > 0.0) != (sign > 0) {
            let k = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .expect("non-empty");
            u.column_mut(k).neg_mut();
        }
    }
    u * v_t
}

/// Rotation maximising `tr(Rᵀ K)` with `det R = det_sign`. Directions in the
/// null space of `K` are completed so that `R` is as close as possible to
/// `reference` in Frobenius norm.
fn constrained_rotation(k: &Matrix, reference: &Matrix, det_sign: i8) -> Matrix {
    let d = k.nrows();
    let svd = SVD::new(k.clone(), true, true);
    let u = svd.u.expect("u requested");
    let v = svd.v_t.expect("v_t requested").transpose();
    let sv = &svd.singular_values;
    let smax = sv.amax();
    let order: Vec<usize> = (0..d)
        .sorted_by(|&a, &b| sv[b].total_cmp(&sv[a]))
        .collect();
    let rank = order
        .iter()
        .filter(|&&i| smax > 0.0 && sv[i] > NULL_SINGULAR_TOL * smax)
        .count();
    let pick = |m: &Matrix, idx: &[usize]| Matrix::from_columns(&idx.iter().map(|&i| m.column(i)).collect::<Vec<_>>());
    let p = pick(&u, &order);
    let q = pick(&v, &order);
    let det_pq = p.determinant() * q.determinant();
    if rank == d {
        let mut w = Matrix::identity(d, d);
        if (det_pq > 0.0) != (det_sign > 0) {
            w[(d - 1, d - 1)] = -1.0;
        }
        return &p * w * q.transpose();
    }
    let p_r = p.columns(0, rank).into_owned();
    let q_r = q.columns(0, rank).into_owned();
    let p_n = p.columns(rank, d - rank).into_owned();
    let q_n = q.columns(rank, d - rank).into_owned();
    let m = p_n.transpose() * reference * &q_n;
    let want = if (det_pq > 0.0) == (det_sign > 0) { 1 } else { -1 };
    let w = procrustes_rotation(&m, Some(want));
    &p_r * q_r.transpose() + &p_n * w * q_n.transpose()
}

fn max_residual(c: &Correspondence, a: &EuclideanMotion) -> f64 {
    c.source
        .points()
        .iter()
        .zip(c.target.points())
        .map(|(y, z)| (z - a.apply(y)).norm())
        .fold(0.0, f64::max)
}

fn fit(c: &Correspondence, reference: &Matrix, det_sign: i8) -> Result<(EuclideanMotion, f64)> {
    let d = c.dim();
    if reference.nrows() != d || reference.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: reference.nrows(),
        });
    }
    let ys = c.source.centroid();
    let zs = c.target.centroid();
    let mut k = Matrix::zeros(d, d);
    for (y, z) in c.source.points().iter().zip(c.target.points()) {
        k += (z - &zs) * (y - &ys).transpose();
    }
    let r = constrained_rotation(&k, reference, det_sign);
    let t = &zs - &r * &ys;
    let a = EuclideanMotion::new(r, t)?;
    let res = max_residual(c, &a);
    Ok((a, res))
}

/// Least-squares rigid alignment (centroids matched, orthogonal factor of the
/// cross-covariance). Both orientations are fitted and the one with the
/// smaller max residual is returned; ties go to the proper motion.
pub fn best_motion(c: &Correspondence) -> Result<(EuclideanMotion, f64)> {
    let d = c.dim();
    best_motion_with_reference(c, &Matrix::identity(d, d))
}

/// [`best_motion`] with undetermined rotational directions completed toward
/// `reference`.
pub fn best_motion_with_reference(
    c: &Correspondence,
    reference: &Matrix,
) -> Result<(EuclideanMotion, f64)> {
    let proper = fit(c, reference, 1)?;
    let improper = fit(c, reference, -1)?;
    let tie = ORIENTATION_TIE_TOL * c.source.diam().max(c.target.diam());
    if improper.1 < proper.1 - tie {
        Ok(improper)
    } else {
        Ok(proper)
    }
}

/// Least-squares alignment constrained to proper motions.
pub fn best_proper_motion(c: &Correspondence) -> Result<(EuclideanMotion, f64)> {
    let d = c.dim();
    fit(c, &Matrix::identity(d, d), 1)
}

pub fn best_proper_motion_with_reference(
    c: &Correspondence,
    reference: &Matrix,
) -> Result<(EuclideanMotion, f64)> {
    fit(c, reference, 1)
}

/// Translates so that `y_1 = z_1 = 0` and scales so that
/// `Σ_{i≠j} |y_i-y_j|² + Σ_{i≠j} |z_i-z_j|² = 1` (ordered pairs).
pub fn normalize_pair(c: &Correspondence) -> Result<(Correspondence, f64)> {
    if c.len() < 2 {
        return Err(Error::InvalidInput(
            "normalisation needs at least two points".into(),
        ));
    }
    let mut sum = 0.0;
    for (i, j) in (0..c.len()).tuple_combinations() {
        sum += 2.0 * (c.source.point(i) - c.source.point(j)).norm_squared();
        sum += 2.0 * (c.target.point(i) - c.target.point(j)).norm_squared();
    }
    if !(sum > 0.0) {
        return Err(Error::InvalidInput("all points coincide".into()));
    }
    let scale = 1.0 / sum.sqrt();
    let y0 = c.source.point(0).clone();
    let z0 = c.target.point(0).clone();
    let s = c.source.points().iter().map(|y| (y - &y0) * scale).collect();
    let t = c.target.points().iter().map(|z| (z - &z0) * scale).collect();
    Ok((Correspondence::from_points(s, t)?, scale))
}

/// The affine map `x -> L x + b` matching `D+1` source points to targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub linear: Matrix,
    pub offset: Vector,
    /// `sign(det L)`, or 0 when the target simplex is degenerate.
    pub sign: i8,
}

impl AffineMap {
    pub fn apply(&self, x: &Vector) -> Vector {
        &self.linear * x + &self.offset
    }
}

/// Source simplices with `V_D <= AFFINE_DEGENERACY_TOL * diam^D` are rejected.
pub const AFFINE_DEGENERACY_TOL: f64 = 1e-10;

pub fn affine_from_simplex(x: &[Vector], y: &[Vector]) -> Result<AffineMap> {
    let d = x.first().map(|p| p.len()).unwrap_or(0);
    if x.len() != d + 1 || y.len() != d + 1 {
        return Err(Error::InvalidInput(format!(
            "need D + 1 = {} points on each side, got {} and {}",
            d + 1,
            x.len(),
            y.len()
        )));
    }
    let sx = Simplex::new(x.to_vec())?;
    let sy = Simplex::new(y.to_vec())?;
    if sx.vertices()[0].len() != sy.vertices()[0].len() {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: y[0].len(),
        });
    }
    let diam = sx.diam();
    let vol = simplex_volume(&sx);
    let threshold = AFFINE_DEGENERACY_TOL * diam.powi(d as i32);
    if !(vol > threshold) {
        return Err(Error::RankDeficient {
            pivot: vol,
            threshold,
        });
    }
    let ex = sx.edge_matrix();
    let ey = sy.edge_matrix();
    // L ex = ey  <=>  exᵀ Lᵀ = eyᵀ
    let lt = ex
        .transpose()
        .lu()
        .solve(&ey.transpose())
        .ok_or(Error::RankDeficient {
            pivot: vol,
            threshold,
        })?;
    let linear = lt.transpose();
    let offset = &y[0] - &linear * &x[0];
    let sign = if simplex_volume(&sy) == 0.0 {
        0
    } else if linear.determinant() > 0.0 {
        1
    } else {
        -1
    };
    Ok(AffineMap {
        linear,
        offset,
        sign,
    })
}

/// A `(D+1)`-tuple whose source simplex is voluminous at level `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub indices: Vec<usize>,
    pub volume: f64,
    pub diam: f64,
    pub eta_level: f64,
    pub sign: i8,
}

impl Block {
    /// Whether the volume meets `eta^D diam^D`.
    pub fn qualifies(&self, dim: usize) -> bool {
        self.volume >= (self.eta_level * self.diam).powi(dim as i32)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockScan {
    pub positives: Vec<Block>,
    pub negatives: Vec<Block>,
}

/// Exhaustive η-block scan over all `(D+1)`-subsets.
pub fn detect_blocks(c: &Correspondence, eta: f64) -> Result<BlockScan> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta = {eta} outside (0, 1)")));
    }
    let d = c.dim();
    let mut scan = BlockScan::default();
    if c.len() < d + 1 {
        return Ok(scan);
    }
    for idx in (0..c.len()).combinations(d + 1) {
        let xs: Vec<Vector> = idx.iter().map(|&i| c.source.point(i).clone()).collect();
        let s = Simplex::new(xs.clone())?;
        let diam = s.diam();
        let volume = simplex_volume(&s);
        if volume == 0.0 || volume < (eta * diam).powi(d as i32) {
            continue;
        }
        let ys: Vec<Vector> = idx.iter().map(|&i| c.target.point(i).clone()).collect();
        let sign = match affine_from_simplex(&xs, &ys) {
            Ok(a) => a.sign,
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        };
        let block = Block {
            indices: idx,
            volume,
            diam,
            eta_level: eta,
            sign,
        };
        match sign {
            1 => scan.positives.push(block),
            -1 => scan.negatives.push(block),
            _ => {}
        }
    }
    Ok(scan)
}
