//! Points, Euclidean motions and simplex volumes.
//!
//! Volumes follow the simplex convention: the `l`-volume of the simplex
//! `z_0, ..., z_l` is the parallelepiped volume of the edges `z_i - z_0`
//! divided by `l!`. The parallelepiped volume is `sqrt(det G)` with `G` the
//! Gram matrix of the edges; it is evaluated as `|det R|` from a Householder
//! QR factorisation of the edge matrix, which equals `sqrt(det G)` because
//! `G = R^T R`.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Entrywise tolerance on `T^T T - I` for a motion's linear part.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;
/// Tolerance on `|det T| - 1`.
pub const DETERMINANT_TOL: f64 = 1e-9;
/// Parallelepiped volumes below this fraction of `diam^l` are reported as zero.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Gram-Schmidt pivots below this fraction of the input norm signal rank deficiency.
pub const PIVOT_TOL: f64 = 1e-10;

pub(crate) fn check_dim(expected: usize, v: &Vector) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// An ordered finite set of points in `R^D` with its diameter and minimum
/// pairwise separation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    dim: usize,
    points: Vec<Vector>,
    diam: f64,
    min_separation: f64,
}

impl PointConfig {
    pub fn new(points: Vec<Vector>) -> Result<Self> {
        let dim = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::InvalidInput("point configuration is empty".into()))?;
        if dim < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension must be at least 2, got {dim}"
            )));
        }
        for p in &points {
            check_dim(dim, p)?;
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("non-finite coordinate".into()));
            }
        }
        let mut diam = 0.0_f64;
        let mut min_separation = f64::INFINITY;
        for (i, j) in (0..points.len()).tuple_combinations() {
            let d = (&points[i] - &points[j]).norm();
            diam = diam.max(d);
            min_separation = min_separation.min(d);
        }
        Ok(Self {
            dim,
            points,
            diam,
            min_separation,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| Vector::from_vec(r.clone())).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &Vector {
        &self.points[i]
    }

    /// Maximum pairwise distance (0 for a single point).
    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Minimum pairwise distance (`+inf` for a single point).
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn centroid(&self) -> Vector {
        let mut c = Vector::zeros(self.dim);
        for p in &self.points {
            c += p;
        }
        c / self.points.len() as f64
    }

    /// Sub-configuration made of the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i].clone()).collect())
    }

    /// Distance from `x` to the nearest point of the configuration.
    pub fn distance_to(&self, x: &Vector) -> f64 {
        self.points
            .iter()
            .map(|p| (x - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn has_duplicates(&self) -> bool {
        self.points.len() > 1 && self.min_separation == 0.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.as_slice().to_vec()).collect()
    }
}

/// A map `x -> T x + x0` with `T` orthogonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MotionRepr", into = "MotionRepr")]
pub struct EuclideanMotion {
    rotation: Matrix,
    translation: Vector,
    orientation: i8,
}

#[derive(Serialize, Deserialize)]
struct MotionRepr {
    #[serde(with = "crate::serde_util::matrix")]
    rotation: Matrix,
    #[serde(with = "crate::serde_util::vector")]
    translation: Vector,
    orientation: i8,
}

impl TryFrom<MotionRepr> for EuclideanMotion {
    type Error = Error;

    fn try_from(r: MotionRepr) -> Result<Self> {
        let m = EuclideanMotion::new(r.rotation, r.translation)?;
        if m.orientation != r.orientation {
            return Err(Error::InvalidInput(format!(
                "stored orientation {} contradicts det sign {}",
                r.orientation, m.orientation
            )));
        }
        Ok(m)
    }
}

impl From<EuclideanMotion> for MotionRepr {
    fn from(m: EuclideanMotion) -> Self {
        MotionRepr {
            rotation: m.rotation,
            translation: m.translation,
            orientation: m.orientation,
        }
    }
}

impl EuclideanMotion {
    /// Validates orthogonality and records the orientation sign.
    pub fn new(rotation: Matrix, translation: Vector) -> Result<Self> {
        let d = rotation.nrows();
        if rotation.ncols() != d {
            return Err(Error::InvalidInput("rotation must be square".into()));
        }
        check_dim(d, &translation)?;
        let gram = rotation.transpose() * &rotation;
        let defect = (gram - Matrix::identity(d, d)).amax();
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::InvalidInput(format!(
                "rotation is not orthogonal (defect {defect:e})"
            )));
        }
        let det = rotation.determinant();
        if (det.abs() - 1.0).abs() > DETERMINANT_TOL {
            return Err(Error::InvalidInput(format!(
                "rotation determinant {det} is not +-1"
            )));
        }
        let orientation = if det > 0.0 { 1 } else { -1 };
        Ok(Self {
            rotation,
            translation,
            orientation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            rotation: Matrix::identity(dim, dim),
            translation: Vector::zeros(dim),
            orientation: 1,
        }
    }

    pub fn translation_by(v: Vector) -> Self {
        let d = v.len();
        Self {
            rotation: Matrix::identity(d, d),
            translation: v,
            orientation: 1,
        }
    }

    /// Reflection through the hyperplane `{x : n.x = c}`; `n` is normalised here.
    pub fn reflection(normal: &Vector, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("zero hyperplane normal".into()));
        }
        let n = normal / norm;
        let c = offset / norm;
        let d = n.len();
        let rotation = Matrix::identity(d, d) - 2.0 * &n * n.transpose();
        Ok(Self {
            rotation,
            translation: 2.0 * c * n,
            orientation: -1,
        })
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn rotation(&self) -> &Matrix {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector {
        &self.translation
    }

    /// `+1` for proper motions, `-1` for improper ones.
    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn is_proper(&self) -> bool {
        self.orientation > 0
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        &self.rotation * x + &self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &EuclideanMotion) -> EuclideanMotion {
        EuclideanMotion {
            rotation: &self.rotation * &other.rotation,
            translation: &self.rotation * &other.translation + &self.translation,
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> EuclideanMotion {
        let rt = self.rotation.transpose();
        let translation = -(&rt * &self.translation);
        EuclideanMotion {
            rotation: rt,
            translation,
            orientation: self.orientation,
        }
    }

    /// Largest entrywise gap between the two motions' matrices and translations.
    pub fn distance_to(&self, other: &EuclideanMotion) -> f64 {
        (&self.rotation - &other.rotation)
            .amax()
            .max((&self.translation - &other.translation).amax())
    }
}

/// Applies `motion` to `x`, checking dimensions.
pub fn apply_motion(motion: &EuclideanMotion, x: &Vector) -> Result<Vector> {
    check_dim(motion.dim(), x)?;
    Ok(motion.apply(x))
}

/// The simplex spanned by `l + 1` vertices in `R^D`, `1 <= l <= D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: Vec<Vector>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vector>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InvalidInput("simplex has no vertices".into()))?;
        for v in &vertices {
            check_dim(dim, v)?;
        }
        if vertices.len() < 2 {
            return Err(Error::InvalidInput(
                "a simplex needs at least two vertices".into(),
            ));
        }
        if vertices.len() > dim + 1 {
            return Err(Error::InvalidInput(format!(
                "{} vertices exceed D + 1 = {}",
                vertices.len(),
                dim + 1
            )));
        }
        Ok(Self { vertices })
    }

    pub fn from_indices(config: &PointConfig, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| config.point(i).clone()).collect())
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    /// Simplex dimension `l` (vertex count minus one).
    pub fn order(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn diam(&self) -> f64 {
        self.vertices
            .iter()
            .tuple_combinations()
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Edge matrix with columns `z_i - z_0`.
    pub fn edge_matrix(&self) -> Matrix {
        let z0 = &self.vertices[0];
        let d = z0.len();
        let l = self.order();
        Matrix::from_fn(d, l, |r, c| self.vertices[c + 1][r] - z0[r])
    }
}

/// `l`-volume of the parallelepiped spanned by the simplex edges, i.e.
/// `sqrt(det G)`; zero below the degeneracy floor.
pub fn parallelepiped_volume(s: &Simplex) -> f64 {
    let l = s.order();
    let scale = s.diam();
    if scale == 0.0 {
        return 0.0;
    }
    let r = s.edge_matrix().qr().r();
    let vol = (0..l).map(|i| r[(i, i)].abs()).product::<f64>();
    if vol < DEGENERACY_TOL * scale.powi(l as i32) {
        0.0
    } else {
        vol
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `l`-dimensional volume of the simplex, `sqrt(det G) / l!`.
pub fn simplex_volume(s: &Simplex) -> f64 {
    parallelepiped_volume(s) / factorial(s.order())
}

/// Exhaustive maximum of the `l`-simplex volume over all `(l+1)`-subsets.
pub fn max_simplex_volume(e: &PointConfig, l: usize) -> Result<(f64, Simplex)> {
    if l == 0 || l > e.dim() {
        return Err(Error::InvalidInput(format!(
            "simplex order {l} outside 1..={}",
            e.dim()
        )));
    }
    if e.len() < l + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} points for an {l}-simplex, have {}",
            l + 1,
            e.len()
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for idx in (0..e.len()).combinations(l + 1) {
        let v = simplex_volume(&Simplex::from_indices(e, &idx)?);
        if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
            best = Some((v, idx));
        }
    }
    let (v, idx) = best.expect("at least one subset");
    Ok((v, Simplex::from_indices(e, &idx)?))
}

/// Largest `l`-simplex volume, or 0 when the set has too few points.
pub(crate) fn max_volume_or_zero(e: &PointConfig, l: usize) -> f64 {
    if e.len() < l + 1 {
        0.0
    } else {
        max_simplex_volume(e, l).map(|(v, _)| v).unwrap_or(0.0)
    }
}

/// Classical Gram-Schmidt with one re-orthogonalisation pass per vector.
/// Output `i` depends only on inputs `0..=i`.
pub fn gram_schmidt(vectors: &[Vector]) -> Result<Vec<Vector>> {
    let mut out: Vec<Vector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        if let Some(q) = out.first() {
            check_dim(q.len(), v)?;
        }
        let scale = v.norm();
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let pivot = w.norm();
        if !(pivot >= PIVOT_TOL * scale) || pivot == 0.0 {
            return Err(Error::RankDeficient {
                pivot,
                threshold: PIVOT_TOL * scale,
            });
        }
        out.push(w / pivot);
    }
    Ok(out)
}

/// Norm of the component of `z` orthogonal to `span(basis)`.
/// Basis vectors that are numerically dependent on earlier ones are skipped.
pub fn projection_residual(z: &Vector, basis: &[Vector]) -> f64 {
    let mut ortho: Vec<Vector> = Vec::new();
    for b in basis {
        let scale = b.norm();
        let mut w = b.clone();
        for _ in 0..2 {
            for q in &ortho {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if n > PIVOT_TOL * scale && n > 0.0 {
            ortho.push(w / n);
        }
    }
    let mut r = z.clone();
    for _ in 0..2 {
        for q in &ortho {
            let c = q.dot(&r);
            r.axpy(-c, q, 1.0);
        }
    }
    r.norm()
}
