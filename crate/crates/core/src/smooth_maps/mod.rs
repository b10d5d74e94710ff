//! Smooth primitives and the composition tree built from them.

pub mod blend;
pub mod cutoff;
pub mod glue;
pub mod slide;
pub mod twist;

use serde::{Deserialize, Serialize};

pub use blend::{MotionBlend, RotationLog};
pub use cutoff::{cutoff_eval, CutoffSpec};
pub use glue::{glue_radius, GlueNode, GlueRegion};
pub use slide::Slide;
pub use twist::{make_slow_twist, AngleProfile, SlowTwist};

use crate::error::{Error, Result};
use crate::geometry::{check_dim, EuclideanMotion, Matrix, Vector};
use crate::verifier::Region;

/// Default absolute tolerance for Newton inversion.
pub const INVERSION_TOL: f64 = 1e-10;

/// The hyperplane `{x : n·x = c}` with `|n| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HyperplaneRepr", into = "HyperplaneRepr")]
pub struct Hyperplane {
    normal: Vector,
    offset: f64,
}

#[derive(Serialize, Deserialize)]
struct HyperplaneRepr {
    #[serde(with = "crate::serde_util::vector")]
    normal: Vector,
    offset: f64,
}

impl TryFrom<HyperplaneRepr> for Hyperplane {
    type Error = Error;

    fn try_from(r: HyperplaneRepr) -> Result<Self> {
        if r.normal.len() < 2 || (r.normal.norm() - 1.0).abs() > 1e-12 || !r.offset.is_finite() {
            return Err(Error::InvalidSpec(
                "hyperplane normal must be a unit vector in dimension >= 2".into(),
            ));
        }
        Ok(Hyperplane {
            normal: r.normal,
            offset: r.offset,
        })
    }
}

impl From<Hyperplane> for HyperplaneRepr {
    fn from(h: Hyperplane) -> Self {
        HyperplaneRepr {
            normal: h.normal,
            offset: h.offset,
        }
    }
}

impl Hyperplane {
    /// Normalises `normal` (and the offset with it).
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0 && n.is_finite()) || normal.len() < 2 {
            return Err(Error::InvalidSpec("degenerate hyperplane normal".into()));
        }
        Ok(Self {
            normal: normal / n,
            offset: offset / n,
        })
    }

    /// The hyperplane through `point` with the given normal.
    pub fn through(point: &Vector, normal: Vector) -> Result<Self> {
        let h = Self::new(normal, 0.0)?;
        let offset = h.normal.dot(point);
        Ok(Self { offset, ..h })
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, x: &Vector) -> f64 {
        self.normal.dot(x) - self.offset
    }

    pub fn reflect(&self, x: &Vector) -> Vector {
        x - &self.normal * (2.0 * self.signed_distance(x))
    }

    pub fn to_motion(&self) -> EuclideanMotion {
        EuclideanMotion::reflection(&self.normal, self.offset).expect("unit normal")
    }
}

/// Uniform scaling `x -> s x`; a diagnostic node with known singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalingRepr", into = "ScalingRepr")]
pub struct Scaling {
    dimension: usize,
    factor: f64,
}

#[derive(Serialize, Deserialize)]
struct ScalingRepr {
    dimension: usize,
    factor: f64,
}

impl TryFrom<ScalingRepr> for Scaling {
    type Error = Error;

    fn try_from(r: ScalingRepr) -> Result<Self> {
        Scaling::new(r.dimension, r.factor)
    }
}

impl From<Scaling> for ScalingRepr {
    fn from(s: Scaling) -> Self {
        ScalingRepr {
            dimension: s.dimension,
            factor: s.factor,
        }
    }
}

impl Scaling {
    pub fn new(dimension: usize, factor: f64) -> Result<Self> {
        if dimension < 2 || !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "scaling needs D >= 2 and a positive factor, got {dimension}, {factor}"
            )));
        }
        Ok(Self { dimension, factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

/// Maps applied in order: the first entry acts first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CompositionRepr", into = "CompositionRepr")]
pub struct Composition {
    maps: Vec<SmoothMap>,
}

#[derive(Serialize, Deserialize)]
struct CompositionRepr {
    maps: Vec<SmoothMap>,
}

impl TryFrom<CompositionRepr> for Composition {
    type Error = Error;

    fn try_from(r: CompositionRepr) -> Result<Self> {
        Composition::new(r.maps)
    }
}

impl From<Composition> for CompositionRepr {
    fn from(c: Composition) -> Self {
        CompositionRepr { maps: c.maps }
    }
}

impl Composition {
    pub fn new(maps: Vec<SmoothMap>) -> Result<Self> {
        let d = maps
            .first()
            .map(SmoothMap::dim)
            .ok_or_else(|| Error::InvalidSpec("empty composition".into()))?;
        for m in &maps {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.dim(),
                });
            }
        }
        Ok(Self { maps })
    }

    pub fn maps(&self) -> &[SmoothMap] {
        &self.maps
    }
}

/// A smooth map `R^D -> R^D` built from primitives. Every node has an
/// analytic Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SmoothMap {
    Motion(EuclideanMotion),
    Slide(Slide),
    SlowTwist(SlowTwist),
    MotionBlend(MotionBlend),
    Reflection(Hyperplane),
    Scaling(Scaling),
    Composition(Composition),
    Glue(GlueNode),
}

impl SmoothMap {
    pub fn identity(dim: usize) -> Self {
        SmoothMap::Motion(EuclideanMotion::identity(dim))
    }

    /// `maps[n-1] ∘ ... ∘ maps[0]`; a single map is returned as is.
    pub fn compose(mut maps: Vec<SmoothMap>) -> Result<Self> {
        if maps.len() == 1 {
            return Ok(maps.pop().expect("one element"));
        }
        Ok(SmoothMap::Composition(Composition::new(maps)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            SmoothMap::Motion(m) => m.dim(),
            SmoothMap::Slide(s) => s.dim(),
            SmoothMap::SlowTwist(t) => t.dim(),
            SmoothMap::MotionBlend(b) => b.dim(),
            SmoothMap::Reflection(h) => h.normal.len(),
            SmoothMap::Scaling(s) => s.dimension,
            SmoothMap::Composition(c) => c.maps[0].dim(),
            SmoothMap::Glue(g) => g.dim(),
        }
    }

    /// Evaluation without a dimension check.
    pub fn apply(&self, x: &Vector) -> Vector {
        match self {
            SmoothMap::Motion(m) => m.apply(x),
            SmoothMap::Slide(s) => s.eval(x),
            SmoothMap::SlowTwist(t) => t.eval(x),
            SmoothMap::MotionBlend(b) => b.eval(x),
            SmoothMap::Reflection(h) => h.reflect(x),
            SmoothMap::Scaling(s) => x * s.factor,
            SmoothMap::Composition(c) => c.maps.iter().fold(x.clone(), |y, m| m.apply(&y)),
            SmoothMap::Glue(g) => g.eval(x),
        }
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        Ok(self.apply(x))
    }

    /// Analytic Jacobian without a dimension check.
    pub fn jac(&self, x: &Vector) -> Matrix {
        match self {
            SmoothMap::Motion(m) => m.rotation().clone(),
            SmoothMap::Slide(s) => s.jacobian(x),
            SmoothMap::SlowTwist(t) => t.jacobian(x),
            SmoothMap::MotionBlend(b) => b.jacobian(x),
            SmoothMap::Reflection(h) => {
                let d = h.normal.len();
                Matrix::identity(d, d) - &h.normal * h.normal.transpose() * 2.0
            }
            SmoothMap::Scaling(s) => Matrix::identity(s.dimension, s.dimension) * s.factor,
            SmoothMap::Composition(c) => {
                let d = self.dim();
                let mut j = Matrix::identity(d, d);
                let mut y = x.clone();
                for m in &c.maps {
                    j = m.jac(&y) * j;
                    y = m.apply(&y);
                }
                j
            }
            SmoothMap::Glue(g) => g.jacobian(x),
        }
    }

    pub fn jacobian(&self, x: &Vector) -> Result<Matrix> {
        check_dim(self.dim(), x)?;
        Ok(self.jac(x))
    }

    /// Product of the node orientations.
    pub fn node_orientation(&self) -> i8 {
        match self {
            SmoothMap::Motion(m) => m.orientation(),
            SmoothMap::Reflection(_) => -1,
            SmoothMap::Composition(c) => c.maps.iter().map(SmoothMap::node_orientation).product(),
            SmoothMap::Glue(g) => g.global().node_orientation(),
            SmoothMap::Slide(_)
            | SmoothMap::SlowTwist(_)
            | SmoothMap::MotionBlend(_)
            | SmoothMap::Scaling(_) => 1,
        }
    }

    /// Orientation sign, cross-checked against `sign det ∇Φ` at one point.
    pub fn orientation(&self) -> Result<i8> {
        let sign = self.node_orientation();
        let x = self.probe_point();
        let det = self.jac(&x).determinant();
        if !(det != 0.0 && (det > 0.0) == (sign > 0)) {
            return Err(Error::InternalConsistency(format!(
                "node orientation {sign} contradicts det {det:e} at the probe point"
            )));
        }
        Ok(sign)
    }

    fn probe_point(&self) -> Vector {
        self.sampling_regions()
            .first()
            .map(|r| r.center())
            .unwrap_or_else(|| Vector::zeros(self.dim()))
    }

    /// Natural starting point for inverting `y`.
    fn inverse_guess(&self, y: &Vector) -> Vector {
        match self {
            SmoothMap::Slide(s) => s.inverse_guess(y),
            SmoothMap::MotionBlend(b) => b.inverse_guess(y),
            _ => y.clone(),
        }
    }

    /// Solves `Φ(x) = y` to absolute accuracy `tol` by Newton's method from the
    /// natural initial guess; motions, reflections, scalings and twists are
    /// inverted in closed form.
    pub fn invert(&self, y: &Vector, tol: f64) -> Result<Vector> {
        check_dim(self.dim(), y)?;
        match self {
            SmoothMap::Motion(m) => Ok(m.inverse().apply(y)),
            SmoothMap::Reflection(h) => Ok(h.reflect(y)),
            SmoothMap::Scaling(s) => Ok(y / s.factor),
            SmoothMap::SlowTwist(t) => Ok(t.inverse(y)),
            SmoothMap::Composition(c) => {
                let mut x = y.clone();
                for m in c.maps.iter().rev() {
                    x = m.invert(&x, tol)?;
                }
                polish(self, y, x, tol)
            }
            SmoothMap::Glue(g) => g.invert(y, tol),
            SmoothMap::Slide(_) | SmoothMap::MotionBlend(_) => {
                newton(self, y, self.inverse_guess(y), tol)
            }
        }
    }

    /// Regions (in input coordinates) where the map is not a single rigid
    /// motion; the verifier samples these.
    pub fn sampling_regions(&self) -> Vec<Region> {
        match self {
            SmoothMap::Motion(_) | SmoothMap::Reflection(_) | SmoothMap::Scaling(_) => vec![],
            SmoothMap::Slide(s) => s
                .centers()
                .iter()
                .map(|c| Region::Shell {
                    center: c.clone(),
                    inner: s.cutoff().r_in,
                    outer: s.cutoff().r_out,
                })
                .collect(),
            SmoothMap::SlowTwist(t) => t
                .profiles()
                .iter()
                .map(|p| match *p {
                    AngleProfile::LogRamp { inner, outer, .. } => Region::Shell {
                        center: Vector::zeros(t.dim()),
                        inner,
                        outer,
                    },
                    AngleProfile::Constant { .. } => Region::Ball {
                        center: Vector::zeros(t.dim()),
                        radius: 1.0,
                    },
                })
                .collect(),
            SmoothMap::MotionBlend(b) => vec![Region::Shell {
                center: b.center().clone(),
                inner: b.inner_radius(),
                outer: b.radius(),
            }],
            SmoothMap::Composition(c) => {
                let mut out = Vec::new();
                for (k, m) in c.maps.iter().enumerate() {
                    let prefix = &c.maps[..k];
                    for r in m.sampling_regions() {
                        let mut center = r.center().clone();
                        for p in prefix.iter().rev() {
                            if let Ok(x) = p.invert(&center, INVERSION_TOL) {
                                center = x;
                            }
                        }
                        out.push(r.with_center(center));
                    }
                }
                out
            }
            SmoothMap::Glue(g) => {
                let (r2, r3) = g.radii();
                let mut out = Vec::new();
                for (i, z) in g.representatives().iter().enumerate() {
                    out.push(Region::Shell {
                        center: z.clone(),
                        inner: r2,
                        outer: r3,
                    });
                    out.extend(
                        g.locals()[i]
                            .sampling_regions()
                            .into_iter()
                            .filter(|r| (r.center() - z).norm() < r2),
                    );
                }
                out.extend(g.global().sampling_regions());
                out
            }
        }
    }
}

fn residual(m: &SmoothMap, x: &Vector, y: &Vector) -> f64 {
    (m.apply(x) - y).norm()
}

fn polish(m: &SmoothMap, y: &Vector, x: Vector, tol: f64) -> Result<Vector> {
    if residual(m, &x, y) <= tol {
        Ok(x)
    } else {
        newton(m, y, x, tol)
    }
}

/// Damped Newton iteration for `m(x) = y`.
pub fn newton(m: &SmoothMap, y: &Vector, x0: Vector, tol: f64) -> Result<Vector> {
    let mut x = x0;
    let mut r = m.apply(&x) - y;
    for _ in 0..100 {
        let rn = r.norm();
        if rn <= tol {
            return Ok(x);
        }
        let step = m
            .jac(&x)
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::InternalConsistency("singular Jacobian in Newton step".into()))?;
        let mut t = 1.0;
        loop {
            let cand = &x - &step * t;
            let rc = m.apply(&cand) - y;
            if rc.norm() < rn || t < 1e-6 {
                x = cand;
                r = rc;
                break;
            }
            t *= 0.5;
        }
    }
    let rn = r.norm();
    if rn <= tol {
        Ok(x)
    } else {
        Err(Error::InternalConsistency(format!(
            "Newton inversion stalled at residual {rn:e}"
        )))
    }
}

/// Central differences with step `1e-6 (1 + |x|)`.
pub fn finite_difference_jacobian(m: &SmoothMap, x: &Vector) -> Matrix {
    let d = x.len();
    let h = 1e-6 * (1.0 + x.norm());
    let mut j = Matrix::zeros(d, d);
    for k in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let col = (m.apply(&xp) - m.apply(&xm)) / (2.0 * h);
        j.set_column(k, &col);
    }
    j
}

/// Slide with disjointness and distortion guards.
pub fn make_slide(
    dim: usize,
    displacements: Vec<(Vector, Vector)>,
    r_in: f64,
    r_out: f64,
) -> Result<SmoothMap> {
    Ok(SmoothMap::Slide(Slide::new(dim, displacements, r_in, r_out)?))
}

pub fn reflect(h: Hyperplane) -> SmoothMap {
    SmoothMap::Reflection(h)
}

/// Blend of two motions of equal orientation. An improper pair `(A, A*)` is
/// handled as `Blend(A∘F, A*∘F) ∘ F` with `F` the reflection in `x_1 = 0`.
pub fn motion_blend(
    a: &EuclideanMotion,
    a_star: &EuclideanMotion,
    x0: &Vector,
    r: f64,
    epsilon: f64,
) -> Result<SmoothMap> {
    if a.orientation() != a_star.orientation() {
        return Err(Error::OrientationMismatch);
    }
    if a.is_proper() {
        return Ok(SmoothMap::MotionBlend(MotionBlend::new(
            a.clone(),
            a_star.clone(),
            x0.clone(),
            r,
            epsilon,
        )?));
    }
    let d = a.dim();
    let mut e1 = Vector::zeros(d);
    e1[0] = 1.0;
    let plane = Hyperplane::new(e1, 0.0)?;
    let f = plane.to_motion();
    let inner = MotionBlend::new(a.compose(&f), a_star.compose(&f), f.apply(x0), r, epsilon)?;
    SmoothMap::compose(vec![SmoothMap::Reflection(plane), SmoothMap::MotionBlend(inner)])
}
