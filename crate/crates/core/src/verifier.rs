//! Sampling-based checks of distortion, interpolation, rigid agreement and
//! injectivity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::Correspondence;
use crate::error::{Error, Result};
use crate::geometry::{EuclideanMotion, Vector};
use crate::smooth_maps::SmoothMap;

pub const DEFAULT_SEED: u64 = 0x5eed;
pub const MIN_SAMPLES: usize = 100;

/// A sampling region. Shell radii are drawn log-uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball {
        #[serde(with = "crate::serde_util::vector")]
        center: Vector,
        radius: f64,
    },
    Shell {
        #[serde(with = "crate::serde_util::vector")]
        center: Vector,
        inner: f64,
        outer: f64,
    },
    Box {
        #[serde(with = "crate::serde_util::vector")]
        lo: Vector,
        #[serde(with = "crate::serde_util::vector")]
        hi: Vector,
    },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } | Region::Shell { center, .. } => center.len(),
            Region::Box { lo, .. } => lo.len(),
        }
    }

    pub fn center(&self) -> Vector {
        match self {
            Region::Ball { center, .. } | Region::Shell { center, .. } => center.clone(),
            Region::Box { lo, hi } => (lo + hi) * 0.5,
        }
    }

    /// The same region translated to `center`.
    pub fn with_center(&self, c: Vector) -> Region {
        match self {
            Region::Ball { radius, .. } => Region::Ball {
                center: c,
                radius: *radius,
            },
            Region::Shell { inner, outer, .. } => Region::Shell {
                center: c,
                inner: *inner,
                outer: *outer,
            },
            Region::Box { lo, hi } => {
                let shift = &c - (lo + hi) * 0.5;
                Region::Box {
                    lo: lo + &shift,
                    hi: hi + shift,
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Region::Ball { radius, .. } => *radius > 0.0 && radius.is_finite(),
            Region::Shell { inner, outer, .. } => *inner >= 0.0 && inner < outer && outer.is_finite(),
            Region::Box { lo, hi } => lo.len() == hi.len() && lo.iter().zip(hi.iter()).all(|(a, b)| a < b),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid sampling region {self:?}")))
        }
    }
}

/// A union of regions sampled round-robin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingDomain {
    pub regions: Vec<Region>,
}

/// A sample point with the length scale of the region it came from.
#[derive(Debug, Clone)]
pub struct Sample {
    pub x: Vector,
    pub scale: f64,
}

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Halton sequence with a seeded Cranley-Patterson rotation.
struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    fn new(dims: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(dims <= PRIMES.len(), "dimension too large for the Halton table");
        Self {
            shift: (0..dims).map(|_| rng.random::<f64>()).collect(),
            index: 0,
        }
    }

    fn next(&mut self) -> Vec<f64> {
        self.index += 1;
        self.shift
            .iter()
            .enumerate()
            .map(|(k, s)| (radical_inverse(self.index, PRIMES[k]) + s).fract())
            .collect()
    }
}

struct RegionSampler {
    region: Region,
    halton: Halton,
}

impl RegionSampler {
    fn new(region: Region, rng: &mut ChaCha8Rng) -> Self {
        let d = region.dim();
        Self {
            halton: Halton::new(d + 1, rng),
            region,
        }
    }

    /// A point of the open unit ball, by rejection from the cube.
    fn unit_ball_point(&mut self) -> (Vector, f64) {
        loop {
            let u = self.halton.next();
            let p = Vector::from_iterator(u.len() - 1, u[1..].iter().map(|t| 2.0 * t - 1.0));
            let n = p.norm();
            if n < 1.0 && n > 1e-3 {
                return (p, u[0]);
            }
        }
    }

    fn next(&mut self) -> Sample {
        match self.region.clone() {
            Region::Ball { center, radius } => {
                let (p, _) = self.unit_ball_point();
                Sample {
                    x: center + p * radius,
                    scale: radius,
                }
            }
            Region::Shell {
                center,
                inner,
                outer,
            } => {
                let (p, t) = self.unit_ball_point();
                let rho = if inner > 0.0 {
                    inner * (outer / inner).powf(t)
                } else {
                    outer * t
                };
                let dir = &p / p.norm();
                Sample {
                    x: center + dir * rho,
                    scale: rho.max(f64::MIN_POSITIVE),
                }
            }
            Region::Box { lo, hi } => {
                let u = self.halton.next();
                let x = Vector::from_fn(lo.len(), |i, _| lo[i] + (hi[i] - lo[i]) * u[i]);
                let scale = (&hi - &lo).min();
                Sample { x, scale }
            }
        }
    }
}

impl SamplingDomain {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidParameter("empty sampling domain".into()));
        }
        let d = regions[0].dim();
        for r in &regions {
            r.validate()?;
            if r.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.dim(),
                });
            }
        }
        Ok(Self { regions })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        Self::new(vec![Region::Ball { center, radius }])
    }

    /// The map's own non-rigid regions plus `extra`.
    pub fn for_map(m: &SmoothMap, extra: Vec<Region>) -> Result<Self> {
        let mut regions = m.sampling_regions();
        regions.extend(extra);
        if regions.is_empty() {
            regions.push(Region::Ball {
                center: Vector::zeros(m.dim()),
                radius: 1.0,
            });
        }
        Self::new(regions)
    }

    pub fn dim(&self) -> usize {
        self.regions[0].dim()
    }

    /// `n` deterministic samples, round-robin over the regions.
    pub fn samples(&self, n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samplers: Vec<RegionSampler> = self
            .regions
            .iter()
            .map(|r| RegionSampler::new(r.clone(), &mut rng))
            .collect();
        let k = samplers.len();
        (0..n).map(|i| samplers[i % k].next()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Max over samples of `max(σ_max, 1/σ_min) - 1` for the Jacobian.
    pub epsilon_measured: f64,
    pub worst_point: Vec<f64>,
    pub samples: usize,
    /// The same quantity from function values on short segments.
    pub pairwise_epsilon: f64,
    pub budget: f64,
    pub within_budget: bool,
}

/// Distortion of a Jacobian: `max(σ_max, 1/σ_min) - 1`.
pub fn jacobian_distortion(j: &crate::geometry::Matrix) -> f64 {
    let sv = j.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) {
        return f64::INFINITY;
    }
    (smax.max(1.0 / smin) - 1.0).max(0.0)
}

fn unit_direction(rng: &mut ChaCha8Rng, d: usize) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn verify_distortion(
    m: &SmoothMap,
    domain: &SamplingDomain,
    budget: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_SAMPLES} samples are required, got {n_samples}"
        )));
    }
    if domain.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: domain.dim(),
        });
    }
    let samples = domain.samples(n_samples, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut worst = -1.0;
    let mut worst_point = samples[0].x.clone();
    let mut pairwise: f64 = 0.0;
    for s in &samples {
        let e = jacobian_distortion(&m.jac(&s.x));
        if e > worst {
            worst = e;
            worst_point = s.x.clone();
        }
        let u = unit_direction(&mut rng, m.dim());
        let h = (1e-6 * s.scale).max(1e-7 * (1.0 + s.x.norm()));
        let ratio = (m.apply(&(&s.x + &u * h)) - m.apply(&s.x)).norm() / h;
        if ratio > 0.0 {
            pairwise = pairwise.max(ratio.max(1.0 / ratio) - 1.0);
        } else {
            pairwise = f64::INFINITY;
        }
    }
    Ok(DistortionReport {
        epsilon_measured: worst,
        worst_point: worst_point.as_slice().to_vec(),
        samples: n_samples,
        pairwise_epsilon: pairwise,
        budget,
        within_budget: worst <= budget,
    })
}

/// `max_i |m(y_i) - z_i|`.
pub fn verify_interpolation(m: &SmoothMap, c: &Correspondence) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (y, z) in c.source().points().iter().zip(c.target().points()) {
        worst = worst.max((m.eval(y)? - z).norm());
    }
    Ok(worst)
}

/// `max |m(x) - A(x)|` over samples of `region`.
pub fn verify_motion_agreement(
    m: &SmoothMap,
    region: &Region,
    a: &EuclideanMotion,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let domain = SamplingDomain::new(vec![region.clone()])?;
    if domain.dim() != m.dim() || a.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: domain.dim(),
        });
    }
    Ok(domain
        .samples(n_samples, seed)
        .iter()
        .map(|s| (m.apply(&s.x) - a.apply(&s.x)).norm())
        .fold(0.0, f64::max))
}

/// Smallest `|m(x) - m(y)| / |x - y|` over random pairs (half of them spread
/// across the domain, half at separation `1e-3` of the local scale).
pub fn probe_injectivity(
    m: &SmoothMap,
    domain: &SamplingDomain,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if domain.dim() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: domain.dim(),
        });
    }
    let samples = domain.samples(n_pairs + 1, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut ratio = f64::INFINITY;
    for i in 0..n_pairs {
        let x = &samples[i].x;
        let y = if i % 2 == 0 {
            samples[rng.random_range(0..samples.len())].x.clone()
        } else {
            let u = unit_direction(&mut rng, m.dim());
            x + u * (1e-3 * samples[i].scale)
        };
        let dx = (x - &y).norm();
        if dx == 0.0 {
            continue;
        }
        ratio = ratio.min((m.apply(x) - m.apply(&y)).norm() / dx);
    }
    Ok(ratio)
}
