//! Extension of almost-isometries: separated sets, reflection repair,
//! gluing, the recursive driver, extendability verdicts and local motions.

mod driver;
mod glue;
mod local;
mod reflection;
mod separated;
mod verdict;

use serde::{Deserialize, Serialize};

pub use driver::{extend, extend_oriented, extend_with};
pub use glue::{glue, LocalPiece};
pub use local::{approximate_by_motion, approximate_by_motion_with};
pub use reflection::{approximate_reflection, fix_set_improperly, ApproximateReflection};
pub use separated::{extend_separated, extend_separated_with};
pub use verdict::{
    check_extendability, check_extendability_by_subsets, check_extendability_with,
    ExtendabilityStatus, ExtendabilityVerdict,
};

use crate::alignment::Correspondence;
use crate::error::Result;
use crate::geometry::{EuclideanMotion, Vector};
use crate::smooth_maps::SmoothMap;
use crate::verifier::{
    verify_distortion, verify_interpolation, DistortionReport, Region, SamplingDomain,
    DEFAULT_SEED,
};

/// Named thresholds of the construction. The defaults are calibrated by the
/// acceptance suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConfig {
    /// `η = exp(-c_eta / ε)` unless `eta_override` is set.
    pub c_eta: f64,
    /// The distortion guard is `δ <= exp(-c_delta / ε)`.
    pub c_delta: f64,
    pub eta_override: Option<f64>,
    /// Best-motion residuals must satisfy `max |d_z| <= residual_guard ε τ`.
    pub residual_guard: f64,
    /// Largest accepted `card(E)`.
    pub max_points: usize,
    /// Gluing requires `|A_z(z) - A*_z(z)| <= gap_constant ε exp(-4/ε) τ`.
    pub gap_constant: f64,
    /// Samples per region for the gluing precondition checks.
    pub glue_check_samples: usize,
    /// Samples for the distortion measurement attached to reports.
    pub verify_samples: usize,
    pub seed: u64,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self {
            c_eta: 1.0,
            c_delta: 1.0,
            eta_override: None,
            residual_guard: 0.1,
            max_points: 32,
            gap_constant: 10.0,
            glue_check_samples: 64,
            verify_samples: 2000,
            seed: DEFAULT_SEED,
        }
    }
}

impl ExtensionConfig {
    pub fn eta(&self, epsilon: f64) -> f64 {
        self.eta_override
            .unwrap_or_else(|| (-self.c_eta / epsilon).exp())
    }

    pub fn delta_limit(&self, epsilon: f64) -> f64 {
        (-self.c_delta / epsilon).exp()
    }
}

/// A ball on which the constructed map is a single Euclidean motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMotion {
    #[serde(with = "crate::serde_util::vector")]
    pub center: Vector,
    pub motion: EuclideanMotion,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub map: SmoothMap,
    pub epsilon_budget: f64,
    pub measured_distortion: f64,
    pub distortion: DistortionReport,
    pub far_motion: EuclideanMotion,
    pub far_radius: f64,
    pub local_motions: Vec<LocalMotion>,
    pub interpolation_residual: f64,
    pub orientation: i8,
    pub recursion_depth: usize,
}

/// An extension before verification.
#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub map: SmoothMap,
    pub far_motion: EuclideanMotion,
    pub local_motions: Vec<LocalMotion>,
    pub depth: usize,
}

/// Domain used for the distortion measurement in reports: the map's own
/// non-rigid regions plus a ball twice the size of `E`.
pub fn report_domain(m: &SmoothMap, c: &Correspondence) -> Result<SamplingDomain> {
    let e = c.source();
    let radius = (2.0 * e.diam()).max(1e-300);
    SamplingDomain::for_map(
        m,
        vec![Region::Ball {
            center: e.centroid(),
            radius: if e.len() == 1 { 1.0 } else { radius },
        }],
    )
}

pub(crate) fn finish(
    piece: Piece,
    c: &Correspondence,
    epsilon: f64,
    cfg: &ExtensionConfig,
) -> Result<ExtensionReport> {
    let interpolation_residual = verify_interpolation(&piece.map, c)?;
    let orientation = piece.map.orientation()?;
    let domain = report_domain(&piece.map, c)?;
    let distortion = verify_distortion(
        &piece.map,
        &domain,
        epsilon,
        cfg.verify_samples.max(crate::verifier::MIN_SAMPLES),
        cfg.seed,
    )?;
    Ok(ExtensionReport {
        epsilon_budget: epsilon,
        measured_distortion: distortion.epsilon_measured,
        distortion,
        far_radius: 1e4 * c.source().diam(),
        far_motion: piece.far_motion,
        local_motions: piece.local_motions,
        interpolation_residual,
        orientation,
        recursion_depth: piece.depth,
        map: piece.map,
    })
}
