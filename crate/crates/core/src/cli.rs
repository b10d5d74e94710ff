//! Command-line front end.
//!
//! Exit codes: 0 success, 2 malformed input or parameters, 3 infeasible,
//! 4 negative block, 5 delta too large, 6 verification over budget.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::alignment::{best_motion, best_proper_motion, exact_motion, Correspondence};
use crate::clustering::cluster;
use crate::error::Error;
use crate::extension::{
    check_extendability_by_subsets, check_extendability_with, extend_with, ExtensionConfig,
};
use crate::geometry::{EuclideanMotion, PointConfig, Vector};
use crate::smooth_maps::SmoothMap;
use crate::verifier::{probe_injectivity, verify_distortion, DistortionReport, SamplingDomain};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NEGATIVE_BLOCK: i32 = 4;
pub const EXIT_DELTA: i32 = 5;
pub const EXIT_OVER_BUDGET: i32 = 6;

pub const SEED_ENV: &str = "ISOEXT_SEED";

#[derive(Parser, Debug)]
#[command(name = "isoext", version, about = "Extend almost-isometries of finite point sets")]
struct Cli {
    /// Sampling seed; the ISOEXT_SEED environment variable takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a Euclidean motion to a correspondence.
    Align {
        input: PathBuf,
        #[arg(long)]
        proper: bool,
        /// Require an exact isometry.
        #[arg(long)]
        exact: bool,
    },
    /// Build an ε-distorted extension and write the map.
    Extend {
        input: PathBuf,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the full report, map included.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Decide extendability from the block scan.
    Check {
        input: PathBuf,
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        subsets: bool,
    },
    /// Evaluate a serialized map on points or a grid.
    Eval {
        map: PathBuf,
        /// JSON list of points, `{"points": [...]}`, or a correspondence file.
        points: Option<PathBuf>,
        /// `LO:HI:N`, the same on every axis.
        #[arg(long, conflicts_with = "points", allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure distortion and probe injectivity of a serialized map.
    Verify {
        map: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pigeonhole clustering of the source points.
    Cluster {
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
}

#[derive(Args, Debug)]
struct Params {
    #[arg(long)]
    epsilon: f64,
    /// Override the derived block level η.
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrespondenceFile {
    pub dimension: usize,
    pub source: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl CorrespondenceFile {
    pub fn to_correspondence(&self) -> crate::Result<Correspondence> {
        if self.source.len() != self.target.len() {
            return Err(Error::InvalidInput(format!(
                "source has {} points, target has {}",
                self.source.len(),
                self.target.len()
            )));
        }
        if let Some(l) = &self.labels {
            if l.len() != self.source.len() {
                return Err(Error::InvalidInput("labels length differs from points".into()));
            }
        }
        for p in self.source.iter().chain(&self.target) {
            if p.len() != self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension,
                    found: p.len(),
                });
            }
        }
        Correspondence::from_rows(&self.source, &self.target)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointsFile {
    List(Vec<Vec<f64>>),
    Wrapped { points: Vec<Vec<f64>> },
    Correspondence(CorrespondenceFile),
}

#[derive(Serialize)]
struct AlignOutput {
    motion: EuclideanMotion,
    residual: f64,
    orientation: i8,
}

#[derive(Serialize)]
struct ExtendSummary {
    measured_distortion: f64,
    epsilon_budget: f64,
    interpolation_residual: f64,
    orientation: i8,
    recursion_depth: usize,
    far_radius: f64,
    far_motion: EuclideanMotion,
}

#[derive(Serialize)]
struct EvalOutput {
    points: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct VerifyOutput {
    distortion: DistortionReport,
    injectivity_ratio: f64,
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::InvalidInput(_)
            | Error::InvalidParameter(_)
            | Error::InvalidSpec(_)
            | Error::DimensionMismatch { .. } => EXIT_INPUT,
            Error::NegativeBlockDetected { .. } => EXIT_NEGATIVE_BLOCK,
            Error::DeltaTooLarge { .. } => EXIT_DELTA,
            _ => EXIT_INFEASIBLE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_failure(message: String) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message,
    }
}

fn to_json<T: Serialize + ?Sized>(v: &T) -> Result<String, Failure> {
    crate::json::to_string(v).map_err(|e| input_failure(format!("serialization failed: {e}")))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_failure(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| input_failure(format!("malformed JSON in {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, format!("{text}\n"))
        .map_err(|e| input_failure(format!("cannot write {}: {e}", path.display())))
}

fn load_correspondence(path: &Path) -> Result<Correspondence, Failure> {
    Ok(read_json::<CorrespondenceFile>(path)?.to_correspondence()?)
}

fn config(params: &Params, seed: u64, samples: Option<usize>) -> ExtensionConfig {
    let mut cfg = ExtensionConfig {
        eta_override: params.eta,
        seed,
        ..ExtensionConfig::default()
    };
    if let Some(n) = samples {
        cfg.verify_samples = n;
    }
    cfg
}

fn parse_grid(spec: &str, dim: usize) -> Result<Vec<Vector>, Failure> {
    let bad = || input_failure(format!("grid must be LO:HI:N, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !(lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    let total = n
        .checked_pow(dim as u32)
        .filter(|&t| t <= 10_000_000)
        .ok_or_else(|| input_failure("grid too large".into()))?;
    let coord = |i: usize| {
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    Ok((0..total)
        .map(|mut k| {
            Vector::from_fn(dim, |_, _| {
                let i = k % n;
                k /= n;
                coord(i)
            })
        })
        .collect())
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, Failure> {
    let seed = std::env::var(SEED_ENV)
        .ok()
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| input_failure(format!("{SEED_ENV} must be an unsigned integer")))
        })
        .transpose()?
        .or(cli.seed)
        .unwrap_or(crate::verifier::DEFAULT_SEED);
    let mut emit = |text: String| {
        writeln!(out, "{text}").map_err(|e| input_failure(format!("cannot write output: {e}")))
    };
    match cli.command {
        Command::Align {
            input,
            proper,
            exact,
        } => {
            let c = load_correspondence(&input)?;
            let (motion, residual) = if exact {
                let m = exact_motion(&c, proper)?;
                let r = c
                    .source()
                    .points()
                    .iter()
                    .zip(c.target().points())
                    .map(|(y, z)| (z - m.apply(y)).norm())
                    .fold(0.0, f64::max);
                (m, r)
            } else if proper {
                best_proper_motion(&c)?
            } else {
                best_motion(&c)?
            };
            emit(to_json(&AlignOutput {
                orientation: motion.orientation(),
                motion,
                residual,
            })?)?;
        }
        Command::Extend {
            input,
            params,
            out: map_out,
            report,
            samples,
        } => {
            let c = load_correspondence(&input)?;
            let cfg = config(&params, seed, Some(samples));
            let r = match extend_with(&c, params.epsilon, &cfg) {
                Ok(r) => r,
                Err(e) => {
                    if let Error::NegativeBlockDetected { .. } = e.root() {
                        // Name both witnesses when the set is obstructed.
                        if let Ok(v) = check_extendability_with(&c, params.epsilon, &cfg) {
                            emit(to_json(&v)?)?;
                        }
                    }
                    return Err(e.into());
                }
            };
            if let Some(p) = map_out {
                write_file(&p, &to_json(&r.map)?)?;
            }
            if let Some(p) = report {
                write_file(&p, &to_json(&r)?)?;
            }
            emit(to_json(&ExtendSummary {
                measured_distortion: r.measured_distortion,
                epsilon_budget: r.epsilon_budget,
                interpolation_residual: r.interpolation_residual,
                orientation: r.orientation,
                recursion_depth: r.recursion_depth,
                far_radius: r.far_radius,
                far_motion: r.far_motion,
            })?)?;
        }
        Command::Check {
            input,
            params,
            subsets,
        } => {
            let c = load_correspondence(&input)?;
            let cfg = config(&params, seed, None);
            let v = if subsets {
                check_extendability_by_subsets(&c, params.epsilon, &cfg)?
            } else {
                check_extendability_with(&c, params.epsilon, &cfg)?
            };
            emit(to_json(&v)?)?;
        }
        Command::Eval {
            map,
            points,
            grid,
            out: eval_out,
        } => {
            let m: SmoothMap = read_json(&map)?;
            let xs: Vec<Vector> = match (points, grid) {
                (Some(p), None) => {
                    let rows = match read_json::<PointsFile>(&p)? {
                        PointsFile::List(r) | PointsFile::Wrapped { points: r } => r,
                        PointsFile::Correspondence(f) => {
                            f.to_correspondence()?;
                            f.source
                        }
                    };
                    PointConfig::from_rows(&rows)?.points().to_vec()
                }
                (None, Some(g)) => parse_grid(&g, m.dim())?,
                _ => return Err(input_failure("eval needs a points file or --grid".into())),
            };
            let images = xs
                .iter()
                .map(|x| m.eval(x).map(|y| y.as_slice().to_vec()))
                .collect::<crate::Result<Vec<_>>>()?;
            let text = to_json(&EvalOutput {
                points: xs.iter().map(|x| x.as_slice().to_vec()).collect(),
                images,
            })?;
            match eval_out {
                Some(p) => write_file(&p, &text)?,
                None => emit(text)?,
            }
        }
        Command::Verify {
            map,
            epsilon,
            samples,
            out: report_out,
        } => {
            let m: SmoothMap = read_json(&map)?;
            let domain = SamplingDomain::for_map(&m, vec![])?;
            let distortion = verify_distortion(&m, &domain, epsilon, samples, seed)?;
            let injectivity_ratio = probe_injectivity(&m, &domain, samples, seed)?;
            let within = distortion.within_budget;
            let text = to_json(&VerifyOutput {
                distortion,
                injectivity_ratio,
            })?;
            match report_out {
                Some(p) => write_file(&p, &text)?,
                None => emit(text)?,
            }
            if !within {
                return Ok(EXIT_OVER_BUDGET);
            }
        }
        Command::Cluster { input, epsilon } => {
            let c = load_correspondence(&input)?;
            emit(to_json(&cluster(c.source(), epsilon)?)?)?;
        }
    }
    Ok(EXIT_OK)
}

/// Runs the CLI and returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("isoext").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn grid_has_n_to_the_d_points() {
        let g = parse_grid("-1:1:5", 3).ok().unwrap();
        assert_eq!(g.len(), 125);
        assert_eq!(g[0], Vector::from_row_slice(&[-1., -1., -1.]));
        assert_eq!(g[124], Vector::from_row_slice(&[1., 1., 1.]));
        assert!(parse_grid("0:1", 2).is_err());
        assert!(parse_grid("0:1:0", 2).is_err());
    }

    #[test]
    fn bad_arguments_exit_two() {
        assert_eq!(run_args(&["extend"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["align", "/nonexistent.json"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let f = CorrespondenceFile {
            dimension: 2,
            source: vec![vec![0., 0.], vec![1., 0.]],
            target: vec![vec![0., 0.]],
            labels: None,
        };
        assert!(matches!(f.to_correspondence(), Err(Error::InvalidInput(_))));
        let g = CorrespondenceFile {
            dimension: 3,
            source: vec![vec![0., 0.]],
            target: vec![vec![0., 0.]],
            labels: None,
        };
        assert!(matches!(
            g.to_correspondence(),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exit_codes_follow_error_kinds() {
        let code = |e: Error| Failure::from(e).code;
        assert_eq!(code(Error::InvalidParameter("x".into())), EXIT_INPUT);
        assert_eq!(code(Error::OrientationInfeasible), EXIT_INFEASIBLE);
        assert_eq!(
            code(Error::NegativeBlockDetected { witness: None }.at_path(1)),
            EXIT_NEGATIVE_BLOCK
        );
        assert_eq!(
            code(Error::DeltaTooLarge {
                guard: "delta".into(),
                value: 1.0,
                limit: 0.1
            }),
            EXIT_DELTA
        );
    }
}
