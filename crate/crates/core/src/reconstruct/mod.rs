//! Image recovery from bucket measurements: a correlation baseline, an
//! exact least-squares inverse, and a total-variation regularized solver.
//!
//! All three model the detector reading as `A x + d` with an unknown
//! constant offset `d`. Binary patterns have a large mean component, and
//! any part of the scene lit identically by every pattern (the secret
//! region under superposed pattern shares) contributes only to `d`.

mod correlation;
mod lsq;
pub mod metrics;
mod operator;
pub mod tv;

use serde::{Deserialize, Serialize};

pub use correlation::reconstruct_correlation;
pub use lsq::{reconstruct_lsq, solve_lsq, LsqSolution};
pub use operator::SensingMatrix;
pub use tv::{IterRecord, TvProblem, TvSolution};

use crate::error::{Error, Result};
use crate::imaging::{Image, MeasurementSeries, PatternSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Correlation,
    LeastSquares,
    #[default]
    Tv,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "correlation" => Ok(Method::Correlation),
            "lsq" | "least-squares" => Ok(Method::LeastSquares),
            "tv" => Ok(Method::Tv),
            _ => Err(Error::InvalidValue(format!("method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepPolicy {
    Fixed(f64),
    #[default]
    Backtracking,
}

/// Multiplier in the default TV weight
/// `lambda = 0.05 * mean|y| / pixel_count`.
pub const DEFAULT_LAMBDA_FACTOR: f64 = 0.05;

/// TV smoothing as a fraction of the estimated image dynamic range.
pub const SMOOTHING_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    /// TV weight; `None` selects the data-driven default.
    pub lambda: Option<f64>,
    pub max_iters: usize,
    pub step_policy: StepPolicy,
    pub nonneg: bool,
    /// Optional upper bound on every pixel, for scenes whose peak intensity
    /// is known.
    pub upper: Option<f64>,
    pub tol: f64,
    #[serde(skip)]
    pub record_log: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Tv,
            lambda: None,
            max_iters: 3000,
            step_policy: StepPolicy::Backtracking,
            nonneg: true,
            upper: None,
            tol: 1e-10,
            record_log: false,
        }
    }
}

impl SolverConfig {
    pub fn tv() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidValue(format!("lambda {l}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidValue("max_iters must be at least 1".into()));
        }
        if let Some(u) = self.upper {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::InvalidValue(format!("upper bound {u}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidValue(format!("tol {}", self.tol)));
        }
        if let StepPolicy::Fixed(s) = self.step_policy {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidValue(format!("fixed step {s}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_lengths(series: &MeasurementSeries, patterns: &PatternSequence) -> Result<()> {
    if series.len() != patterns.count() {
        return Err(Error::LengthMismatch {
            expected: patterns.count(),
            actual: series.len(),
        });
    }
    Ok(())
}

pub fn default_lambda(series: &MeasurementSeries, pixels: usize) -> f64 {
    let mean_abs = series.values.iter().map(|v| v.abs()).sum::<f64>() / series.len().max(1) as f64;
    DEFAULT_LAMBDA_FACTOR * mean_abs / pixels as f64
}

/// Rough dynamic range of the scene: twice the mean pixel intensity implied
/// by the mean reading and the mean number of lit pixels per pattern.
pub fn estimated_range(series: &MeasurementSeries, patterns: &PatternSequence) -> f64 {
    let lit: f64 = patterns
        .patterns()
        .iter()
        .map(|p| p.count_ones() as f64)
        .sum::<f64>()
        / patterns.count() as f64;
    let mean_y = series.values.iter().map(|v| v.abs()).sum::<f64>() / series.len().max(1) as f64;
    if lit > 0.0 {
        2.0 * mean_y / lit
    } else {
        0.0
    }
}

/// Result of [`reconstruct`]: the image plus whatever diagnostics the
/// method produces.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: Image,
    pub offset: Option<f64>,
    pub log: Vec<IterRecord>,
    pub iterations: usize,
}

pub fn reconstruct_tv_full(
    series: &MeasurementSeries,
    patterns: &PatternSequence,
    cfg: &SolverConfig,
) -> Result<TvSolution> {
    check_lengths(series, patterns)?;
    cfg.validate()?;
    let (w, h) = patterns.dims();
    let op = SensingMatrix::new(patterns);
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(series, w * h));
    let range = estimated_range(series, patterns);
    let eps = SMOOTHING_FRACTION * if range > 0.0 { range } else { 1.0 };
    let problem = TvProblem::new(&op, &series.values, w, h, lambda, eps);
    problem.solve(&vec![0.0; w * h], cfg)
}

pub fn reconstruct_tv(
    series: &MeasurementSeries,
    patterns: &PatternSequence,
    cfg: &SolverConfig,
) -> Result<Image> {
    if cfg.method != Method::Tv {
        return Err(Error::InvalidValue(format!(
            "method {:?} passed to TV solver",
            cfg.method
        )));
    }
    let sol = reconstruct_tv_full(series, patterns, cfg)?;
    Image::from_clamped(patterns.width(), patterns.height(), sol.image)
}

/// Dispatches on `cfg.method`.
pub fn reconstruct(
    series: &MeasurementSeries,
    patterns: &PatternSequence,
    cfg: &SolverConfig,
) -> Result<Reconstruction> {
    match cfg.method {
        Method::Correlation => Ok(Reconstruction {
            image: reconstruct_correlation(series, patterns)?,
            offset: None,
            log: Vec::new(),
            iterations: 0,
        }),
        Method::LeastSquares => {
            let sol = solve_lsq(series, patterns)?;
            Ok(Reconstruction {
                image: Image::from_clamped(patterns.width(), patterns.height(), sol.image)?,
                offset: Some(sol.offset),
                log: Vec::new(),
                iterations: 0,
            })
        }
        Method::Tv => {
            let sol = reconstruct_tv_full(series, patterns, cfg)?;
            Ok(Reconstruction {
                image: Image::from_clamped(patterns.width(), patterns.height(), sol.image)?,
                offset: Some(sol.offset),
                log: sol.log,
                iterations: sol.iterations,
            })
        }
    }
}
