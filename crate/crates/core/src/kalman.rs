//! Kalman filter over the waypoint sequence.
//!
//! State is `[grade, grade rate]` in degrees and degrees per meter with a
//! constant-rate transition over one waypoint spacing. Process noise enters
//! only the rate, which integrates to
//!
//! ```text
//! Q = q * [[ds^3/3, ds^2/2],
//!          [ds^2/2, ds    ]]
//! ```
//!
//! The scalar measurement observes the grade directly.

use nalgebra::{Matrix2, RowVector2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::EstimatorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeState {
    pub theta: f64,
    pub rate: f64,
    pub covariance: Matrix2<f64>,
}

impl GradeState {
    pub fn new(theta: f64, rate: f64, covariance: Matrix2<f64>) -> Self {
        Self {
            theta,
            rate,
            covariance,
        }
    }

    fn mean(&self) -> Vector2<f64> {
        Vector2::new(self.theta, self.rate)
    }

    fn from_mean(mean: Vector2<f64>, covariance: Matrix2<f64>) -> Self {
        Self::new(mean[0], mean[1], covariance)
    }
}

pub fn transition(spacing: f64) -> Matrix2<f64> {
    Matrix2::new(1.0, spacing, 0.0, 1.0)
}

pub fn process_noise(spacing: f64, q: f64) -> Matrix2<f64> {
    let s2 = spacing * spacing;
    q * Matrix2::new(s2 * spacing / 3.0, s2 / 2.0, s2 / 2.0, spacing)
}

pub fn predict(state: &GradeState, spacing: f64, q: f64) -> GradeState {
    let phi = transition(spacing);
    let p = phi * state.covariance * phi.transpose() + process_noise(spacing, q);
    GradeState::from_mean(phi * state.mean(), symmetrize(p))
}

/// Innovation of one measurement update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Innovation {
    /// Measurement minus predicted grade.
    pub residual: f64,
    pub variance: f64,
}

/// Scalar update with Joseph-form covariance.
pub fn update(state: &GradeState, z: f64, r: f64) -> Result<(GradeState, Innovation)> {
    let h = RowVector2::new(1.0, 0.0);
    let p = state.covariance;
    let s = p[(0, 0)] + r;
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Numerical(format!("innovation variance {s} is not positive")));
    }
    let residual = z - state.theta;
    let gain = p * h.transpose() / s;
    let mean = state.mean() + gain * residual;
    let a = Matrix2::identity() - gain * h;
    let p = a * p * a.transpose() + gain * gain.transpose() * r;
    Ok((
        GradeState::from_mean(mean, symmetrize(p)),
        Innovation { residual, variance: s },
    ))
}

fn symmetrize(p: Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (p[(0, 1)] + p[(1, 0)]);
    Matrix2::new(p[(0, 0)], off, off, p[(1, 1)])
}

/// Filter result at one waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOutput {
    pub waypoint_index: usize,
    pub theta: f64,
    pub rate: f64,
    /// `Some` exactly where a measurement was applied.
    pub residual: Option<f64>,
    pub innovation_variance: Option<f64>,
    pub predicted_only: bool,
    pub covariance_trace: f64,
    /// False before the first measurement has initialized the state.
    pub initialized: bool,
}

/// Filter state after waypoint `next_index - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterCheckpoint {
    pub next_index: usize,
    pub state: Option<GradeState>,
}

fn initial_covariance(cfg: &EstimatorConfig) -> Matrix2<f64> {
    Matrix2::new(cfg.measurement_variance, 0.0, 0.0, cfg.initial_rate_variance())
}

/// Runs the filter from a checkpoint over `measurements`, the entries for
/// waypoints `start, start + 1, ...`. Returns the outputs and the checkpoint
/// after the last entry.
pub fn run_filter_incremental(
    checkpoint: &FilterCheckpoint,
    start: usize,
    measurements: &[Option<f64>],
    cfg: &EstimatorConfig,
) -> Result<(Vec<FilterOutput>, FilterCheckpoint)> {
    if start != checkpoint.next_index {
        return Err(Error::Checkpoint {
            expected: checkpoint.next_index,
            got: start,
        });
    }
    let mut state = checkpoint.state;
    let mut outputs = Vec::with_capacity(measurements.len());
    for (offset, z) in measurements.iter().enumerate() {
        let index = start + offset;
        let prior = match (state, z) {
            (Some(s), _) => Some(predict(&s, cfg.spacing, cfg.process_noise)),
            // First measurement seeds the state at the measured grade.
            (None, Some(z)) => Some(GradeState::new(*z, 0.0, initial_covariance(cfg))),
            (None, None) => None,
        };
        let output = match (prior, z) {
            (Some(prior), Some(z)) => {
                let (posterior, innovation) = update(&prior, *z, cfg.measurement_variance)?;
                state = Some(posterior);
                FilterOutput {
                    waypoint_index: index,
                    theta: posterior.theta,
                    rate: posterior.rate,
                    residual: Some(innovation.residual),
                    innovation_variance: Some(innovation.variance),
                    predicted_only: false,
                    covariance_trace: posterior.covariance.trace(),
                    initialized: true,
                }
            }
            (Some(prior), None) => {
                state = Some(prior);
                FilterOutput {
                    waypoint_index: index,
                    theta: prior.theta,
                    rate: prior.rate,
                    residual: None,
                    innovation_variance: None,
                    predicted_only: true,
                    covariance_trace: prior.covariance.trace(),
                    initialized: true,
                }
            }
            (None, _) => FilterOutput {
                waypoint_index: index,
                theta: 0.0,
                rate: 0.0,
                residual: None,
                innovation_variance: None,
                predicted_only: true,
                covariance_trace: initial_covariance(cfg).trace(),
                initialized: false,
            },
        };
        outputs.push(output);
    }
    Ok((
        outputs,
        FilterCheckpoint {
            next_index: start + measurements.len(),
            state,
        },
    ))
}

/// Filters waypoints `0 ..= extent`, where `extent` is the last waypoint with
/// a measurement. No measurements gives no output.
pub fn run_filter(measurements: &[Option<f64>], cfg: &EstimatorConfig) -> Result<Vec<FilterOutput>> {
    let Some(extent) = measurements.iter().rposition(Option::is_some) else {
        return Ok(Vec::new());
    };
    let (outputs, _) = run_filter_incremental(
        &FilterCheckpoint::default(),
        0,
        &measurements[..=extent],
        cfg,
    )?;
    Ok(outputs)
}

/// Mean and normalized autocorrelation of a residual sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whiteness {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    /// Autocorrelation at lags `1..=autocorrelation.len()`.
    pub autocorrelation: Vec<f64>,
}

impl Whiteness {
    /// `3 / sqrt(n)`, the white-noise band for the autocorrelation.
    pub fn autocorrelation_bound(&self) -> f64 {
        3.0 / (self.n as f64).sqrt()
    }

    /// Fraction of lags whose autocorrelation lies inside the band.
    pub fn fraction_within_bound(&self) -> f64 {
        if self.autocorrelation.is_empty() {
            return 1.0;
        }
        let bound = self.autocorrelation_bound();
        let inside = self.autocorrelation.iter().filter(|r| r.abs() < bound).count();
        inside as f64 / self.autocorrelation.len() as f64
    }

    /// `|mean| <= 3 std / sqrt(n)`.
    pub fn mean_within_bound(&self) -> bool {
        self.mean.abs() <= 3.0 * self.std / (self.n as f64).sqrt()
    }
}

pub const DEFAULT_MAX_LAG: usize = 20;
pub const MIN_WHITENESS_SAMPLES: usize = 30;

pub fn residual_whiteness(residuals: &[f64], max_lag: usize) -> Result<Whiteness> {
    residual_whiteness_pooled(&[residuals], max_lag)
}

/// Whiteness of several independent residual sequences. The mean is pooled;
/// lagged products are only formed within a sequence.
pub fn residual_whiteness_pooled<S: AsRef<[f64]>>(series: &[S], max_lag: usize) -> Result<Whiteness> {
    let n: usize = series.iter().map(|s| s.as_ref().len()).sum();
    if n < MIN_WHITENESS_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_WHITENESS_SAMPLES} residuals, got {n}"
        )));
    }
    let mean = series.iter().flat_map(|s| s.as_ref()).sum::<f64>() / n as f64;
    let ss: f64 = series
        .iter()
        .flat_map(|s| s.as_ref())
        .map(|r| (r - mean).powi(2))
        .sum();
    let std = (ss / (n - 1) as f64).sqrt();
    let constant = std <= 1e-12 * mean.abs().max(1.0);
    let autocorrelation = (1..=max_lag)
        .map(|lag| {
            if constant {
                // A constant sequence is perfectly predictable.
                return 1.0;
            }
            let cross: f64 = series
                .iter()
                .map(|s| {
                    let s = s.as_ref();
                    s.iter()
                        .zip(s.iter().skip(lag))
                        .map(|(a, b)| (a - mean) * (b - mean))
                        .sum::<f64>()
                })
                .sum();
            cross / ss
        })
        .collect();
    Ok(Whiteness {
        n,
        mean,
        std,
        autocorrelation,
    })
}

/// Box-Pierce portmanteau statistic `n * sum(rho_k^2)`.
pub fn box_pierce(whiteness: &Whiteness) -> f64 {
    whiteness.n as f64 * whiteness.autocorrelation.iter().map(|r| r * r).sum::<f64>()
}

/// Process noise levels searched by [`select_process_noise`], deg^2/m^3.
pub const PROCESS_NOISE_GRID: [f64; 8] = [1e-5, 3e-5, 8.2e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoiseScore {
    pub process_noise: f64,
    /// Fraction of lags inside the white-noise band.
    pub fraction_within_bound: f64,
    pub box_pierce: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoiseChoice {
    pub process_noise: f64,
    pub scores: Vec<ProcessNoiseScore>,
}

/// Scores each candidate by the whiteness of the filter residuals over the
/// measurement sequences and picks the one with the most lags inside the
/// white-noise band, breaking ties by the smaller Box-Pierce statistic.
pub fn select_process_noise<S: AsRef<[Option<f64>]>>(
    sequences: &[S],
    cfg: &EstimatorConfig,
    candidates: &[f64],
    max_lag: usize,
) -> Result<ProcessNoiseChoice> {
    let mut scores = Vec::with_capacity(candidates.len());
    for &q in candidates {
        let trial = EstimatorConfig {
            process_noise: q,
            ..cfg.clone()
        };
        trial.validate()?;
        let mut residuals = Vec::with_capacity(sequences.len());
        for seq in sequences {
            let out = run_filter(seq.as_ref(), &trial)?;
            residuals.push(out.iter().filter_map(|o| o.residual).collect::<Vec<_>>());
        }
        let w = residual_whiteness_pooled(&residuals, max_lag)?;
        scores.push(ProcessNoiseScore {
            process_noise: q,
            fraction_within_bound: w.fraction_within_bound(),
            box_pierce: box_pierce(&w),
        });
    }
    let best = scores
        .iter()
        .min_by(|a, b| {
            b.fraction_within_bound
                .total_cmp(&a.fraction_within_bound)
                .then(a.box_pierce.total_cmp(&b.box_pierce))
        })
        .ok_or_else(|| Error::InsufficientData("no process noise candidates".into()))?;
    Ok(ProcessNoiseChoice {
        process_noise: best.process_noise,
        scores: scores.clone(),
    })
}
