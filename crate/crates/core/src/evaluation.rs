//! Error statistics against ground truth. Errors are always truth minus
//! estimate, in degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit_bias_model, BiasModel};
use crate::kalman::{residual_whiteness_pooled, Whiteness, DEFAULT_MAX_LAG, MIN_WHITENESS_SAMPLES};
use crate::pipeline::GradeTrack;
use crate::stats::{linear_fit, mean, sample_std, LinearFit};

pub const DEFAULT_BIN_WIDTH: f64 = 5.0;
pub const MIN_BIN_COUNT: usize = 5;

/// One line of the per-waypoint output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRow {
    pub index: usize,
    pub truth_deg: Option<f64>,
    pub raw_deg: Option<f64>,
    pub filtered_deg: Option<f64>,
    pub residual_deg: Option<f64>,
    pub delta_frames: Option<i64>,
    pub emission_range_m: Option<f64>,
}

impl WaypointRow {
    /// Filtered error where both truth and an initialized filter exist.
    pub fn error(&self) -> Option<f64> {
        Some(self.truth_deg? - self.filtered_deg?)
    }

    pub fn raw_error(&self) -> Option<f64> {
        Some(self.truth_deg? - self.raw_deg?)
    }
}

/// Joins ground truth with a track, one row per waypoint of the longer of
/// the two.
pub fn waypoint_rows(truth: &[f64], track: &GradeTrack) -> Vec<WaypointRow> {
    let n = truth.len().max(track.len());
    (0..n)
        .map(|k| {
            let entry = track.entries.get(k);
            let raw = entry.and_then(|e| e.raw.as_ref());
            let filtered = entry.and_then(|e| e.filtered).filter(|f| f.initialized);
            WaypointRow {
                index: k,
                truth_deg: truth.get(k).copied(),
                raw_deg: raw.map(|r| r.theta_deg),
                filtered_deg: filtered.map(|f| f.theta),
                residual_deg: filtered.and_then(|f| f.residual),
                delta_frames: raw.map(|r| r.delta_frames),
                emission_range_m: raw.map(|r| r.emission_range),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl GaussianFit {
    /// Moment match: sample mean and unbiased standard deviation.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let m = mean(xs).ok_or_else(|| Error::Alignment("no samples to fit".into()))?;
        Ok(Self {
            n: xs.len(),
            mean: m,
            std: sample_std(xs).unwrap_or(0.0),
        })
    }
}

/// Per-waypoint filtered errors and their Gaussian fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub indices: Vec<usize>,
    pub errors: Vec<f64>,
    pub fit: GaussianFit,
}

/// Errors at waypoints with both truth and an initialized filtered grade.
pub fn compute_errors(truth: &[f64], track: &GradeTrack) -> Result<ErrorSummary> {
    errors_from_rows(&waypoint_rows(truth, track))
}

pub fn errors_from_rows(rows: &[WaypointRow]) -> Result<ErrorSummary> {
    let (indices, errors): (Vec<usize>, Vec<f64>) =
        rows.iter().filter_map(|r| Some((r.index, r.error()?))).unzip();
    if errors.is_empty() {
        return Err(Error::Alignment("truth and estimates share no waypoints".into()));
    }
    Ok(ErrorSummary {
        fit: GaussianFit::from_samples(&errors)?,
        indices,
        errors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Standard deviation of |error|; absent when the bin holds fewer than
    /// [`MIN_BIN_COUNT`] samples.
    pub abs_error_std: Option<f64>,
}

impl RangeBin {
    pub fn populated(&self) -> bool {
        self.abs_error_std.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeBinning {
    pub width: f64,
    pub bins: Vec<RangeBin>,
    pub mean_range: Option<f64>,
}

impl RangeBinning {
    /// Largest over smallest populated-bin std, if two or more are populated.
    pub fn spread_ratio(&self) -> Option<f64> {
        let stds: Vec<f64> = self.bins.iter().filter_map(|b| b.abs_error_std).collect();
        if stds.len() < 2 {
            return None;
        }
        let lo = stds.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = stds.iter().copied().fold(0.0, f64::max);
        Some(hi / lo)
    }
}

/// Bins `(range, error)` pairs over `[k w, (k + 1) w)`.
pub fn bin_by_range(samples: &[(f64, f64)], width: f64) -> Result<RangeBinning> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::config("bin_width", format!("must be > 0, got {width}")));
    }
    let ranges: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let Some(top) = samples.iter().map(|s| (s.0 / width).floor() as i64).max() else {
        return Ok(RangeBinning {
            width,
            bins: Vec::new(),
            mean_range: None,
        });
    };
    let bottom = samples.iter().map(|s| (s.0 / width).floor() as i64).min().unwrap_or(0);
    let mut groups = vec![Vec::new(); (top - bottom + 1) as usize];
    for (range, error) in samples {
        groups[((range / width).floor() as i64 - bottom) as usize].push(error.abs());
    }
    let bins = groups
        .into_iter()
        .enumerate()
        .map(|(k, g)| {
            let lower = (bottom + k as i64) as f64 * width;
            RangeBin {
                lower,
                upper: lower + width,
                count: g.len(),
                abs_error_std: (g.len() >= MIN_BIN_COUNT).then(|| sample_std(&g).unwrap_or(0.0)),
            }
        })
        .collect();
    Ok(RangeBinning {
        width,
        bins,
        mean_range: mean(&ranges),
    })
}

/// Emission range and error of the emitted (bias-corrected, unfiltered)
/// estimate at every waypoint with truth.
pub fn range_samples(rows: &[WaypointRow]) -> Vec<(f64, f64)> {
    rows.iter()
        .filter_map(|r| Some((r.emission_range_m?, r.raw_error()?)))
        .collect()
}

/// Emission range paired with the filtered error at the same waypoint.
pub fn filtered_range_samples(rows: &[WaypointRow]) -> Vec<(f64, f64)> {
    rows.iter()
        .filter_map(|r| Some((r.emission_range_m?, r.error()?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub n: usize,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
    /// Frame time regressed on waypoints held by the filter.
    pub growth: Option<LinearFit>,
}

pub fn timing_stats(times_ms: &[f64], filter_lens: &[usize]) -> Result<TimingStats> {
    let mean_ms = mean(times_ms).ok_or_else(|| Error::InsufficientData("no frame times".into()))?;
    let growth = if filter_lens.len() == times_ms.len() {
        let xs: Vec<f64> = filter_lens.iter().map(|&n| n as f64).collect();
        linear_fit(&xs, times_ms).ok()
    } else {
        None
    };
    Ok(TimingStats {
        n: times_ms.len(),
        min_ms: times_ms.iter().copied().fold(f64::INFINITY, f64::min),
        mean_ms,
        max_ms: times_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        growth,
    })
}

/// Everything the text and CSV reports are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub filtered: GaussianFit,
    pub raw: Option<GaussianFit>,
    /// Emitted-estimate error binned by emission range.
    pub ranges: RangeBinning,
    pub filtered_ranges: RangeBinning,
    pub whiteness: Option<Whiteness>,
    pub timing: Option<TimingStats>,
    pub emitted: usize,
    pub waypoints: usize,
}

impl ErrorReport {
    pub fn build(rows: &[WaypointRow], timing: Option<TimingStats>) -> Result<Self> {
        let summary = errors_from_rows(rows)?;
        let raw_errors: Vec<f64> = rows.iter().filter_map(WaypointRow::raw_error).collect();
        let residuals: Vec<f64> = rows.iter().filter_map(|r| r.residual_deg).collect();
        let whiteness = (residuals.len() >= MIN_WHITENESS_SAMPLES)
            .then(|| residual_whiteness_pooled(&[residuals], DEFAULT_MAX_LAG))
            .transpose()?;
        Ok(Self {
            filtered: summary.fit,
            raw: GaussianFit::from_samples(&raw_errors).ok(),
            ranges: bin_by_range(&range_samples(rows), DEFAULT_BIN_WIDTH)?,
            filtered_ranges: bin_by_range(&filtered_range_samples(rows), DEFAULT_BIN_WIDTH)?,
            whiteness,
            timing,
            emitted: rows.iter().filter(|r| r.raw_deg.is_some()).count(),
            waypoints: rows.len(),
        })
    }
}

/// `(frame lag, truth - uncorrected raw)` for every emitted waypoint with
/// ground truth.
pub fn bias_samples(track: &GradeTrack, truth: &[f64]) -> Vec<(i64, f64)> {
    track
        .raw_estimates()
        .filter_map(|r| Some((r.delta_frames, truth.get(r.waypoint_index)? - r.theta_deg)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFitReport {
    pub model: BiasModel,
    pub front_samples: usize,
    pub rear_samples: usize,
    pub zero_lag_samples: usize,
    /// Variance of the bias-corrected raw error, deg^2. A data-driven
    /// choice for the measurement variance.
    pub residual_variance: f64,
    pub samples: Vec<(i64, f64)>,
}

impl BiasFitReport {
    pub fn from_samples(samples: Vec<(i64, f64)>) -> Result<Self> {
        let model = fit_bias_model(&samples)?;
        let corrected: Vec<f64> = samples.iter().map(|&(df, e)| e - model.correction(df)).collect();
        let residual_variance = sample_std(&corrected).map(|s| s * s).unwrap_or(0.0);
        Ok(Self {
            model,
            front_samples: samples.iter().filter(|s| s.0 > 0).count(),
            rear_samples: samples.iter().filter(|s| s.0 < 0).count(),
            zero_lag_samples: samples.iter().filter(|s| s.0 == 0).count(),
            residual_variance,
            samples,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{RawGradeEstimate, SlotStatus};
    use crate::kalman::FilterOutput;
    use crate::pipeline::TrackEntry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn output(k: usize, theta: f64) -> FilterOutput {
        FilterOutput {
            waypoint_index: k,
            theta,
            rate: 0.0,
            residual: Some(0.0),
            innovation_variance: Some(1.0),
            predicted_only: false,
            covariance_trace: 1.0,
            initialized: true,
        }
    }

    fn raw(k: usize, theta: f64, range: f64, df: i64) -> RawGradeEstimate {
        RawGradeEstimate {
            waypoint_index: k,
            theta_deg: theta,
            delta_frames: df,
            mean_front_z: 0.0,
            mean_rear_z: 0.0,
            emission_frame: 0,
            emission_range: range,
            front_points: 1,
            rear_points: 1,
        }
    }

    fn track(estimates: &[f64]) -> GradeTrack {
        GradeTrack {
            entries: estimates
                .iter()
                .enumerate()
                .map(|(k, &t)| TrackEntry {
                    waypoint_index: k,
                    raw: Some(raw(k, t, 50.0, 1)),
                    filtered: Some(output(k, t)),
                    status: SlotStatus::Emitted,
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_estimates_have_zero_error() {
        let truth = [0.5, 1.0, -0.3];
        let s = compute_errors(&truth, &track(&truth)).unwrap();
        assert_eq!(s.fit.mean, 0.0);
        assert_eq!(s.fit.std, 0.0);
    }

    #[test]
    fn offset_estimate_sign() {
        let truth = [0.5, 1.0, -0.3, 2.0];
        let est: Vec<f64> = truth.iter().map(|t| t + 1.0).collect();
        let s = compute_errors(&truth, &track(&est)).unwrap();
        assert_close!(s.fit.mean, -1.0, 1e-12);
        assert_close!(s.fit.std, 0.0, 1e-12);
    }

    #[test]
    fn no_overlap_is_alignment_error() {
        let mut t = track(&[1.0, 2.0]);
        for e in &mut t.entries {
            e.filtered = None;
        }
        assert!(matches!(compute_errors(&[1.0, 2.0], &t), Err(Error::Alignment(_))));
        assert!(matches!(compute_errors(&[], &track(&[1.0])), Err(Error::Alignment(_))));
    }

    #[test]
    fn injected_noise_std_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 0.5).unwrap();
        let truth = vec![0.0; 2000];
        let est: Vec<f64> = truth.iter().map(|_| n.sample(&mut rng)).collect();
        let s = compute_errors(&truth, &track(&est)).unwrap();
        assert!((0.45..=0.55).contains(&s.fit.std), "{}", s.fit.std);
    }

    #[test]
    fn single_range_single_bin() {
        let samples: Vec<(f64, f64)> = (0..10).map(|k| (52.0, k as f64 * 0.1)).collect();
        let b = bin_by_range(&samples, 5.0).unwrap();
        assert_eq!(b.bins.len(), 1);
        assert_eq!(b.bins[0].lower, 50.0);
        assert_eq!(b.bins[0].count, 10);
        assert_close!(b.mean_range.unwrap(), 52.0, 1e-12);
    }

    #[test]
    fn sparse_bins_flagged() {
        let mut samples: Vec<(f64, f64)> = (0..6).map(|k| (12.0, k as f64)).collect();
        samples.push((31.0, 1.0));
        let b = bin_by_range(&samples, 5.0).unwrap();
        assert_eq!(b.bins.len(), 5);
        assert!(b.bins[0].populated());
        assert!(b.bins[1..].iter().all(|b| !b.populated()));
        assert_eq!(b.bins[2].count, 0);
        assert!(b.spread_ratio().is_none());
        assert!(bin_by_range(&samples, 0.0).is_err());
    }

    #[test]
    fn range_independent_errors_have_even_bins() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = Normal::new(0.0, 0.6).unwrap();
        let samples: Vec<(f64, f64)> = (0..6000)
            .map(|k| (20.0 + (k % 50) as f64, n.sample(&mut rng)))
            .collect();
        let b = bin_by_range(&samples, 5.0).unwrap();
        assert_eq!(b.bins.len(), 10);
        assert!(b.spread_ratio().unwrap() < 1.3);
    }

    #[test]
    fn timing_cases() {
        let t = timing_stats(&[4.0; 5], &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!((t.min_ms, t.mean_ms, t.max_ms), (4.0, 4.0, 4.0));
        let t = timing_stats(&[7.5], &[]).unwrap();
        assert_eq!((t.min_ms, t.mean_ms, t.max_ms), (7.5, 7.5, 7.5));
        assert!(timing_stats(&[], &[]).is_err());

        let lens: Vec<usize> = (0..200).map(|k| 10 + 3 * k).collect();
        let times: Vec<f64> = lens.iter().map(|&n| 2.0 + 0.05 * n as f64 + 0.01 * ((n % 7) as f64 - 3.0)).collect();
        let slope = timing_stats(&times, &lens).unwrap().growth.unwrap().slope;
        assert!((slope - 0.05).abs() < 0.05 * 0.05);
    }

    #[test]
    fn bias_samples_use_truth_minus_raw() {
        let t = track(&[1.0, 2.0]);
        let s = bias_samples(&t, &[1.5, 1.0]);
        assert_eq!(s, vec![(1, 0.5), (1, -1.0)]);
    }

    #[test]
    fn bias_fit_report_counts_sides() {
        let mut samples: Vec<(i64, f64)> = (1..=5).map(|df| (df, 0.3 * df as f64 - 1.5)).collect();
        samples.extend((1..=5).map(|df| (-df, 0.1 * df as f64)));
        samples.push((0, 0.0));
        let r = BiasFitReport::from_samples(samples).unwrap();
        assert_eq!((r.front_samples, r.rear_samples, r.zero_lag_samples), (5, 5, 1));
        assert_close!(r.model.front_slope, 0.3, 1e-12);
        assert_close!(r.residual_variance, 0.0, 1e-20);
    }
}
