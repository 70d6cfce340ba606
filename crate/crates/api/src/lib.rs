//! JSON bodies of the road-grade HTTP service.
//!
//! Paths inside requests (`output_dir`, `data_dir`, ...) are resolved on the
//! machine running the service.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use roadgrade_core::evaluation::{BiasFitReport, GaussianFit};
use roadgrade_core::io::{FrameFormat, ReportFiles, RunConfig};
use roadgrade_core::sim::ScenarioSpec;
use roadgrade_core::{BiasModel, EstimatorConfig};

pub const HEALTH: &str = "/health";
pub const SIMULATE: &str = "/v1/simulate";
pub const REPLAY: &str = "/v1/replay";
pub const FIT_BIAS: &str = "/v1/fit-bias";
pub const REPORT: &str = "/v1/report";
pub const ACCEPTANCE: &str = "/v1/acceptance";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Also write the rendered traverse as a replay directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportReplay {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: FrameFormat,
}

/// `scenario` takes precedence over `config.scenario`; with neither, the
/// built-in flat scenario runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub config: RunConfig,
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default)]
    pub export_replay: Option<ExportReplay>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRequest {
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub output_dir: PathBuf,
    pub files: ReportFiles,
    pub frames: usize,
    pub waypoints: usize,
    pub emitted: usize,
    /// Filtered-grade error against ground truth, when truth is known.
    pub error: Option<GaussianFit>,
    pub mean_emission_range: Option<f64>,
    /// Contents of `summary.txt`.
    pub summary: String,
    #[serde(default)]
    pub replay_frames: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dataset {
    Scenarios { scenarios: Vec<ScenarioSpec> },
    Replay { data_dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBiasRequest {
    pub dataset: Dataset,
    #[serde(default)]
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBiasResponse {
    pub model: BiasModel,
    pub front_samples: usize,
    pub rear_samples: usize,
    pub zero_lag_samples: usize,
    pub residual_variance: f64,
}

impl From<&BiasFitReport> for FitBiasResponse {
    fn from(r: &BiasFitReport) -> Self {
        Self {
            model: r.model,
            front_samples: r.front_samples,
            rear_samples: r.rear_samples,
            zero_lag_samples: r.zero_lag_samples,
            residual_variance: r.residual_variance,
        }
    }
}

/// Regenerates a report from the `waypoints.csv` (and `timing.csv`, if
/// present) in `input_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub name: Option<String>,
}

/// An empty `criteria` list runs all of them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRequest {
    #[serde(default)]
    pub criteria: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub details: Vec<String>,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {:>2} {:<32} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.summary,
            self.seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceResponse {
    pub outcomes: Vec<Outcome>,
}

impl AcceptanceResponse {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_is_tagged() {
        let d: Dataset = serde_json::from_str(r#"{"kind":"replay","data_dir":"rec"}"#).unwrap();
        assert_eq!(d, Dataset::Replay { data_dir: "rec".into() });
    }

    #[test]
    fn simulate_request_defaults() {
        let r: SimulateRequest = serde_json::from_str(r#"{"config":{}}"#).unwrap();
        assert_eq!(r.config, RunConfig::default());
        assert!(r.scenario.is_none() && r.export_replay.is_none());
    }

    #[test]
    fn outcome_line() {
        let o = Outcome {
            id: 3,
            name: "x".into(),
            passed: false,
            summary: "s".into(),
            details: vec![],
            seconds: 1.25,
        };
        assert!(o.to_string().starts_with("[FAIL] criterion  3 x"));
    }
}
