use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use roadgrade_core::io::{ConfigOverrides, FrameFormat, RunMode};
use roadgrade_core::FilterMode;

/// Road-grade preview from lidar: simulate, replay, fit the lag bias and
/// regenerate reports.
///
/// Every command is executed by a roadgrade service. Without `--server` an
/// embedded one is started on a loopback port for the duration of the call.
#[derive(Debug, Parser)]
#[command(name = "roadgrade", version)]
pub struct Cli {
    /// Base URL of a running service, e.g. http://127.0.0.1:8080.
    #[arg(long, global = true, env = "ROADGRADE_SERVER")]
    pub server: Option<String>,

    /// Run a whole suite instead of a single command.
    #[arg(long, value_enum)]
    pub suite: Option<SuiteKind>,

    /// Criteria for `--suite acceptance`; all when omitted.
    #[arg(long = "criterion", value_delimiter = ',')]
    pub criteria: Vec<u8>,

    /// Root of the per-scenario report directories for `--suite default`.
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,

    /// Run config for `--suite default`.
    #[arg(short, long)]
    pub config: Option<PathBuf>,

    /// Seed of the noisy scenarios in `--suite default`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Print per-criterion details for passing criteria too.
    #[arg(short, long)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteKind {
    /// Flat, ramp, hills and odometry-stress scenarios.
    Default,
    /// Every acceptance criterion, one pass/fail line each.
    Acceptance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Flat,
    Ramp,
    Hills,
    OdometryStress,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic traverse, run the estimator and write a report.
    Simulate(SimulateArgs),
    /// Run the estimator over a recorded dataset directory.
    Replay(ReplayArgs),
    /// Fit the frame-lag bias model on data with ground truth.
    FitBias(FitBiasArgs),
    /// Regenerate a report from an existing waypoints.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Scenario TOML file.
    #[arg(long, conflicts_with = "builtin")]
    pub scenario: Option<PathBuf>,

    /// Built-in scenario.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,

    /// Also write the traverse as a replay directory.
    #[arg(long)]
    pub export_replay: Option<PathBuf>,

    #[arg(long, default_value = "text", requires = "export_replay")]
    pub frame_format: FrameFormat,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub run: RunArgs,

    /// Dataset directory (path.csv, transforms.csv, frames/).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitBiasArgs {
    /// Replay directory with truth.csv.
    #[arg(long, conflicts_with_all = ["scenario", "builtin"])]
    pub data_dir: Option<PathBuf>,

    /// Scenario TOML file.
    #[arg(long, conflicts_with = "builtin")]
    pub scenario: Option<PathBuf>,

    /// Built-in scenario; hills when nothing else is given.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,

    /// Training seeds for scenario datasets, one traverse each.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,

    #[arg(short, long)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub estimator: EstimatorArgs,

    /// Write a run config with the fitted bias and measurement variance.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding waypoints.csv and optionally timing.csv.
    #[arg(long)]
    pub input: PathBuf,

    /// Defaults to the input directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run config TOML; flags override its values.
    #[arg(short, long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub output_dir: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub filter_mode: Option<FilterMode>,

    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    #[arg(long)]
    pub preview_distance: Option<f64>,
    #[arg(long)]
    pub wheelbase: Option<f64>,
    #[arg(long)]
    pub patch_length: Option<f64>,
    #[arg(long)]
    pub track_width: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub process_noise: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub measurement_variance: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub front_bias_slope: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub front_bias_offset: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rear_bias_slope: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rear_bias_offset: Option<f64>,
    #[arg(long)]
    pub refine_band: Option<f64>,
}

impl EstimatorArgs {
    pub fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            preview_distance: self.preview_distance,
            wheelbase: self.wheelbase,
            patch_length: self.patch_length,
            track_width: self.track_width,
            spacing: self.spacing,
            process_noise: self.process_noise,
            measurement_variance: self.measurement_variance,
            front_bias_slope: self.front_bias_slope,
            front_bias_offset: self.front_bias_offset,
            rear_bias_slope: self.rear_bias_slope,
            rear_bias_offset: self.rear_bias_offset,
            refine_band: self.refine_band,
            ..Default::default()
        }
    }
}

impl RunArgs {
    pub fn overrides(&self, mode: RunMode) -> ConfigOverrides {
        ConfigOverrides {
            mode: Some(mode),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            filter_mode: self.filter_mode,
            ..self.estimator.overrides()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn suite_without_command() {
        let cli = Cli::try_parse_from(["roadgrade", "--suite", "acceptance", "--criterion", "1,7"]).unwrap();
        assert_eq!(cli.suite, Some(SuiteKind::Acceptance));
        assert_eq!(cli.criteria, [1, 7]);
        assert!(cli.command.is_none());
    }

    #[test]
    fn negative_values_parse() {
        let cli = Cli::try_parse_from(["roadgrade", "simulate", "--process-noise", "-1"]).unwrap();
        let Some(Command::Simulate(args)) = cli.command else { panic!() };
        assert_eq!(args.run.estimator.process_noise, Some(-1.0));
    }
}
