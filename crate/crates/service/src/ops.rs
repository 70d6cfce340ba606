//! Blocking implementations behind each endpoint.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use tracing::info;

use roadgrade_acceptance::{Suite, CRITERIA};
use roadgrade_api::{
    AcceptanceRequest, AcceptanceResponse, Dataset, FitBiasRequest, FitBiasResponse, ReplayRequest, ReportRequest,
    RunSummary, SimulateRequest,
};
use roadgrade_core::evaluation::{bias_samples, BiasFitReport, ErrorReport, WaypointRow};
use roadgrade_core::io::report::{read_timing_csv, read_waypoints_csv, TIMING_FILE, WAYPOINTS_FILE};
use roadgrade_core::io::{write_report, FrameTiming, ReplayDataset, RunConfig, RunMode};
use roadgrade_core::sim::{export_replay, fit_bias_on, flat_scenario, run_end_to_end, run_frames, ScenarioSpec};
use roadgrade_core::{BiasModel, Error, FilterMode, Result};

fn expect_mode(cfg: &RunConfig, mode: RunMode) -> Result<()> {
    if cfg.mode != mode {
        return Err(Error::config("mode", format!("expected {mode:?}, got {:?}", cfg.mode)));
    }
    cfg.validate()
}

/// Fails before any work is done when the report cannot be written.
fn prepare_output(dir: &FsPath) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".roadgrade-write-check");
    fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn dir_name(dir: &FsPath) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "replay".into())
}

fn summarize(name: &str, output_dir: PathBuf, rows: &[WaypointRow], timing: &FrameTiming) -> Result<RunSummary> {
    let files = write_report(&output_dir, name, rows, Some(timing))?;
    let summary = fs::read_to_string(&files.summary).map_err(|e| Error::io(&files.summary, e))?;
    let report = ErrorReport::build(rows, None).ok();
    Ok(RunSummary {
        name: name.to_owned(),
        output_dir,
        files,
        frames: timing.frame_ms.len(),
        waypoints: rows.len(),
        emitted: rows.iter().filter(|r| r.raw_deg.is_some()).count(),
        error: report.as_ref().map(|r| r.filtered),
        mean_emission_range: report.and_then(|r| r.ranges.mean_range),
        summary,
        replay_frames: None,
    })
}

pub fn scenario_for(req: &SimulateRequest) -> Result<ScenarioSpec> {
    let mut spec = match (&req.scenario, &req.config.scenario) {
        (Some(spec), _) => spec.clone(),
        (None, Some(file)) => {
            let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
            ScenarioSpec::from_toml(&text).map_err(|e| Error::format(file, None, e.to_string()))?
        }
        (None, None) => flat_scenario(),
    };
    if let Some(seed) = req.config.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn simulate(req: &SimulateRequest) -> Result<RunSummary> {
    let cfg = &req.config;
    expect_mode(cfg, RunMode::Simulate)?;
    let spec = scenario_for(req)?;
    prepare_output(&cfg.output_dir)?;
    info!(scenario = %spec.name, seed = spec.seed, "simulating");
    let scenario = spec.build()?;
    let replay_frames = req
        .export_replay
        .as_ref()
        .map(|export| export_replay(&scenario, &export.dir, export.format))
        .transpose()?;
    let result = run_end_to_end(&scenario, &cfg.estimator, cfg.filter_mode)?;
    let name = if spec.name.is_empty() { "scenario" } else { &spec.name };
    let mut summary = summarize(name, cfg.output_dir.clone(), &result.rows(), &result.timing())?;
    summary.replay_frames = replay_frames;
    Ok(summary)
}

pub fn replay(req: &ReplayRequest) -> Result<RunSummary> {
    let cfg = &req.config;
    expect_mode(cfg, RunMode::Replay)?;
    let dir = cfg.data_dir.as_ref().ok_or_else(|| Error::config("data_dir", "required in replay mode"))?;
    prepare_output(&cfg.output_dir)?;
    let dataset = ReplayDataset::open(dir)?;
    info!(dir = %dir.display(), frames = dataset.frame_count(), "replaying");
    let truth = dataset.truth.clone().unwrap_or_default();
    let result = run_frames(dataset.path.clone(), truth, &cfg.estimator, cfg.filter_mode, dataset.frames())?;
    summarize(&dir_name(dir), cfg.output_dir.clone(), &result.rows(), &result.timing())
}

pub fn fit_bias(req: &FitBiasRequest) -> Result<FitBiasResponse> {
    req.estimator.validate()?;
    let report = match &req.dataset {
        Dataset::Scenarios { scenarios } => {
            if scenarios.is_empty() {
                return Err(Error::InsufficientData("no training scenarios".into()));
            }
            let built = scenarios.iter().map(ScenarioSpec::build).collect::<Result<Vec<_>>>()?;
            info!(scenarios = built.len(), "fitting bias");
            fit_bias_on(&built, &req.estimator)?
        }
        Dataset::Replay { data_dir } => {
            let dataset = ReplayDataset::open(data_dir)?;
            let truth = dataset
                .truth
                .clone()
                .ok_or_else(|| Error::InsufficientData(format!("{} has no truth.csv", data_dir.display())))?;
            let uncorrected = req.estimator.clone().with_bias(BiasModel::default());
            let result = run_frames(
                dataset.path.clone(),
                truth,
                &uncorrected,
                FilterMode::Full,
                dataset.frames(),
            )?;
            BiasFitReport::from_samples(bias_samples(&result.track, &result.truth))?
        }
    };
    Ok(FitBiasResponse::from(&report))
}

pub fn report(req: &ReportRequest) -> Result<RunSummary> {
    let rows = read_waypoints_csv(&req.input_dir.join(WAYPOINTS_FILE))?;
    let timing_file = req.input_dir.join(TIMING_FILE);
    let timing = if timing_file.exists() {
        read_timing_csv(&timing_file)?
    } else {
        FrameTiming::default()
    };
    prepare_output(&req.output_dir)?;
    let name = req.name.clone().unwrap_or_else(|| dir_name(&req.input_dir));
    summarize(&name, req.output_dir.clone(), &rows, &timing)
}

pub fn acceptance(req: &AcceptanceRequest) -> Result<AcceptanceResponse> {
    let ids: Vec<u8> = if req.criteria.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        req.criteria.clone()
    };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(Error::config("criteria", format!("no criterion {bad}")));
    }
    let suite = Suite::new();
    let outcomes = ids
        .into_iter()
        .map(|id| {
            let outcome = suite.run(id);
            info!("{outcome}");
            outcome
        })
        .collect();
    Ok(AcceptanceResponse { outcomes })
}
