mod args;

use std::fs;
use std::net::SocketAddr;
use std::path::Path as FsPath;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use tracing::info;
use tracing_subscriber::EnvFilter;

use args::{Builtin, Cli, Command, FitBiasArgs, ReplayArgs, ReportArgs, SimulateArgs, SuiteKind};
use roadgrade_client::api::{
    AcceptanceRequest, Dataset, ExportReplay, FitBiasRequest, ReplayRequest, ReportRequest, RunSummary,
    SimulateRequest,
};
use roadgrade_client::Client;
use roadgrade_core::io::{RunConfig, RunMode};
use roadgrade_core::sim::{
    default_suite, flat_scenario, hills_scenario, odometry_stress_scenario, ramp_scenario, ScenarioSpec,
};

fn builtin(kind: Builtin, seed: u64) -> ScenarioSpec {
    match kind {
        Builtin::Flat => flat_scenario(),
        Builtin::Ramp => ramp_scenario(),
        Builtin::Hills => hills_scenario(seed),
        Builtin::OdometryStress => odometry_stress_scenario(seed),
    }
}

fn read_scenario(file: &FsPath) -> Result<ScenarioSpec> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    ScenarioSpec::from_toml(&text).with_context(|| format!("parsing {}", file.display()))
}

fn print_run(run: &RunSummary) {
    print!("{}", run.summary);
    if let Some(n) = run.replay_frames {
        println!("replay frames written: {n}");
    }
    println!("report: {}", run.output_dir.display());
}

async fn simulate(client: &Client, args: SimulateArgs) -> Result<()> {
    let config = RunConfig::load(args.run.config.as_deref(), &args.run.overrides(RunMode::Simulate))?;
    let scenario = match (args.builtin, &args.scenario, &config.scenario) {
        (Some(kind), _, _) => Some(builtin(kind, config.seed.unwrap_or(0))),
        (None, Some(file), _) | (None, None, Some(file)) => Some(read_scenario(file)?),
        (None, None, None) => None,
    };
    let req = SimulateRequest {
        config,
        scenario,
        export_replay: args.export_replay.map(|dir| ExportReplay {
            dir,
            format: args.frame_format,
        }),
    };
    print_run(&client.simulate(&req).await?);
    Ok(())
}

async fn replay(client: &Client, args: ReplayArgs) -> Result<()> {
    let mut overrides = args.run.overrides(RunMode::Replay);
    overrides.data_dir = args.data_dir;
    let config = RunConfig::load(args.run.config.as_deref(), &overrides)?;
    print_run(&client.replay(&ReplayRequest { config }).await?);
    Ok(())
}

async fn fit_bias(client: &Client, args: FitBiasArgs) -> Result<()> {
    let config = RunConfig::load(args.config.as_deref(), &args.estimator.overrides())?;
    let dataset = match (&args.data_dir, &args.scenario) {
        (Some(dir), _) => Dataset::Replay { data_dir: dir.clone() },
        (None, file) => {
            let base = match file {
                Some(file) => read_scenario(file)?,
                None => builtin(args.builtin.unwrap_or(Builtin::Hills), 0),
            };
            let scenarios = args
                .seeds
                .iter()
                .map(|&seed| ScenarioSpec { seed, ..base.clone() })
                .collect();
            Dataset::Scenarios { scenarios }
        }
    };
    let fit = client
        .fit_bias(&FitBiasRequest {
            dataset,
            estimator: config.estimator.clone(),
        })
        .await?;
    let m = fit.model;
    println!("m_f = {:.6}  deg/frame", m.front_slope);
    println!("b_f = {:.6}  deg", m.front_offset);
    println!("m_r = {:.6}  deg/frame", m.rear_slope);
    println!("b_r = {:.6}  deg", m.rear_offset);
    println!(
        "samples: {} front, {} rear, {} zero-lag; residual variance {:.6} deg^2",
        fit.front_samples, fit.rear_samples, fit.zero_lag_samples, fit.residual_variance
    );
    if let Some(file) = args.save {
        let mut saved = config;
        saved.estimator = saved.estimator.with_bias(m);
        saved.estimator.measurement_variance = fit.residual_variance;
        fs::write(&file, saved.to_toml()).with_context(|| format!("writing {}", file.display()))?;
        println!("config: {}", file.display());
    }
    Ok(())
}

async fn report(client: &Client, args: ReportArgs) -> Result<()> {
    let req = ReportRequest {
        output_dir: args.output_dir.unwrap_or_else(|| args.input.clone()),
        input_dir: args.input,
        name: args.name,
    };
    print_run(&client.report(&req).await?);
    Ok(())
}

async fn default_suite_run(client: &Client, cli: &Cli) -> Result<bool> {
    let base = RunConfig::load(cli.config.as_deref(), &Default::default())?;
    for spec in default_suite(cli.seed) {
        let config = RunConfig {
            output_dir: cli.output_dir.join(&spec.name),
            scenario: None,
            seed: None,
            ..base.clone()
        };
        let run = client
            .simulate(&SimulateRequest {
                config,
                scenario: Some(spec),
                export_replay: None,
            })
            .await?;
        let error = run
            .error
            .map_or_else(|| "no truth".to_owned(), |e| format!("error mean {:+.4} deg, std {:.4} deg", e.mean, e.std));
        println!(
            "{:<16} {} waypoints, {} emitted, {error} -> {}",
            run.name,
            run.waypoints,
            run.emitted,
            run.output_dir.display()
        );
    }
    Ok(true)
}

async fn acceptance_run(client: &Client, cli: &Cli) -> Result<bool> {
    let response = client
        .acceptance(&AcceptanceRequest {
            criteria: cli.criteria.clone(),
        })
        .await?;
    for outcome in &response.outcomes {
        println!("{outcome}");
        if cli.verbose || !outcome.passed {
            for line in &outcome.details {
                println!("      {line}");
            }
        }
    }
    let failed: Vec<u8> = response.outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", response.outcomes.len());
    } else {
        println!(
            "acceptance: {} of {} criteria failed: {failed:?}",
            failed.len(),
            response.outcomes.len()
        );
    }
    Ok(failed.is_empty())
}

async fn dispatch(client: &Client, mut cli: Cli) -> Result<bool> {
    match (cli.suite, cli.command.take()) {
        (Some(_), Some(_)) => bail!("--suite runs on its own; drop the command or the flag"),
        (Some(SuiteKind::Acceptance), _) => acceptance_run(client, &cli).await,
        (Some(SuiteKind::Default), _) => default_suite_run(client, &cli).await,
        (None, Some(Command::Simulate(a))) => simulate(client, a).await.map(|_| true),
        (None, Some(Command::Replay(a))) => replay(client, a).await.map(|_| true),
        (None, Some(Command::FitBias(a))) => fit_bias(client, a).await.map(|_| true),
        (None, Some(Command::Report(a))) => report(client, a).await.map(|_| true),
        (None, None) => bail!("nothing to do: give a command or --suite (see --help)"),
    }
}

async fn run(cli: Cli) -> Result<bool> {
    match cli.server.clone() {
        Some(url) => dispatch(&Client::new(url), cli).await,
        None => {
            let (addr, server) = roadgrade_service::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
                .await
                .context("starting embedded server")?;
            info!("embedded server on {addr}");
            let result = dispatch(&Client::new(format!("http://{addr}")), cli).await;
            server.abort();
            result
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("ROADGRADE_LOG").unwrap_or_else(|_| EnvFilter::new("warn,roadgrade_service=off")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match runtime.block_on(run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
