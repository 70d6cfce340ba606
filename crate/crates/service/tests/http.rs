use std::net::SocketAddr;
use std::path::Path;

use roadgrade_client::api::*;
use roadgrade_client::{Client, ClientError};

use roadgrade_core::io::{FrameFormat, RunConfig, RunMode};
use roadgrade_core::sim::{flat_scenario, hills_scenario, ScenarioSpec};

async fn client() -> Client {
    let (addr, _) = roadgrade_service::spawn(SocketAddr::from(([127, 0, 0, 1], 0)))
        .await
        .unwrap();
    Client::new(format!("http://{addr}/"))
}

fn short(mut spec: ScenarioSpec, length: f64) -> ScenarioSpec {
    spec.length = length;
    spec
}

fn config(out: &Path) -> RunConfig {
    RunConfig {
        output_dir: out.to_path_buf(),
        ..RunConfig::default()
    }
}

fn status(err: ClientError) -> (u16, String) {
    match err {
        ClientError::Api { status, message } => (status.as_u16(), message),
        other => panic!("expected an API error, got {other}"),
    }
}

#[tokio::test]
async fn health() {
    let h = client().await.health().await.unwrap();
    assert_eq!(h.status, "ok");
}

#[tokio::test]
async fn simulate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flat");
    let run = client()
        .await
        .simulate(&SimulateRequest {
            config: config(&out),
            scenario: Some(short(flat_scenario(), 150.0)),
            export_replay: None,
        })
        .await
        .unwrap();
    assert_eq!(run.waypoints, 151);
    assert!(run.emitted > 100);
    assert!(out.join("waypoints.csv").is_file());
    assert!(out.join("summary.txt").is_file());
    assert!(out.join("timing.csv").is_file());
    assert!(run.summary.starts_with("run: flat"));
}

#[tokio::test]
async fn unwritable_output_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = client()
        .await
        .simulate(&SimulateRequest {
            config: config(&blocker.join("out")),
            scenario: Some(short(flat_scenario(), 50.0)),
            export_replay: None,
        })
        .await
        .unwrap_err();
    let (code, message) = status(err);
    assert_eq!(code, 500);
    assert!(message.contains("file"), "{message}");
}

#[tokio::test]
async fn exported_replay_reproduces_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let c = client().await;
    let sim = c
        .simulate(&SimulateRequest {
            config: RunConfig {
                seed: Some(4),
                ..config(&dir.path().join("sim"))
            },
            scenario: Some(short(hills_scenario(0), 160.0)),
            export_replay: Some(ExportReplay {
                dir: dir.path().join("rec"),
                format: FrameFormat::Text,
            }),
        })
        .await
        .unwrap();
    assert!(sim.replay_frames.unwrap() > 0);
    let replay = c
        .replay(&ReplayRequest {
            config: RunConfig {
                mode: RunMode::Replay,
                data_dir: Some(dir.path().join("rec")),
                ..config(&dir.path().join("replay"))
            },
        })
        .await
        .unwrap();
    let read = |p: &Path| std::fs::read_to_string(p.join("waypoints.csv")).unwrap();
    assert_eq!(read(&sim.output_dir), read(&replay.output_dir));

    let fit = c
        .fit_bias(&FitBiasRequest {
            dataset: Dataset::Replay {
                data_dir: dir.path().join("rec"),
            },
            estimator: Default::default(),
        })
        .await
        .unwrap();
    assert!(fit.front_samples + fit.rear_samples + fit.zero_lag_samples > 50);

    let again = c
        .report(&ReportRequest {
            input_dir: sim.output_dir.clone(),
            output_dir: dir.path().join("again"),
            name: Some("hills".into()),
        })
        .await
        .unwrap();
    assert_eq!(again.summary, sim.summary);
}

#[tokio::test]
async fn replay_without_truth_cannot_fit_bias() {
    let dir = tempfile::tempdir().unwrap();
    let c = client().await;
    c.simulate(&SimulateRequest {
        config: config(&dir.path().join("sim")),
        scenario: Some(short(flat_scenario(), 40.0)),
        export_replay: Some(ExportReplay {
            dir: dir.path().join("rec"),
            format: FrameFormat::Binary,
        }),
    })
    .await
    .unwrap();
    std::fs::remove_file(dir.path().join("rec/truth.csv")).unwrap();
    let err = c
        .fit_bias(&FitBiasRequest {
            dataset: Dataset::Replay {
                data_dir: dir.path().join("rec"),
            },
            estimator: Default::default(),
        })
        .await
        .unwrap_err();
    let (code, message) = status(err);
    assert_eq!(code, 422);
    assert!(message.contains("truth.csv"), "{message}");
}

#[tokio::test]
async fn mode_mismatch_is_rejected() {
    let err = client()
        .await
        .simulate(&SimulateRequest {
            config: RunConfig {
                mode: RunMode::Replay,
                data_dir: Some("rec".into()),
                ..RunConfig::default()
            },
            scenario: None,
            export_replay: None,
        })
        .await
        .unwrap_err();
    let (code, message) = status(err);
    assert_eq!(code, 422);
    assert!(message.contains("mode"), "{message}");
}

#[tokio::test]
async fn malformed_body_gets_json_error() {
    let c = client().await;
    let response = post_raw(c.base_url()).await;
    assert_eq!(response.0, 422);
    assert!(response.1.contains("\"error\""), "{}", response.1);
}

async fn post_raw(base: &str) -> (u16, String) {
    use std::io::{Read, Write};
    let addr = base.trim_start_matches("http://").trim_end_matches('/').to_owned();
    tokio::task::spawn_blocking(move || {
        let mut stream = std::net::TcpStream::connect(&addr).unwrap();
        let body = r#"{"config":{"estimator":{"q":1}}}"#;
        let request = format!(
            "POST /v1/simulate HTTP/1.1\r\nhost: {addr}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
            body.len()
        );
        stream.write_all(request.as_bytes()).unwrap();
        let mut text = String::new();
        stream.read_to_string(&mut text).unwrap();
        (text[9..12].parse().unwrap(), text)
    })
    .await
    .unwrap()
}

#[tokio::test]
async fn acceptance_endpoint() {
    let c = client().await;
    let err = c
        .acceptance(&AcceptanceRequest { criteria: vec![11] })
        .await
        .unwrap_err();
    assert_eq!(status(err).0, 422);
    let response = c
        .acceptance(&AcceptanceRequest { criteria: vec![7] })
        .await
        .unwrap();
    assert_eq!(response.outcomes.len(), 1);
    assert!(response.all_passed(), "{}", response.outcomes[0]);
}
