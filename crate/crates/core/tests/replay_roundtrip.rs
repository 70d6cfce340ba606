use std::fs;

use roadgrade_core::io::replay::{read_frame, write_frame_text, FRAMES_DIR};
use roadgrade_core::io::{FrameFormat, ReplayDataset};
use roadgrade_core::sim::{export_replay, run_end_to_end, run_frames, LidarModel, OdometryModel, ScenarioSpec, Segment, TerrainProfile};
use roadgrade_core::{EstimatorConfig, Error, FilterMode};

fn small_hills(heading_deg: f64) -> ScenarioSpec {
    let terrain = TerrainProfile::new(vec![Segment::Flat { length: 20.0 }, Segment::hill_degrees(200.0, 2.0, 100.0)]).unwrap();
    let mut spec = ScenarioSpec::new("small", terrain, 120.0, 15.0);
    spec.seed = 4;
    spec.heading_deg = heading_deg;
    spec.lidar = LidarModel {
        azimuth_fov_deg: 40.0,
        azimuth_step_deg: 0.4,
        range_noise: 0.03,
        ..Default::default()
    };
    spec.odometry = OdometryModel {
        translation_walk: [0.001; 3],
        translation_noise: [0.005; 3],
        rotation_noise: [1e-5, 1e-4, 1e-5],
        ..Default::default()
    };
    spec
}

fn cfg() -> EstimatorConfig {
    EstimatorConfig {
        measurement_variance: 0.4,
        ..Default::default()
    }
}

#[test]
fn text_replay_reproduces_direct_run() {
    for heading in [0.0, 90.0] {
        let sc = small_hills(heading).build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let n = export_replay(&sc, dir.path(), FrameFormat::Text).unwrap();
        assert_eq!(n as u64, sc.frame_count());

        let data = ReplayDataset::open(dir.path()).unwrap();
        assert_eq!(data.frame_count(), n);
        assert_eq!(data.truth.as_deref(), Some(&sc.truth[..]));
        let replayed = run_frames(data.path.clone(), data.truth.clone().unwrap(), &cfg(), FilterMode::Full, data.frames()).unwrap();
        let direct = run_end_to_end(&sc, &cfg(), FilterMode::Full).unwrap();
        assert!(direct.track.raw_estimates().count() > 50);
        assert_eq!(replayed.track, direct.track, "heading {heading}");
    }
}

#[test]
fn binary_replay_runs() {
    let sc = small_hills(0.0).build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_replay(&sc, dir.path(), FrameFormat::Binary).unwrap();
    let data = ReplayDataset::open(dir.path()).unwrap();
    let out = run_frames(data.path.clone(), sc.truth.clone(), &cfg(), FilterMode::Full, data.frames()).unwrap();
    let direct = run_end_to_end(&sc, &cfg(), FilterMode::Full).unwrap();
    let (a, b): (Vec<_>, Vec<_>) = (out.track.raw_estimates().collect(), direct.track.raw_estimates().collect());
    assert!(a.len() as f64 > 0.9 * b.len() as f64);
}

#[test]
fn one_frame_dataset_loads() {
    let sc = small_hills(0.0).build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_replay(&sc, dir.path(), FrameFormat::Text).unwrap();
    let frames = dir.path().join(FRAMES_DIR);
    for entry in fs::read_dir(&frames).unwrap() {
        let p = entry.unwrap().path();
        if p.file_name().unwrap() != "000000.txt" {
            fs::remove_file(p).unwrap();
        }
    }
    let data = ReplayDataset::open(dir.path()).unwrap();
    assert_eq!(data.frame_count(), 1);
    let out = run_frames(data.path.clone(), vec![], &cfg(), FilterMode::Full, data.frames()).unwrap();
    assert_eq!(out.frame_times_ms.len(), 1);
}

#[test]
fn out_of_order_frames_rejected() {
    let sc = small_hills(0.0).build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_replay(&sc, dir.path(), FrameFormat::Text).unwrap();
    let frames = dir.path().join(FRAMES_DIR);
    // A file sorted after frame 2 that claims to be frame 1.
    let one = read_frame(&frames.join("000001.txt")).unwrap();
    write_frame_text(&frames.join("000002a.txt"), &one).unwrap();
    let data = ReplayDataset::open(dir.path()).unwrap();
    let err = data.frames().find_map(|f| f.err()).unwrap();
    assert!(matches!(err, Error::Stream { previous: 2, got: 1 }), "{err}");
}

#[test]
fn missing_transforms_named() {
    let sc = small_hills(0.0).build().unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_replay(&sc, dir.path(), FrameFormat::Text).unwrap();
    fs::remove_file(dir.path().join("transforms.csv")).unwrap();
    let msg = ReplayDataset::open(dir.path()).unwrap_err().to_string();
    assert!(msg.contains("transforms.csv"), "{msg}");
}
