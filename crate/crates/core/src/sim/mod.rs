//! Synthetic traverses with known ground truth.

pub mod lidar;
pub mod odometry;
pub mod scenario;
pub mod terrain;

use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use lidar::{render_frame, LidarModel};
pub use odometry::{corrupt_odometry, OdometryModel, OdometrySimulator};
pub use scenario::{build_scenario, Scenario, ScenarioSpec};
pub use terrain::{Road, Segment, TerrainProfile};

use crate::error::Result;
use crate::evaluation::{bias_samples, waypoint_rows, BiasFitReport, WaypointRow};
use crate::io::replay::{write_replay, FrameFormat};
use crate::io::report::FrameTiming;
use crate::estimator::BiasModel;
use crate::kalman::{select_process_noise, ProcessNoiseChoice, DEFAULT_MAX_LAG};
use crate::pipeline::{FilterMode, GradeTrack, GradeTracker};
use crate::types::{EstimatorConfig, Path, PointCloudFrame, RigidTransform};

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Lidar = 1,
    OdometryWalk = 2,
    OdometryNoise = 3,
}

/// Generator for draw `index` of `stream`. Every (seed, stream, index)
/// triple gets its own key, so turning one noise source on or off never
/// shifts another's draws.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// One rendered sweep with its odometry-reported and true sensor poses.
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub cloud: PointCloudFrame,
    pub odometry: RigidTransform,
    pub truth: RigidTransform,
}

/// Lazily renders the frames of a scenario in order.
pub struct FrameSource<'a> {
    scenario: &'a Scenario,
    beams: Vec<Vector3<f64>>,
    odometry: OdometrySimulator,
    next: u64,
    count: u64,
}

impl<'a> FrameSource<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self {
            scenario,
            beams: scenario.spec.lidar.beam_directions(),
            odometry: OdometrySimulator::new(scenario.spec.odometry, scenario.spec.seed),
            next: 0,
            count: scenario.frame_count(),
        }
    }

    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn render(&mut self, k: u64) -> Result<SimFrame> {
        let spec = &self.scenario.spec;
        let truth = self.scenario.sensor_transform(k)?;
        let mut rng = stream_rng(spec.seed, Stream::Lidar, k);
        let cloud = render_frame(
            k,
            k as f64 / spec.lidar.frame_rate,
            &truth,
            &self.beams,
            &self.scenario.road,
            &spec.lidar,
            &mut rng,
        )?;
        let odometry = self.odometry.corrupt(&truth, k)?;
        Ok(SimFrame { cloud, odometry, truth })
    }
}

impl Iterator for FrameSource<'_> {
    type Item = Result<SimFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let k = self.next;
        self.next += 1;
        Some(self.render(k))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub track: GradeTrack,
    /// Ground-truth grade per waypoint, degrees; empty when unknown.
    pub truth: Vec<f64>,
    /// Wall time of each frame's ingest and filter refresh, milliseconds.
    pub frame_times_ms: Vec<f64>,
    /// Waypoints covered by the filter after each frame.
    pub filter_lens: Vec<usize>,
    pub points_per_frame: Vec<usize>,
}

impl RunResult {
    pub fn rows(&self) -> Vec<WaypointRow> {
        waypoint_rows(&self.truth, &self.track)
    }

    pub fn timing(&self) -> FrameTiming {
        FrameTiming {
            frame_ms: self.frame_times_ms.clone(),
            filter_lens: self.filter_lens.clone(),
            points: self.points_per_frame.clone(),
        }
    }
}

/// Feeds `(sweep, lidar-to-world)` pairs through a tracker, timing each
/// frame's ingest and filter refresh.
pub fn run_frames<I>(path: Path, truth: Vec<f64>, cfg: &EstimatorConfig, mode: FilterMode, frames: I) -> Result<RunResult>
where
    I: IntoIterator<Item = Result<(PointCloudFrame, RigidTransform)>>,
{
    let mut tracker = GradeTracker::new(path, cfg.clone(), mode)?;
    let mut frame_times_ms = Vec::new();
    let mut filter_lens = Vec::new();
    let mut points_per_frame = Vec::new();
    for item in frames {
        let (cloud, transform) = item?;
        let start = Instant::now();
        tracker.ingest(&cloud, &transform)?;
        frame_times_ms.push(start.elapsed().as_secs_f64() * 1e3);
        filter_lens.push(tracker.filter_len());
        points_per_frame.push(cloud.len());
    }
    Ok(RunResult {
        track: tracker.track(),
        truth,
        frame_times_ms,
        filter_lens,
        points_per_frame,
    })
}

/// Drives render, odometry corruption, ingestion and filtering over the
/// whole traverse.
pub fn run_end_to_end(scenario: &Scenario, cfg: &EstimatorConfig, mode: FilterMode) -> Result<RunResult> {
    let frames = FrameSource::new(scenario).map(|f| f.map(|f| (f.cloud, f.odometry)));
    run_frames(scenario.path.clone(), scenario.truth.clone(), cfg, mode, frames)
}

/// Writes the rendered sweeps, odometry transforms, path and ground truth of
/// a scenario as a replay directory.
pub fn export_replay(scenario: &Scenario, dir: &std::path::Path, format: FrameFormat) -> Result<usize> {
    let frames = FrameSource::new(scenario).map(|f| f.map(|f| (f.cloud, f.odometry)));
    write_replay(dir, &scenario.path, Some(&scenario.truth), frames, format)
}

/// Runs the estimator without bias correction on each scenario and fits the
/// piecewise-linear bias model to `truth - raw` against frame lag.
pub fn fit_bias_on(scenarios: &[Scenario], cfg: &EstimatorConfig) -> Result<BiasFitReport> {
    Ok(calibrate_on(scenarios, cfg, &[cfg.process_noise])?.bias)
}

/// Parameters learned from training traverses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub bias: BiasFitReport,
    pub process_noise: ProcessNoiseChoice,
}

impl Calibration {
    /// `cfg` with the fitted bias, measurement variance and process noise.
    pub fn apply(&self, cfg: &EstimatorConfig) -> EstimatorConfig {
        EstimatorConfig {
            measurement_variance: self.bias.residual_variance,
            process_noise: self.process_noise.process_noise,
            ..cfg.clone()
        }
        .with_bias(self.bias.model)
    }
}

/// Fits the bias model and measurement variance on the training scenarios,
/// then picks the process noise from `candidates` that leaves the whitest
/// filter residuals on the bias-corrected training measurements.
pub fn calibrate_on(scenarios: &[Scenario], cfg: &EstimatorConfig, candidates: &[f64]) -> Result<Calibration> {
    let uncorrected = cfg.clone().with_bias(BiasModel::default());
    let mut samples = Vec::new();
    let mut tracks = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let result = run_end_to_end(scenario, &uncorrected, FilterMode::Full)?;
        samples.extend(bias_samples(&result.track, &result.truth));
        tracks.push(result.track);
    }
    let bias = BiasFitReport::from_samples(samples)?;
    let corrected: Vec<Vec<Option<f64>>> = tracks
        .iter()
        .map(|track| {
            track
                .entries
                .iter()
                .map(|e| e.raw.as_ref().map(|r| r.theta_deg + bias.model.correction(r.delta_frames)))
                .collect()
        })
        .collect();
    let tuned = EstimatorConfig {
        measurement_variance: bias.residual_variance,
        ..cfg.clone()
    };
    let process_noise = select_process_noise(&corrected, &tuned, candidates, DEFAULT_MAX_LAG)?;
    Ok(Calibration { bias, process_noise })
}

/// Horizontal field of view used by the built-in scenarios. Contact patches
/// never leave this forward sector on a straight road.
pub const SUITE_FOV_DEG: f64 = 40.0;

/// Vehicle speed of the built-in scenarios, m/s.
pub const SUITE_SPEED: f64 = 15.0;

fn suite_lidar() -> LidarModel {
    LidarModel {
        azimuth_fov_deg: SUITE_FOV_DEG,
        ..LidarModel::default()
    }
}

pub fn flat_scenario() -> ScenarioSpec {
    let mut spec = ScenarioSpec::new("flat", TerrainProfile::flat(500.0).expect("valid"), 500.0, SUITE_SPEED);
    spec.lidar = suite_lidar();
    spec
}

/// Flat lead-in followed by a constant 3 degree ramp that runs past the end
/// of the path.
pub fn ramp_scenario() -> ScenarioSpec {
    let terrain = TerrainProfile::new(vec![
        Segment::Flat { length: 100.0 },
        Segment::ramp_degrees(500.0, 3.0),
    ])
    .expect("valid");
    let mut spec = ScenarioSpec::new("ramp", terrain, 500.0, SUITE_SPEED);
    spec.lidar = suite_lidar();
    spec
}

/// Rolling hills with a +-2 degree grade envelope and 200 m wavelength.
pub fn hills_scenario(seed: u64) -> ScenarioSpec {
    let terrain = TerrainProfile::new(vec![
        Segment::Flat { length: 20.0 },
        Segment::hill_degrees(800.0, 2.0, 200.0),
    ])
    .expect("valid");
    let mut spec = ScenarioSpec::new("hills", terrain, 840.0, SUITE_SPEED);
    spec.seed = seed;
    spec.lidar = LidarModel {
        range_noise: 0.03,
        ..suite_lidar()
    };
    spec.odometry = hills_odometry();
    spec
}

/// Odometry error used by the noisy hills scenario.
pub fn hills_odometry() -> OdometryModel {
    OdometryModel {
        translation_walk: [0.001, 0.001, 0.001],
        rotation_walk: [1e-6, 5e-6, 1e-6],
        translation_drift: [0.0, 0.0, -0.002],
        rotation_drift: [0.0, 0.0, 0.0],
        translation_noise: [0.005, 0.005, 0.02],
        rotation_noise: [1e-5, 2e-4, 1e-5],
    }
}

/// Hills with odometry error four times larger.
pub fn odometry_stress_scenario(seed: u64) -> ScenarioSpec {
    let mut spec = hills_scenario(seed);
    spec.name = "odometry-stress".into();
    let scale = |v: [f64; 3]| v.map(|x| 4.0 * x);
    let o = &mut spec.odometry;
    o.translation_walk = scale(o.translation_walk);
    o.rotation_walk = scale(o.rotation_walk);
    o.translation_drift = scale(o.translation_drift);
    spec
}

pub fn default_suite(seed: u64) -> Vec<ScenarioSpec> {
    vec![
        flat_scenario(),
        ramp_scenario(),
        hills_scenario(seed),
        odometry_stress_scenario(seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_independent() {
        let mut a = stream_rng(5, Stream::Lidar, 0);
        let mut b = stream_rng(5, Stream::OdometryWalk, 0);
        let mut c = stream_rng(5, Stream::Lidar, 1);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
        assert_eq!(x, stream_rng(5, Stream::Lidar, 0).next_u64());
    }

    #[test]
    fn suite_specs_build() {
        for spec in default_suite(1) {
            let sc = spec.build().unwrap();
            assert!(sc.frame_count() > 100, "{}", spec.name);
        }
    }
}
