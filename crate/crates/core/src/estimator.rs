//! Per-waypoint grade estimation from accumulated contact-patch returns.
//!
//! Every frame is moved into the world frame and tested against the front and
//! rear patch of each waypoint in the preview window. A patch buffer keeps the
//! points of the first frame that hits it and is frozen afterwards. When both
//! buffers of a waypoint are filled the waypoint emits exactly one estimate:
//!
//! ```text
//! theta = asin((mean_z(front) - mean_z(rear)) / wheelbase) + b(f_front - f_rear)
//! ```
//!
//! where `b` is the piecewise-linear bias model of [`BiasModel`].

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::patch::{build_patches, refine_points, PatchBounds};
use crate::stats::linear_fit;
use crate::types::{transform_point_cloud, EstimatorConfig, Path, Point, PointCloudFrame, RigidTransform};

/// Frame-lag dependent bias correction, in degrees.
///
/// `delta_frames > 0` uses the front line, `delta_frames < 0` the rear line
/// evaluated at `|delta_frames|`, and zero lag gets no correction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BiasModel {
    pub front_slope: f64,
    pub front_offset: f64,
    pub rear_slope: f64,
    pub rear_offset: f64,
}

impl BiasModel {
    pub fn correction(&self, delta_frames: i64) -> f64 {
        match delta_frames.signum() {
            1 => self.front_slope * delta_frames as f64 + self.front_offset,
            -1 => self.rear_slope * delta_frames.unsigned_abs() as f64 + self.rear_offset,
            _ => 0.0,
        }
    }
}

pub fn bias_correction(delta_frames: i64, cfg: &EstimatorConfig) -> f64 {
    cfg.bias().correction(delta_frames)
}

/// Fits the two bias lines by ordinary least squares to `(delta_frames,
/// error_deg)` samples, where error is truth minus the uncorrected estimate.
/// Zero-lag samples are ignored.
pub fn fit_bias_model(samples: &[(i64, f64)]) -> Result<BiasModel> {
    let split = |positive: bool| -> (Vec<f64>, Vec<f64>) {
        samples
            .iter()
            .filter(|(df, _)| if positive { *df > 0 } else { *df < 0 })
            .map(|(df, e)| (df.unsigned_abs() as f64, *e))
            .unzip()
    };
    let (fx, fy) = split(true);
    let (rx, ry) = split(false);
    if fx.len() < 2 {
        return Err(Error::Fit { side: "front (positive lag)", count: fx.len() });
    }
    if rx.len() < 2 {
        return Err(Error::Fit { side: "rear (negative lag)", count: rx.len() });
    }
    let line = |xs: &[f64], ys: &[f64]| -> Result<(f64, f64)> {
        // A single distinct lag value still pins the offset; the slope is then 0.
        if xs.iter().all(|x| *x == xs[0]) {
            return Ok((0.0, ys.iter().sum::<f64>() / ys.len() as f64));
        }
        let fit = linear_fit(xs, ys)?;
        Ok((fit.slope, fit.intercept))
    };
    let (front_slope, front_offset) = line(&fx, &fy)?;
    let (rear_slope, rear_offset) = line(&rx, &ry)?;
    Ok(BiasModel {
        front_slope,
        front_offset,
        rear_slope,
        rear_offset,
    })
}

/// Height difference and grade of one waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeMeasurement {
    pub theta_deg: f64,
    pub mean_front_z: f64,
    pub mean_rear_z: f64,
    pub delta_frames: i64,
}

pub fn estimate_grade(
    front: &[Point],
    rear: &[Point],
    delta_frames: i64,
    cfg: &EstimatorConfig,
) -> Result<GradeMeasurement> {
    if front.is_empty() || rear.is_empty() {
        return Err(Error::InsufficientData(format!(
            "patch buffers must be nonempty (front {}, rear {})",
            front.len(),
            rear.len()
        )));
    }
    let mean_z = |pts: &[Point]| pts.iter().map(|p| p.z).sum::<f64>() / pts.len() as f64;
    let mean_front_z = mean_z(front);
    let mean_rear_z = mean_z(rear);
    let dz = mean_front_z - mean_rear_z;
    if dz.abs() > cfg.wheelbase {
        return Err(Error::DegenerateGeometry {
            dz,
            wheelbase: cfg.wheelbase,
        });
    }
    let theta_deg = (dz / cfg.wheelbase).asin().to_degrees() + bias_correction(delta_frames, cfg);
    Ok(GradeMeasurement {
        theta_deg,
        mean_front_z,
        mean_rear_z,
        delta_frames,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGradeEstimate {
    pub waypoint_index: usize,
    pub theta_deg: f64,
    /// Front first-hit frame minus rear first-hit frame.
    pub delta_frames: i64,
    pub mean_front_z: f64,
    pub mean_rear_z: f64,
    pub emission_frame: u64,
    /// Horizontal sensor-to-waypoint distance when the estimate was emitted.
    pub emission_range: f64,
    pub front_points: usize,
    pub rear_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotStatus {
    #[default]
    Pending,
    Emitted,
    Failed,
}

/// Front and rear buffers of one waypoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WaypointSlot {
    pub front: Vec<Point>,
    pub rear: Vec<Point>,
    pub front_first_frame: Option<u64>,
    pub rear_first_frame: Option<u64>,
    pub status: SlotStatus,
}

impl WaypointSlot {
    pub fn delta_frames(&self) -> Option<i64> {
        Some(self.front_first_frame? as i64 - self.rear_first_frame? as i64)
    }
}

/// Patch buffers for every waypoint of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchAccumulator {
    slots: Vec<WaypointSlot>,
}

impl PatchAccumulator {
    pub fn new(waypoints: usize) -> Self {
        Self {
            slots: vec![WaypointSlot::default(); waypoints],
        }
    }

    pub fn slots(&self) -> &[WaypointSlot] {
        &self.slots
    }

    pub fn slot(&self, index: usize) -> Option<&WaypointSlot> {
        self.slots.get(index)
    }
}

/// Stateful grade estimator over one path.
#[derive(Debug, Clone)]
pub struct GradeEstimator {
    path: Path,
    cfg: EstimatorConfig,
    bounds: Vec<(PatchBounds, PatchBounds)>,
    accumulator: PatchAccumulator,
    estimates: Vec<Option<RawGradeEstimate>>,
    last_frame: Option<u64>,
    scratch: Vec<Point>,
}

impl GradeEstimator {
    pub fn new(path: Path, cfg: EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        if (path.spacing() - cfg.spacing).abs() > Path::DEFAULT_SPACING_TOLERANCE * cfg.spacing {
            return Err(Error::config(
                "spacing",
                format!("path spacing {} differs from configured {}", path.spacing(), cfg.spacing),
            ));
        }
        let bounds = path
            .waypoints()
            .iter()
            .enumerate()
            .map(|(k, wp)| {
                let (front, rear) = build_patches(wp, &cfg, k);
                (front.bounds(), rear.bounds())
            })
            .collect();
        let m = path.len();
        Ok(Self {
            path,
            cfg,
            bounds,
            accumulator: PatchAccumulator::new(m),
            estimates: vec![None; m],
            last_frame: None,
            scratch: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn accumulator(&self) -> &PatchAccumulator {
        &self.accumulator
    }

    /// One entry per waypoint; `None` until that waypoint emits.
    pub fn estimates(&self) -> &[Option<RawGradeEstimate>] {
        &self.estimates
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.last_frame
    }

    /// Highest waypoint index that has an estimate.
    pub fn extent(&self) -> Option<usize> {
        self.estimates.iter().rposition(Option::is_some)
    }

    /// Last waypoint index inside the preview window of `closest`.
    pub fn window_end(&self, closest: usize) -> usize {
        (closest + self.cfg.preview_waypoints()).min(self.path.len() - 1)
    }

    /// Processes one lidar sweep. `closest` is the waypoint nearest the
    /// vehicle; waypoints `closest ..= closest + floor(d / spacing)` are
    /// examined. Returns the estimates emitted by this frame.
    pub fn ingest_frame(
        &mut self,
        frame: &PointCloudFrame,
        lidar_to_world: &RigidTransform,
        closest: usize,
    ) -> Result<Vec<RawGradeEstimate>> {
        if closest >= self.path.len() {
            return Err(Error::PathIndex {
                index: closest,
                len: self.path.len(),
            });
        }
        if let Some(previous) = self.last_frame {
            if frame.frame_index() <= previous {
                return Err(Error::Stream {
                    previous,
                    got: frame.frame_index(),
                });
            }
        }
        let world = transform_point_cloud(frame, lidar_to_world)?;
        self.last_frame = Some(frame.frame_index());

        let frame_no = frame.frame_index();
        let sensor = lidar_to_world.translation();
        let mut emitted = Vec::new();
        for j in closest..=self.window_end(closest) {
            let slot = &mut self.accumulator.slots[j];
            if slot.status != SlotStatus::Pending {
                continue;
            }
            let (front_bounds, rear_bounds) = &self.bounds[j];
            if slot.front.is_empty() {
                fill(&mut slot.front, &mut self.scratch, world.points(), front_bounds, self.cfg.refine_band);
                if !slot.front.is_empty() {
                    slot.front_first_frame = Some(frame_no);
                }
            }
            if slot.rear.is_empty() {
                fill(&mut slot.rear, &mut self.scratch, world.points(), rear_bounds, self.cfg.refine_band);
                if !slot.rear.is_empty() {
                    slot.rear_first_frame = Some(frame_no);
                }
            }
            let Some(delta_frames) = slot.delta_frames() else {
                continue;
            };
            match estimate_grade(&slot.front, &slot.rear, delta_frames, &self.cfg) {
                Ok(m) => {
                    slot.status = SlotStatus::Emitted;
                    let wp = &self.path.waypoints()[j];
                    let estimate = RawGradeEstimate {
                        waypoint_index: j,
                        theta_deg: m.theta_deg,
                        delta_frames,
                        mean_front_z: m.mean_front_z,
                        mean_rear_z: m.mean_rear_z,
                        emission_frame: frame_no,
                        emission_range: wp.horizontal_distance(sensor.x, sensor.y),
                        front_points: slot.front.len(),
                        rear_points: slot.rear.len(),
                    };
                    self.estimates[j] = Some(estimate.clone());
                    emitted.push(estimate);
                }
                Err(err) => {
                    slot.status = SlotStatus::Failed;
                    warn!(waypoint = j, %err, "grade estimate suppressed");
                }
            }
        }
        Ok(emitted)
    }
}

fn fill(
    buffer: &mut Vec<Point>,
    scratch: &mut Vec<Point>,
    points: &[Point],
    bounds: &PatchBounds,
    refine_band: Option<f64>,
) {
    scratch.clear();
    scratch.extend(points.iter().filter(|p| bounds.contains(p)));
    if let Some(band) = refine_band {
        refine_points(scratch, band);
    }
    buffer.extend_from_slice(scratch);
}
