//! Multi-ring spinning lidar rendered by ray casting against the road.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::terrain::Road;
use crate::error::{Error, Result};
use crate::types::{CoordFrame, Point, PointCloudFrame, RigidTransform};

/// Ring elevations of a 32-beam sensor with dense rings near the horizon,
/// in degrees.
pub const DEFAULT_RING_ELEVATIONS_DEG: [f64; 32] = [
    -25.0, -15.639, -11.31, -8.843, -7.254, -6.148, -5.333, -4.667, -4.0, -3.667, -3.333, -3.0, -2.667,
    -2.333, -2.0, -1.667, -1.333, -1.0, -0.667, -0.333, 0.0, 0.333, 0.667, 1.0, 1.333, 1.667, 2.333, 3.333,
    4.667, 7.0, 10.333, 15.0,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarModel {
    pub ring_elevations_deg: Vec<f64>,
    pub azimuth_step_deg: f64,
    /// Horizontal field of view centered on the sensor x axis.
    pub azimuth_fov_deg: f64,
    pub max_range: f64,
    pub range_noise: f64,
    pub frame_rate: f64,
    /// Sensor origin in the vehicle body frame: forward offset from the
    /// wheelbase midpoint and height above the axle line.
    pub mount_forward: f64,
    pub mount_height: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            ring_elevations_deg: DEFAULT_RING_ELEVATIONS_DEG.to_vec(),
            azimuth_step_deg: 0.2,
            azimuth_fov_deg: 360.0,
            max_range: 120.0,
            range_noise: 0.0,
            frame_rate: 10.0,
            mount_forward: 1.0,
            mount_height: 1.9,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Scenario(format!("lidar {what}")));
        if self.ring_elevations_deg.is_empty() {
            return bad("needs at least one ring");
        }
        if self.ring_elevations_deg.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("ring elevations must be strictly increasing");
        }
        if self.ring_elevations_deg.iter().any(|e| !(e.abs() < 90.0)) {
            return bad("ring elevations must lie in (-90, 90) degrees");
        }
        if !(self.azimuth_step_deg > 0.0 && self.azimuth_step_deg.is_finite()) {
            return bad("azimuth step must be > 0");
        }
        if !(self.azimuth_fov_deg > 0.0 && self.azimuth_fov_deg <= 360.0) {
            return bad("azimuth field of view must be in (0, 360]");
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return bad("max range must be > 0");
        }
        if !(self.range_noise >= 0.0 && self.range_noise.is_finite()) {
            return bad("range noise must be >= 0");
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame rate must be > 0");
        }
        if !(self.mount_forward.is_finite() && self.mount_height.is_finite()) {
            return bad("mount offsets must be finite");
        }
        Ok(())
    }

    /// Lidar-to-body transform.
    pub fn mount(&self) -> RigidTransform {
        RigidTransform::from_translation(self.mount_forward, 0.0, self.mount_height)
    }

    /// Unit beam directions in the lidar frame, ring-major.
    pub fn beam_directions(&self) -> Vec<Vector3<f64>> {
        let columns = (self.azimuth_fov_deg / self.azimuth_step_deg).round().max(1.0) as usize;
        let full_circle = self.azimuth_fov_deg >= 360.0;
        let start = if full_circle {
            0.0
        } else {
            -self.azimuth_fov_deg / 2.0
        };
        let count = if full_circle { columns } else { columns + 1 };
        let mut dirs = Vec::with_capacity(count * self.ring_elevations_deg.len());
        for el in &self.ring_elevations_deg {
            let (se, ce) = el.to_radians().sin_cos();
            for k in 0..count {
                let (sa, ca) = (start + k as f64 * self.azimuth_step_deg).to_radians().sin_cos();
                dirs.push(Vector3::new(ce * ca, ce * sa, se));
            }
        }
        dirs
    }
}

/// Casts every beam from `lidar_to_world` and returns the hits in the lidar
/// frame with Gaussian range noise drawn from `rng`.
pub fn render_frame<R: Rng>(
    frame_index: u64,
    timestamp: f64,
    lidar_to_world: &RigidTransform,
    beams: &[Vector3<f64>],
    road: &Road,
    model: &LidarModel,
    rng: &mut R,
) -> Result<PointCloudFrame> {
    let origin = Point::from(*lidar_to_world.translation());
    let rotation = lidar_to_world.rotation();
    let noise = (model.range_noise > 0.0)
        .then(|| Normal::new(0.0, model.range_noise).expect("validated noise level"));
    let mut points = Vec::new();
    for beam in beams {
        let dir = rotation * beam;
        let Some(range) = road.intersect(&origin, &dir, model.max_range) else {
            continue;
        };
        let measured = match &noise {
            Some(n) => range + n.sample(rng),
            None => range,
        };
        points.push(Point::from(beam * measured));
    }
    PointCloudFrame::new(frame_index, timestamp, CoordFrame::Lidar, points)
}
