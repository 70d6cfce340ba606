//! Scenario files and the ground-truth path they induce.

use serde::{Deserialize, Serialize};

use super::lidar::LidarModel;
use super::odometry::OdometryModel;
use super::terrain::{Road, Segment, TerrainProfile};
use crate::error::{Error, Result};
use crate::types::{Path, Pose, RigidTransform};

/// Everything needed to regenerate a synthetic traverse bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Vehicle speed, m/s.
    pub speed: f64,
    /// Path length, m.
    pub length: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Road heading, degrees from +y toward +x.
    #[serde(default)]
    pub heading_deg: f64,
    #[serde(default)]
    pub origin: [f64; 2],
    /// Wheelbase used to define the ground-truth grade.
    #[serde(default = "default_wheelbase")]
    pub wheelbase: f64,
    pub terrain: TerrainProfile,
    #[serde(default)]
    pub lidar: LidarModel,
    #[serde(default)]
    pub odometry: OdometryModel,
}

fn default_spacing() -> f64 {
    1.0
}

fn default_wheelbase() -> f64 {
    3.09
}

impl ScenarioSpec {
    pub fn new(name: &str, terrain: TerrainProfile, length: f64, speed: f64) -> Self {
        Self {
            name: name.to_owned(),
            seed: 0,
            speed,
            length,
            spacing: default_spacing(),
            heading_deg: 0.0,
            origin: [0.0, 0.0],
            wheelbase: default_wheelbase(),
            terrain,
            lidar: LidarModel::default(),
            odometry: OdometryModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scenario(msg));
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad(format!("spacing must be > 0, got {}", self.spacing));
        }
        if !(self.length.is_finite() && self.length >= 2.0 * self.spacing) {
            return bad(format!(
                "length {} must be at least two waypoint spacings ({})",
                self.length, self.spacing
            ));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return bad(format!("speed must be > 0, got {}", self.speed));
        }
        if !(self.wheelbase > 0.0 && self.wheelbase.is_finite()) {
            return bad(format!("wheelbase must be > 0, got {}", self.wheelbase));
        }
        if !(self.heading_deg.is_finite() && self.origin.iter().all(|v| v.is_finite())) {
            return bad("heading and origin must be finite".into());
        }
        self.lidar.validate()?;
        self.odometry.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Scenario(e.message().to_owned()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn build(&self) -> Result<Scenario> {
        build_scenario(self)
    }
}

/// A built scenario: road geometry, ground-truth path and grades.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub road: Road,
    pub path: Path,
    /// Ground-truth grade at each waypoint, degrees.
    pub truth: Vec<f64>,
}

pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let road = Road::new(spec.terrain.clone(), spec.origin, spec.heading_deg.to_radians());
    let count = (spec.length / spec.spacing + 1e-9).floor() as usize + 1;
    let mut waypoints = Vec::with_capacity(count);
    let mut truth = Vec::with_capacity(count);
    for k in 0..count {
        let s = k as f64 * spec.spacing;
        let pose = vehicle_pose(&road, s, spec.wheelbase)?;
        truth.push(pose.pitch.to_degrees());
        waypoints.push(pose);
    }
    let path = Path::new(waypoints, spec.spacing)?;
    Ok(Scenario {
        spec: spec.clone(),
        road,
        path,
        truth,
    })
}

/// Pose of a vehicle whose axles rest on the road with the wheelbase midpoint
/// at arclength `s`.
pub fn vehicle_pose(road: &Road, s: f64, wheelbase: f64) -> Result<Pose> {
    let front = road.terrain.elevation(s + wheelbase / 2.0);
    let rear = road.terrain.elevation(s - wheelbase / 2.0);
    let ratio = (front - rear) / wheelbase;
    if !(ratio.abs() < 1.0) {
        return Err(Error::Scenario(format!(
            "terrain rises {:.3} m over a {wheelbase} m wheelbase at s = {s}",
            front - rear
        )));
    }
    let [x, y] = road.position(s);
    Pose::new(x, y, 0.5 * (front + rear), 0.0, ratio.asin(), road.heading)
}

impl Scenario {
    /// Arclength reached by the vehicle at frame `k`.
    pub fn frame_arclength(&self, frame: u64) -> f64 {
        self.spec.speed * frame as f64 / self.spec.lidar.frame_rate
    }

    /// Number of frames needed to drive the whole path.
    pub fn frame_count(&self) -> u64 {
        let end = (self.path.len() - 1) as f64 * self.spec.spacing;
        (end * self.spec.lidar.frame_rate / self.spec.speed + 1e-9).floor() as u64 + 1
    }

    /// True lidar-to-world transform at frame `k`.
    pub fn sensor_transform(&self, frame: u64) -> Result<RigidTransform> {
        let pose = vehicle_pose(&self.road, self.frame_arclength(frame), self.spec.wheelbase)?;
        Ok(pose.body_to_world().compose(&self.spec.lidar.mount()))
    }

    /// Arclength where the terrain first leaves its starting flat section.
    pub fn first_grade_change(&self) -> Option<f64> {
        let mut s = 0.0;
        for seg in self.road.terrain.segments() {
            if !matches!(seg, Segment::Flat { .. }) {
                return Some(s);
            }
            s += seg.length();
        }
        None
    }
}
