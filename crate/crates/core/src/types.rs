//! Shared domain types: poses, paths, point clouds, rigid transforms and the
//! estimator parameter set.
//!
//! Angles are radians internally. Waypoint headings follow the road-survey
//! convention used by the contact-patch geometry: `yaw` is measured from the
//! world +y axis toward +x, so a vehicle with heading `yaw` faces
//! `(sin yaw, cos yaw)` in the horizontal plane.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::BiasModel;

pub type Point = Point3<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    if wrapped > PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Vehicle pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Deserialize)]
struct RawPose {
    x: f64,
    y: f64,
    z: f64,
    roll: f64,
    pitch: f64,
    yaw: f64,
}

impl TryFrom<RawPose> for Pose {
    type Error = Error;

    fn try_from(raw: RawPose) -> Result<Self> {
        Pose::new(raw.x, raw.y, raw.z, raw.roll, raw.pitch, raw.yaw)
    }
}

impl Pose {
    pub fn new(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        let fields = [x, y, z, roll, pitch, yaw];
        if let Some(bad) = fields.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPose(format!("non-finite component {bad}")));
        }
        Ok(Self {
            x,
            y,
            z,
            roll: normalize_angle(roll),
            pitch: normalize_angle(pitch),
            yaw: normalize_angle(yaw),
        })
    }

    /// Builds a pose from angles given in degrees.
    pub fn from_degrees(x: f64, y: f64, z: f64, roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        Self::new(
            x,
            y,
            z,
            roll.to_radians(),
            pitch.to_radians(),
            yaw.to_radians(),
        )
    }

    /// Unit heading vector `(sin yaw, cos yaw)`.
    pub fn heading(&self) -> [f64; 2] {
        [self.yaw.sin(), self.yaw.cos()]
    }

    /// Body-to-world rotation for a body frame with x forward, y left, z up.
    ///
    /// Z-Y-X intrinsic: rotate about world z by the math-convention azimuth
    /// `pi/2 - yaw`, then about the intermediate y by `-pitch` (positive pitch
    /// raises the nose), then about body x by `roll`.
    pub fn body_rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2 - self.yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -self.pitch)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.roll)
    }

    /// Body-to-world transform of this pose.
    pub fn body_to_world(&self) -> RigidTransform {
        RigidTransform::from_parts(self.body_rotation(), Vector3::new(self.x, self.y, self.z))
    }

    pub fn horizontal_distance(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Uniformly spaced sequence of waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath")]
pub struct Path {
    waypoints: Vec<Pose>,
    spacing: f64,
}

#[derive(Deserialize)]
struct RawPath {
    waypoints: Vec<Pose>,
    spacing: f64,
}

impl TryFrom<RawPath> for Path {
    type Error = Error;

    fn try_from(raw: RawPath) -> Result<Self> {
        Path::new(raw.waypoints, raw.spacing)
    }
}

impl Path {
    pub const DEFAULT_SPACING_TOLERANCE: f64 = 0.01;

    pub fn new(waypoints: Vec<Pose>, spacing: f64) -> Result<Self> {
        Self::with_tolerance(waypoints, spacing, Self::DEFAULT_SPACING_TOLERANCE)
    }

    /// `tolerance` is relative to `spacing`.
    pub fn with_tolerance(waypoints: Vec<Pose>, spacing: f64, tolerance: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidPath(format!("spacing must be > 0, got {spacing}")));
        }
        if waypoints.len() < 2 {
            return Err(Error::InvalidPath(format!(
                "need at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        for (k, pair) in waypoints.windows(2).enumerate() {
            let gap = pair[0].horizontal_distance(pair[1].x, pair[1].y);
            if (gap - spacing).abs() > tolerance * spacing {
                return Err(Error::InvalidPath(format!(
                    "waypoints {k} and {} are {gap} m apart, expected {spacing} m",
                    k + 1
                )));
            }
        }
        Ok(Self { waypoints, spacing })
    }

    pub fn waypoints(&self) -> &[Pose] {
        &self.waypoints
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&Pose> {
        self.waypoints.get(index).ok_or(Error::PathIndex {
            index,
            len: self.waypoints.len(),
        })
    }

    /// Index of the waypoint horizontally closest to `(x, y)`; ties go to the
    /// lower index.
    pub fn nearest_index(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (k, wp) in self.waypoints.iter().enumerate() {
            let dist = wp.horizontal_distance(x, y);
            if dist < best_dist {
                best = k;
                best_dist = dist;
            }
        }
        best
    }
}

/// Coordinate frame a point cloud is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoordFrame {
    #[serde(rename = "L")]
    Lidar,
    #[serde(rename = "W")]
    World,
}

impl CoordFrame {
    pub fn tag(self) -> &'static str {
        match self {
            CoordFrame::Lidar => "L",
            CoordFrame::World => "W",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "L" => Some(CoordFrame::Lidar),
            "W" => Some(CoordFrame::World),
            _ => None,
        }
    }
}

/// One lidar sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame")]
pub struct PointCloudFrame {
    frame_index: u64,
    timestamp: f64,
    frame: CoordFrame,
    points: Vec<Point>,
}

#[derive(Deserialize)]
struct RawFrame {
    frame_index: u64,
    timestamp: f64,
    frame: CoordFrame,
    points: Vec<Point>,
}

impl TryFrom<RawFrame> for PointCloudFrame {
    type Error = Error;

    fn try_from(raw: RawFrame) -> Result<Self> {
        PointCloudFrame::new(raw.frame_index, raw.timestamp, raw.frame, raw.points)
    }
}

impl PointCloudFrame {
    pub fn new(frame_index: u64, timestamp: f64, frame: CoordFrame, points: Vec<Point>) -> Result<Self> {
        if !timestamp.is_finite() {
            return Err(Error::InvalidCloud(format!("non-finite timestamp {timestamp}")));
        }
        if let Some(k) = points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidCloud(format!("point {k} is not finite")));
        }
        Ok(Self {
            frame_index,
            timestamp,
            frame,
            points,
        })
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn frame(&self) -> CoordFrame {
        self.frame
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// Same header, different points (already validated by the caller's source).
    pub(crate) fn with_points(&self, points: Vec<Point>) -> Self {
        Self {
            frame_index: self.frame_index,
            timestamp: self.timestamp,
            frame: self.frame,
            points,
        }
    }
}

/// Proper rigid motion `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransform", into = "RawTransform")]
pub struct RigidTransform {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTransform {
    /// Row-major rotation matrix.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<RawTransform> for RigidTransform {
    type Error = Error;

    fn try_from(raw: RawTransform) -> Result<Self> {
        let r = raw.rotation;
        let m = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        RigidTransform::new(m, Vector3::from(raw.translation))
    }
}

impl From<RigidTransform> for RawTransform {
    fn from(t: RigidTransform) -> Self {
        let m = t.rotation.matrix();
        RawTransform {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: t.translation.into(),
        }
    }
}

impl RigidTransform {
    pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

    /// Validates `rotation` as orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let gram_error = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if gram_error > Self::ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation not orthonormal (max |RtR - I| = {gram_error:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > Self::ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidTransform(format!("rotation determinant {det}, expected +1")));
        }
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(rotation),
            translation,
        })
    }

    pub fn from_parts(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::from_parts(Rotation3::identity(), Vector3::zeros())
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::from_parts(Rotation3::identity(), Vector3::new(x, y, z))
    }

    pub fn rotation(&self) -> &Rotation3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point) -> Point {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rotation = self.rotation.inverse();
        RigidTransform {
            rotation,
            translation: -(rotation * self.translation),
        }
    }
}

/// Moves a lidar-frame cloud into the world frame with `lidar_to_world`.
pub fn transform_point_cloud(
    frame: &PointCloudFrame,
    lidar_to_world: &RigidTransform,
) -> Result<PointCloudFrame> {
    if frame.frame != CoordFrame::Lidar {
        return Err(Error::FrameTag {
            expected: CoordFrame::Lidar.tag(),
            found: frame.frame.tag(),
        });
    }
    let points = frame.points.iter().map(|p| lidar_to_world.apply(p)).collect();
    Ok(PointCloudFrame {
        frame_index: frame.frame_index,
        timestamp: frame.timestamp,
        frame: CoordFrame::World,
        points,
    })
}

/// Grade estimator and Kalman filter parameters. Defaults are the reference
/// vehicle parameter set (3.09 m wheelbase, 75 m preview).
///
/// Grades, biases and filter variances are in degrees; lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Maximum preview range `d`.
    pub preview_distance: f64,
    /// Wheelbase `w`.
    pub wheelbase: f64,
    /// Contact patch along-track length `w_c`.
    pub patch_length: f64,
    /// Track width `l` (cross-track patch extent).
    pub track_width: f64,
    /// Waypoint spacing.
    pub spacing: f64,
    /// Process noise on grade rate, degrees^2 / m^3.
    pub process_noise: f64,
    /// Measurement variance, degrees^2.
    pub measurement_variance: f64,
    pub front_bias_slope: f64,
    pub front_bias_offset: f64,
    pub rear_bias_slope: f64,
    pub rear_bias_offset: f64,
    /// Height band for the optional second (minimum-height) box filter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_band: Option<f64>,
    /// Initial grade-rate variance; defaults to `100 * process_noise`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_rate_variance: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            preview_distance: 75.0,
            wheelbase: 3.09,
            patch_length: 0.5,
            track_width: 1.73,
            spacing: 1.0,
            process_noise: 8.2e-5,
            measurement_variance: 49.0,
            front_bias_slope: -0.29,
            front_bias_offset: -1.87,
            rear_bias_slope: 0.40,
            rear_bias_offset: -0.67,
            refine_band: None,
            initial_rate_variance: None,
        }
    }
}

impl EstimatorConfig {
    pub const DEFAULT_REFINE_BAND: f64 = 0.15;

    pub const KEYS: &'static [&'static str] = &[
        "preview_distance",
        "wheelbase",
        "patch_length",
        "track_width",
        "spacing",
        "process_noise",
        "measurement_variance",
        "front_bias_slope",
        "front_bias_offset",
        "rear_bias_slope",
        "rear_bias_offset",
        "refine_band",
        "initial_rate_variance",
    ];

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("preview_distance", self.preview_distance),
            ("wheelbase", self.wheelbase),
            ("patch_length", self.patch_length),
            ("track_width", self.track_width),
            ("spacing", self.spacing),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(name, format!("must be > 0, got {value}")));
            }
        }
        let non_negative = [
            ("process_noise", Some(self.process_noise)),
            ("measurement_variance", Some(self.measurement_variance)),
            ("refine_band", self.refine_band),
            ("initial_rate_variance", self.initial_rate_variance),
        ];
        for (name, value) in non_negative {
            if let Some(value) = value {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::config(name, format!("must be >= 0, got {value}")));
                }
            }
        }
        let bias = [
            ("front_bias_slope", self.front_bias_slope),
            ("front_bias_offset", self.front_bias_offset),
            ("rear_bias_slope", self.rear_bias_slope),
            ("rear_bias_offset", self.rear_bias_offset),
        ];
        for (name, value) in bias {
            if !value.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn bias(&self) -> BiasModel {
        BiasModel {
            front_slope: self.front_bias_slope,
            front_offset: self.front_bias_offset,
            rear_slope: self.rear_bias_slope,
            rear_offset: self.rear_bias_offset,
        }
    }

    pub fn with_bias(mut self, bias: BiasModel) -> Self {
        self.front_bias_slope = bias.front_slope;
        self.front_bias_offset = bias.front_offset;
        self.rear_bias_slope = bias.rear_slope;
        self.rear_bias_offset = bias.rear_offset;
        self
    }

    /// Number of waypoints ahead of the closest one inside the preview window.
    pub fn preview_waypoints(&self) -> usize {
        (self.preview_distance / self.spacing).floor() as usize
    }

    pub fn initial_rate_variance(&self) -> f64 {
        self.initial_rate_variance
            .unwrap_or(100.0 * self.process_noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: &[[f64; 3]]) -> PointCloudFrame {
        let pts = points.iter().map(|p| Point::new(p[0], p[1], p[2])).collect();
        PointCloudFrame::new(3, 0.3, CoordFrame::Lidar, pts).unwrap()
    }

    #[test]
    fn angles_wrap_to_half_open_interval() {
        assert_close!(normalize_angle(PI), PI, 0.0);
        assert_close!(normalize_angle(-PI), PI, 1e-15);
        assert_close!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-15);
        assert_close!(normalize_angle(0.25), 0.25, 0.0);
    }

    #[test]
    fn pose_rejects_non_finite() {
        assert!(Pose::new(f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(Pose::new(0.0, 0.0, 0.0, 0.0, f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn body_forward_follows_heading() {
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.3).unwrap();
        let fwd = pose.body_rotation() * Vector3::x();
        assert_close!(fwd.x, 0.3f64.sin(), 1e-12);
        assert_close!(fwd.y, 0.3f64.cos(), 1e-12);
        assert_close!(fwd.z, 0.0, 1e-12);

        let climbing = Pose::new(0.0, 0.0, 0.0, 0.0, 0.1, 0.0).unwrap();
        let fwd = climbing.body_rotation() * Vector3::x();
        assert_close!(fwd.z, 0.1f64.sin(), 1e-12);
    }

    #[test]
    fn path_requires_uniform_spacing() {
        let wp = |x: f64| Pose::new(x, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(Path::new(vec![wp(0.0), wp(1.0), wp(2.0)], 1.0).is_ok());
        assert!(Path::new(vec![wp(0.0), wp(1.0), wp(2.5)], 1.0).is_err());
        assert!(Path::new(vec![wp(0.0), wp(1.005)], 1.0).is_ok());
        assert!(Path::new(vec![wp(0.0)], 1.0).is_err());
        assert!(Path::new(vec![wp(0.0), wp(1.0)], 0.0).is_err());
    }

    #[test]
    fn nearest_index_breaks_ties_low() {
        let wp = |x: f64| Pose::new(x, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let path = Path::new(vec![wp(0.0), wp(1.0), wp(2.0)], 1.0).unwrap();
        assert_eq!(path.nearest_index(0.5, 0.0), 0);
        assert_eq!(path.nearest_index(1.6, 0.3), 2);
        assert_eq!(path.nearest_index(-4.0, 0.0), 0);
    }

    #[test]
    fn identity_transform_keeps_points() {
        let out = transform_point_cloud(&cloud(&[[1.0, 2.0, 3.0]]), &RigidTransform::identity()).unwrap();
        assert_eq!(out.points(), &[Point::new(1.0, 2.0, 3.0)]);
        assert_eq!(out.frame(), CoordFrame::World);
        assert_eq!(out.frame_index(), 3);
        assert_eq!(out.timestamp(), 0.3);
    }

    #[test]
    fn translation_shifts_points() {
        let t = RigidTransform::from_translation(0.0, 0.0, 5.0);
        let out = transform_point_cloud(&cloud(&[[1.0, 2.0, 3.0]]), &t).unwrap();
        assert_eq!(out.points(), &[Point::new(1.0, 2.0, 8.0)]);
    }

    #[test]
    fn yaw_rotation_about_z() {
        let t = RigidTransform::from_parts(
            Rotation3::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
            Vector3::zeros(),
        );
        let out = transform_point_cloud(&cloud(&[[1.0, 0.0, 0.0]]), &t).unwrap();
        let p = out.points()[0];
        assert_close!(p.x, 0.0, 1e-12);
        assert_close!(p.y, 1.0, 1e-12);
        assert_close!(p.z, 0.0, 1e-12);
    }

    #[test]
    fn world_frame_input_is_rejected() {
        let world = PointCloudFrame::new(0, 0.0, CoordFrame::World, vec![]).unwrap();
        let err = transform_point_cloud(&world, &RigidTransform::identity()).unwrap_err();
        assert!(matches!(err, Error::FrameTag { .. }));
    }

    #[test]
    fn transform_validation() {
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(skew, Vector3::zeros()).is_err());
        let reflection = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(RigidTransform::new(reflection, Vector3::zeros()).is_err());
        assert!(RigidTransform::new(Matrix3::identity(), Vector3::new(1.0, 2.0, 3.0)).is_ok());
    }

    #[test]
    fn transform_serde_validates() {
        let json = r#"{"rotation":[[1,0,0],[0,1,0],[0,0,2]],"translation":[0,0,0]}"#;
        assert!(serde_json::from_str::<RigidTransform>(json).is_err());
        let t = Pose::new(1.0, 2.0, 3.0, 0.1, 0.2, 0.3).unwrap().body_to_world();
        let back: RigidTransform = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn cloud_rejects_non_finite_points() {
        let pts = vec![Point::new(0.0, f64::NAN, 0.0)];
        assert!(PointCloudFrame::new(0, 0.0, CoordFrame::Lidar, pts).is_err());
    }

    #[test]
    fn default_config_is_reference_parameter_set() {
        let cfg = EstimatorConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.preview_distance, 75.0);
        assert_eq!(cfg.wheelbase, 3.09);
        assert_eq!(cfg.patch_length, 0.5);
        assert_eq!(cfg.track_width, 1.73);
        assert_eq!(cfg.process_noise, 8.2e-5);
        assert_eq!(cfg.measurement_variance, 49.0);
        assert_eq!(cfg.front_bias_slope, -0.29);
        assert_eq!(cfg.rear_bias_slope, 0.40);
        assert_eq!(cfg.front_bias_offset, -1.87);
        assert_eq!(cfg.rear_bias_offset, -0.67);
        assert_eq!(cfg.spacing, 1.0);
        assert_eq!(cfg.preview_waypoints(), 75);
    }

    #[test]
    fn config_validation_names_field() {
        let cfg = EstimatorConfig {
            process_noise: -1.0,
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "process_noise"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
