//! Contact-patch box filters.
//!
//! Each waypoint gets a front and a rear patch centered half a wheelbase
//! ahead of and behind the waypoint along its heading. A patch is a closed
//! rectangle in the horizontal plane (`length` along-track, `width`
//! cross-track) with unbounded height.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CoordFrame, EstimatorConfig, Point, PointCloudFrame, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchSide {
    Front,
    Rear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPatch {
    pub center: [f64; 2],
    /// Waypoint elevation; informational only.
    pub floor_z: f64,
    /// Heading, same convention as [`Pose::yaw`].
    pub yaw: f64,
    pub length: f64,
    pub width: f64,
    pub side: PatchSide,
    pub waypoint_index: usize,
}

/// Precomputed inside-test for one patch.
#[derive(Debug, Clone, Copy)]
pub struct PatchBounds {
    cx: f64,
    cy: f64,
    sin: f64,
    cos: f64,
    half_length: f64,
    half_width: f64,
}

impl PatchBounds {
    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        let along = dx * self.sin + dy * self.cos;
        let cross = dx * self.cos - dy * self.sin;
        along.abs() <= self.half_length && cross.abs() <= self.half_width
    }
}

impl ContactPatch {
    pub fn bounds(&self) -> PatchBounds {
        let (sin, cos) = self.yaw.sin_cos();
        PatchBounds {
            cx: self.center[0],
            cy: self.center[1],
            sin,
            cos,
            half_length: self.length / 2.0,
            half_width: self.width / 2.0,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.bounds().contains(p)
    }

    /// Patch-local `(along, cross)` coordinates of `p`.
    pub fn local_coordinates(&self, p: &Point) -> [f64; 2] {
        let (sin, cos) = self.yaw.sin_cos();
        let dx = p.x - self.center[0];
        let dy = p.y - self.center[1];
        [dx * sin + dy * cos, dx * cos - dy * sin]
    }

    /// Appends the points of `points` inside the patch to `out`.
    pub fn select_into(&self, points: &[Point], out: &mut Vec<Point>) {
        let bounds = self.bounds();
        out.extend(points.iter().filter(|p| bounds.contains(p)));
    }
}

/// Front and rear patches of waypoint `index`.
pub fn build_patches(pose: &Pose, cfg: &EstimatorConfig, index: usize) -> (ContactPatch, ContactPatch) {
    let dx = cfg.wheelbase * pose.yaw.sin();
    let dy = cfg.wheelbase * pose.yaw.cos();
    let patch = |center: [f64; 2], side| ContactPatch {
        center,
        floor_z: pose.z,
        yaw: pose.yaw,
        length: cfg.patch_length,
        width: cfg.track_width,
        side,
        waypoint_index: index,
    };
    (
        patch([pose.x + dx / 2.0, pose.y + dy / 2.0], PatchSide::Front),
        patch([pose.x - dx / 2.0, pose.y - dy / 2.0], PatchSide::Rear),
    )
}

/// Points of a world-frame cloud inside `patch`, boundary included.
pub fn box_filter(cloud: &PointCloudFrame, patch: &ContactPatch) -> Result<PointCloudFrame> {
    if cloud.frame() != CoordFrame::World {
        return Err(Error::FrameTag {
            expected: CoordFrame::World.tag(),
            found: cloud.frame().tag(),
        });
    }
    let mut selected = Vec::new();
    patch.select_into(cloud.points(), &mut selected);
    Ok(cloud.with_points(selected))
}

/// Keeps points no higher than `band` above the lowest selected point.
pub fn min_height_refine(selected: &PointCloudFrame, band: f64) -> PointCloudFrame {
    let mut points = selected.points().to_vec();
    refine_points(&mut points, band);
    selected.with_points(points)
}

pub(crate) fn refine_points(points: &mut Vec<Point>, band: f64) {
    let Some(floor) = points.iter().map(|p| p.z).reduce(f64::min) else {
        return;
    };
    points.retain(|p| p.z <= floor + band);
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use nalgebra::{Rotation2, Vector2};
    use proptest::prelude::*;

    use super::*;

    fn world(points: &[[f64; 3]]) -> PointCloudFrame {
        let pts = points.iter().map(|p| Point::new(p[0], p[1], p[2])).collect();
        PointCloudFrame::new(0, 0.0, CoordFrame::World, pts).unwrap()
    }

    fn patch_at(center: [f64; 2], yaw: f64, length: f64, width: f64) -> ContactPatch {
        ContactPatch {
            center,
            floor_z: 0.0,
            yaw,
            length,
            width,
            side: PatchSide::Front,
            waypoint_index: 0,
        }
    }

    /// Brute force: the along-track axis is the heading `(sin yaw, cos yaw)`,
    /// i.e. the world y axis rotated clockwise by `yaw`.
    fn oracle_inside(patch: &ContactPatch, p: &Point) -> bool {
        let offset = Vector2::new(p.x - patch.center[0], p.y - patch.center[1]);
        let local = Rotation2::new(patch.yaw) * offset;
        local.y.abs() <= patch.length / 2.0 && local.x.abs() <= patch.width / 2.0
    }

    #[test]
    fn patches_along_y_for_zero_heading() {
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let cfg = EstimatorConfig::default();
        let (front, rear) = build_patches(&pose, &cfg, 4);
        assert_close!(front.center[0], 0.0, 1e-15);
        assert_close!(front.center[1], 1.545, 1e-15);
        assert_close!(rear.center[0], 0.0, 1e-15);
        assert_close!(rear.center[1], -1.545, 1e-15);
        assert_eq!(front.side, PatchSide::Front);
        assert_eq!(rear.waypoint_index, 4);
        let gap = (front.center[0] - rear.center[0]).hypot(front.center[1] - rear.center[1]);
        assert_close!(gap, 3.09, 1e-15);
    }

    #[test]
    fn patches_along_x_for_quarter_turn() {
        let pose = Pose::new(0.0, 0.0, 0.0, 0.0, 0.0, FRAC_PI_2).unwrap();
        let (front, rear) = build_patches(&pose, &EstimatorConfig::default(), 0);
        assert_close!(front.center[0], 1.545, 1e-15);
        assert_close!(front.center[1], 0.0, 1e-15);
        assert_close!(rear.center[0], -1.545, 1e-15);
        assert_close!(rear.center[1], 0.0, 1e-15);
    }

    #[test]
    fn box_filter_hand_geometry() {
        let cloud = world(&[[0.0, 0.0, 1.0], [0.3, 0.0, 2.0], [0.0, 0.8, 3.0]]);
        // Heading pi/2 runs along world x: 0.3 m along-track exceeds 0.25 m,
        // 0.8 m cross-track is inside 0.865 m.
        let east = patch_at([0.0, 0.0], FRAC_PI_2, 0.5, 1.73);
        let out = box_filter(&cloud, &east).unwrap();
        assert_eq!(out.points(), &[Point::new(0.0, 0.0, 1.0), Point::new(0.0, 0.8, 3.0)]);

        // Heading 0 runs along world y, so the roles of x and y swap.
        let north = patch_at([0.0, 0.0], 0.0, 0.5, 1.73);
        let out = box_filter(&cloud, &north).unwrap();
        assert_eq!(out.points(), &[Point::new(0.0, 0.0, 1.0), Point::new(0.3, 0.0, 2.0)]);
    }

    #[test]
    fn box_filter_edges() {
        let patch = patch_at([0.0, 0.0], 0.0, 0.5, 1.0);
        assert!(box_filter(&world(&[]), &patch).unwrap().is_empty());
        let tall = box_filter(&world(&[[0.0, 0.0, 1e6]]), &patch).unwrap();
        assert_eq!(tall.len(), 1);
        let boundary = box_filter(&world(&[[0.5, 0.25, 0.0], [-0.5, -0.25, 0.0]]), &patch).unwrap();
        assert_eq!(boundary.len(), 2);
    }

    #[test]
    fn box_filter_requires_world_frame() {
        let lidar = PointCloudFrame::new(0, 0.0, CoordFrame::Lidar, vec![]).unwrap();
        let patch = patch_at([0.0, 0.0], 0.0, 0.5, 1.0);
        assert!(matches!(box_filter(&lidar, &patch), Err(Error::FrameTag { .. })));
    }

    #[test]
    fn min_height_refine_cases() {
        let out = min_height_refine(&world(&[[0.0, 0.0, 0.0], [0.0, 0.0, 0.05], [0.0, 0.0, 0.5]]), 0.15);
        let zs: Vec<f64> = out.points().iter().map(|p| p.z).collect();
        assert_eq!(zs, vec![0.0, 0.05]);
        assert_eq!(min_height_refine(&world(&[[1.0, 2.0, 3.0]]), 0.15).len(), 1);
        assert_eq!(min_height_refine(&world(&[[0.0, 0.0, 0.1], [0.0, 0.0, 0.2]]), 0.15).len(), 2);
        assert!(min_height_refine(&world(&[]), 0.15).is_empty());
    }

    fn arb_patch() -> impl Strategy<Value = ContactPatch> {
        (-20.0..20.0f64, -20.0..20.0f64, -3.2..3.2f64, 0.05..3.0f64, 0.05..3.0f64)
            .prop_map(|(x, y, yaw, length, width)| patch_at([x, y], yaw, length, width))
    }

    fn arb_points(n: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((-25.0..25.0f64, -25.0..25.0f64, -5.0..5.0f64), 1..n)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Point::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn matches_brute_force(patch in arb_patch(), points in arb_points(400)) {
            let cloud = PointCloudFrame::new(0, 0.0, CoordFrame::World, points.clone()).unwrap();
            let selected = box_filter(&cloud, &patch).unwrap();
            let expected: Vec<Point> = points.into_iter().filter(|p| oracle_inside(&patch, p)).collect();
            prop_assert_eq!(selected.points(), expected.as_slice());
        }

        #[test]
        fn midpoint_is_waypoint(x in -1e3..1e3f64, y in -1e3..1e3f64, yaw in -3.2..3.2f64, w in 0.5..6.0f64) {
            let pose = Pose::new(x, y, 0.0, 0.0, 0.0, yaw).unwrap();
            let cfg = EstimatorConfig { wheelbase: w, ..Default::default() };
            let (front, rear) = build_patches(&pose, &cfg, 0);
            prop_assert!(((front.center[0] + rear.center[0]) / 2.0 - x).abs() <= 1e-12 * x.abs().max(1.0));
            prop_assert!(((front.center[1] + rear.center[1]) / 2.0 - y).abs() <= 1e-12 * y.abs().max(1.0));
            let gap = (front.center[0] - rear.center[0]).hypot(front.center[1] - rear.center[1]);
            prop_assert!((gap - w).abs() <= 1e-12 * w);
        }

        #[test]
        fn enlarging_never_drops_points(patch in arb_patch(), grow_l in 0.0..2.0f64, grow_w in 0.0..2.0f64, points in arb_points(300)) {
            let cloud = PointCloudFrame::new(0, 0.0, CoordFrame::World, points).unwrap();
            let small = box_filter(&cloud, &patch).unwrap();
            let big_patch = ContactPatch { length: patch.length + grow_l, width: patch.width + grow_w, ..patch };
            let big = box_filter(&cloud, &big_patch).unwrap();
            for p in small.points() {
                prop_assert!(big.points().contains(p));
            }
        }

        #[test]
        fn rotation_equivariance(patch in arb_patch(), turn in -3.2..3.2f64, points in arb_points(200)) {
            let rot = Rotation2::new(-turn);
            let c = Vector2::new(patch.center[0], patch.center[1]);
            let rotated: Vec<Point> = points.iter().map(|p| {
                let v = rot * (Vector2::new(p.x, p.y) - c) + c;
                Point::new(v.x, v.y, p.z)
            }).collect();
            let turned = ContactPatch { yaw: patch.yaw + turn, ..patch };
            let before: Vec<[f64; 2]> = points.iter().filter(|p| patch.contains(p)).map(|p| patch.local_coordinates(p)).collect();
            let after: Vec<[f64; 2]> = rotated.iter().filter(|p| turned.contains(p)).map(|p| turned.local_coordinates(p)).collect();
            // Points within rounding distance of an edge may flip; compare only
            // the ones safely inside.
            let margin = 1e-9;
            let inner = |patch: &ContactPatch, l: &[f64; 2]| l[0].abs() < patch.length / 2.0 - margin && l[1].abs() < patch.width / 2.0 - margin;
            let a: Vec<_> = before.iter().filter(|l| inner(&patch, l)).collect();
            let b: Vec<_> = after.iter().filter(|l| inner(&turned, l)).collect();
            prop_assert_eq!(a.len(), b.len());
            for (l1, l2) in a.iter().zip(b.iter()) {
                prop_assert!((l1[0] - l2[0]).abs() < 1e-9 && (l1[1] - l2[1]).abs() < 1e-9);
            }
        }
    }
}
