//! Odometry error model: random walk, constant drift and white noise on the
//! lidar-to-world transform.

use nalgebra::{Rotation3, Vector3};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{stream_rng, Stream};
use crate::error::{Error, Result};
use crate::types::RigidTransform;

/// Per-axis error parameters. Translation terms are in meters along world
/// x, y, z; rotation terms are in radians about the sensor roll, pitch and
/// yaw axes. Walk and drift values are per frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometryModel {
    pub translation_walk: [f64; 3],
    pub rotation_walk: [f64; 3],
    pub translation_drift: [f64; 3],
    pub rotation_drift: [f64; 3],
    pub translation_noise: [f64; 3],
    pub rotation_noise: [f64; 3],
}

impl OdometryModel {
    pub fn validate(&self) -> Result<()> {
        let sigmas = self
            .translation_walk
            .iter()
            .chain(&self.rotation_walk)
            .chain(&self.translation_noise)
            .chain(&self.rotation_noise);
        if sigmas.clone().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Scenario("odometry walk and noise levels must be finite and >= 0".into()));
        }
        if self
            .translation_drift
            .iter()
            .chain(&self.rotation_drift)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Scenario("odometry drift must be finite".into()));
        }
        Ok(())
    }

    pub fn is_perfect(&self) -> bool {
        *self == Self::default()
    }
}

/// Six-component pose error: translation then rotation.
type PoseError = [f64; 6];

fn draw(seed: u64, stream: Stream, frame: u64, sigma: [f64; 3], rot_sigma: [f64; 3]) -> PoseError {
    let mut rng = stream_rng(seed, stream, frame);
    let mut out = [0.0; 6];
    for (k, s) in sigma.iter().chain(&rot_sigma).enumerate() {
        let z: f64 = StandardNormal.sample(&mut rng);
        out[k] = s * z;
    }
    out
}

fn apply(truth: &RigidTransform, e: &PoseError) -> RigidTransform {
    let rotation = truth.rotation() * Rotation3::from_euler_angles(e[3], e[4], e[5]);
    let translation = truth.translation() + Vector3::new(e[0], e[1], e[2]);
    RigidTransform::from_parts(rotation, translation)
}

fn total_error(model: &OdometryModel, walk: &PoseError, frame: u64, seed: u64) -> PoseError {
    let white = draw(seed, Stream::OdometryNoise, frame, model.translation_noise, model.rotation_noise);
    let k = frame as f64;
    let drift: Vec<f64> = model
        .translation_drift
        .iter()
        .chain(&model.rotation_drift)
        .map(|d| d * k)
        .collect();
    std::array::from_fn(|i| walk[i] + drift[i] + white[i])
}

/// Corrupts the true transform of frame `frame` as seen after `frame`
/// random-walk steps. Pure: each step's increment is drawn from its own
/// stream position, so the result does not depend on call order.
pub fn corrupt_odometry(truth: &RigidTransform, model: &OdometryModel, frame: u64, seed: u64) -> RigidTransform {
    if model.is_perfect() {
        return *truth;
    }
    let mut walk = [0.0; 6];
    for step in 1..=frame {
        let inc = draw(seed, Stream::OdometryWalk, step, model.translation_walk, model.rotation_walk);
        walk.iter_mut().zip(inc).for_each(|(w, d)| *w += d);
    }
    apply(truth, &total_error(model, &walk, frame, seed))
}

/// Sequential form of [`corrupt_odometry`] that keeps the walk state, so a
/// run of `n` frames costs O(n).
#[derive(Debug, Clone)]
pub struct OdometrySimulator {
    model: OdometryModel,
    seed: u64,
    walk: PoseError,
    next_frame: u64,
}

impl OdometrySimulator {
    pub fn new(model: OdometryModel, seed: u64) -> Self {
        Self {
            model,
            seed,
            walk: [0.0; 6],
            next_frame: 0,
        }
    }

    /// Corrupts the transform for `frame`; frames must not go backwards.
    pub fn corrupt(&mut self, truth: &RigidTransform, frame: u64) -> Result<RigidTransform> {
        if frame < self.next_frame {
            return Err(Error::Stream {
                previous: self.next_frame.saturating_sub(1),
                got: frame,
            });
        }
        if self.model.is_perfect() {
            self.next_frame = frame + 1;
            return Ok(*truth);
        }
        let first = self.next_frame.max(1);
        for step in first..=frame {
            let inc = draw(self.seed, Stream::OdometryWalk, step, self.model.translation_walk, self.model.rotation_walk);
            self.walk.iter_mut().zip(inc).for_each(|(w, d)| *w += d);
        }
        self.next_frame = frame + 1;
        Ok(apply(truth, &total_error(&self.model, &self.walk, frame, self.seed)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Pose;

    fn truth() -> RigidTransform {
        Pose::new(10.0, -4.0, 2.0, 0.01, 0.03, 1.1).unwrap().body_to_world()
    }

    #[test]
    fn perfect_model_is_identity() {
        let t = truth();
        assert_eq!(corrupt_odometry(&t, &OdometryModel::default(), 57, 3), t);
    }

    #[test]
    fn deterministic_drift_accumulates_linearly() {
        let model = OdometryModel {
            translation_drift: [0.0, 0.0, 0.002],
            ..Default::default()
        };
        let t = truth();
        let out = corrupt_odometry(&t, &model, 50, 0);
        assert_close!(out.translation().z - t.translation().z, 0.1, 1e-12);
    }

    #[test]
    fn simulator_matches_pure_form() {
        let model = OdometryModel {
            translation_walk: [0.01, 0.02, 0.005],
            rotation_walk: [1e-4, 2e-4, 3e-4],
            translation_noise: [0.001; 3],
            rotation_noise: [1e-5; 3],
            rotation_drift: [0.0, 1e-5, 0.0],
            ..Default::default()
        };
        let mut sim = OdometrySimulator::new(model, 42);
        let t = truth();
        for frame in [0, 1, 2, 5, 6, 30] {
            let a = sim.corrupt(&t, frame).unwrap();
            let b = corrupt_odometry(&t, &model, frame, 42);
            assert_eq!(a, b);
        }
        assert!(sim.corrupt(&t, 29).is_err());
    }

    #[test]
    fn negative_sigma_rejected() {
        let model = OdometryModel {
            translation_walk: [0.0, -1.0, 0.0],
            ..Default::default()
        };
        assert!(model.validate().is_err());
    }
}
