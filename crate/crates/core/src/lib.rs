//! Road-grade preview from accumulated lidar returns.
//!
//! The pipeline transforms each sweep into the world frame, box-filters the
//! front and rear contact patches of every waypoint inside the preview
//! window, turns the first-hit patch heights into a bias-corrected grade
//! estimate, and smooths the sparse estimates with a Kalman filter indexed by
//! distance along the path.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} = {a} vs {} = {b} (tol {tol})", stringify!($a), stringify!($b));
    }};
}

pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod io;
pub mod kalman;
pub mod patch;
pub mod pipeline;
pub mod sim;
pub mod stats;
pub mod types;

pub use error::{Error, Result};
pub use estimator::{BiasModel, GradeEstimator, RawGradeEstimate};
pub use kalman::{FilterOutput, GradeState};
pub use patch::ContactPatch;
pub use pipeline::{FilterMode, GradeTrack, GradeTracker};
pub use types::{CoordFrame, EstimatorConfig, Path, Point, PointCloudFrame, Pose, RigidTransform};
