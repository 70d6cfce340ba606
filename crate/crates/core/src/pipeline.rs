//! Estimator plus filter, driven one frame at a time.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::{GradeEstimator, RawGradeEstimate, SlotStatus};
use crate::kalman::{run_filter, run_filter_incremental, FilterCheckpoint, FilterOutput};
use crate::types::{EstimatorConfig, Path, PointCloudFrame, RigidTransform};

/// How the filter is refreshed after each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    /// Re-run the filter from the start of the path every frame.
    #[default]
    Full,
    /// Keep a checkpoint behind the vehicle and only re-run the tail.
    Incremental,
}

impl std::str::FromStr for FilterMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(FilterMode::Full),
            "incremental" => Ok(FilterMode::Incremental),
            other => Err(format!("unknown filter mode `{other}` (expected full or incremental)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub waypoint_index: usize,
    pub raw: Option<RawGradeEstimate>,
    pub filtered: Option<FilterOutput>,
    pub status: SlotStatus,
}

/// Per-waypoint raw and filtered grades; one entry per path waypoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GradeTrack {
    pub entries: Vec<TrackEntry>,
}

impl GradeTrack {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn raw_estimates(&self) -> impl Iterator<Item = &RawGradeEstimate> {
        self.entries.iter().filter_map(|e| e.raw.as_ref())
    }

    /// Filter residuals at measured waypoints, in path order.
    pub fn residuals(&self) -> Vec<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.filtered.and_then(|f| f.residual))
            .collect()
    }

    /// Filtered grade where the filter has been initialized.
    pub fn filtered_grade(&self, index: usize) -> Option<f64> {
        self.entries
            .get(index)?
            .filtered
            .filter(|f| f.initialized)
            .map(|f| f.theta)
    }
}

/// Frame-by-frame grade tracking over one path.
#[derive(Debug, Clone)]
pub struct GradeTracker {
    estimator: GradeEstimator,
    mode: FilterMode,
    window_start: usize,
    checkpoint: FilterCheckpoint,
    committed: Vec<FilterOutput>,
    tentative: Vec<FilterOutput>,
}

impl GradeTracker {
    pub fn new(path: Path, cfg: EstimatorConfig, mode: FilterMode) -> Result<Self> {
        Ok(Self {
            estimator: GradeEstimator::new(path, cfg)?,
            mode,
            window_start: 0,
            checkpoint: FilterCheckpoint::default(),
            committed: Vec::new(),
            tentative: Vec::new(),
        })
    }

    pub fn estimator(&self) -> &GradeEstimator {
        &self.estimator
    }

    pub fn mode(&self) -> FilterMode {
        self.mode
    }

    pub fn path(&self) -> &Path {
        self.estimator.path()
    }

    pub fn config(&self) -> &EstimatorConfig {
        self.estimator.config()
    }

    /// Waypoints currently covered by the filter.
    pub fn filter_len(&self) -> usize {
        self.committed.len() + self.tentative.len()
    }

    /// Closest waypoint to `(x, y)`, never behind the current window start.
    pub fn closest_waypoint(&self, x: f64, y: f64) -> usize {
        self.path().nearest_index(x, y).max(self.window_start)
    }

    /// Ingests a frame, locating the vehicle at the sensor position.
    pub fn ingest(&mut self, frame: &PointCloudFrame, lidar_to_world: &RigidTransform) -> Result<Vec<RawGradeEstimate>> {
        let t = lidar_to_world.translation();
        let closest = self.path().nearest_index(t.x, t.y);
        self.ingest_at(frame, lidar_to_world, closest)
    }

    /// Ingests a frame with a caller-supplied closest waypoint. The preview
    /// window start never moves backwards, so waypoints behind the vehicle
    /// are final.
    pub fn ingest_at(
        &mut self,
        frame: &PointCloudFrame,
        lidar_to_world: &RigidTransform,
        closest: usize,
    ) -> Result<Vec<RawGradeEstimate>> {
        let start = closest.max(self.window_start);
        let emitted = self.estimator.ingest_frame(frame, lidar_to_world, start)?;
        self.window_start = start;
        self.refilter()?;
        Ok(emitted)
    }

    fn measurements(&self) -> Vec<Option<f64>> {
        self.estimator
            .estimates()
            .iter()
            .map(|e| e.as_ref().map(|e| e.theta_deg))
            .collect()
    }

    fn refilter(&mut self) -> Result<()> {
        let cfg = self.estimator.config().clone();
        match self.mode {
            FilterMode::Full => {
                self.tentative = run_filter(&self.measurements(), &cfg)?;
            }
            FilterMode::Incremental => {
                let Some(extent) = self.estimator.extent() else {
                    return Ok(());
                };
                let measurements = self.measurements();
                let commit_to = self.window_start.min(extent + 1);
                if commit_to > self.checkpoint.next_index {
                    let from = self.checkpoint.next_index;
                    let (outputs, cp) =
                        run_filter_incremental(&self.checkpoint, from, &measurements[from..commit_to], &cfg)?;
                    self.committed.extend(outputs);
                    self.checkpoint = cp;
                }
                let from = self.checkpoint.next_index;
                let tail = if from <= extent { &measurements[from..=extent] } else { &[][..] };
                self.tentative = run_filter_incremental(&self.checkpoint, from, tail, &cfg)?.0;
            }
        }
        Ok(())
    }

    pub fn filtered(&self) -> Vec<FilterOutput> {
        self.committed.iter().chain(&self.tentative).copied().collect()
    }

    pub fn track(&self) -> GradeTrack {
        let filtered = self.filtered();
        let slots = self.estimator.accumulator().slots();
        let entries = self
            .estimator
            .estimates()
            .iter()
            .enumerate()
            .map(|(k, raw)| TrackEntry {
                waypoint_index: k,
                raw: raw.clone(),
                filtered: filtered.get(k).copied(),
                status: slots[k].status,
            })
            .collect();
        GradeTrack { entries }
    }
}
