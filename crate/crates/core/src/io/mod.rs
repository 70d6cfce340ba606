//! Configuration files, recorded-data directories and report artifacts.

pub mod config;
pub mod replay;
pub mod report;

pub use config::{ConfigOverrides, RunConfig, RunMode};
pub use replay::{write_replay, FrameFormat, ReplayDataset};
pub use report::{write_report, FrameTiming, ReportFiles};
