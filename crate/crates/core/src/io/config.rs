//! Run configuration: a TOML file plus command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::FilterMode;
use crate::types::EstimatorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Simulate,
    Replay,
}

/// Everything one `simulate` or `replay` run needs.
///
/// ```toml
/// mode = "replay"
/// data_dir = "recordings/loop1"
/// output_dir = "out"
///
/// [estimator]
/// preview_distance = 60.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: RunMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Overrides the scenario file's seed when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub filter_mode: FilterMode,
    pub estimator: EstimatorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Simulate,
            scenario: None,
            data_dir: None,
            output_dir: PathBuf::from("out"),
            seed: None,
            filter_mode: FilterMode::Full,
            estimator: EstimatorConfig::default(),
        }
    }
}

const TOP_KEYS: &[&str] = &["mode", "scenario", "data_dir", "output_dir", "seed", "filter_mode", "estimator"];

/// Values given on the command line; `Some` wins over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigOverrides {
    pub mode: Option<RunMode>,
    pub scenario: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub filter_mode: Option<FilterMode>,
    pub preview_distance: Option<f64>,
    pub wheelbase: Option<f64>,
    pub patch_length: Option<f64>,
    pub track_width: Option<f64>,
    pub spacing: Option<f64>,
    pub process_noise: Option<f64>,
    pub measurement_variance: Option<f64>,
    pub front_bias_slope: Option<f64>,
    pub front_bias_offset: Option<f64>,
    pub rear_bias_slope: Option<f64>,
    pub rear_bias_offset: Option<f64>,
    pub refine_band: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.mode, self.mode);
        if self.scenario.is_some() {
            cfg.scenario = self.scenario.clone();
        }
        if self.data_dir.is_some() {
            cfg.data_dir = self.data_dir.clone();
        }
        set(&mut cfg.output_dir, self.output_dir.clone());
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        set(&mut cfg.filter_mode, self.filter_mode);
        let e = &mut cfg.estimator;
        set(&mut e.preview_distance, self.preview_distance);
        set(&mut e.wheelbase, self.wheelbase);
        set(&mut e.patch_length, self.patch_length);
        set(&mut e.track_width, self.track_width);
        set(&mut e.spacing, self.spacing);
        set(&mut e.process_noise, self.process_noise);
        set(&mut e.measurement_variance, self.measurement_variance);
        set(&mut e.front_bias_slope, self.front_bias_slope);
        set(&mut e.front_bias_offset, self.front_bias_offset);
        set(&mut e.rear_bias_slope, self.rear_bias_slope);
        set(&mut e.rear_bias_offset, self.rear_bias_offset);
        if self.refine_band.is_some() {
            e.refine_band = self.refine_band;
        }
    }
}

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut unknown = BTreeSet::new();
    for (key, value) in table {
        if !TOP_KEYS.contains(&key.as_str()) {
            unknown.insert(key.clone());
            continue;
        }
        if key == "estimator" {
            if let Some(inner) = value.as_table() {
                for k in inner.keys() {
                    if !EstimatorConfig::KEYS.contains(&k.as_str()) {
                        unknown.insert(format!("estimator.{k}"));
                    }
                }
            }
        }
    }
    unknown.into_iter().collect()
}

impl RunConfig {
    /// Parses TOML text; every unknown key is reported at once.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.message()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Reads `file` (if any), applies `overrides` and validates.
    pub fn load(file: Option<&FsPath>, overrides: &ConfigOverrides) -> Result<Self> {
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Self::from_toml(&text).map_err(|e| match e {
                    Error::InvalidConfig { field, reason } if field == "<file>" => {
                        Error::format(path, None, reason)
                    }
                    other => other,
                })?
            }
            None => Self::default(),
        };
        overrides.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        match (self.mode, &self.scenario, &self.data_dir) {
            (RunMode::Simulate, _, Some(_)) => Err(Error::config("data_dir", "not used in simulate mode")),
            (RunMode::Replay, Some(_), _) => Err(Error::config("scenario", "not used in replay mode")),
            (RunMode::Replay, None, None) => Err(Error::config("data_dir", "required in replay mode")),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let e = &cfg.estimator;
        assert_eq!(
            [e.preview_distance, e.wheelbase, e.patch_length, e.track_width, e.spacing],
            [75.0, 3.09, 0.5, 1.73, 1.0]
        );
        assert_eq!([e.process_noise, e.measurement_variance], [8.2e-5, 49.0]);
        assert_eq!(
            [e.front_bias_slope, e.front_bias_offset, e.rear_bias_slope, e.rear_bias_offset],
            [-0.29, -1.87, 0.40, -0.67]
        );
    }

    #[test]
    fn flag_beats_file() {
        let mut cfg = RunConfig::from_toml("[estimator]\npreview_distance = 75.0\n").unwrap();
        ConfigOverrides {
            preview_distance: Some(30.0),
            ..Default::default()
        }
        .apply(&mut cfg);
        assert_eq!(cfg.estimator.preview_distance, 30.0);
    }

    #[test]
    fn unknown_keys_all_listed() {
        let err = RunConfig::from_toml("colour = 1\n[estimator]\nq = 1.0\nwheelbase = 2.0\n").unwrap_err();
        match err {
            Error::UnknownKeys(keys) => assert_eq!(keys, ["colour", "estimator.q"]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn negative_process_noise_names_field() {
        let err = RunConfig::load(
            None,
            &ConfigOverrides {
                process_noise: Some(-1.0),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("process_noise"), "{err}");
    }

    #[test]
    fn mode_inputs_checked() {
        let replay = ConfigOverrides {
            mode: Some(RunMode::Replay),
            ..Default::default()
        };
        assert!(RunConfig::load(None, &replay).is_err());
        let cfg = RunConfig::from_toml("mode = \"simulate\"\ndata_dir = \"x\"\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = RunConfig {
            mode: RunMode::Replay,
            data_dir: Some("rec/a".into()),
            seed: Some(7),
            filter_mode: FilterMode::Incremental,
            ..Default::default()
        };
        cfg.estimator.refine_band = Some(0.2);
        cfg.estimator.process_noise = 3.3e-4;
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
