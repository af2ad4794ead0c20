//! Experiment configuration files.
//!
//! ```toml
//! schema_version = 1
//! scene = "../scenes/lobby.toml"   # relative to this file
//! output = "out/lobby"
//! seed = 7                          # optional, overrides the scene seed
//! deltas = "0:1:6"                  # or a list: [0, 2, 6]
//! pairs = [[0, 1], [1, 0]]          # optional, default: every ordered pair
//!
//! [sweep]
//! tx_profile = "-64:1:64"
//! rx_profile = "-64:1:64"
//!
//! [selection]
//! resolution_deg = 1.0
//! steer_inr_target_db = 0.0
//! plus_inr_target_db = inf
//! plus_se_target = inf
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::DEFAULT_PHASE_BITS;
use crate::sweep::{SpatialProfile, SweepError};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid range '{0}': expected START:STEP:STOP")]
    BadRange(String),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("scene file {0} does not exist")]
    MissingScene(PathBuf),
}

/// Expands `START:STEP:STOP` into its grid, both ends inclusive.
pub fn parse_range(text: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = || ConfigError::BadRange(text.to_string());
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    let [start, step, stop] = parts[..] else {
        return Err(bad());
    };
    let profile = SpatialProfile::range(start, step, stop).map_err(|_| bad())?;
    Ok(profile.angles().to_vec())
}

/// Parses a profile written as `START:STEP:STOP`.
pub fn parse_profile(text: &str) -> Result<SpatialProfile, ConfigError> {
    SpatialProfile::from_angles(parse_range(text)?).map_err(|e: SweepError| ConfigError::BadRange(e.to_string()))
}

/// Either `"START:STEP:STOP"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RangeSpec {
    Range(String),
    List(Vec<f64>),
}

impl RangeSpec {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        match self {
            RangeSpec::Range(s) => parse_range(s),
            RangeSpec::List(v) => Ok(v.clone()),
        }
    }
}

fn default_deltas() -> RangeSpec {
    RangeSpec::Range("0:1:6".into())
}

fn default_profile() -> String {
    "-64:1:64".into()
}

fn default_codebook() -> String {
    "-60:8:60".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_phase_bits() -> u32 {
    DEFAULT_PHASE_BITS
}

fn default_resolution() -> f64 {
    1.0
}

fn inf() -> f64 {
    f64::INFINITY
}

fn yes() -> bool {
    true
}

fn default_color_min() -> f64 {
    -20.0
}

fn default_color_max() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_profile")]
    pub tx_profile: String,
    #[serde(default = "default_profile")]
    pub rx_profile: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tx_profile: default_profile(),
            rx_profile: default_profile(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    #[serde(default = "default_resolution")]
    pub resolution_deg: f64,
    #[serde(default)]
    pub steer_inr_target_db: f64,
    #[serde(default = "inf")]
    pub plus_inr_target_db: f64,
    #[serde(default = "inf")]
    pub plus_se_target: f64,
    /// Fixed cross-link INR in dB used instead of the scene's true value.
    #[serde(default)]
    pub crosslink_inr_db: Option<f64>,
    #[serde(default = "default_codebook")]
    pub codebook: String,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            resolution_deg: default_resolution(),
            steer_inr_target_db: 0.0,
            plus_inr_target_db: inf(),
            plus_se_target: inf(),
            crosslink_inr_db: None,
            codebook: default_codebook(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    #[serde(default = "yes")]
    pub heatmap: bool,
    #[serde(default = "yes")]
    pub cdf: bool,
    #[serde(default = "yes")]
    pub bars: bool,
    #[serde(default = "default_color_min")]
    pub color_min_db: f64,
    #[serde(default = "default_color_max")]
    pub color_max_db: f64,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self {
            heatmap: true,
            cdf: true,
            bars: true,
            color_min_db: default_color_min(),
            color_max_db: default_color_max(),
        }
    }
}

/// On-disk experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub scene: PathBuf,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_deltas")]
    pub deltas: RangeSpec,
    #[serde(default)]
    pub pairs: Option<Vec<[usize; 2]>>,
    /// Phase-shifter resolution; 0 selects ideal phases.
    #[serde(default = "default_phase_bits")]
    pub phase_bits: u32,
    /// Log-normal spread of INR measurement jitter in dB.
    #[serde(default)]
    pub inr_jitter_db: f64,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub selection: SelectionConfig,
    #[serde(default)]
    pub plots: PlotConfig,
}

fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}

impl ExperimentConfig {
    /// Config for `scene` with every default applied.
    pub fn for_scene(scene: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            scene: scene.into(),
            output: default_output(),
            seed: None,
            deltas: default_deltas(),
            pairs: None,
            phase_bits: DEFAULT_PHASE_BITS,
            inr_jitter_db: 0.0,
            sweep: SweepConfig::default(),
            selection: SelectionConfig::default(),
            plots: PlotConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn deltas(&self) -> Result<Vec<f64>, ConfigError> {
        self.deltas.values()
    }

    pub fn tx_profile(&self) -> Result<SpatialProfile, ConfigError> {
        parse_profile(&self.sweep.tx_profile)
    }

    pub fn rx_profile(&self) -> Result<SpatialProfile, ConfigError> {
        parse_profile(&self.sweep.rx_profile)
    }

    pub fn codebook_angles(&self) -> Result<Vec<f64>, ConfigError> {
        parse_range(&self.selection.codebook)
    }

    pub fn phase_bits(&self) -> Option<u32> {
        (self.phase_bits > 0).then_some(self.phase_bits)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, message: &str| {
            Err(ConfigError::Invalid {
                field,
                message: message.to_string(),
            })
        };
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return invalid("schema_version", &format!("expected {CONFIG_SCHEMA_VERSION}"));
        }
        let deltas = self.deltas()?;
        if deltas.is_empty() {
            return invalid("deltas", "list must not be empty");
        }
        if deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return invalid("deltas", "values must be finite and >= 0");
        }
        self.tx_profile()?;
        self.rx_profile()?;
        self.codebook_angles()?;
        let s = &self.selection;
        if !(s.resolution_deg.is_finite() && s.resolution_deg > 0.0) {
            return invalid("selection.resolution_deg", "must be finite and > 0");
        }
        if s.steer_inr_target_db.is_nan() || s.plus_inr_target_db.is_nan() {
            return invalid("selection", "INR targets must not be NaN");
        }
        if !(s.plus_se_target >= 0.0) {
            return invalid("selection.plus_se_target", "must be >= 0");
        }
        if let Some(cl) = s.crosslink_inr_db {
            if !(cl.is_finite() || cl == f64::NEG_INFINITY) {
                return invalid("selection.crosslink_inr_db", "must be finite or -inf");
            }
        }
        if !(self.inr_jitter_db.is_finite() && self.inr_jitter_db >= 0.0) {
            return invalid("inr_jitter_db", "must be finite and >= 0");
        }
        if self.phase_bits > 16 {
            return invalid("phase_bits", "at most 16");
        }
        if let Some(pairs) = &self.pairs {
            if pairs.is_empty() {
                return invalid("pairs", "list must not be empty");
            }
            if pairs.iter().any(|[a, b]| a == b) {
                return invalid("pairs", "downlink and uplink users must differ");
            }
        }
        if !(self.plots.color_min_db < self.plots.color_max_db) {
            return invalid("plots", "color_min_db must be below color_max_db");
        }
        Ok(())
    }
}

/// Reads a config file and resolves its scene path against the file's
/// directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = ExperimentConfig::from_toml_str(&text, path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if cfg.scene.is_relative() {
        cfg.scene = base.join(&cfg.scene);
    }
    if cfg.output.is_relative() {
        cfg.output = base.join(&cfg.output);
    }
    if !cfg.scene.exists() {
        return Err(ConfigError::MissingScene(cfg.scene));
    }
    Ok(cfg)
}
