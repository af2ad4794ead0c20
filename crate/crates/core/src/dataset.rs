//! Sweep datasets on disk.
//!
//! A dataset is a CSV file with header `theta_tx_deg,theta_rx_deg,inr_db`,
//! one row per beam pair in tx-major order, next to a `<stem>.meta.json`
//! sidecar. Import accepts rows in any order as long as they form a complete
//! grid over uniformly spaced profiles.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::Scene;
use crate::metrics::to_linear;
use crate::sweep::{InrMap, SpatialProfile, SweepError, MAP_DB_FLOOR};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const DATASET_HEADER: [&str; 3] = ["theta_tx_deg", "theta_rx_deg", "inr_db"];

/// Relative tolerance used to snap angles onto an inferred grid.
const GRID_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("header must be `theta_tx_deg,theta_rx_deg,inr_db`, found `{0}`")]
    Header(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("duplicate measurement for (θ_tx={0}°, θ_rx={1}°)")]
    Duplicate(f64, f64),
    #[error("missing measurement for (θ_tx={0}°, θ_rx={1}°)")]
    Missing(f64, f64),
    #[error("{axis} angles are not uniformly spaced")]
    NonUniform { axis: &'static str },
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

/// Sidecar metadata of a sweep dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMeta {
    pub schema_version: u32,
    pub tx_profile: String,
    pub rx_profile: String,
    pub cells: usize,
    #[serde(default)]
    pub scene: Option<String>,
    #[serde(default)]
    pub scene_digest: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SweepMeta {
    pub fn for_map(map: &InrMap, scene: Option<&Scene>) -> Self {
        Self {
            schema_version: DATASET_SCHEMA_VERSION,
            tx_profile: map.tx_profile().describe(),
            rx_profile: map.rx_profile().describe(),
            cells: map.len(),
            scene: scene.map(|s| s.name.clone()),
            scene_digest: scene.map(scene_digest),
            seed: scene.map(|s| s.seed),
        }
    }
}

/// SHA-256 of the scene's canonical TOML form, hex encoded.
pub fn scene_digest(scene: &Scene) -> String {
    let digest = Sha256::digest(scene.to_toml_string().as_bytes());
    format!("{digest:x}")
}

/// `sweep.csv` -> `sweep.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes the dataset CSV and its metadata sidecar.
pub fn export_sweep(map: &InrMap, meta: &SweepMeta, csv_path: &Path) -> Result<PathBuf, DatasetError> {
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| io_err(csv_path, e))?;
    w.write_record(DATASET_HEADER).map_err(|e| io_err(csv_path, e))?;
    let db = map.db_values();
    let (_, n_rx) = map.shape();
    for (i, t) in map.tx_profile().angles().iter().enumerate() {
        for (j, r) in map.rx_profile().angles().iter().enumerate() {
            let v = db[i * n_rx + j];
            w.write_record([t.to_string(), r.to_string(), v.to_string()])
                .map_err(|e| io_err(csv_path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(csv_path, e))?;
    let mp = meta_path(csv_path);
    let text = serde_json::to_string_pretty(meta).map_err(|e| io_err(&mp, e))?;
    std::fs::write(&mp, text + "\n").map_err(|e| io_err(&mp, e))?;
    Ok(mp)
}

/// Reads the sidecar next to `csv_path`, if present.
pub fn read_meta(csv_path: &Path) -> Result<Option<SweepMeta>, DatasetError> {
    let mp = meta_path(csv_path);
    if !mp.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&mp).map_err(|e| io_err(&mp, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| io_err(&mp, e))
}

/// Sorted distinct values, validated as a uniform grid.
fn infer_axis(values: impl Iterator<Item = f64>, axis: &'static str) -> Result<SpatialProfile, DatasetError> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() > 1 {
        let step = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
        let tol = GRID_TOL * step.abs().max(1.0);
        if v.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > tol) {
            return Err(DatasetError::NonUniform { axis });
        }
    }
    Ok(SpatialProfile::from_angles(v)?)
}

/// Reads a dataset CSV into an INR map; values are converted back to linear.
pub fn import_sweep(csv_path: &Path) -> Result<InrMap, DatasetError> {
    let file = std::fs::File::open(csv_path).map_err(|e| io_err(csv_path, e))?;
    read_sweep(file)
}

pub fn read_sweep<R: std::io::Read>(reader: R) -> Result<InrMap, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| DatasetError::Header(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != DATASET_HEADER {
        return Err(DatasetError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| DatasetError::Row {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| -> Result<f64, DatasetError> {
            let text = rec.get(k).unwrap_or("");
            let v: f64 = text.parse().map_err(|_| DatasetError::Row {
                line,
                message: format!("`{text}` is not a number in column {}", DATASET_HEADER[k]),
            })?;
            if v.is_nan() || (k < 2 && !v.is_finite()) || v == f64::INFINITY {
                return Err(DatasetError::Row {
                    line,
                    message: format!("{} must be finite, found {text}", DATASET_HEADER[k]),
                });
            }
            Ok(v)
        };
        rows.push((field(0)?, field(1)?, field(2)?));
    }
    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    let tx = infer_axis(rows.iter().map(|r| r.0), "tx")?;
    let rx = infer_axis(rows.iter().map(|r| r.1), "rx")?;
    let index = |p: &SpatialProfile, a: f64| -> usize {
        p.angles()
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - a).abs().total_cmp(&(y.1 - a).abs()))
            .map(|(i, _)| i)
            .expect("profile is non-empty")
    };
    let (n_tx, n_rx) = (tx.len(), rx.len());
    let mut cells: HashMap<(usize, usize), f64> = HashMap::with_capacity(rows.len());
    for &(t, r, db) in &rows {
        let key = (index(&tx, t), index(&rx, r));
        if cells.insert(key, db).is_some() {
            return Err(DatasetError::Duplicate(t, r));
        }
    }
    let mut values = Vec::with_capacity(n_tx * n_rx);
    for i in 0..n_tx {
        for j in 0..n_rx {
            let db = *cells
                .get(&(i, j))
                .ok_or(DatasetError::Missing(tx.angles()[i], rx.angles()[j]))?;
            values.push(if db <= MAP_DB_FLOOR { 0.0 } else { to_linear(db) });
        }
    }
    Ok(InrMap::new(tx, rx, values)?)
}
