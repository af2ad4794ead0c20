//! Scene-backed measurements and the four-user pair experiment.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use num_complex::Complex64;

use crate::array::{inner, synthesize_beam, AngleDeg, ArrayGeometry, BeamWeights};
use crate::channel::{
    crosslink_channel, perturb_inr, si_channel, user_channel, ChannelError, LinkChannel, LinkSide, Scene, SiChannel,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::metrics::{self, codebook_capacity, normalized_se, rate, sinr, to_db_floored, to_linear};
use crate::plot::BarChart;
use crate::selection::{
    align_over, steer, steer_plus, BeamMeasurements, InitialSelection, SelectionError, SelectionResult, SteerParams,
    SteerPlusParams,
};
use crate::sweep::{InrMap, SpatialProfile, SweepError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("scene needs at least two users, found {0}")]
    TooFewUsers(usize),
    #[error("user pair ({0}, {1}) is not part of the scene")]
    BadPair(usize, usize),
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("read {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

/// Options that shape how a scene is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureOptions {
    pub phase_bits: Option<u32>,
    pub inr_jitter_db: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            phase_bits: Some(crate::array::DEFAULT_PHASE_BITS),
            inr_jitter_db: 0.0,
        }
    }
}

/// A scene with its self-interference channel precomputed.
#[derive(Debug, Clone)]
pub struct SceneModel {
    scene: Scene,
    h_si: SiChannel,
    opts: MeasureOptions,
}

fn beam(geom: &ArrayGeometry, theta: f64, bits: Option<u32>) -> Option<BeamWeights> {
    let a = AngleDeg::steerable(theta).ok()?;
    synthesize_beam(geom, a, bits).ok()
}

impl SceneModel {
    pub fn new(scene: Scene, opts: MeasureOptions) -> Result<Self, ChannelError> {
        let h_si = si_channel(&scene)?;
        Ok(Self { scene, h_si, opts })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn si_channel(&self) -> &SiChannel {
        &self.h_si
    }

    pub fn tx_beam(&self, theta: f64) -> Option<BeamWeights> {
        beam(&self.scene.tx_array, theta, self.opts.phase_bits)
    }

    pub fn rx_beam(&self, theta: f64) -> Option<BeamWeights> {
        beam(&self.scene.rx_array, theta, self.opts.phase_bits)
    }

    /// Linear INR for one beam pair; NaN when either angle is not steerable.
    ///
    /// Jitter, when enabled, is a pure function of the seed and the pair.
    pub fn inr(&self, theta_tx: f64, theta_rx: f64) -> f64 {
        let (Some(f), Some(w)) = (self.tx_beam(theta_tx), self.rx_beam(theta_rx)) else {
            return f64::NAN;
        };
        let hf = self.h_si.apply(f.as_slice());
        self.inr_from(theta_tx, theta_rx, &hf, &w)
    }

    fn inr_from(&self, theta_tx: f64, theta_rx: f64, hf: &[Complex64], w: &BeamWeights) -> f64 {
        let inr = self.scene.budget.bs_to_bs() * inner(w.as_slice(), hf).norm_sqr();
        if self.opts.inr_jitter_db > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.scene.seed);
            rng.set_stream(theta_tx.to_bits() ^ theta_rx.to_bits().rotate_left(29));
            perturb_inr(inr, self.opts.inr_jitter_db, &mut rng)
        } else {
            inr
        }
    }

    /// Exhaustive sweep; identical, cell for cell, to calling [`Self::inr`].
    pub fn sweep(&self, tx: &SpatialProfile, rx: &SpatialProfile) -> Result<InrMap, SweepError> {
        if tx.is_empty() || rx.is_empty() {
            return Err(SweepError::EmptyProfile);
        }
        let rx_beams: Vec<Option<BeamWeights>> = rx.angles().iter().map(|&r| self.rx_beam(r)).collect();
        let values: Vec<f64> = tx
            .angles()
            .par_iter()
            .flat_map_iter(|&t| {
                let hf = self.tx_beam(t).map(|f| self.h_si.apply(f.as_slice()));
                rx.angles().iter().zip(&rx_beams).map(move |(&r, w)| match (&hf, w) {
                    (Some(hf), Some(w)) => self.inr_from(t, r, hf, w),
                    _ => f64::NAN,
                })
            })
            .collect();
        InrMap::new(tx.clone(), rx.clone(), values)
    }

    /// Measurement front-end for one downlink/uplink user pair.
    pub fn pair(&self, dl_user: usize, ul_user: usize) -> Result<PairMeasurements<'_>, ChannelError> {
        let h_cl = crosslink_channel(&self.scene, dl_user, ul_user)?;
        Ok(PairMeasurements {
            model: self,
            h_dl: user_channel(&self.scene, dl_user, LinkSide::Downlink)?,
            h_ul: user_channel(&self.scene, ul_user, LinkSide::Uplink)?,
            inr_cl: metrics::inr_cl(&h_cl, &self.scene.budget),
        })
    }
}

/// Measurements seen by the base station while serving a user pair.
pub struct PairMeasurements<'a> {
    model: &'a SceneModel,
    h_dl: LinkChannel,
    h_ul: LinkChannel,
    /// Cross-link INR at the downlink user, linear.
    pub inr_cl: f64,
}

impl BeamMeasurements for PairMeasurements<'_> {
    fn inr(&self, theta_tx: f64, theta_rx: f64) -> f64 {
        self.model.inr(theta_tx, theta_rx)
    }

    fn snr_dl(&self, theta_tx: f64) -> f64 {
        match self.model.tx_beam(theta_tx) {
            Some(f) => metrics::snr_dl(&f, &self.h_dl, &self.model.scene.budget),
            None => f64::NAN,
        }
    }

    fn snr_ul(&self, theta_rx: f64) -> f64 {
        match self.model.rx_beam(theta_rx) {
            Some(w) => metrics::snr_ul(&w, &self.h_ul, &self.model.scene.budget),
            None => f64::NAN,
        }
    }
}

/// Codebook beam alignment for both links of a pair.
pub fn align_pair<M: BeamMeasurements + ?Sized>(meas: &M, codebook: &[f64]) -> Result<InitialSelection, ScenarioError> {
    let angles: Vec<AngleDeg> = codebook
        .iter()
        .map(|&a| AngleDeg::new(a))
        .collect::<Result<_, _>>()
        .map_err(ChannelError::from)?;
    let (t, s_dl) = align_over(angles.iter().copied(), |t| meas.snr_dl(t)).ok_or(ScenarioError::EmptyCodebook)?;
    let (r, s_ul) = align_over(angles.iter().copied(), |r| meas.snr_ul(r)).ok_or(ScenarioError::EmptyCodebook)?;
    Ok(InitialSelection {
        theta_dl_init: t,
        theta_ul_init: r,
        snr_dl_init: s_dl,
        snr_ul_init: s_ul,
    })
}

/// Per-pair beam-alignment outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairBaseline {
    pub dl_user: usize,
    pub ul_user: usize,
    pub theta_tx_init: f64,
    pub theta_rx_init: f64,
    pub snr_dl_db: f64,
    pub snr_ul_db: f64,
    pub inr_init_db: f64,
    pub inr_cl_db: f64,
    /// Full-duplex sum spectral efficiency with the aligned beams.
    pub r_sum_init: f64,
    pub capacity: f64,
}

/// One (pair, Δ, algorithm) outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRecord {
    pub dl_user: usize,
    pub ul_user: usize,
    pub delta_deg: f64,
    pub algorithm: &'static str,
    pub theta_tx_star: f64,
    pub theta_rx_star: f64,
    pub inr_db: f64,
    pub sinr_dl_db: f64,
    pub sinr_ul_db: f64,
    pub r_sum: f64,
    pub normalized_se: f64,
    pub fallback_used: bool,
    pub inr_measurements: usize,
    pub snr_dl_measurements: usize,
    pub snr_ul_measurements: usize,
    pub cache_hits: usize,
}

impl ScenarioRecord {
    fn new(dl: usize, ul: usize, delta: f64, r: &SelectionResult, capacity: f64) -> Self {
        Self {
            dl_user: dl,
            ul_user: ul,
            delta_deg: delta,
            algorithm: r.algorithm.as_str(),
            theta_tx_star: r.theta_tx_star,
            theta_rx_star: r.theta_rx_star,
            inr_db: r.inr_db,
            sinr_dl_db: r.sinr_dl_db,
            sinr_ul_db: r.sinr_ul_db,
            r_sum: r.r_sum,
            normalized_se: normalized_se(r.r_sum, capacity),
            fallback_used: r.fallback_used,
            inr_measurements: r.ledger.inr_measurements,
            snr_dl_measurements: r.ledger.snr_dl_measurements,
            snr_ul_measurements: r.ledger.snr_ul_measurements,
            cache_hits: r.ledger.cache_hits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scene: String,
    pub seed: u64,
    pub deltas: Vec<f64>,
    pub baselines: Vec<PairBaseline>,
    pub records: Vec<ScenarioRecord>,
}

impl ScenarioReport {
    pub fn records_for(&self, dl: usize, ul: usize, algorithm: &str) -> impl Iterator<Item = &ScenarioRecord> {
        let algorithm = algorithm.to_string();
        self.records
            .iter()
            .filter(move |r| r.dl_user == dl && r.ul_user == ul && r.algorithm == algorithm)
    }
}

/// Applies the seed override and measurement options of a config to a scene.
pub fn model_for(scene: &Scene, cfg: &ExperimentConfig) -> Result<SceneModel, ChannelError> {
    let mut scene = scene.clone();
    if let Some(seed) = cfg.seed {
        scene.seed = seed;
    }
    SceneModel::new(
        scene,
        MeasureOptions {
            phase_bits: cfg.phase_bits(),
            inr_jitter_db: cfg.inr_jitter_db,
        },
    )
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect()
}

/// For every ordered user pair: beam alignment over the codebook, then STEER
/// with the configured INR target and STEER+ with its targets, for every Δ.
pub fn run_scenario_paper(scene: &Scene, cfg: &ExperimentConfig) -> Result<ScenarioReport, ScenarioError> {
    cfg.validate()?;
    let n = scene.users.len();
    if n < 2 {
        return Err(ScenarioError::TooFewUsers(n));
    }
    let pairs: Vec<(usize, usize)> = match &cfg.pairs {
        Some(p) => p.iter().map(|&[a, b]| (a, b)).collect(),
        None => all_pairs(n),
    };
    if let Some(&(a, b)) = pairs.iter().find(|(a, b)| *a >= n || *b >= n) {
        return Err(ScenarioError::BadPair(a, b));
    }
    let model = model_for(scene, cfg)?;
    let deltas = cfg.deltas()?;
    let codebook = cfg.codebook_angles()?;
    let sel = &cfg.selection;

    let per_pair: Vec<(PairBaseline, Vec<ScenarioRecord>)> = pairs
        .par_iter()
        .map(|&(dl, ul)| -> Result<_, ScenarioError> {
            let meas = model.pair(dl, ul)?;
            let inr_cl = sel.crosslink_inr_db.map(to_linear).unwrap_or(meas.inr_cl);
            let init = align_pair(&meas, &codebook)?;
            let capacity = codebook_capacity(init.snr_dl_init, init.snr_ul_init);
            let inr0 = meas.inr(init.theta_dl_init.degrees(), init.theta_ul_init.degrees());
            let baseline = PairBaseline {
                dl_user: dl,
                ul_user: ul,
                theta_tx_init: init.theta_dl_init.degrees(),
                theta_rx_init: init.theta_ul_init.degrees(),
                snr_dl_db: to_db_floored(init.snr_dl_init),
                snr_ul_db: to_db_floored(init.snr_ul_init),
                inr_init_db: to_db_floored(inr0),
                inr_cl_db: to_db_floored(inr_cl),
                r_sum_init: rate(sinr(init.snr_dl_init, inr_cl)) + rate(sinr(init.snr_ul_init, inr0)),
                capacity,
            };
            let mut records = Vec::with_capacity(2 * deltas.len());
            for &d in &deltas {
                let sp = SteerParams::symmetric(d, sel.resolution_deg, sel.steer_inr_target_db);
                let r = steer(&init, &sp, &meas, inr_cl)?;
                records.push(ScenarioRecord::new(dl, ul, d, &r, capacity));
                let pp = SteerPlusParams {
                    steer: SteerParams::symmetric(d, sel.resolution_deg, sel.plus_inr_target_db),
                    se_target: sel.plus_se_target,
                };
                let r = steer_plus(&init, &pp, &meas, inr_cl)?;
                records.push(ScenarioRecord::new(dl, ul, d, &r, capacity));
            }
            Ok((baseline, records))
        })
        .collect::<Result<_, _>>()?;

    let (baselines, records): (Vec<_>, Vec<_>) = per_pair.into_iter().unzip();
    Ok(ScenarioReport {
        scene: model.scene().name.clone(),
        seed: model.scene().seed,
        deltas,
        baselines,
        records: records.into_iter().flatten().collect(),
    })
}

pub const REPORT_CSV: &str = "scenario.csv";
pub const REPORT_JSON: &str = "scenario.json";

fn write_err(path: &Path, e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes `scenario.csv` (one row per record) and `scenario.json`.
pub fn export_report(report: &ScenarioReport, dir: &Path) -> Result<(PathBuf, PathBuf), ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let csv_path = dir.join(REPORT_CSV);
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| write_err(&csv_path, e))?;
    if report.records.is_empty() {
        w.write_record(RECORD_HEADER).map_err(|e| write_err(&csv_path, e))?;
    }
    for r in &report.records {
        w.serialize(r).map_err(|e| write_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| write_err(&csv_path, e))?;

    let json_path = dir.join(REPORT_JSON);
    let text = serde_json::to_string_pretty(report).map_err(|e| write_err(&json_path, e))?;
    std::fs::write(&json_path, text + "\n").map_err(|e| write_err(&json_path, e))?;
    Ok((csv_path, json_path))
}

pub const RECORD_HEADER: [&str; 16] = [
    "dl_user",
    "ul_user",
    "delta_deg",
    "algorithm",
    "theta_tx_star",
    "theta_rx_star",
    "inr_db",
    "sinr_dl_db",
    "sinr_ul_db",
    "r_sum",
    "normalized_se",
    "fallback_used",
    "inr_measurements",
    "snr_dl_measurements",
    "snr_ul_measurements",
    "cache_hits",
];

/// The columns of an exported report row needed for figures.
#[derive(Debug, Clone, PartialEq, serde::Deserialize)]
pub struct ReportRow {
    pub dl_user: usize,
    pub ul_user: usize,
    pub delta_deg: f64,
    pub algorithm: String,
    pub r_sum: f64,
    pub normalized_se: f64,
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>, ScenarioError> {
    let read_err = |e: csv::Error| ScenarioError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut rdr = csv::Reader::from_path(path).map_err(read_err)?;
    rdr.deserialize().collect::<Result<_, _>>().map_err(read_err)
}

/// Normalized SE bars grouped by user pair, one series per Δ.
pub fn report_bars(rows: &[ReportRow], algorithm: &str, deltas: Option<&[f64]>) -> BarChart {
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut all_deltas: Vec<f64> = Vec::new();
    for r in rows.iter().filter(|r| r.algorithm == algorithm) {
        if !pairs.contains(&(r.dl_user, r.ul_user)) {
            pairs.push((r.dl_user, r.ul_user));
        }
        if !all_deltas.contains(&r.delta_deg) {
            all_deltas.push(r.delta_deg);
        }
    }
    let chosen: Vec<f64> = match deltas {
        Some(d) => d.to_vec(),
        None => all_deltas,
    };
    let series = chosen
        .iter()
        .map(|&d| {
            let values = pairs
                .iter()
                .map(|&(a, b)| {
                    rows.iter()
                        .find(|r| r.algorithm == algorithm && (r.dl_user, r.ul_user) == (a, b) && r.delta_deg == d)
                        .map_or(0.0, |r| r.normalized_se)
                })
                .collect();
            (format!("Δ={d}°"), values)
        })
        .collect();
    BarChart {
        groups: pairs.iter().map(|(a, b)| format!("{a}→{b}")).collect(),
        series,
        y_desc: format!("normalized sum SE ({algorithm})"),
    }
}
