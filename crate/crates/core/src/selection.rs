//! Measurement-driven beam selection: codebook beam alignment, STEER and
//! STEER+, plus an exhaustive reference solver used for verification.
//!
//! Candidates are beam pairs `(θ_tx^init + Δϑ_tx, θ_rx^init + Δϑ_rx)` with
//! offsets drawn from spatial neighborhoods. Both solvers prefer the smallest
//! deviation `Δϑ_tx² + Δϑ_rx²`; equal deviations are ordered by
//! `(|Δϑ_tx|, Δϑ_tx, Δϑ_rx)`.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{AngleDeg, Codebook};
use crate::metrics::{rate, sinr, to_db_floored, to_linear};

const OFFSET_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("invalid selection parameters: {0}")]
    InvalidParams(String),
    #[error("INR measurement at (θ_tx={theta_tx}°, θ_rx={theta_rx}°) returned {value}")]
    BadInr { theta_tx: f64, theta_rx: f64, value: f64 },
    #[error("downlink SNR measurement at θ_tx={theta}° returned {value}")]
    BadSnrDl { theta: f64, value: f64 },
    #[error("uplink SNR measurement at θ_rx={theta}° returned {value}")]
    BadSnrUl { theta: f64, value: f64 },
    #[error("cross-link INR must be finite and non-negative, got {0}")]
    BadCrosslink(f64),
}

/// Over-the-air measurements available to the base station, all linear.
pub trait BeamMeasurements {
    fn inr(&self, theta_tx: f64, theta_rx: f64) -> f64;
    fn snr_dl(&self, theta_tx: f64) -> f64;
    fn snr_ul(&self, theta_rx: f64) -> f64;
}

/// Measurements backed by closures.
pub struct FnMeasurements<I, D, U> {
    pub inr: I,
    pub snr_dl: D,
    pub snr_ul: U,
}

impl<I, D, U> BeamMeasurements for FnMeasurements<I, D, U>
where
    I: Fn(f64, f64) -> f64,
    D: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
{
    fn inr(&self, theta_tx: f64, theta_rx: f64) -> f64 {
        (self.inr)(theta_tx, theta_rx)
    }

    fn snr_dl(&self, theta_tx: f64) -> f64 {
        (self.snr_dl)(theta_tx)
    }

    fn snr_ul(&self, theta_rx: f64) -> f64 {
        (self.snr_ul)(theta_rx)
    }
}

/// Beam-alignment output that seeds the neighborhood search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialSelection {
    pub theta_dl_init: AngleDeg,
    pub theta_ul_init: AngleDeg,
    pub snr_dl_init: f64,
    pub snr_ul_init: f64,
}

impl InitialSelection {
    /// Interference-free sum spectral efficiency of the aligned beams.
    pub fn codebook_capacity(&self) -> f64 {
        crate::metrics::codebook_capacity(self.snr_dl_init, self.snr_ul_init)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteerParams {
    pub delta_tx_deg: f64,
    pub delta_rx_deg: f64,
    pub res_tx_deg: f64,
    pub res_rx_deg: f64,
    /// INR target in dB; `+inf` admits every pair.
    pub inr_target_db: f64,
}

impl SteerParams {
    pub fn symmetric(delta_deg: f64, res_deg: f64, inr_target_db: f64) -> Self {
        Self {
            delta_tx_deg: delta_deg,
            delta_rx_deg: delta_deg,
            res_tx_deg: res_deg,
            res_rx_deg: res_deg,
            inr_target_db,
        }
    }

    pub fn validate(&self) -> Result<(), SelectionError> {
        let bad = |m: &str| Err(SelectionError::InvalidParams(m.into()));
        if !(self.delta_tx_deg >= 0.0 && self.delta_rx_deg >= 0.0)
            || !self.delta_tx_deg.is_finite()
            || !self.delta_rx_deg.is_finite()
        {
            return bad("neighborhood half-widths must be finite and >= 0");
        }
        if !(self.res_tx_deg > 0.0 && self.res_rx_deg > 0.0)
            || !self.res_tx_deg.is_finite()
            || !self.res_rx_deg.is_finite()
        {
            return bad("resolutions must be finite and > 0");
        }
        if self.inr_target_db.is_nan() {
            return bad("INR target must not be NaN");
        }
        Ok(())
    }

    fn inr_target_linear(&self) -> f64 {
        to_linear(self.inr_target_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteerPlusParams {
    #[serde(flatten)]
    pub steer: SteerParams,
    /// Sum spectral efficiency target in bps/Hz; `+inf` maximizes.
    pub se_target: f64,
}

impl SteerPlusParams {
    pub fn validate(&self) -> Result<(), SelectionError> {
        self.steer.validate()?;
        if !(self.se_target >= 0.0) {
            return Err(SelectionError::InvalidParams("SE target must be >= 0".into()));
        }
        Ok(())
    }
}

/// Measurement counts of one selection run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MeasurementLedger {
    pub inr_measurements: usize,
    pub snr_dl_measurements: usize,
    pub snr_ul_measurements: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Steer,
    SteerPlus,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Steer => "steer",
            Algorithm::SteerPlus => "steer-plus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub algorithm: Algorithm,
    pub theta_tx_star: f64,
    pub theta_rx_star: f64,
    pub inr_db: f64,
    pub sinr_dl_db: f64,
    pub sinr_ul_db: f64,
    pub r_dl: f64,
    pub r_ul: f64,
    pub r_sum: f64,
    /// `Δϑ_tx² + Δϑ_rx²`, deg².
    pub deviation_metric: f64,
    pub fallback_used: bool,
    pub ledger: MeasurementLedger,
}

/// Codebook entry with the highest measured SNR; ties go to the smaller angle.
pub fn beam_align<F: Fn(f64) -> f64>(codebook: &Codebook, snr_fn: F) -> AngleDeg {
    align_over(codebook.angles(), snr_fn)
        .expect("codebooks are non-empty")
        .0
}

/// [`beam_align`] over arbitrary ascending angles, also returning the SNR.
pub fn align_over<F, I>(angles: I, snr_fn: F) -> Option<(AngleDeg, f64)>
where
    F: Fn(f64) -> f64,
    I: IntoIterator<Item = AngleDeg>,
{
    let mut best: Option<(AngleDeg, f64)> = None;
    for a in angles {
        let s = snr_fn(a.degrees());
        match best {
            Some((ba, bs)) if !(s > bs || (s == bs && a < ba)) => {}
            _ => best = Some((a, s)),
        }
    }
    best
}

/// `{m·res : m ∈ [-⌊Δ/res⌋, ⌊Δ/res⌋]}` in ascending order.
pub fn neighborhood_offsets(delta_deg: f64, res_deg: f64) -> Vec<f64> {
    let k = (delta_deg / res_deg + OFFSET_EPS).floor() as i64;
    (-k..=k).map(|m| m as f64 * res_deg).collect()
}

/// One candidate beam pair as offsets from the initial selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub tx_index: usize,
    pub rx_index: usize,
    pub d_tx: f64,
    pub d_rx: f64,
}

impl Candidate {
    pub fn deviation(&self) -> f64 {
        self.d_tx * self.d_tx + self.d_rx * self.d_rx
    }

    /// Total order used to rank candidates.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.deviation()
            .total_cmp(&other.deviation())
            .then(self.d_tx.abs().total_cmp(&other.d_tx.abs()))
            .then(self.d_tx.total_cmp(&other.d_tx))
            .then(self.d_rx.total_cmp(&other.d_rx))
    }
}

/// Every offset pair sorted by ascending deviation.
pub fn sorted_candidates(offsets_tx: &[f64], offsets_rx: &[f64]) -> Vec<Candidate> {
    let mut all: Vec<Candidate> = offsets_tx
        .iter()
        .enumerate()
        .flat_map(|(i, &d_tx)| {
            offsets_rx.iter().enumerate().map(move |(j, &d_rx)| Candidate {
                tx_index: i,
                rx_index: j,
                d_tx,
                d_rx,
            })
        })
        .collect();
    all.sort_by(Candidate::rank_cmp);
    all
}

/// Neighborhood angles around the initial selection.
struct Neighborhood {
    tx: Vec<f64>,
    rx: Vec<f64>,
    offsets_tx: Vec<f64>,
    offsets_rx: Vec<f64>,
}

impl Neighborhood {
    fn new(init: &InitialSelection, p: &SteerParams) -> Self {
        let offsets_tx = neighborhood_offsets(p.delta_tx_deg, p.res_tx_deg);
        let offsets_rx = neighborhood_offsets(p.delta_rx_deg, p.res_rx_deg);
        let t0 = init.theta_dl_init.degrees();
        let r0 = init.theta_ul_init.degrees();
        Self {
            tx: offsets_tx.iter().map(|d| t0 + d).collect(),
            rx: offsets_rx.iter().map(|d| r0 + d).collect(),
            offsets_tx,
            offsets_rx,
        }
    }
}

/// Measurement front-end with caching and exact accounting.
struct Probe<'a, M: ?Sized> {
    meas: &'a M,
    inr: HashMap<(usize, usize), f64>,
    snr_dl: HashMap<usize, f64>,
    snr_ul: HashMap<usize, f64>,
    ledger: MeasurementLedger,
}

impl<'a, M: BeamMeasurements + ?Sized> Probe<'a, M> {
    fn new(meas: &'a M) -> Self {
        Self {
            meas,
            inr: HashMap::new(),
            snr_dl: HashMap::new(),
            snr_ul: HashMap::new(),
            ledger: MeasurementLedger::default(),
        }
    }

    fn inr(&mut self, nb: &Neighborhood, i: usize, j: usize) -> Result<f64, SelectionError> {
        if let Some(&v) = self.inr.get(&(i, j)) {
            self.ledger.cache_hits += 1;
            return Ok(v);
        }
        let (t, r) = (nb.tx[i], nb.rx[j]);
        let v = self.meas.inr(t, r);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SelectionError::BadInr {
                theta_tx: t,
                theta_rx: r,
                value: v,
            });
        }
        self.ledger.inr_measurements += 1;
        self.inr.insert((i, j), v);
        Ok(v)
    }

    fn snr_dl(&mut self, nb: &Neighborhood, i: usize) -> Result<f64, SelectionError> {
        if let Some(&v) = self.snr_dl.get(&i) {
            self.ledger.cache_hits += 1;
            return Ok(v);
        }
        let v = self.meas.snr_dl(nb.tx[i]);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SelectionError::BadSnrDl {
                theta: nb.tx[i],
                value: v,
            });
        }
        self.ledger.snr_dl_measurements += 1;
        self.snr_dl.insert(i, v);
        Ok(v)
    }

    fn snr_ul(&mut self, nb: &Neighborhood, j: usize) -> Result<f64, SelectionError> {
        if let Some(&v) = self.snr_ul.get(&j) {
            self.ledger.cache_hits += 1;
            return Ok(v);
        }
        let v = self.meas.snr_ul(nb.rx[j]);
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SelectionError::BadSnrUl {
                theta: nb.rx[j],
                value: v,
            });
        }
        self.ledger.snr_ul_measurements += 1;
        self.snr_ul.insert(j, v);
        Ok(v)
    }
}

fn check_crosslink(inr_cl: f64) -> Result<(), SelectionError> {
    if inr_cl >= 0.0 && inr_cl.is_finite() {
        Ok(())
    } else {
        Err(SelectionError::BadCrosslink(inr_cl))
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    algorithm: Algorithm,
    c: &Candidate,
    nb: &Neighborhood,
    inr: f64,
    snr_dl: f64,
    snr_ul: f64,
    inr_cl: f64,
    fallback_used: bool,
    ledger: MeasurementLedger,
) -> SelectionResult {
    let sinr_dl = sinr(snr_dl, inr_cl);
    let sinr_ul = sinr(snr_ul, inr);
    let (r_dl, r_ul) = (rate(sinr_dl), rate(sinr_ul));
    SelectionResult {
        algorithm,
        theta_tx_star: nb.tx[c.tx_index],
        theta_rx_star: nb.rx[c.rx_index],
        inr_db: to_db_floored(inr),
        sinr_dl_db: to_db_floored(sinr_dl),
        sinr_ul_db: to_db_floored(sinr_ul),
        r_dl,
        r_ul,
        r_sum: r_dl + r_ul,
        deviation_metric: c.deviation(),
        fallback_used,
        ledger,
    }
}

/// STEER: measure self-interference over the whole neighborhood grid and
/// return the least-deviating pair with INR at or below
/// `max(INR_tgt, grid minimum)`. The downlink/uplink SNRs of the chosen pair
/// are then measured once each to report its spectral efficiency.
pub fn steer<M: BeamMeasurements + ?Sized>(
    init: &InitialSelection,
    params: &SteerParams,
    meas: &M,
    inr_cl: f64,
) -> Result<SelectionResult, SelectionError> {
    params.validate()?;
    check_crosslink(inr_cl)?;
    let nb = Neighborhood::new(init, params);
    let mut probe = Probe::new(meas);
    let mut grid_min = f64::INFINITY;
    for i in 0..nb.tx.len() {
        for j in 0..nb.rx.len() {
            grid_min = grid_min.min(probe.inr(&nb, i, j)?);
        }
    }
    let threshold = params.inr_target_linear().max(grid_min);
    let candidates = sorted_candidates(&nb.offsets_tx, &nb.offsets_rx);
    let chosen = candidates
        .iter()
        .find(|c| probe.inr[&(c.tx_index, c.rx_index)] <= threshold)
        .expect("the grid minimum always qualifies");
    let inr = probe.inr[&(chosen.tx_index, chosen.rx_index)];
    let snr_dl = probe.snr_dl(&nb, chosen.tx_index)?;
    let snr_ul = probe.snr_ul(&nb, chosen.rx_index)?;
    Ok(finish(
        Algorithm::Steer,
        chosen,
        &nb,
        inr,
        snr_dl,
        snr_ul,
        inr_cl,
        false,
        probe.ledger,
    ))
}

/// STEER+: walk candidates in ascending deviation, measuring INR for each and
/// the downlink/uplink SNRs (cached per angle) only when INR meets the
/// target. The incumbent is replaced on a strictly larger sum spectral
/// efficiency and the walk stops once it reaches `se_target`. When no pair
/// meets the INR target the initial selection is returned with
/// `fallback_used` set.
pub fn steer_plus<M: BeamMeasurements + ?Sized>(
    init: &InitialSelection,
    params: &SteerPlusParams,
    meas: &M,
    inr_cl: f64,
) -> Result<SelectionResult, SelectionError> {
    params.validate()?;
    check_crosslink(inr_cl)?;
    let nb = Neighborhood::new(init, &params.steer);
    let candidates = sorted_candidates(&nb.offsets_tx, &nb.offsets_rx);
    let target = params.steer.inr_target_linear();
    let sinr_dl_factor = 1.0 + inr_cl;
    let mut probe = Probe::new(meas);

    let origin = candidates[0];
    let mut best = origin;
    let mut best_values: Option<(f64, f64, f64)> = None;
    let mut r_max = 0.0;
    let mut any_qualified = false;
    for c in &candidates {
        let inr = probe.inr(&nb, c.tx_index, c.rx_index)?;
        if inr > target {
            continue;
        }
        any_qualified = true;
        let snr_dl = probe.snr_dl(&nb, c.tx_index)?;
        let snr_ul = probe.snr_ul(&nb, c.rx_index)?;
        let r_sum = rate(snr_dl / sinr_dl_factor) + rate(sinr(snr_ul, inr));
        if r_sum > r_max {
            best = *c;
            best_values = Some((inr, snr_dl, snr_ul));
            r_max = r_sum;
            if r_max >= params.se_target {
                break;
            }
        }
    }

    let (inr, snr_dl, snr_ul) = match best_values {
        Some(v) => v,
        // incumbent never replaced: report the initial pair; its INR was the
        // first measurement and its SNRs come from beam alignment
        None => (
            probe.inr[&(origin.tx_index, origin.rx_index)],
            init.snr_dl_init,
            init.snr_ul_init,
        ),
    };
    Ok(finish(
        Algorithm::SteerPlus,
        &best,
        &nb,
        inr,
        snr_dl,
        snr_ul,
        inr_cl,
        !any_qualified,
        probe.ledger,
    ))
}

/// Brute-force reference that applies the selection problems literally:
/// every pair of the grid is measured and the feasible pair with the smallest
/// rank is chosen. Independent of the sorted walk above.
pub mod oracle {
    use super::*;

    struct Cell {
        cand: Candidate,
        inr: f64,
        snr_dl: f64,
        snr_ul: f64,
    }

    fn enumerate<M: BeamMeasurements + ?Sized>(
        init: &InitialSelection,
        p: &SteerParams,
        meas: &M,
    ) -> (Neighborhood, Vec<Cell>) {
        let nb = Neighborhood::new(init, p);
        let mut cells = Vec::new();
        for (i, &d_tx) in nb.offsets_tx.iter().enumerate() {
            for (j, &d_rx) in nb.offsets_rx.iter().enumerate() {
                cells.push(Cell {
                    cand: Candidate {
                        tx_index: i,
                        rx_index: j,
                        d_tx,
                        d_rx,
                    },
                    inr: meas.inr(nb.tx[i], nb.rx[j]),
                    snr_dl: meas.snr_dl(nb.tx[i]),
                    snr_ul: meas.snr_ul(nb.rx[j]),
                });
            }
        }
        (nb, cells)
    }

    fn earliest<'c>(cells: impl Iterator<Item = &'c Cell>) -> Option<&'c Cell> {
        cells.min_by(|a, b| a.cand.rank_cmp(&b.cand))
    }

    fn ledger(cells: &[Cell], nb: &Neighborhood) -> MeasurementLedger {
        MeasurementLedger {
            inr_measurements: cells.len(),
            snr_dl_measurements: nb.tx.len(),
            snr_ul_measurements: nb.rx.len(),
            cache_hits: 0,
        }
    }

    pub fn steer<M: BeamMeasurements + ?Sized>(
        init: &InitialSelection,
        params: &SteerParams,
        meas: &M,
        inr_cl: f64,
    ) -> SelectionResult {
        let (nb, cells) = enumerate(init, params, meas);
        let inr_min = cells.iter().map(|c| c.inr).fold(f64::INFINITY, f64::min);
        let threshold = to_linear(params.inr_target_db).max(inr_min);
        let c = earliest(cells.iter().filter(|c| c.inr <= threshold)).expect("minimum is feasible");
        finish(
            Algorithm::Steer,
            &c.cand,
            &nb,
            c.inr,
            c.snr_dl,
            c.snr_ul,
            inr_cl,
            false,
            ledger(&cells, &nb),
        )
    }

    pub fn steer_plus<M: BeamMeasurements + ?Sized>(
        init: &InitialSelection,
        params: &SteerPlusParams,
        meas: &M,
        inr_cl: f64,
    ) -> SelectionResult {
        let (nb, cells) = enumerate(init, &params.steer, meas);
        let target = to_linear(params.steer.inr_target_db);
        let r_sum = |c: &Cell| rate(c.snr_dl / (1.0 + inr_cl)) + rate(sinr(c.snr_ul, c.inr));
        let qualifying: Vec<&Cell> = cells.iter().filter(|c| c.inr <= target).collect();
        let led = ledger(&cells, &nb);
        if qualifying.is_empty() {
            let c = earliest(cells.iter()).expect("grid is non-empty");
            return finish(
                Algorithm::SteerPlus,
                &c.cand,
                &nb,
                c.inr,
                init.snr_dl_init,
                init.snr_ul_init,
                inr_cl,
                true,
                led,
            );
        }
        let se_max = qualifying.iter().map(|c| r_sum(c)).fold(f64::NEG_INFINITY, f64::max);
        let floor = params.se_target.min(se_max);
        let c = earliest(qualifying.into_iter().filter(|c| r_sum(c) >= floor)).expect("maximizer is feasible");
        finish(
            Algorithm::SteerPlus,
            &c.cand,
            &nb,
            c.inr,
            c.snr_dl,
            c.snr_ul,
            inr_cl,
            false,
            led,
        )
    }
}
