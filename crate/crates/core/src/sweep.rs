//! Exhaustive transmit/receive beam sweeps and the analysis products built
//! on them: empirical CDFs, neighborhood minimum/range maps and reciprocity
//! comparisons.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::array::DB_FLOOR;
use crate::metrics::to_db_floored;

const GRID_EPS: f64 = 1e-9;

/// Reported range (dB) for neighborhoods whose minimum is an exact zero.
pub const DEFAULT_RNG_CEILING_DB: f64 = 240.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("empty spatial profile")]
    EmptyProfile,
    #[error("profile angles must be finite and strictly increasing")]
    NotIncreasing,
    #[error("profile step must be positive, got {0}")]
    BadStep(f64),
    #[error("measurement at (θ_tx={theta_tx}°, θ_rx={theta_rx}°) returned {value}")]
    BadMeasurement { theta_tx: f64, theta_rx: f64, value: f64 },
    #[error("grid is {got_tx}×{got_rx}, expected {want_tx}×{want_rx}")]
    ShapeMismatch {
        got_tx: usize,
        got_rx: usize,
        want_tx: usize,
        want_rx: usize,
    },
    #[error("index {0} is outside the profile")]
    BadIndex(usize),
    #[error("cannot build a CDF from no samples")]
    NoSamples,
}

/// Ordered steering angles swept on one side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialProfile {
    angles: Vec<f64>,
}

impl SpatialProfile {
    /// Inclusive uniform grid `start, start + step, …, ≤ stop`.
    pub fn range(start: f64, step: f64, stop: f64) -> Result<Self, SweepError> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(SweepError::BadStep(step));
        }
        if !start.is_finite() || !stop.is_finite() || stop < start {
            return Err(SweepError::EmptyProfile);
        }
        let count = ((stop - start) / step + GRID_EPS).floor() as usize + 1;
        Ok(Self {
            angles: (0..count).map(|k| start + k as f64 * step).collect(),
        })
    }

    pub fn from_angles(angles: Vec<f64>) -> Result<Self, SweepError> {
        if angles.is_empty() {
            return Err(SweepError::EmptyProfile);
        }
        if angles.iter().any(|a| !a.is_finite()) || angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SweepError::NotIncreasing);
        }
        Ok(Self { angles })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Common step if the grid is uniform (single-angle profiles report 0).
    pub fn uniform_step(&self) -> Option<f64> {
        if self.angles.len() < 2 {
            return Some(0.0);
        }
        let step = self.angles[1] - self.angles[0];
        let tol = GRID_EPS * step.abs().max(1.0);
        self.angles
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= tol)
            .then_some(step)
    }

    /// `START:STEP:STOP` rendering for uniform profiles.
    pub fn describe(&self) -> String {
        match self.uniform_step() {
            Some(step) if self.angles.len() > 1 => {
                format!("{}:{}:{}", self.angles[0], step, self.angles[self.angles.len() - 1])
            }
            _ => self.angles.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(","),
        }
    }
}

/// Linear INR over every (tx, rx) steering pair, tx-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InrMap {
    tx_profile: SpatialProfile,
    rx_profile: SpatialProfile,
    values: Vec<f64>,
}

impl InrMap {
    pub fn new(tx_profile: SpatialProfile, rx_profile: SpatialProfile, values: Vec<f64>) -> Result<Self, SweepError> {
        if values.len() != tx_profile.len() * rx_profile.len() {
            return Err(SweepError::ShapeMismatch {
                got_tx: values.len(),
                got_rx: 1,
                want_tx: tx_profile.len(),
                want_rx: rx_profile.len(),
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SweepError::BadMeasurement {
                    theta_tx: tx_profile.angles[k / rx_profile.len()],
                    theta_rx: rx_profile.angles[k % rx_profile.len()],
                    value: v,
                });
            }
        }
        Ok(Self {
            tx_profile,
            rx_profile,
            values,
        })
    }

    pub fn tx_profile(&self) -> &SpatialProfile {
        &self.tx_profile
    }

    pub fn rx_profile(&self) -> &SpatialProfile {
        &self.rx_profile
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.tx_profile.len(), self.rx_profile.len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.rx_profile.len() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn db_values(&self) -> Vec<f64> {
        self.values.iter().map(|&v| to_db_floored(v)).collect()
    }

    /// (θ_tx, θ_rx, linear INR) of the largest cell; first in tx-major order on ties.
    pub fn argmax(&self) -> (f64, f64, f64) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        let m = self.rx_profile.len();
        (
            self.tx_profile.angles[best / m],
            self.rx_profile.angles[best % m],
            self.values[best],
        )
    }

    pub fn transpose(&self) -> Self {
        let (mt, mr) = self.shape();
        let mut values = vec![0.0; mt * mr];
        for i in 0..mt {
            for j in 0..mr {
                values[j * mt + i] = self.get(i, j);
            }
        }
        Self {
            tx_profile: self.rx_profile.clone(),
            rx_profile: self.tx_profile.clone(),
            values,
        }
    }
}

/// Evaluates `measure` on every (θ_tx, θ_rx) pair. Cells are evaluated in
/// parallel; the first invalid value in tx-major order is reported.
pub fn run_sweep<F>(measure: F, tx_profile: &SpatialProfile, rx_profile: &SpatialProfile) -> Result<InrMap, SweepError>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if tx_profile.is_empty() || rx_profile.is_empty() {
        return Err(SweepError::EmptyProfile);
    }
    let values: Vec<f64> = tx_profile
        .angles
        .par_iter()
        .flat_map_iter(|&t| rx_profile.angles.iter().map(move |&r| (t, r)))
        .map(|(t, r)| measure(t, r))
        .collect();
    InrMap::new(tx_profile.clone(), rx_profile.clone(), values)
}

/// Empirical distribution of dB samples.
///
/// Quantiles use the lower nearest-rank convention: `quantile(p)` is the
/// smallest sample `x` with `P(X ≤ x) ≥ p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_db(mut samples: Vec<f64>) -> Result<Self, SweepError> {
        if samples.is_empty() {
            return Err(SweepError::NoSamples);
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(SweepError::BadMeasurement {
                theta_tx: f64::NAN,
                theta_rx: f64::NAN,
                value: f64::NAN,
            });
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `P(X ≤ x)`.
    pub fn probability(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    /// `P(X > x)`.
    pub fn fraction_above(&self, x: f64) -> f64 {
        let above = self.samples.len() - self.samples.partition_point(|&s| s <= x);
        above as f64 / self.samples.len() as f64
    }

    /// `P(X < x)`.
    pub fn fraction_below(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s < x) as f64 / self.samples.len() as f64
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.samples.len();
        let rank = (p.clamp(0.0, 1.0) * n as f64).ceil() as usize;
        self.samples[rank.saturating_sub(1).min(n - 1)]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Distinct sample values with the cumulative probability reached at each,
    /// i.e. the corners of the CDF staircase.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.samples.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (k, &x) in self.samples.iter().enumerate() {
            let p = (k + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = p,
                _ => out.push((x, p)),
            }
        }
        out
    }
}

/// dB-domain CDF over every cell of a map.
pub fn cdf(map: &InrMap) -> EmpiricalCdf {
    EmpiricalCdf::from_db(map.db_values()).expect("maps are non-empty and finite")
}

/// Indices whose angle lies within `delta_deg` of the center angle, truncated
/// at the profile edges.
pub fn neighborhood_indices(profile: &SpatialProfile, center: usize, delta_deg: f64) -> Result<Vec<usize>, SweepError> {
    let c = *profile.angles.get(center).ok_or(SweepError::BadIndex(center))?;
    let tol = GRID_EPS * delta_deg.abs().max(1.0);
    Ok(profile
        .angles
        .iter()
        .enumerate()
        .filter(|(_, &a)| (a - c).abs() <= delta_deg + tol)
        .map(|(k, _)| k)
        .collect())
}

/// Contiguous index window `[lo, hi]` of every center's neighborhood.
fn windows(profile: &SpatialProfile, delta_deg: f64) -> Vec<(usize, usize)> {
    (0..profile.len())
        .map(|c| {
            let idx = neighborhood_indices(profile, c, delta_deg).expect("center in range");
            (idx[0], idx[idx.len() - 1])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    Min,
    Rng,
}

/// Neighborhood minimum (linear) and range (dB) for every grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborhoodStats {
    pub delta_tx: f64,
    pub delta_rx: f64,
    pub shape: (usize, usize),
    pub inr_min: Vec<f64>,
    pub inr_rng_db: Vec<f64>,
    /// Cells whose neighborhood contains an exact zero; their range is the ceiling.
    pub rng_undefined: Vec<bool>,
}

impl NeighborhoodStats {
    pub fn min_at(&self, i: usize, j: usize) -> f64 {
        self.inr_min[i * self.shape.1 + j]
    }

    pub fn rng_db_at(&self, i: usize, j: usize) -> f64 {
        self.inr_rng_db[i * self.shape.1 + j]
    }

    pub fn undefined_count(&self) -> usize {
        self.rng_undefined.iter().filter(|&&u| u).count()
    }
}

/// Separable sliding min and max over the neighborhood rectangles.
pub fn stats_maps(map: &InrMap, delta_tx: f64, delta_rx: f64) -> NeighborhoodStats {
    stats_maps_with_ceiling(map, delta_tx, delta_rx, DEFAULT_RNG_CEILING_DB)
}

pub fn stats_maps_with_ceiling(map: &InrMap, delta_tx: f64, delta_rx: f64, ceiling_db: f64) -> NeighborhoodStats {
    let (mt, mr) = map.shape();
    let win_tx = windows(&map.tx_profile, delta_tx);
    let win_rx = windows(&map.rx_profile, delta_rx);

    // pass 1: along rx within each tx row
    let mut row_min = vec![0.0; mt * mr];
    let mut row_max = vec![0.0; mt * mr];
    for i in 0..mt {
        for (j, &(lo, hi)) in win_rx.iter().enumerate() {
            let cells = (lo..=hi).map(|jj| map.get(i, jj));
            let (mn, mx) = cells.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            row_min[i * mr + j] = mn;
            row_max[i * mr + j] = mx;
        }
    }
    // pass 2: along tx
    let mut inr_min = vec![0.0; mt * mr];
    let mut inr_rng_db = vec![0.0; mt * mr];
    let mut rng_undefined = vec![false; mt * mr];
    for (i, &(lo, hi)) in win_tx.iter().enumerate() {
        for j in 0..mr {
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            for ii in lo..=hi {
                mn = mn.min(row_min[ii * mr + j]);
                mx = mx.max(row_max[ii * mr + j]);
            }
            let k = i * mr + j;
            inr_min[k] = mn;
            if mn > 0.0 {
                inr_rng_db[k] = 10.0 * (mx / mn).log10();
            } else {
                inr_rng_db[k] = ceiling_db;
                rng_undefined[k] = true;
            }
        }
    }
    NeighborhoodStats {
        delta_tx,
        delta_rx,
        shape: (mt, mr),
        inr_min,
        inr_rng_db,
        rng_undefined,
    }
}

/// CDF over all cells of the minimum (dB) or range (dB) statistic.
pub fn cdf_of_stat(stats: &NeighborhoodStats, which: StatKind) -> EmpiricalCdf {
    let samples = match which {
        StatKind::Min => stats.inr_min.iter().map(|&v| to_db_floored(v)).collect(),
        StatKind::Rng => stats.inr_rng_db.clone(),
    };
    EmpiricalCdf::from_db(samples).expect("stats grids are non-empty")
}

/// `max |dB(a[i,j]) − dB(b[j,i])|`; `b` is the map of the role-swapped system.
pub fn reciprocity_delta(map_a: &InrMap, map_b: &InrMap) -> Result<f64, SweepError> {
    let (mt, mr) = map_a.shape();
    let (bt, br) = map_b.shape();
    if bt != mr || br != mt {
        return Err(SweepError::ShapeMismatch {
            got_tx: bt,
            got_rx: br,
            want_tx: mr,
            want_rx: mt,
        });
    }
    let mut worst: f64 = 0.0;
    for i in 0..mt {
        for j in 0..mr {
            let d = (to_db_floored(map_a.get(i, j)) - to_db_floored(map_b.get(j, i))).abs();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// dB floor used when exporting zero cells.
pub const MAP_DB_FLOOR: f64 = DB_FLOOR;
