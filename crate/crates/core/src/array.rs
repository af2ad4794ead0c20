//! Uniform linear phased arrays with phase-only analog beamforming.
//!
//! Phase convention: element `n` of the steering vector toward local azimuth
//! `θ` is `exp(+j·2π·d·n·sin θ)` with `d` the pitch in wavelengths. Steering
//! vectors are unit-magnitude; beam weights carry the `1/√N` normalization so
//! a matched beam has a linear gain of exactly `N`.
//!
//! The global frame is x to the right, y out of the arrays (broadside of an
//! unrotated array), z up. Azimuth is measured from +y toward +x, so steering
//! rightward increases azimuth.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// dB value reported for exact nulls in dB-domain outputs.
pub const DB_FLOOR: f64 = -120.0;

/// Default phase-shifter resolution.
pub const DEFAULT_PHASE_BITS: u32 = 6;

const ANGLE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("angle {0}° is outside the steerable range [-90°, 90°]")]
    AngleOutOfRange(f64),
    #[error("angle is not finite")]
    NonFiniteAngle,
    #[error("array must have at least one element")]
    NoElements,
    #[error("element spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("quantization needs at least one bit")]
    ZeroBits,
    #[error("weight vector has {weights} entries but the array has {elements} elements")]
    LengthMismatch { weights: usize, elements: usize },
    #[error("empty codebook range {start}..{stop} step {step}")]
    EmptyRange { start: f64, stop: f64, step: f64 },
}

/// Carrier wavelength in meters.
pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Azimuth in degrees relative to an array's boresight.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub fn new(deg: f64) -> Result<Self, ArrayError> {
        if !deg.is_finite() {
            return Err(ArrayError::NonFiniteAngle);
        }
        Ok(Self(deg))
    }

    /// Angle that is known to be inside the steerable range.
    pub fn steerable(deg: f64) -> Result<Self, ArrayError> {
        let angle = Self::new(deg)?;
        angle.check_steerable()?;
        Ok(angle)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    fn check_steerable(self) -> Result<(), ArrayError> {
        if self.0.abs() > 90.0 + ANGLE_EPS {
            Err(ArrayError::AngleOutOfRange(self.0))
        } else {
            Ok(())
        }
    }
}

impl std::fmt::Display for AngleDeg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}°", self.0)
    }
}

/// Position and orientation of an array center in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    /// Array center, meters.
    pub position: [f64; 3],
    /// Global azimuth of the array boresight, degrees.
    #[serde(default)]
    pub boresight_deg: f64,
}

impl Pose {
    pub fn at(position: [f64; 3]) -> Self {
        Self {
            position,
            boresight_deg: 0.0,
        }
    }

    /// Unit vector along increasing element index.
    pub fn axis(&self) -> [f64; 3] {
        let b = self.boresight_deg.to_radians();
        [b.cos(), -b.sin(), 0.0]
    }

    /// Converts a global azimuth into this array's local frame, wrapped to
    /// `[-180°, 180°)`.
    pub fn local_azimuth(&self, global_deg: f64) -> f64 {
        (global_deg - self.boresight_deg + 180.0).rem_euclid(360.0) - 180.0
    }
}

fn default_spacing() -> f64 {
    0.5
}

/// Horizontal uniform linear array.
///
/// The static vertical stack of the physical arrays is folded into
/// `element_gain_db`; only azimuth is modeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    #[serde(default = "default_spacing")]
    pub spacing_wavelengths: f64,
    pub pose: Pose,
    #[serde(default)]
    pub element_gain_db: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing_wavelengths: f64, pose: Pose) -> Result<Self, ArrayError> {
        let geom = Self {
            num_elements,
            spacing_wavelengths,
            pose,
            element_gain_db: 0.0,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Half-wavelength ULA at the origin facing +y.
    pub fn half_wave(num_elements: usize) -> Self {
        Self {
            num_elements,
            spacing_wavelengths: 0.5,
            pose: Pose::at([0.0; 3]),
            element_gain_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ArrayError> {
        if self.num_elements == 0 {
            return Err(ArrayError::NoElements);
        }
        if !(self.spacing_wavelengths > 0.0 && self.spacing_wavelengths.is_finite()) {
            return Err(ArrayError::BadSpacing(self.spacing_wavelengths));
        }
        Ok(())
    }

    /// Per-element amplitude factor from `element_gain_db`.
    pub fn element_amplitude(&self) -> f64 {
        10f64.powf(self.element_gain_db / 20.0)
    }
}

/// Element coordinates in meters, centered on the pose and laid out along
/// the array axis.
pub fn element_positions(geom: &ArrayGeometry, wavelength_m: f64) -> Vec<[f64; 3]> {
    let axis = geom.pose.axis();
    let pitch = geom.spacing_wavelengths * wavelength_m;
    let mid = (geom.num_elements as f64 - 1.0) / 2.0;
    let c = geom.pose.position;
    (0..geom.num_elements)
        .map(|n| {
            let t = (n as f64 - mid) * pitch;
            [c[0] + t * axis[0], c[1] + t * axis[1], c[2] + t * axis[2]]
        })
        .collect()
}

/// Array response toward any local azimuth, without the steerable-range check.
/// Used for rays arriving from arbitrary directions.
pub(crate) fn array_response(geom: &ArrayGeometry, theta_deg: f64) -> Vec<Complex64> {
    let progression = 2.0 * PI * geom.spacing_wavelengths * theta_deg.to_radians().sin();
    (0..geom.num_elements)
        .map(|n| Complex64::from_polar(1.0, progression * n as f64))
        .collect()
}

/// Far-field steering vector with unit-magnitude entries.
pub fn steering_vector(geom: &ArrayGeometry, theta: AngleDeg) -> Result<Vec<Complex64>, ArrayError> {
    theta.check_steerable()?;
    Ok(array_response(geom, theta.degrees()))
}

/// Phase-only analog beamforming weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    weights: Vec<Complex64>,
    quantization_bits: Option<u32>,
}

impl BeamWeights {
    /// Wraps arbitrary weights, normalizing them to unit norm.
    pub fn from_vec(mut weights: Vec<Complex64>) -> Self {
        let norm = weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for w in &mut weights {
                *w /= norm;
            }
        }
        Self {
            weights,
            quantization_bits: None,
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn quantization_bits(&self) -> Option<u32> {
        self.quantization_bits
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Multiplies every weight by a common unit-modulus factor.
    pub fn rotated(&self, phase_rad: f64) -> Self {
        let r = Complex64::from_polar(1.0, phase_rad);
        Self {
            weights: self.weights.iter().map(|w| w * r).collect(),
            quantization_bits: self.quantization_bits,
        }
    }
}

/// Beam steered toward `theta`. The weights are the steering vector scaled
/// to unit norm, so the inner product `a(θ)ᴴ w` is a matched filter. Phases
/// are referenced to the array centre (a common phase, invisible in any
/// gain). With `bits`, each phase is rounded to the nearest multiple of
/// `2π / 2^bits`, which keeps `J·w = conj(w)` for the index reversal `J`.
pub fn synthesize_beam(geom: &ArrayGeometry, theta: AngleDeg, bits: Option<u32>) -> Result<BeamWeights, ArrayError> {
    theta.check_steerable()?;
    geom.validate()?;
    if bits == Some(0) {
        return Err(ArrayError::ZeroBits);
    }
    let progression = 2.0 * PI * geom.spacing_wavelengths * theta.radians().sin();
    let amplitude = 1.0 / (geom.num_elements as f64).sqrt();
    let step = bits.map(|b| 2.0 * PI / f64::from(2u32.pow(b.min(31))));
    let centre = (geom.num_elements as f64 - 1.0) / 2.0;
    let weights = (0..geom.num_elements)
        .map(|n| {
            let phase = progression * (n as f64 - centre);
            // f64::round is symmetric about zero, which keeps mirrored beams mirrored.
            let phase = match step {
                Some(s) => (phase / s).round() * s,
                None => phase,
            };
            Complex64::from_polar(amplitude, phase)
        })
        .collect();
    Ok(BeamWeights {
        weights,
        quantization_bits: bits,
    })
}

/// `Σ conj(a)·b` over two equal-length vectors.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Linear power gain `|a(θ)ᴴ w|²`.
pub fn array_gain(weights: &BeamWeights, geom: &ArrayGeometry, theta: AngleDeg) -> Result<f64, ArrayError> {
    if weights.len() != geom.num_elements {
        return Err(ArrayError::LengthMismatch {
            weights: weights.len(),
            elements: geom.num_elements,
        });
    }
    let a = steering_vector(geom, theta)?;
    Ok(inner(&a, weights.as_slice()).norm_sqr())
}

/// Linear power to dB with exact zeros mapped to `floor_db`.
pub fn power_db(linear: f64, floor_db: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(floor_db)
    } else {
        floor_db
    }
}

/// Gain in dB at every angle of `profile`.
pub fn beam_pattern(
    weights: &BeamWeights,
    geom: &ArrayGeometry,
    profile: &[AngleDeg],
    floor_db: f64,
) -> Result<Vec<f64>, ArrayError> {
    profile
        .iter()
        .map(|&theta| array_gain(weights, geom, theta).map(|g| power_db(g, floor_db)))
        .collect()
}

/// Dense pattern scan with main-lobe measurements.
#[derive(Debug, Clone)]
pub struct PatternScan {
    pub angles_deg: Vec<f64>,
    pub gains: Vec<f64>,
}

impl PatternScan {
    /// Scans `[-90°, 90°]` at `step_deg`.
    pub fn new(weights: &BeamWeights, geom: &ArrayGeometry, step_deg: f64) -> Result<Self, ArrayError> {
        let count = (180.0 / step_deg + ANGLE_EPS).floor() as usize + 1;
        let angles_deg: Vec<f64> = (0..count).map(|k| -90.0 + k as f64 * step_deg).collect();
        let gains = angles_deg
            .iter()
            .map(|&a| array_gain(weights, geom, AngleDeg::new(a.min(90.0))?))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { angles_deg, gains })
    }

    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, &g) in self.gains.iter().enumerate() {
            if g > self.gains[best] {
                best = i;
            }
        }
        best
    }

    pub fn peak_angle_deg(&self) -> f64 {
        self.angles_deg[self.peak_index()]
    }

    pub fn peak_gain(&self) -> f64 {
        self.gains[self.peak_index()]
    }

    /// Width between the interpolated -3 dB crossings around the peak.
    pub fn half_power_beamwidth_deg(&self) -> Option<f64> {
        let p = self.peak_index();
        let half = self.gains[p] / 2.0;
        let left = (1..=p).rev().find(|&i| self.gains[i - 1] < half).map(|i| {
            let (g0, g1) = (self.gains[i - 1], self.gains[i]);
            let t = (half - g0) / (g1 - g0);
            self.angles_deg[i - 1] + t * (self.angles_deg[i] - self.angles_deg[i - 1])
        })?;
        let right = (p..self.gains.len() - 1).find(|&i| self.gains[i + 1] < half).map(|i| {
            let (g0, g1) = (self.gains[i], self.gains[i + 1]);
            let t = (g0 - half) / (g0 - g1);
            self.angles_deg[i] + t * (self.angles_deg[i + 1] - self.angles_deg[i])
        })?;
        Some(right - left)
    }

    /// Indices bounding the main lobe (first local minimum on each side).
    pub fn main_lobe(&self) -> (usize, usize) {
        let p = self.peak_index();
        let mut lo = p;
        while lo > 0 && self.gains[lo - 1] <= self.gains[lo] {
            lo -= 1;
        }
        let mut hi = p;
        while hi + 1 < self.gains.len() && self.gains[hi + 1] <= self.gains[hi] {
            hi += 1;
        }
        (lo, hi)
    }

    /// Highest gain outside the main lobe relative to the peak, dB.
    pub fn peak_sidelobe_db(&self) -> Option<f64> {
        let (lo, hi) = self.main_lobe();
        let side = self
            .gains
            .iter()
            .enumerate()
            .filter(|&(i, _)| i < lo || i > hi)
            .map(|(_, &g)| g)
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))))?;
        Some(power_db(side / self.peak_gain(), DB_FLOOR))
    }
}

/// Ordered set of steering angles and their beams.
#[derive(Debug, Clone)]
pub struct Codebook {
    entries: Vec<(AngleDeg, BeamWeights)>,
}

impl Codebook {
    pub fn entries(&self) -> &[(AngleDeg, BeamWeights)] {
        &self.entries
    }

    pub fn angles(&self) -> impl Iterator<Item = AngleDeg> + '_ {
        self.entries.iter().map(|(a, _)| *a)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Beams at `start, start + step, …` up to and including `stop`.
pub fn make_codebook(
    start: f64,
    stop: f64,
    step: f64,
    geom: &ArrayGeometry,
    bits: Option<u32>,
) -> Result<Codebook, ArrayError> {
    if !(step > 0.0) || !(start <= stop) || !start.is_finite() || !stop.is_finite() {
        return Err(ArrayError::EmptyRange { start, stop, step });
    }
    let count = ((stop - start) / step + ANGLE_EPS).floor() as usize + 1;
    let entries = (0..count)
        .map(|k| {
            let theta = AngleDeg::steerable(start + k as f64 * step)?;
            Ok((theta, synthesize_beam(geom, theta, bits)?))
        })
        .collect::<Result<Vec<_>, ArrayError>>()?;
    Ok(Codebook { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deg(x: f64) -> AngleDeg {
        AngleDeg::new(x).unwrap()
    }

    #[test]
    fn single_element_sits_at_pose() {
        let g = ArrayGeometry::new(1, 0.5, Pose::at([0.3, -0.2, 1.0])).unwrap();
        assert_eq!(element_positions(&g, 0.005), vec![[0.3, -0.2, 1.0]]);
    }

    #[test]
    fn two_elements_straddle_center() {
        let lambda = wavelength(60e9);
        assert!((lambda - 4.9965e-3).abs() < 1e-6);
        let g = ArrayGeometry::half_wave(2);
        let p = element_positions(&g, 0.005);
        assert!((p[0][0] + 1.25e-3).abs() < 1e-15);
        assert!((p[1][0] - 1.25e-3).abs() < 1e-15);
        assert_eq!(p[0][1], 0.0);
    }

    #[test]
    fn sixteen_element_aperture() {
        let lambda = 0.005;
        let p = element_positions(&ArrayGeometry::half_wave(16), lambda);
        let span = ((p[15][0] - p[0][0]).powi(2) + (p[15][1] - p[0][1]).powi(2)).sqrt();
        assert!((span - 15.0 * 0.5 * lambda).abs() < 1e-15);
    }

    #[test]
    fn rotated_array_axis() {
        let mut pose = Pose::at([0.0; 3]);
        pose.boresight_deg = 90.0;
        let g = ArrayGeometry::new(2, 0.5, pose).unwrap();
        let p = element_positions(&g, 0.004);
        // boresight along +x puts the axis along -y
        assert!((p[1][1] + 1e-3).abs() < 1e-15);
        assert!(p[1][0].abs() < 1e-15);
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = steering_vector(&ArrayGeometry::half_wave(16), deg(0.0)).unwrap();
        assert!(a.iter().all(|x| (x - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn endfire_phase_is_pi() {
        let a = steering_vector(&ArrayGeometry::half_wave(2), deg(90.0)).unwrap();
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn thirty_degree_progression() {
        let a = steering_vector(&ArrayGeometry::half_wave(16), deg(30.0)).unwrap();
        for (n, x) in a.iter().enumerate() {
            let want = (PI * n as f64 * 0.5).rem_euclid(2.0 * PI);
            let got = x.arg().rem_euclid(2.0 * PI);
            let diff = (got - want).abs();
            assert!(diff.min(2.0 * PI - diff) < 1e-9, "n={n}");
        }
    }

    #[test]
    fn steering_rejects_out_of_range() {
        let g = ArrayGeometry::half_wave(4);
        assert!(matches!(
            steering_vector(&g, deg(91.0)),
            Err(ArrayError::AngleOutOfRange(_))
        ));
        assert!(AngleDeg::new(f64::NAN).is_err());
    }

    #[test]
    fn broadside_weights_are_quarter() {
        let g = ArrayGeometry::half_wave(16);
        let w = synthesize_beam(&g, deg(0.0), None).unwrap();
        assert!(w
            .as_slice()
            .iter()
            .all(|x| (x - Complex64::new(0.25, 0.0)).norm() < 1e-15));
        let q = synthesize_beam(&g, deg(0.0), Some(6)).unwrap();
        assert_eq!(w.as_slice(), q.as_slice());
    }

    #[test]
    fn six_bit_phase_error_bound() {
        let g = ArrayGeometry::half_wave(16);
        let exact = synthesize_beam(&g, deg(17.0), None).unwrap();
        let quant = synthesize_beam(&g, deg(17.0), Some(6)).unwrap();
        for (e, q) in exact.as_slice().iter().zip(quant.as_slice()) {
            let diff = (q / e).arg().abs();
            assert!(diff <= PI / 64.0 + 1e-12);
        }
    }

    #[test]
    fn zero_bits_rejected() {
        let g = ArrayGeometry::half_wave(8);
        assert_eq!(synthesize_beam(&g, deg(5.0), Some(0)), Err(ArrayError::ZeroBits));
    }

    #[test]
    fn broadside_matched_gain_and_first_null() {
        let g = ArrayGeometry::half_wave(16);
        let w = synthesize_beam(&g, deg(0.0), None).unwrap();
        let peak = array_gain(&w, &g, deg(0.0)).unwrap();
        assert!((peak - 16.0).abs() < 1e-12);
        assert!((power_db(peak, DB_FLOOR) - 12.0412).abs() < 1e-4);
        let null = (1.0f64 / 8.0).asin().to_degrees();
        assert!((null - 7.18).abs() < 0.01);
        assert!(array_gain(&w, &g, deg(null)).unwrap() < 1e-9);
    }

    #[test]
    fn gain_length_mismatch() {
        let w = synthesize_beam(&ArrayGeometry::half_wave(8), deg(0.0), None).unwrap();
        assert!(matches!(
            array_gain(&w, &ArrayGeometry::half_wave(16), deg(0.0)),
            Err(ArrayError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pattern_peaks_at_steering_and_is_symmetric() {
        let g = ArrayGeometry::half_wave(16);
        let w = synthesize_beam(&g, deg(0.0), None).unwrap();
        let profile: Vec<AngleDeg> = (-60..=60).map(|a| deg(a as f64)).collect();
        let pat = beam_pattern(&w, &g, &profile, DB_FLOOR).unwrap();
        let peak = pat.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(pat[60], peak);
        for k in 0..60 {
            assert!((pat[k] - pat[120 - k]).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_null_hits_floor() {
        let g = ArrayGeometry::half_wave(2);
        let w = synthesize_beam(&g, deg(0.0), None).unwrap();
        // two half-wave elements null at endfire
        let pat = beam_pattern(&w, &g, &[deg(90.0)], DB_FLOOR).unwrap();
        assert!(pat[0] <= -100.0);
        assert_eq!(power_db(0.0, DB_FLOOR), DB_FLOOR);
    }

    #[test]
    fn ideal_sixteen_element_pattern_numbers() {
        let g = ArrayGeometry::half_wave(16);
        let w = synthesize_beam(&g, deg(0.0), None).unwrap();
        let scan = PatternScan::new(&w, &g, 0.01).unwrap();
        let hpbw = scan.half_power_beamwidth_deg().unwrap();
        assert!((hpbw - 6.4).abs() <= 0.3, "hpbw {hpbw}");
        let sll = scan.peak_sidelobe_db().unwrap();
        assert!((sll + 13.26).abs() <= 0.2, "sll {sll}");
    }

    #[test]
    fn codebook_sizes() {
        let g = ArrayGeometry::half_wave(16);
        assert_eq!(make_codebook(-60.0, 60.0, 8.0, &g, Some(6)).unwrap().len(), 16);
        let one = make_codebook(0.0, 0.0, 5.0, &g, Some(6)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.entries()[0].0.degrees(), 0.0);
        assert_eq!(make_codebook(-64.0, 64.0, 1.0, &g, None).unwrap().len(), 129);
        assert!(make_codebook(1.0, 0.0, 1.0, &g, None).is_err());
        assert!(make_codebook(0.0, 1.0, 0.0, &g, None).is_err());
    }

    #[test]
    fn codebook_angles_increase() {
        let g = ArrayGeometry::half_wave(16);
        let cb = make_codebook(-60.0, 60.0, 8.0, &g, None).unwrap();
        let angles: Vec<f64> = cb.angles().map(|a| a.degrees()).collect();
        assert!(angles.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*angles.last().unwrap(), 60.0);
    }
}
