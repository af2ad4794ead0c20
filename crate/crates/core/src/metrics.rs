//! Link quantities of a full-duplex base station serving one downlink and one
//! uplink user: SNRs, self- and cross-link INRs, SINRs and spectral
//! efficiencies. Everything is computed in linear power; dB appears only in
//! accessors and at I/O boundaries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{inner, power_db, BeamWeights, DB_FLOOR};
use crate::channel::{CrosslinkChannel, LinkChannel, SiChannel};

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dB conversion for reporting: exact zeros become [`DB_FLOOR`].
pub fn to_db_floored(linear: f64) -> f64 {
    power_db(linear, DB_FLOOR)
}

/// Transmit and noise powers. Defaults are calibration choices, not values
/// taken from any hardware.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    #[serde(default = "LinkBudget::default_tx_dbm")]
    pub p_bs_dbm: f64,
    #[serde(default = "LinkBudget::default_tx_dbm")]
    pub p_ue_dbm: f64,
    #[serde(default = "LinkBudget::default_noise_dbm")]
    pub noise_bs_dbm: f64,
    #[serde(default = "LinkBudget::default_noise_dbm")]
    pub noise_ue_dbm: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            p_bs_dbm: Self::default_tx_dbm(),
            p_ue_dbm: Self::default_tx_dbm(),
            noise_bs_dbm: Self::default_noise_dbm(),
            noise_ue_dbm: Self::default_noise_dbm(),
        }
    }
}

impl LinkBudget {
    fn default_tx_dbm() -> f64 {
        10.0
    }

    fn default_noise_dbm() -> f64 {
        -70.0
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [self.p_bs_dbm, self.p_ue_dbm, self.noise_bs_dbm, self.noise_ue_dbm];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("link budget powers must be finite".into());
        }
        if self.noise_bs_dbm >= self.p_bs_dbm || self.noise_bs_dbm >= self.p_ue_dbm {
            return Err("BS noise power must be below the transmit powers".into());
        }
        if self.noise_ue_dbm >= self.p_bs_dbm || self.noise_ue_dbm >= self.p_ue_dbm {
            return Err("UE noise power must be below the transmit powers".into());
        }
        Ok(())
    }

    // dBm ratios only, so the milliwatt reference cancels.
    fn ratio(p_dbm: f64, n_dbm: f64) -> f64 {
        to_linear(p_dbm - n_dbm)
    }

    /// BS power over downlink-UE noise.
    pub fn bs_to_ue(&self) -> f64 {
        Self::ratio(self.p_bs_dbm, self.noise_ue_dbm)
    }

    /// UE power over BS noise.
    pub fn ue_to_bs(&self) -> f64 {
        Self::ratio(self.p_ue_dbm, self.noise_bs_dbm)
    }

    /// BS power over BS noise (self-interference).
    pub fn bs_to_bs(&self) -> f64 {
        Self::ratio(self.p_bs_dbm, self.noise_bs_dbm)
    }

    /// UE power over UE noise (cross-link).
    pub fn ue_to_ue(&self) -> f64 {
        Self::ratio(self.p_ue_dbm, self.noise_ue_dbm)
    }
}

/// SNR, INR and the SINR they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub snr_linear: f64,
    pub inr_linear: f64,
    pub sinr_linear: f64,
}

impl LinkMetrics {
    pub fn new(snr_linear: f64, inr_linear: f64) -> Self {
        Self {
            snr_linear,
            inr_linear,
            sinr_linear: sinr(snr_linear, inr_linear),
        }
    }

    pub fn snr_db(&self) -> f64 {
        to_db_floored(self.snr_linear)
    }

    pub fn inr_db(&self) -> f64 {
        to_db_floored(self.inr_linear)
    }

    pub fn sinr_db(&self) -> f64 {
        to_db_floored(self.sinr_linear)
    }
}

/// Downlink, uplink and sum spectral efficiency in bps/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePair {
    pub r_dl: f64,
    pub r_ul: f64,
    pub r_sum: f64,
}

impl RatePair {
    pub fn new(r_dl: f64, r_ul: f64) -> Self {
        Self {
            r_dl,
            r_ul,
            r_sum: r_dl + r_ul,
        }
    }

    pub fn from_sinrs(sinr_dl: f64, sinr_ul: f64) -> Self {
        Self::new(rate(sinr_dl), rate(sinr_ul))
    }
}

fn check_dims(a: usize, b: usize) {
    assert_eq!(a, b, "beam and channel dimensions differ");
}

/// Downlink SNR `P_BS·|h_txᴴ f|² / N_UE`.
pub fn snr_dl(f: &BeamWeights, h_tx: &LinkChannel, budget: &LinkBudget) -> f64 {
    check_dims(f.len(), h_tx.len());
    budget.bs_to_ue() * inner(h_tx.as_slice(), f.as_slice()).norm_sqr()
}

/// Uplink SNR `P_UE·|wᴴ h_rx|² / N_BS`.
pub fn snr_ul(w: &BeamWeights, h_rx: &LinkChannel, budget: &LinkBudget) -> f64 {
    check_dims(w.len(), h_rx.len());
    budget.ue_to_bs() * inner(w.as_slice(), h_rx.as_slice()).norm_sqr()
}

/// Self-interference INR `P_BS·|wᴴ H f|² / N_BS`.
pub fn inr_si(f: &BeamWeights, w: &BeamWeights, h: &SiChannel, budget: &LinkBudget) -> f64 {
    budget.bs_to_bs() * coupling(f, w, h).norm_sqr()
}

/// `wᴴ H f`.
pub fn coupling(f: &BeamWeights, w: &BeamWeights, h: &SiChannel) -> Complex64 {
    check_dims(f.len(), h.cols());
    check_dims(w.len(), h.rows());
    let hf = h.apply(f.as_slice());
    inner(w.as_slice(), &hf)
}

/// Cross-link INR `P_UE·|h|² / N_UE`.
pub fn inr_cl(h: &CrosslinkChannel, budget: &LinkBudget) -> f64 {
    budget.ue_to_ue() * h.scalar().norm_sqr()
}

pub fn sinr(snr_linear: f64, inr_linear: f64) -> f64 {
    snr_linear / (1.0 + inr_linear)
}

/// Spectral efficiency `log2(1 + sinr)`.
pub fn rate(sinr_linear: f64) -> f64 {
    (1.0 + sinr_linear).log2()
}

/// Interference-free sum spectral efficiency of the beam-alignment selections.
pub fn codebook_capacity(snr_dl_init: f64, snr_ul_init: f64) -> f64 {
    rate(snr_dl_init) + rate(snr_ul_init)
}

/// Sum spectral efficiency normalized by the codebook capacity.
pub fn normalized_se(r_sum: f64, capacity: f64) -> f64 {
    if capacity > 0.0 {
        r_sum / capacity
    } else {
        0.0
    }
}

/// Half-duplex TDD with an equal time split between downlink and uplink,
/// each served interference-free with the aligned beams.
pub fn tdd_rates(snr_dl_init: f64, snr_ul_init: f64) -> RatePair {
    RatePair::new(0.5 * rate(snr_dl_init), 0.5 * rate(snr_ul_init))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{steering_vector, synthesize_beam, AngleDeg, ArrayGeometry};
    use proptest::prelude::*;

    fn budget() -> LinkBudget {
        LinkBudget::default()
    }

    fn beam(theta: f64) -> BeamWeights {
        synthesize_beam(&ArrayGeometry::half_wave(16), AngleDeg::new(theta).unwrap(), None).unwrap()
    }

    fn channel(theta: f64, alpha: Complex64) -> LinkChannel {
        let a = steering_vector(&ArrayGeometry::half_wave(16), AngleDeg::new(theta).unwrap()).unwrap();
        LinkChannel::new(a.into_iter().map(|x| x * alpha).collect())
    }

    #[test]
    fn default_budget_is_valid() {
        assert!(budget().validate().is_ok());
        let bad = LinkBudget {
            noise_bs_dbm: 20.0,
            ..budget()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn orthogonal_beam_gives_zero_snr() {
        let mut f = vec![Complex64::new(0.0, 0.0); 16];
        f[0] = Complex64::new(1.0, 0.0);
        f[1] = Complex64::new(-1.0, 0.0);
        let f = BeamWeights::from_vec(f);
        let h = channel(0.0, Complex64::new(1e-4, 0.0));
        assert!(snr_dl(&f, &h, &budget()).abs() < 1e-30);
        assert!(snr_ul(&f, &h, &budget()).abs() < 1e-30);
    }

    #[test]
    fn matched_snr_closed_form() {
        let alpha = Complex64::new(3e-5, -2e-5);
        let h = channel(20.0, alpha);
        let b = budget();
        let want_dl = b.bs_to_ue() * 16.0 * alpha.norm_sqr();
        let got_dl = snr_dl(&beam(20.0), &h, &b);
        assert!((got_dl / want_dl - 1.0).abs() < 1e-12);
        let want_ul = b.ue_to_bs() * 16.0 * alpha.norm_sqr();
        let got_ul = snr_ul(&beam(20.0), &h, &b);
        assert!((got_ul / want_ul - 1.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_power_adds_three_db() {
        let h = channel(-10.0, Complex64::new(1e-4, 0.0));
        let b = budget();
        let louder = LinkBudget {
            p_bs_dbm: b.p_bs_dbm + to_db(2.0),
            ..b
        };
        let ratio = snr_dl(&beam(-10.0), &h, &louder) / snr_dl(&beam(-10.0), &h, &b);
        assert!((ratio - 2.0).abs() < 1e-12);
        assert!((to_db(ratio) - 3.0103).abs() < 1e-4);
    }

    #[test]
    fn uplink_snr_ignores_global_phase() {
        let h = channel(12.0, Complex64::new(1e-4, 5e-5));
        let w = beam(10.0);
        let a = snr_ul(&w, &h, &budget());
        let b = snr_ul(&w.rotated(1.234), &h, &budget());
        assert!((a / b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inr_zero_channel() {
        let h = SiChannel::zeros(16, 16);
        assert_eq!(inr_si(&beam(0.0), &beam(3.0), &h, &budget()), 0.0);
    }

    #[test]
    fn inr_rank_one_aligned() {
        let f = beam(14.0);
        let w = beam(-31.0);
        let c = Complex64::new(2e-3, 1e-3);
        let h = SiChannel::outer(c, w.as_slice(), f.as_slice());
        let b = budget();
        let got = inr_si(&f, &w, &h, &b);
        let want = b.bs_to_bs() * c.norm_sqr();
        assert!((got / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inr_left_null_space() {
        let f = beam(0.0);
        let u = beam(20.0);
        let h = SiChannel::outer(Complex64::new(1.0, 0.0), u.as_slice(), f.as_slice());
        // orthogonal to u: the 16-element beam one null-width away
        let null_deg = (20f64.to_radians().sin() + 2.0 / 16.0).asin().to_degrees();
        let w = beam(null_deg);
        assert!(inr_si(&f, &w, &h, &budget()) < 1e-20);
    }

    #[test]
    fn crosslink_inr() {
        let b = budget();
        assert_eq!(inr_cl(&CrosslinkChannel::new(Complex64::new(0.0, 0.0)), &b), 0.0);
        let mag = (1.0 / b.ue_to_ue()).sqrt();
        let unit = inr_cl(&CrosslinkChannel::new(Complex64::from_polar(mag, 0.7)), &b);
        assert!((unit - 1.0).abs() < 1e-12);
        let other = inr_cl(&CrosslinkChannel::new(Complex64::from_polar(mag, -2.1)), &b);
        assert!((unit - other).abs() < 1e-12);
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(sinr(7.5, 0.0), 7.5);
        let s = sinr(to_linear(10.0), to_linear(0.0));
        assert!((s - 5.0).abs() < 1e-12);
        assert!((to_db(s) - 6.9897).abs() < 1e-4);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate(0.0), 0.0);
        assert_eq!(rate(1.0), 1.0);
        assert_eq!(rate(15.0), 4.0);
    }

    #[test]
    fn capacity_and_tdd() {
        let s = 37.0;
        assert_eq!(codebook_capacity(s, s), 2.0 * rate(s));
        let tdd = tdd_rates(120.0, 33.0);
        assert_eq!(normalized_se(tdd.r_sum, codebook_capacity(120.0, 33.0)), 0.5);
    }

    #[test]
    fn link_metrics_consistency() {
        let m = LinkMetrics::new(100.0, 3.0);
        assert!((m.sinr_linear - 25.0).abs() < 1e-12);
        assert!((m.sinr_db() - to_db(25.0)).abs() < 1e-12);
        assert_eq!(LinkMetrics::new(0.0, 0.0).snr_db(), DB_FLOOR);
    }

    proptest! {
        #[test]
        fn db_round_trip(x in -200.0f64..200.0) {
            prop_assert!((to_db(to_linear(x)) - x).abs() < 1e-12);
        }

        #[test]
        fn sinr_never_exceeds_snr(snr in 0.0f64..1e6, inr in 0.0f64..1e6) {
            prop_assert!(sinr(snr, inr) <= snr);
        }

        #[test]
        fn sinr_decreasing_in_inr(snr in 1e-6f64..1e6, inr in 0.0f64..1e6, d in 1e-3f64..1e3) {
            prop_assert!(sinr(snr, inr + d) < sinr(snr, inr));
        }

        #[test]
        fn rate_increasing(s in 0.0f64..1e6, d in 1e-6f64..1e3) {
            prop_assert!(rate(s + d) > rate(s));
        }

        #[test]
        fn metrics_invariant_to_beam_phase(t_tx in -60.0f64..60.0, t_rx in -60.0f64..60.0, phi in 0.0f64..std::f64::consts::TAU) {
            let f = beam(t_tx);
            let w = beam(t_rx);
            let h_tx = channel(t_tx + 3.0, Complex64::new(1e-4, 2e-5));
            let si = SiChannel::outer(Complex64::new(1e-3, 0.0), beam(t_rx - 4.0).as_slice(), beam(t_tx + 2.0).as_slice());
            let b = budget();
            let base = snr_dl(&f, &h_tx, &b);
            prop_assert!((snr_dl(&f.rotated(phi), &h_tx, &b) - base).abs() <= 1e-9 * base.max(1e-300));
            let i0 = inr_si(&f, &w, &si, &b);
            let i1 = inr_si(&f.rotated(phi), &w.rotated(-2.0 * phi), &si, &b);
            prop_assert!((i1 - i0).abs() <= 1e-9 * i0.max(1e-300));
        }

        #[test]
        fn tdd_is_half(a in 0.0f64..1e6, b in 1e-9f64..1e6) {
            let t = tdd_rates(a, b);
            prop_assert_eq!(normalized_se(t.r_sum, codebook_capacity(a, b)), 0.5);
        }
    }
}
