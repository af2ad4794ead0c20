mod common;

use fdbeam::array::{array_gain, synthesize_beam, AngleDeg, ArrayGeometry, PatternScan};
use fdbeam::channel::default_lobby_scene;
use fdbeam::dataset::read_sweep;
use fdbeam::metrics::{inr_si, rate, sinr, snr_dl, snr_ul, to_db, to_linear};
use fdbeam::scenario::{align_pair, MeasureOptions, SceneModel};
use fdbeam::selection::{steer, steer_plus, SteerParams, SteerPlusParams};
use fdbeam::sweep::{reciprocity_delta, stats_maps, InrMap, SpatialProfile};
use fdbeam::Scene;
use proptest::prelude::*;

fn codebook() -> Vec<f64> {
    fdbeam::config::parse_range("-60:8:60").unwrap()
}

fn bits() -> impl Strategy<Value = Option<u32>> {
    prop_oneof![Just(None), (1u32..=8).prop_map(Some)]
}

fn plus(delta: f64, inr_target_db: f64) -> SteerPlusParams {
    SteerPlusParams {
        steer: SteerParams::symmetric(delta, 1.0, inr_target_db),
        se_target: f64::INFINITY,
    }
}

#[test]
fn shipped_lobby_scene_is_the_default() {
    let s = Scene::load(&common::repo_root().join("scenes/lobby.toml")).unwrap();
    assert_eq!(s, default_lobby_scene());
}

#[test]
fn quantized_peak_gain_improves_with_bits() {
    let g = ArrayGeometry::half_wave(16);
    for k in 0..=24 {
        let theta = AngleDeg::new(-60.0 + 5.0 * f64::from(k)).unwrap();
        let gains: Vec<f64> = (1..=8)
            .map(|b| array_gain(&synthesize_beam(&g, theta, Some(b)).unwrap(), &g, theta).unwrap())
            .collect();
        for w in gains.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "θ={} gains {gains:?}", theta.degrees());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beams_are_unit_norm_and_phase_only(theta in -90.0f64..=90.0, n in 1usize..=32, bits in bits()) {
        let g = ArrayGeometry::half_wave(n);
        let w = synthesize_beam(&g, AngleDeg::new(theta).unwrap(), bits).unwrap();
        prop_assert!((w.norm() - 1.0).abs() <= 1e-9);
        for x in w.as_slice() {
            prop_assert!((x.norm() - 1.0 / (n as f64).sqrt()).abs() <= 1e-9);
        }
    }

    #[test]
    fn gain_never_exceeds_element_count(theta in -90.0f64..=90.0, probe in -90.0f64..=90.0, bits in bits()) {
        let g = ArrayGeometry::half_wave(16);
        let w = synthesize_beam(&g, AngleDeg::new(theta).unwrap(), bits).unwrap();
        prop_assert!(array_gain(&w, &g, AngleDeg::new(probe).unwrap()).unwrap() <= 16.0 + 1e-9);
    }

    #[test]
    fn pattern_mirror(theta in -90.0f64..=90.0, probe in -90.0f64..=90.0, bits in bits()) {
        let g = ArrayGeometry::half_wave(16);
        let gain = |s: f64, p: f64| {
            let w = synthesize_beam(&g, AngleDeg::new(s).unwrap(), bits).unwrap();
            array_gain(&w, &g, AngleDeg::new(p).unwrap()).unwrap()
        };
        let (a, b) = (gain(theta, -probe), gain(-theta, probe));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn scanned_peak_tracks_steering(theta in -60.0f64..=60.0, bits in prop_oneof![Just(None), (5u32..=8).prop_map(Some)]) {
        let g = ArrayGeometry::half_wave(16);
        let w = synthesize_beam(&g, AngleDeg::new(theta).unwrap(), bits).unwrap();
        let scan = PatternScan::new(&w, &g, 0.01).unwrap();
        let tol = if bits.is_some() { 0.5 } else { 0.05 };
        prop_assert!((scan.peak_angle_deg() - theta).abs() <= tol, "peak {}", scan.peak_angle_deg());
    }

    #[test]
    fn metrics_ignore_global_beam_phase(seed in 0u64..1000, t in -60.0f64..60.0, r in -60.0f64..60.0, phase in 0.0f64..6.3) {
        let s = common::random_scene(seed);
        let m = SceneModel::new(s.clone(), MeasureOptions::default()).unwrap();
        let f = m.tx_beam(t).unwrap();
        let w = m.rx_beam(r).unwrap();
        let h_dl = fdbeam::channel::user_channel(&s, 0, fdbeam::channel::LinkSide::Downlink).unwrap();
        let h_ul = fdbeam::channel::user_channel(&s, 1, fdbeam::channel::LinkSide::Uplink).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        prop_assert!(close(inr_si(&f, &w, m.si_channel(), &s.budget), inr_si(&f.rotated(phase), &w.rotated(-phase), m.si_channel(), &s.budget)));
        prop_assert!(close(snr_dl(&f, &h_dl, &s.budget), snr_dl(&f.rotated(phase), &h_dl, &s.budget)));
        prop_assert!(close(snr_ul(&w, &h_ul, &s.budget), snr_ul(&w.rotated(phase), &h_ul, &s.budget)));
    }

    #[test]
    fn sinr_and_rate_monotone(snr_db in -20.0f64..40.0, a in -40.0f64..40.0, b in -40.0f64..40.0) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let snr = to_linear(snr_db);
        prop_assert!(sinr(snr, to_linear(hi)) < sinr(snr, to_linear(lo)));
        prop_assert!(rate(to_linear(hi)) > rate(to_linear(lo)));
        prop_assert!((to_db(to_linear(a)) - a).abs() <= 1e-12);
    }

    #[test]
    fn role_swap_reciprocity(seed in 0u64..10_000, bits in bits()) {
        let s = common::random_scene(seed);
        let opts = MeasureOptions { phase_bits: bits, inr_jitter_db: 0.0 };
        let a = SceneModel::new(s.clone(), opts).unwrap();
        let b = SceneModel::new(s.swap_roles(), opts).unwrap();
        let tx = SpatialProfile::range(-60.0, 5.0, 60.0).unwrap();
        let rx = SpatialProfile::range(-45.0, 3.0, 45.0).unwrap();
        let d = reciprocity_delta(&a.sweep(&tx, &rx).unwrap(), &b.sweep(&rx, &tx).unwrap()).unwrap();
        prop_assert!(d <= 1e-10, "deviation {d}");
    }

    #[test]
    fn neighborhood_stats_bound_the_map(values in proptest::collection::vec(1e-6f64..1e6, 42), d in 0.0f64..4.0) {
        let map = InrMap::new(
            SpatialProfile::range(0.0, 1.0, 5.0).unwrap(),
            SpatialProfile::range(0.0, 1.0, 6.0).unwrap(),
            values,
        ).unwrap();
        let s = stats_maps(&map, d, d);
        let wider = stats_maps(&map, d + 1.0, d);
        for k in 0..42 {
            prop_assert!(s.inr_min[k] <= map.values()[k]);
            prop_assert!(s.inr_rng_db[k] >= 0.0);
            prop_assert!(wider.inr_min[k] <= s.inr_min[k]);
            prop_assert!(wider.inr_rng_db[k] >= s.inr_rng_db[k]);
        }
    }

    #[test]
    fn dataset_rows_in_any_order(values in proptest::collection::vec(1e-9f64..1e9, 12), rot in 0usize..12) {
        let map = InrMap::new(
            SpatialProfile::range(-3.0, 2.0, 3.0).unwrap(),
            SpatialProfile::range(10.0, 5.0, 20.0).unwrap(),
            values,
        ).unwrap();
        let mut rows: Vec<String> = Vec::new();
        for (i, t) in map.tx_profile().angles().iter().enumerate() {
            for (j, r) in map.rx_profile().angles().iter().enumerate() {
                rows.push(format!("{t},{r},{}", to_db(map.get(i, j))));
            }
        }
        rows.rotate_left(rot);
        let text = format!("theta_tx_deg,theta_rx_deg,inr_db\n{}\n", rows.join("\n"));
        let back = read_sweep(text.as_bytes()).unwrap();
        prop_assert_eq!(back.shape(), (4, 3));
        for (a, b) in map.values().iter().zip(back.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steer_plus_never_loses_to_alignment(seed in 0u64..10_000, dl in 0usize..4, hop in 1usize..4, jitter in prop_oneof![Just(0.0), Just(1.5)]) {
        let m = SceneModel::new(common::random_scene(seed), MeasureOptions { phase_bits: Some(6), inr_jitter_db: jitter }).unwrap();
        let meas = m.pair(dl, (dl + hop) % 4).unwrap();
        let init = align_pair(&meas, &codebook()).unwrap();
        let mut last = f64::NEG_INFINITY;
        for delta in 0..=4 {
            let r = steer_plus(&init, &plus(f64::from(delta), f64::INFINITY), &meas, meas.inr_cl).unwrap();
            prop_assert!(r.r_sum >= last, "Δ={delta}: {} < {last}", r.r_sum);
            if delta == 0 {
                prop_assert_eq!((r.theta_tx_star, r.theta_rx_star), (init.theta_dl_init.degrees(), init.theta_ul_init.degrees()));
            }
            last = r.r_sum;
        }
    }

    #[test]
    fn selections_stay_in_their_neighborhoods(seed in 0u64..10_000, delta in 0.0f64..5.0, target in -10.0f64..25.0) {
        let m = model(seed);
        let meas = m.pair(0, 3).unwrap();
        let init = align_pair(&meas, &codebook()).unwrap();
        let p = SteerParams::symmetric(delta, 1.0, target);
        let a = steer(&init, &p, &meas, meas.inr_cl).unwrap();
        let b = steer_plus(&init, &SteerPlusParams { steer: p, se_target: f64::INFINITY }, &meas, meas.inr_cl).unwrap();
        for r in [&a, &b] {
            let dt = r.theta_tx_star - init.theta_dl_init.degrees();
            let dr = r.theta_rx_star - init.theta_ul_init.degrees();
            prop_assert!(dt.abs() <= delta + 1e-9 && dr.abs() <= delta + 1e-9);
            prop_assert!((r.deviation_metric - (dt * dt + dr * dr)).abs() <= 1e-9);
            prop_assert!(r.r_sum >= 0.0 && (r.r_sum - (r.r_dl + r.r_ul)).abs() <= 1e-12);
        }
        prop_assert_eq!(a.ledger.snr_dl_measurements + a.ledger.snr_ul_measurements, 2);
    }

    #[test]
    fn ledger_soundness(seed in 0u64..10_000, delta in 0u32..5, lo in -10.0f64..20.0, gap in 0.0f64..15.0) {
        let m = model(seed);
        let meas = m.pair(1, 2).unwrap();
        let init = align_pair(&meas, &codebook()).unwrap();
        let side = 2 * delta as usize + 1;
        let low = steer_plus(&init, &plus(f64::from(delta), lo), &meas, meas.inr_cl).unwrap();
        let high = steer_plus(&init, &plus(f64::from(delta), lo + gap), &meas, meas.inr_cl).unwrap();
        let all = steer_plus(&init, &plus(f64::from(delta), f64::INFINITY), &meas, meas.inr_cl).unwrap();
        for r in [&low, &high, &all] {
            prop_assert!(r.ledger.inr_measurements <= side * side);
            prop_assert!(r.ledger.snr_dl_measurements <= side && r.ledger.snr_ul_measurements <= side);
        }
        let snr = |r: &fdbeam::SelectionResult| r.ledger.snr_dl_measurements + r.ledger.snr_ul_measurements;
        prop_assert!(snr(&low) <= snr(&high) && snr(&high) <= snr(&all));
    }
}

fn model(seed: u64) -> SceneModel {
    SceneModel::new(common::random_scene(seed), MeasureOptions::default()).unwrap()
}
