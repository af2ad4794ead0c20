#![allow(dead_code)]

use std::path::PathBuf;

use fdbeam::channel::{default_lobby_scene, NlosRay, Scatterer, Scene, UserNode};
use fdbeam::config::{parse_config, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Every shipped experiment config with its scene.
pub fn shipped() -> Vec<(String, Scene, ExperimentConfig)> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(repo_root().join("configs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    for p in paths {
        let cfg = parse_config(&p).unwrap();
        let scene = Scene::load(&cfg.scene).unwrap();
        let name = p.file_stem().unwrap().to_string_lossy().into_owned();
        out.push((name, scene, cfg));
    }
    out
}

/// Lobby geometry with random reflectors, users and coupling.
pub fn random_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = default_lobby_scene();
    s.name = format!("random-{seed}");
    s.seed = seed;
    s.direct_coupling_gain_db = if rng.random_bool(0.2) {
        f64::NEG_INFINITY
    } else {
        rng.random_range(-15.0..12.0)
    };
    s.scatterers = (0..rng.random_range(1..=4))
        .map(|_| Scatterer {
            azimuth_deg: rng.random_range(-70.0..70.0),
            range_m: rng.random_range(1.0..8.0),
            reflection_gain_db: rng.random_range(-15.0..-3.0),
        })
        .collect();
    let mut azimuths: Vec<f64> = Vec::new();
    while azimuths.len() < 4 {
        let a: f64 = rng.random_range(-60.0..60.0);
        if azimuths.iter().all(|b| (a - b).abs() >= 10.0) {
            azimuths.push(a);
        }
    }
    s.users = azimuths
        .into_iter()
        .map(|a| {
            let mut u = UserNode::at(a, rng.random_range(2.0..6.0));
            for _ in 0..rng.random_range(0..=2) {
                u.nlos_rays.push(NlosRay {
                    azimuth_deg: rng.random_range(-70.0..70.0),
                    gain_db: rng.random_range(-15.0..-5.0),
                    phase_rad: None,
                });
            }
            u
        })
        .collect();
    s
}

/// Scene with one reflector, no direct coupling and no users.
pub fn single_scatterer_scene(azimuth_deg: f64, range_m: f64, seed: u64) -> Scene {
    let mut s = default_lobby_scene();
    s.seed = seed;
    s.direct_coupling_gain_db = f64::NEG_INFINITY;
    s.scatterers = vec![Scatterer {
        azimuth_deg,
        range_m,
        reflection_gain_db: -6.0,
    }];
    s
}
