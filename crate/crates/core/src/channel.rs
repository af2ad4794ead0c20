//! Channel synthesis from a declarative scene.
//!
//! The self-interference channel combines a spherical-wave near-field kernel
//! between every transmit/receive element pair with one far-field ray per
//! environment scatterer. User channels are LOS plus optional NLOS rays and
//! the cross-link between two users is a free-space scalar.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::{array_response, element_positions, wavelength, ArrayError, ArrayGeometry, Pose};
use crate::metrics::LinkBudget;

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error("rx element {rx} and tx element {tx} coincide")]
    DegenerateGeometry { rx: usize, tx: usize },
    #[error("unknown user index {0}")]
    UnknownUser(usize),
    #[error("cross-link needs two distinct users, got {0} twice")]
    SameUser(usize),
    #[error("users {0} and {1} are co-located")]
    CoLocatedUsers(usize, usize),
    #[error("reading scene {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing scene {path}: {message}")]
    Parse { path: String, message: String },
}

/// Environment reflector seen from the base station origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub azimuth_deg: f64,
    pub range_m: f64,
    /// Lumped two-way reflection gain on top of free-space loss.
    pub reflection_gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlosRay {
    pub azimuth_deg: f64,
    pub gain_db: f64,
    /// Drawn from the scene seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_rad: Option<f64>,
}

/// Single-antenna user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserNode {
    pub azimuth_deg: f64,
    pub range_m: f64,
    #[serde(default)]
    pub los_gain_db: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nlos_rays: Vec<NlosRay>,
}

impl UserNode {
    pub fn at(azimuth_deg: f64, range_m: f64) -> Self {
        Self {
            azimuth_deg,
            range_m,
            los_gain_db: 0.0,
            nlos_rays: Vec::new(),
        }
    }

    /// Position in the global frame (BS at the origin).
    pub fn position(&self) -> [f64; 3] {
        let a = self.azimuth_deg.to_radians();
        [self.range_m * a.sin(), self.range_m * a.cos(), 0.0]
    }
}

fn default_schema() -> u32 {
    SCENE_SCHEMA_VERSION
}

fn default_carrier() -> f64 {
    60e9
}

fn default_omni_gain() -> f64 {
    -6.0
}

/// Full-duplex base station, its environment and its users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default)]
    pub seed: u64,
    /// Near-field coupling scale κ in dB; `-inf` disables direct coupling.
    pub direct_coupling_gain_db: f64,
    /// Antenna gain applied to the user-to-user cross-link.
    #[serde(default = "default_omni_gain")]
    pub crosslink_omni_gain_db: f64,
    pub tx_array: ArrayGeometry,
    pub rx_array: ArrayGeometry,
    #[serde(default)]
    pub budget: LinkBudget,
    #[serde(default)]
    pub scatterers: Vec<Scatterer>,
    #[serde(default)]
    pub users: Vec<UserNode>,
}

impl Scene {
    pub fn from_toml_str(text: &str) -> Result<Self, ChannelError> {
        let scene: Scene = toml::from_str(text).map_err(|e| ChannelError::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, ChannelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ChannelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let scene: Scene = toml::from_str(&text).map_err(|e| ChannelError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: String| Err(ChannelError::InvalidScene(m));
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCENE_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return bad(format!("carrier_hz must be positive, got {}", self.carrier_hz));
        }
        if self.direct_coupling_gain_db.is_nan() || self.direct_coupling_gain_db == f64::INFINITY {
            return bad("direct_coupling_gain_db must be finite or -inf".into());
        }
        self.tx_array.validate()?;
        self.rx_array.validate()?;
        let (a, b) = (self.tx_array.pose.position, self.rx_array.pose.position);
        if distance(a, b) <= 0.0 {
            return bad("transmit and receive array centers coincide".into());
        }
        self.budget.validate().map_err(ChannelError::InvalidScene)?;
        for (k, s) in self.scatterers.iter().enumerate() {
            if !(s.range_m > 0.0) || !s.azimuth_deg.is_finite() || !s.reflection_gain_db.is_finite() {
                return bad(format!("scatterer {k} needs a positive range and finite angle/gain"));
            }
        }
        for (k, u) in self.users.iter().enumerate() {
            if !(u.range_m > 0.0) || !u.azimuth_deg.is_finite() || !u.los_gain_db.is_finite() {
                return bad(format!("user {k} needs a positive range and finite angle/gain"));
            }
            if let Some(r) = u.nlos_rays.iter().find(|r| r.gain_db > u.los_gain_db) {
                return bad(format!(
                    "user {k}: NLOS ray gain {} dB exceeds LOS gain {} dB",
                    r.gain_db, u.los_gain_db
                ));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.carrier_hz)
    }

    /// Same scene with the transmit and receive arrays exchanged.
    pub fn swap_roles(&self) -> Self {
        let mut s = self.clone();
        std::mem::swap(&mut s.tx_array, &mut s.rx_array);
        s
    }

    /// Receive array rotated so that it looks `separation_deg` to the left of
    /// the transmit array; a reflector is then seen at `θ_rx ≈ θ_tx + φ`.
    pub fn with_angular_separation(&self, separation_deg: f64) -> Self {
        let mut s = self.clone();
        s.rx_array.pose.boresight_deg = s.tx_array.pose.boresight_deg - separation_deg;
        s
    }

    fn user(&self, index: usize) -> Result<&UserNode, ChannelError> {
        self.users.get(index).ok_or(ChannelError::UnknownUser(index))
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Free-space amplitude `λ/(4πd)·exp(-j2πd/λ)`.
fn friis(lambda: f64, d: f64) -> Complex64 {
    Complex64::from_polar(lambda / (4.0 * PI * d), -2.0 * PI * d / lambda)
}

fn db_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

fn facing(theta_local: f64) -> bool {
    theta_local.abs() < 90.0
}

/// Self-interference channel, `N_rx × N_tx`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SiChannel {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl SiChannel {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// `c · u vᴴ`.
    pub fn outer(c: Complex64, u: &[Complex64], v: &[Complex64]) -> Self {
        let mut h = Self::zeros(u.len(), v.len());
        h.add_outer(c, u, v);
        h
    }

    fn add_outer(&mut self, c: Complex64, u: &[Complex64], v: &[Complex64]) {
        for (m, um) in u.iter().enumerate() {
            let row = &mut self.data[m * self.cols..(m + 1) * self.cols];
            for (x, vn) in row.iter_mut().zip(v) {
                *x += c * um * vn.conj();
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[m * self.cols + n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for m in 0..self.rows {
            for n in 0..self.cols {
                t.data[n * self.rows + m] = self.get(m, n);
            }
        }
        t
    }

    /// `H x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(h, v)| h * v).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

/// Downlink (`h_tx`) or uplink (`h_rx`) channel vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    vector: Vec<Complex64>,
}

impl LinkChannel {
    pub fn new(vector: Vec<Complex64>) -> Self {
        Self { vector }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.vector
    }

    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosslinkChannel {
    scalar: Complex64,
}

impl CrosslinkChannel {
    pub fn new(scalar: Complex64) -> Self {
        Self { scalar }
    }

    pub fn scalar(&self) -> Complex64 {
        self.scalar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkSide {
    Downlink,
    Uplink,
}

/// Spherical-wave coupling between every rx/tx element pair, unscaled by κ.
///
/// Transmit weight `n` drives the physical element `N_tx - 1 - n`, so a beam
/// `f(θ)` radiates toward `+θ` with the same steering convention as `w(θ)`.
pub fn near_field_kernel(scene: &Scene) -> Result<SiChannel, ChannelError> {
    let lambda = scene.wavelength();
    let rx_pos = element_positions(&scene.rx_array, lambda);
    let tx_pos = element_positions(&scene.tx_array, lambda);
    let n_tx = tx_pos.len();
    let mut h = SiChannel::zeros(rx_pos.len(), n_tx);
    for (m, pr) in rx_pos.iter().enumerate() {
        for n in 0..n_tx {
            let r = distance(*pr, tx_pos[n_tx - 1 - n]);
            if r <= 0.0 {
                return Err(ChannelError::DegenerateGeometry { rx: m, tx: n });
            }
            h.data[m * n_tx + n] = friis(lambda, r);
        }
    }
    Ok(h)
}

/// `H = κ·H_near + Σ_k g_k·a_rx(θ_k,rx)·a_tx(θ_k,tx)ᴴ`.
pub fn si_channel(scene: &Scene) -> Result<SiChannel, ChannelError> {
    scene.validate()?;
    let (tx, rx) = (&scene.tx_array, &scene.rx_array);
    let element = tx.element_amplitude() * rx.element_amplitude();
    let mut h = if scene.direct_coupling_gain_db == f64::NEG_INFINITY {
        SiChannel::zeros(rx.num_elements, tx.num_elements)
    } else {
        let mut near = near_field_kernel(scene)?;
        let kappa = db_amplitude(scene.direct_coupling_gain_db) * element;
        near.data.iter_mut().for_each(|x| *x *= kappa);
        near
    };
    let lambda = scene.wavelength();
    for s in &scene.scatterers {
        let th_tx = tx.pose.local_azimuth(s.azimuth_deg);
        let th_rx = rx.pose.local_azimuth(s.azimuth_deg);
        if !facing(th_tx) || !facing(th_rx) {
            continue;
        }
        let g = friis(lambda, 2.0 * s.range_m) * db_amplitude(s.reflection_gain_db) * element;
        h.add_outer(g, &array_response(rx, th_rx), &array_response(tx, th_tx));
    }
    Ok(h)
}

fn array_for(scene: &Scene, side: LinkSide) -> &ArrayGeometry {
    match side {
        LinkSide::Downlink => &scene.tx_array,
        LinkSide::Uplink => &scene.rx_array,
    }
}

/// Phases of a user's NLOS rays: explicit values where given, otherwise
/// uniform draws from a stream keyed by the scene seed and the user index.
pub fn nlos_phases(scene: &Scene, user_index: usize) -> Result<Vec<f64>, ChannelError> {
    let user = scene.user(user_index)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(user_index as u64 + 1);
    Ok(user
        .nlos_rays
        .iter()
        .map(|r| {
            let drawn = rng.random_range(0.0..2.0 * PI);
            r.phase_rad.unwrap_or(drawn)
        })
        .collect())
}

/// `h = Σ_l α_l·a(θ_l)` with the LOS term from Friis loss at the user range.
pub fn user_channel(scene: &Scene, user_index: usize, side: LinkSide) -> Result<LinkChannel, ChannelError> {
    let user = scene.user(user_index)?;
    let geom = array_for(scene, side);
    let lambda = scene.wavelength();
    let base = friis(lambda, user.range_m) * geom.element_amplitude();
    let mut h = vec![Complex64::new(0.0, 0.0); geom.num_elements];
    let mut add_ray = |azimuth: f64, alpha: Complex64| {
        let theta = geom.pose.local_azimuth(azimuth);
        if facing(theta) {
            for (x, a) in h.iter_mut().zip(array_response(geom, theta)) {
                *x += alpha * a;
            }
        }
    };
    add_ray(user.azimuth_deg, base * db_amplitude(user.los_gain_db));
    for (ray, phase) in user.nlos_rays.iter().zip(nlos_phases(scene, user_index)?) {
        let alpha = Complex64::from_polar(base.norm() * db_amplitude(ray.gain_db), phase);
        add_ray(ray.azimuth_deg, alpha);
    }
    Ok(LinkChannel::new(h))
}

/// Free-space scalar channel between two users.
pub fn crosslink_channel(scene: &Scene, dl_user: usize, ul_user: usize) -> Result<CrosslinkChannel, ChannelError> {
    if dl_user == ul_user {
        return Err(ChannelError::SameUser(dl_user));
    }
    let (a, b) = (scene.user(dl_user)?, scene.user(ul_user)?);
    let d = distance(a.position(), b.position());
    if d <= 0.0 {
        return Err(ChannelError::CoLocatedUsers(dl_user, ul_user));
    }
    Ok(CrosslinkChannel::new(
        friis(scene.wavelength(), d) * db_amplitude(scene.crosslink_omni_gain_db),
    ))
}

/// Multiplies a linear INR by log-normal jitter with `sigma_db` spread.
pub fn perturb_inr<R: Rng + ?Sized>(inr_linear: f64, sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db <= 0.0 {
        return inr_linear;
    }
    let x = Normal::new(0.0, sigma_db).expect("sigma is finite").sample(rng);
    inr_linear * 10f64.powf(x / 10.0)
}

/// Illustrative lobby-like scene: side-by-side arrays 10 cm apart at 60 GHz,
/// four users at ±20° and ±50°, three reflectors.
pub fn default_lobby_scene() -> Scene {
    let tx = ArrayGeometry {
        num_elements: 16,
        spacing_wavelengths: 0.5,
        pose: Pose::at([0.05, 0.0, 0.0]),
        element_gain_db: 0.0,
    };
    let rx = ArrayGeometry {
        pose: Pose::at([-0.05, 0.0, 0.0]),
        ..tx.clone()
    };
    Scene {
        schema_version: SCENE_SCHEMA_VERSION,
        name: "lobby".into(),
        carrier_hz: 60e9,
        seed: 7,
        direct_coupling_gain_db: DEFAULT_KAPPA_DB,
        crosslink_omni_gain_db: default_omni_gain(),
        tx_array: tx,
        rx_array: rx,
        budget: LinkBudget::default(),
        scatterers: vec![
            Scatterer {
                azimuth_deg: -35.0,
                range_m: 3.0,
                reflection_gain_db: -8.0,
            },
            Scatterer {
                azimuth_deg: 5.0,
                range_m: 6.0,
                reflection_gain_db: -6.0,
            },
            Scatterer {
                azimuth_deg: 40.0,
                range_m: 2.5,
                reflection_gain_db: -10.0,
            },
        ],
        users: vec![
            UserNode::at(-50.0, 4.0),
            UserNode::at(-20.0, 4.0),
            UserNode::at(20.0, 4.0),
            UserNode::at(50.0, 4.0),
        ],
    }
}

/// κ for the shipped scenes, calibrated for a median swept INR near 8 dB.
pub const DEFAULT_KAPPA_DB: f64 = -2.0;
