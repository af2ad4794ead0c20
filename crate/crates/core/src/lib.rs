//! Full-duplex mmWave beamforming simulator.
//!
//! Phased-array models, synthetic self-interference and user channels, beam
//! sweeps with neighborhood statistics, and measurement-driven beam selection
//! (STEER and STEER+), plus the dataset, scenario and plotting plumbing used
//! by the `fdbeam` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod channel;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod plot;
pub mod scenario;
pub mod selection;
pub mod sweep;

pub use array::{AngleDeg, ArrayGeometry, BeamWeights, Codebook, Pose};
pub use channel::{Scene, SiChannel};
pub use config::ExperimentConfig;
pub use metrics::LinkBudget;
pub use scenario::{run_scenario_paper, ScenarioReport, SceneModel};
pub use selection::{steer, steer_plus, SelectionResult, SteerParams, SteerPlusParams};
pub use sweep::{InrMap, SpatialProfile};
