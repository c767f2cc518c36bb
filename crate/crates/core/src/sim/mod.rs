//! Scenario-driven closed-loop simulation.

pub mod engine;
pub mod log;
pub mod presets;
pub mod scenario;

pub use engine::{run, validate, SAFETY_TOL};
pub use log::{EpochRecord, Outcome, RunLog, RunSummary, StepRecord};
pub use presets::{all_presets, preset, PRESET_NAMES};
pub use scenario::{CbfParams, PlantKind, RunParams, Scenario};
