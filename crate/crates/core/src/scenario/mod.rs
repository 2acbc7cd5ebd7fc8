//! Scenario configuration, built-in presets, the run loop and its outputs.
//!
//! Everything here works in `f64`.

pub mod audit;
pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use audit::{audit_dir, AuditReport};
pub use config::{ConfigError, Flags, GridSpec, InteractionSpec, KernelSpec, PopulationKind, PopulationSpec, ScenarioConfig};
pub use presets::{preset, PRESET_NAMES};
pub use run::{run, RunError, RunOptions, RunSummary};
