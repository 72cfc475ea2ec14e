//! Scenario files, run orchestration and on-disk artifacts.

pub mod export;
pub mod run;
pub mod scenario;
pub mod store;
pub mod verify;

pub use export::export_plots;
pub use run::{compute_reports, run, CheckInputs, Outcome, RunRecord};
pub use scenario::{Scenario, Validated};
pub use verify::{load_run, verify};
