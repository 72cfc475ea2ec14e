//! Checks of the flow's inequalities and identities against computed
//! trajectories, each reduced to a signed worst slack.

pub mod calibration;
pub mod checks;
pub mod report;

pub use calibration::{calibrate, Calibration, CalibrationRun};
pub use checks::{
    check_aronson_benilan, check_comparison, check_conformal, check_eigen_barrier, check_k_lower,
    check_k_upper_neg, check_k_upper_pos, check_k_upper_zero, check_scaling_symmetry, check_volume_law,
    exact_error, initial_curvature_max, observed_orders, scaling_discrepancy, ConformalBound,
};
pub use report::{BoundId, BoundReport, Location, Slack, Verdict};

#[cfg(test)]
mod tests;
