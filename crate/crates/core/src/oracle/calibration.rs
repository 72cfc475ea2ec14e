//! Measured discretization tolerance `eps = c1 h^2 + c2 dt_max`.
//!
//! The constants come from the curvature -1 disk flow, whose exact solution
//! `u0 + ½ log(2t+1)` makes `K <= -1/(2t+1)` and `u >= u0 + ½ log(2t+1)` hold
//! with equality, and from the sampled soliton, which does the same for
//! `K >= -1/(2t)` and the completeness barrier. Any nonzero slack on these
//! is discretization error.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::{build_grid, evaluate, GridKind, InitialForm};
use crate::metrics::{barrier_hyperbolic, weighted_laplacian, ConformalState};
use crate::stepper::{evolve, BoundaryForm, BoundarySchedule, FlowTrajectory, StepPolicy, TimeGrid};

use super::checks::BOUNDARY_LAYER;

pub const CALIBRATION_RADIUS: f64 = 0.9;
/// `(N, dt_max)` of the calibration runs.
pub const CALIBRATION_RUNS: [(usize, f64); 3] = [(64, 4e-3), (128, 4e-3), (128, 1e-3)];
pub const CALIBRATION_T_END: f64 = 1.0;
pub const CALIBRATION_EVERY: f64 = 0.05;
/// Safety factor applied after the fit covers every run.
pub const SAFETY: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub n: usize,
    pub h: f64,
    pub dt_max: f64,
    /// Worst equality-case defect over the four bounds.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c1: f64,
    pub c2: f64,
    pub runs: Vec<CalibrationRun>,
}

impl Calibration {
    pub fn eps(&self, h: f64, dt_max: f64) -> f64 {
        self.c1 * h * h + self.c2 * dt_max
    }
}

fn output_times() -> Vec<f64> {
    let n = (CALIBRATION_T_END / CALIBRATION_EVERY).round() as usize;
    (1..=n).map(|i| i as f64 * CALIBRATION_EVERY).collect()
}

fn checked(traj: &FlowTrajectory, i: usize) -> bool {
    traj.grid.depth(i) > BOUNDARY_LAYER * traj.grid.h() * (1.0 + 1e-9)
}

/// Largest equality-case defect of one `(N, dt_max)` run.
pub fn defect(n: usize, dt_max: f64) -> Result<CalibrationRun> {
    let h = CALIBRATION_RADIUS / n as f64;
    let grid = Arc::new(build_grid(GridKind::Radial1d, CALIBRATION_RADIUS, h)?);
    let u0 = evaluate(&InitialForm::HyperbolicDisk.into(), &grid)?;
    let sched = BoundarySchedule::new(BoundaryForm::HyperbolicGrowth { curvature: 1.0 }, &u0)?;
    let policy = StepPolicy {
        dt_max,
        ..StepPolicy::default()
    };
    let times = output_times();
    let flow = evolve(
        "calibration",
        &ConformalState::new(0.0, u0.clone())?,
        &sched,
        CALIBRATION_T_END,
        &policy,
        &TimeGrid::Adaptive,
        &times,
    )?;
    let soliton = FlowTrajectory::sample_exact("soliton", &grid, &times, |x, y, t| {
        barrier_hyperbolic(x.hypot(y), t, 0.0)
    })?;
    let mut d = 0.0f64;
    let u0 = u0.values();
    for s in &flow.snapshots {
        let x = weighted_laplacian(&grid, &s.u);
        for (i, xi) in x.iter().enumerate() {
            if checked(&flow, i) {
                d = d.max((xi - 1.0 / (2.0 * s.t + 1.0)).abs());
            }
        }
        for (u, u0) in s.u.iter().zip(u0) {
            d = d.max((u - u0 - 0.5 * (2.0 * s.t).ln_1p()).abs());
        }
    }
    for s in &soliton.snapshots {
        let x = weighted_laplacian(&grid, &s.u);
        for (i, xi) in x.iter().enumerate() {
            if checked(&soliton, i) {
                d = d.max((0.5 / s.t - xi).abs());
            }
        }
        for (n, u) in grid.active_nodes().iter().zip(&s.u) {
            d = d.max((u - barrier_hyperbolic(n.radius(), s.t, 0.0)?).abs());
        }
    }
    Ok(CalibrationRun { n, h, dt_max, defect: d })
}

/// Nonnegative fit of `d ≈ c1 h^2 + c2 dt`, weighted by `1/d`, then scaled
/// so the model covers every run, then by [`SAFETY`].
pub fn fit(runs: Vec<CalibrationRun>) -> Calibration {
    let rows: Vec<(f64, f64, f64)> = runs
        .iter()
        .map(|r| {
            let w = 1.0 / r.defect.max(f64::MIN_POSITIVE);
            (r.h * r.h * w, r.dt_max * w, 1.0)
        })
        .collect();
    let ls2 = || {
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y, d) in &rows {
            a11 += x * x;
            a12 += x * y;
            a22 += y * y;
            b1 += x * d;
            b2 += y * d;
        }
        let det = a11 * a22 - a12 * a12;
        ((b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det)
    };
    let one = |col: usize| {
        let (mut num, mut den) = (0.0, 0.0);
        for &(x, y, d) in &rows {
            let a = if col == 0 { x } else { y };
            num += a * d;
            den += a * a;
        }
        num / den
    };
    let (mut c1, mut c2) = ls2();
    if !(c1 >= 0.0 && c2 >= 0.0) || !c1.is_finite() || !c2.is_finite() {
        // best single-term fit
        let (k1, k2) = (one(0), one(1));
        let res = |a: f64, b: f64| rows.iter().map(|&(x, y, d)| (d - a * x - b * y).powi(2)).sum::<f64>();
        (c1, c2) = if res(k1, 0.0) <= res(0.0, k2) { (k1, 0.0) } else { (0.0, k2) };
    }
    let cover = runs
        .iter()
        .map(|r| r.defect / (c1 * r.h * r.h + c2 * r.dt_max))
        .fold(1.0f64, f64::max);
    Calibration {
        c1: c1 * cover * SAFETY,
        c2: c2 * cover * SAFETY,
        runs,
    }
}

/// Runs the three calibration flows concurrently and fits the constants.
pub fn calibrate() -> Result<Calibration> {
    let runs = CALIBRATION_RUNS
        .par_iter()
        .map(|&(n, dt)| defect(n, dt))
        .collect::<Result<Vec<_>>>()?;
    Ok(fit(runs))
}
