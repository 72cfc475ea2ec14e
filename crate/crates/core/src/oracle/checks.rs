use crate::error::{Error, Result};
use crate::fields::Grid;
use crate::ladder::VolumeFit;
use crate::metrics::{barrier_hyperbolic, barrier_upper, weighted_laplacian};
use crate::operators::EigenPair;
use crate::stepper::FlowTrajectory;

use super::report::{BoundId, BoundReport, Slack};

/// Curvature checks skip nodes this many spacings or fewer from the wall.
pub const BOUNDARY_LAYER: f64 = 2.0;

/// Comparison checks allow `v_a / v_b - 1` down to `-COMPARISON_FACTOR * newton_tol`.
pub const COMPARISON_FACTOR: f64 = 10.0;

fn in_layer(grid: &Grid, node: usize) -> bool {
    grid.depth(node) <= BOUNDARY_LAYER * grid.h() * (1.0 + 1e-9)
}

fn initial_snapshot(traj: &FlowTrajectory) -> Result<&[f64]> {
    match traj.snapshots.first() {
        Some(s) if s.t == 0.0 => Ok(&s.u),
        _ => Err(Error::Validation(format!("trajectory `{}` has no t = 0 snapshot", traj.label))),
    }
}

/// Calls `f(t, node, radius, x)` with `x = e^{-2u} Δ_h u = -K` at every
/// interior node outside the boundary layer. Returns the number of skipped
/// node visits.
fn sweep_curvature(
    traj: &FlowTrajectory,
    keep_t: impl Fn(f64) -> bool,
    mut f: impl FnMut(f64, usize, f64, f64),
) -> usize {
    let grid = &traj.grid;
    let mut excluded = 0;
    for s in traj.snapshots.iter().filter(|s| keep_t(s.t)) {
        let x = weighted_laplacian(grid, &s.u);
        for (i, xi) in x.iter().enumerate() {
            if in_layer(grid, i) {
                excluded += 1;
                continue;
            }
            f(s.t, i, grid.nodes()[i].radius(), *xi);
        }
    }
    excluded
}

/// Largest initial curvature over the nodes curvature checks look at.
pub fn initial_curvature_max(traj: &FlowTrajectory) -> Result<f64> {
    let u0 = initial_snapshot(traj)?;
    let grid = &traj.grid;
    let x = weighted_laplacian(grid, u0);
    let k0 = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_layer(grid, *i))
        .map(|(_, x)| -x)
        .fold(f64::NEG_INFINITY, f64::max);
    if k0 == f64::NEG_INFINITY {
        return Err(Error::Validation(format!(
            "grid of `{}` has no node outside the boundary layer",
            traj.label
        )));
    }
    Ok(k0)
}

/// `K >= -1/(2t)` for `t > 0`.
pub fn check_k_lower(traj: &FlowTrajectory, eps: f64) -> Result<BoundReport> {
    let mut slack = Slack::default();
    let excl = sweep_curvature(traj, |t| t > 0.0, |t, i, r, x| slack.push(0.5 / t - x, i, r, t));
    Ok(BoundReport::measured(BoundId::KLower, &traj.label, slack, eps, excl))
}

/// `v_t <= v / t`, i.e. `p <= 1/t` with `p = Δ_h log v / v = 2x`.
///
/// Its slack is exactly twice that of [`check_k_lower`], so the tolerance
/// is `2 eps`.
pub fn check_aronson_benilan(traj: &FlowTrajectory, eps: f64) -> Result<BoundReport> {
    let mut slack = Slack::default();
    let excl = sweep_curvature(traj, |t| t > 0.0, |t, i, r, x| slack.push(1.0 / t - 2.0 * x, i, r, t));
    Ok(BoundReport::measured(BoundId::AbEstimate, &traj.label, slack, 2.0 * eps, excl))
}

/// `K <= -1/(2t+1)` when `K[u0] <= -1`.
pub fn check_k_upper_neg(traj: &FlowTrajectory, eps: f64) -> Result<BoundReport> {
    let k0 = initial_curvature_max(traj)?;
    if k0 > -1.0 + eps {
        return Ok(BoundReport::skipped(
            BoundId::KUpperNeg,
            &traj.label,
            eps,
            format!("initial curvature reaches {k0}, above -1"),
        )
        .with_extra("K0", k0));
    }
    let mut slack = Slack::default();
    let excl = sweep_curvature(traj, |_| true, |t, i, r, x| slack.push(x - 1.0 / (2.0 * t + 1.0), i, r, t));
    Ok(BoundReport::measured(BoundId::KUpperNeg, &traj.label, slack, eps, excl).with_extra("K0", k0))
}

/// `K <= 1/(1/K0 - 2t)` for `t < 1/(2 K0)`, with `K0 > 0` the measured
/// initial maximum.
pub fn check_k_upper_pos(traj: &FlowTrajectory, eps: f64) -> Result<BoundReport> {
    let k0 = initial_curvature_max(traj)?;
    if k0 <= eps {
        return Ok(BoundReport::skipped(
            BoundId::KUpperPos,
            &traj.label,
            eps,
            format!("initial curvature max {k0} is not positive"),
        )
        .with_extra("K0", k0));
    }
    let t_limit = 0.5 / k0;
    let mut slack = Slack::default();
    let excl = sweep_curvature(
        traj,
        |t| t < t_limit,
        |t, i, r, x| slack.push(1.0 / (1.0 / k0 - 2.0 * t) + x, i, r, t),
    );
    Ok(BoundReport::measured(BoundId::KUpperPos, &traj.label, slack, eps, excl)
        .with_extra("K0", k0)
        .with_extra("t_limit", t_limit))
}

/// `K <= 0` when `K[u0] <= 0`.
pub fn check_k_upper_zero(traj: &FlowTrajectory, eps: f64) -> Result<BoundReport> {
    let k0 = initial_curvature_max(traj)?;
    if k0 > eps {
        return Ok(BoundReport::skipped(
            BoundId::KUpperZero,
            &traj.label,
            eps,
            format!("initial curvature reaches {k0} > 0"),
        )
        .with_extra("K0", k0));
    }
    let mut slack = Slack::default();
    let excl = sweep_curvature(traj, |_| true, |t, i, r, x| slack.push(x, i, r, t));
    Ok(BoundReport::measured(BoundId::KUpperZero, &traj.label, slack, eps, excl).with_extra("K0", k0))
}

/// Bounds on the conformal factor itself. These use every active node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConformalBound {
    /// `u >= log(2/(1-|x|^2)) + ½ log 2t` for `t >= t_min`, `t > 0`.
    LowerHyp { t_min: f64 },
    /// `u <= log(2/(1-|x|^2)) + ½ log(2t+1)`, needs `K0 <= -1`.
    UpperHyp,
    /// `u >= u0 + ½ log(2t+1)`, needs `K0 <= -1`.
    VsU0Neg,
    /// `u >= u0 + ½ log(1 - 2 K0 t)` for `t < 1/(2 K0)`, needs `K0 > 0`.
    VsU0Pos,
    /// `u >= u0`, needs `K0 <= 0`.
    VsU0Zero,
    /// `u >= -C - log(|x| log|x|) + ½ log 2t` for `|x| >= r0`; reports the
    /// largest `C*` in the v-scale form `v >= C* t / (|x|^2 log^2 |x|)`.
    LowerCusp { r0: f64 },
}

impl ConformalBound {
    pub fn id(self) -> BoundId {
        match self {
            ConformalBound::LowerHyp { .. } => BoundId::ULowerHyp,
            ConformalBound::UpperHyp => BoundId::UUpperHyp,
            ConformalBound::VsU0Neg => BoundId::UVsU0Neg,
            ConformalBound::VsU0Pos => BoundId::UVsU0Pos,
            ConformalBound::VsU0Zero => BoundId::UVsU0Zero,
            ConformalBound::LowerCusp { .. } => BoundId::ULowerCusp,
        }
    }
}

pub fn check_conformal(traj: &FlowTrajectory, bound: ConformalBound, eps: f64) -> Result<BoundReport> {
    let id = bound.id();
    let label = &traj.label;
    let grid = &traj.grid;
    let u0 = initial_snapshot(traj)?.to_vec();
    let k0 = initial_curvature_max(traj)?;
    let skip = |why: String| Ok(BoundReport::skipped(id, label, eps, why).with_extra("K0", k0));
    let inside_unit = grid.radius() < 1.0;
    match bound {
        ConformalBound::LowerHyp { .. } | ConformalBound::UpperHyp if !inside_unit => {
            return skip(format!("domain radius {} is not inside the unit disk", grid.radius()));
        }
        ConformalBound::UpperHyp | ConformalBound::VsU0Neg if k0 > -1.0 + eps => {
            return skip(format!("initial curvature reaches {k0}, above -1"));
        }
        ConformalBound::VsU0Pos if k0 <= eps => {
            return skip(format!("initial curvature max {k0} is not positive"));
        }
        ConformalBound::VsU0Zero if k0 > eps => {
            return skip(format!("initial curvature reaches {k0} > 0"));
        }
        ConformalBound::LowerCusp { r0 } if !(r0 > 1.0) || grid.radius() < r0 => {
            return skip(format!("no node with |x| >= {r0} > 1"));
        }
        _ => {}
    }
    let mut slack = Slack::default();
    let mut excluded = 0;
    for s in &traj.snapshots {
        let t = s.t;
        let in_time = match bound {
            ConformalBound::LowerHyp { t_min } => t > 0.0 && t >= t_min,
            ConformalBound::VsU0Pos => t < 0.5 / k0,
            ConformalBound::LowerCusp { .. } => t > 0.0,
            _ => true,
        };
        if !in_time {
            continue;
        }
        for (i, n) in grid.active_nodes().iter().enumerate() {
            let r = n.radius();
            let u = s.u[i];
            let value = match bound {
                ConformalBound::LowerHyp { .. } => u - barrier_hyperbolic(r, t, 0.0)?,
                ConformalBound::UpperHyp => barrier_upper(r, t)? - u,
                ConformalBound::VsU0Neg => u - u0[i] - 0.5 * (2.0 * t).ln_1p(),
                ConformalBound::VsU0Pos => u - u0[i] - 0.5 * (-2.0 * k0 * t).ln_1p(),
                ConformalBound::VsU0Zero => u - u0[i],
                ConformalBound::LowerCusp { r0 } => {
                    if r < r0 {
                        excluded += 1;
                        continue;
                    }
                    let l = r.ln();
                    (2.0 * u).exp() * r * r * l * l / t
                }
            };
            slack.push(value, i, r, t);
        }
    }
    let mut report = match bound {
        // existence of a positive constant is the claim
        ConformalBound::LowerCusp { .. } => BoundReport::measured(id, label, slack, 0.0, excluded),
        _ => BoundReport::measured(id, label, slack, eps, excluded),
    };
    report = report.with_extra("K0", k0);
    if let (ConformalBound::LowerCusp { r0 }, Some(c)) = (bound, slack.value()) {
        report = report
            .with_extra("r0", r0)
            .with_extra("C_star", c)
            .with_extra("C_prime", -0.5 * (c / 2.0).ln());
    }
    if let ConformalBound::LowerHyp { t_min } = bound {
        report = report.with_extra("t_min", t_min);
    }
    Ok(report)
}

/// Largest `C*` with `v >= C* t / φ` on interior nodes, `t > 0`.
pub fn check_eigen_barrier(traj: &FlowTrajectory, pair: &EigenPair) -> Result<BoundReport> {
    same_grid(&traj.grid, pair.phi.grid())?;
    let phi = pair.phi.interior();
    let mut slack = Slack::default();
    for s in traj.snapshots.iter().filter(|s| s.t > 0.0) {
        for (i, p) in phi.iter().enumerate() {
            let v = (2.0 * s.u[i]).exp();
            slack.push(v * p / s.t, i, traj.grid.nodes()[i].radius(), s.t);
        }
    }
    let mut r = BoundReport::measured(BoundId::EigenBarrier, &traj.label, slack, 0.0, 0)
        .with_extra("lambda1", pair.lambda1);
    if let Some(c) = slack.value() {
        r = r.with_extra("C_star", c);
    }
    Ok(r)
}

fn same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.kind() != b.kind() || a.radius() != b.radius() || a.h() != b.h() || a.n_active() != b.n_active() {
        return Err(Error::GridMismatch(format!(
            "{:?} r = {} h = {} vs {:?} r = {} h = {}",
            a.kind(),
            a.radius(),
            a.h(),
            b.kind(),
            b.radius(),
            b.h()
        )));
    }
    Ok(())
}

/// `v_upper >= v_lower` at shared times, as `min(v_upper / v_lower - 1)`.
pub fn check_comparison(upper: &FlowTrajectory, lower: &FlowTrajectory, newton_tol: f64) -> Result<BoundReport> {
    same_grid(&upper.grid, &lower.grid)?;
    let mut slack = Slack::default();
    for su in &upper.snapshots {
        let Some(sl) = lower.snapshot_at(su.t) else {
            continue;
        };
        for (i, (a, b)) in su.u.iter().zip(&sl.u).enumerate() {
            slack.push((2.0 * (a - b)).exp_m1(), i, upper.grid.nodes()[i].radius(), su.t);
        }
    }
    let subject = format!("{} >= {}", upper.label, lower.label);
    Ok(BoundReport::measured(
        BoundId::Comparison,
        &subject,
        slack,
        COMPARISON_FACTOR * newton_tol,
        0,
    ))
}

/// Allowed relative deviation of the fitted slope from `-4π`.
pub const SLOPE_TOL: f64 = 0.03;
/// Allowed relative deviation of the extinction estimate from `Vol0 / 4π`.
pub const EXTINCTION_TOL: f64 = 0.02;

/// Area law on plane truncations ordered by radius.
///
/// Slack is the smallest of `SLOPE_TOL - d_slope` and `EXTINCTION_TOL - d_T`
/// at the largest radius and of every step `d_slope(R_i) - d_slope(R_{i+1})`,
/// so a pass needs both tolerances met and the slope improving with `R`.
pub fn check_volume_law(subject: &str, fits: &[VolumeFit]) -> BoundReport {
    let Some(last) = fits.last() else {
        return BoundReport::skipped(BoundId::VolLaw, subject, 0.0, "initial area is infinite");
    };
    let d_s: Vec<f64> = fits.iter().map(|f| f.slope_deviation()).collect();
    let d_t = last.extinction_deviation();
    let mut slack = Slack::default();
    slack.push(SLOPE_TOL - d_s[d_s.len() - 1], 0, last.radius, 0.0);
    slack.push(EXTINCTION_TOL - d_t, 0, last.radius, last.t_estimate);
    let mut monotone = true;
    for (w, f) in d_s.windows(2).zip(&fits[1..]) {
        slack.push(w[0] - w[1], 0, f.radius, 0.0);
        monotone &= w[1] < w[0];
    }
    let mut r = BoundReport::measured(BoundId::VolLaw, subject, slack, 0.0, 0)
        .with_extra("slope_deviation", d_s[d_s.len() - 1])
        .with_extra("extinction_deviation", d_t)
        .with_extra("t_estimate", last.t_estimate)
        .with_extra("t_expected", last.t_expected)
        .with_extra("slope_monotone", if monotone { 1.0 } else { 0.0 });
    for f in fits {
        r = r.with_extra(&format!("slope_R{}", f.radius), f.slope);
    }
    r
}

/// Allowed discrepancy of the rescaled run, in units of the single-grid error.
pub const SCALING_FACTOR: f64 = 4.0;
/// Minimum observed convergence order.
pub const MIN_ORDER: f64 = 1.8;

/// Max-norm difference between `scaled` and the reference evaluated at
/// `(x / alpha, t / alpha^2)`. Both runs must use the same node count.
pub fn scaling_discrepancy(reference: &FlowTrajectory, scaled: &FlowTrajectory, alpha: f64) -> Result<f64> {
    let (a, b) = (&reference.grid, &scaled.grid);
    if a.kind() != b.kind() || a.n_active() != b.n_active() || ((b.radius() / a.radius()) / alpha - 1.0).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "scaled grid r = {} with {} nodes does not match reference r = {} with {} nodes at alpha = {alpha}",
            b.radius(),
            b.n_active(),
            a.radius(),
            a.n_active()
        )));
    }
    let mut worst = 0.0f64;
    let mut matched = 0;
    for s in &scaled.snapshots {
        let t = s.t / (alpha * alpha);
        let Some(r) = reference.snapshots.iter().find(|r| (r.t - t).abs() <= 1e-9 * t.max(1.0)) else {
            continue;
        };
        matched += 1;
        for (x, y) in s.u.iter().zip(&r.u) {
            worst = worst.max((x - y).abs());
        }
    }
    if matched == 0 {
        return Err(Error::Validation("scaled and reference runs share no snapshot time".into()));
    }
    Ok(worst)
}

/// Max-norm error of `traj` against a closed form `u(x, y, t)`.
pub fn exact_error(traj: &FlowTrajectory, f: impl Fn(f64, f64, f64) -> Result<f64>) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in &traj.snapshots {
        for (n, u) in traj.grid.active_nodes().iter().zip(&s.u) {
            worst = worst.max((u - f(n.x, n.y, s.t)?).abs());
        }
    }
    Ok(worst)
}

/// Observed orders `log2(e_i / e_{i+1})` for errors on grids halving `h`.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Scaling symmetry and convergence order in one verdict.
///
/// Slack is `min(1 - d / (SCALING_FACTOR e), order - MIN_ORDER)`, both
/// dimensionless.
pub fn check_scaling_symmetry(subject: &str, discrepancy: f64, single_error: f64, orders: &[f64]) -> BoundReport {
    let mut slack = Slack::default();
    slack.push(1.0 - discrepancy / (SCALING_FACTOR * single_error), 0, 0.0, 0.0);
    for o in orders {
        slack.push(o - MIN_ORDER, 0, 0.0, 0.0);
    }
    let mut r = BoundReport::measured(BoundId::ScalingSymmetry, subject, slack, 0.0, 0)
        .with_extra("discrepancy", discrepancy)
        .with_extra("single_grid_error", single_error);
    if let Some(o) = orders.iter().copied().reduce(f64::min) {
        r = r.with_extra("min_order", o);
    }
    r
}
