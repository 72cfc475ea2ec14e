//! Backward-Euler Newton integration of `u_t = e^{-2u} Δu` with
//! time-dependent Dirichlet data.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField, Support};
use crate::metrics::ConformalState;
use crate::operators::{apply_interior, assemble, Closure};

/// Boundary data as a function of time, in terms of the initial boundary
/// values `v0|∂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum BoundaryForm {
    /// `v = v0`.
    Frozen,
    /// `v = v0 e^{m t^2 + 2t}`.
    Ramp { m: f64 },
    /// `v = v0 (1 + 2κt)`, the exact data for initial metrics of constant
    /// curvature `-κ`.
    HyperbolicGrowth {
        #[serde(default = "one")]
        curvature: f64,
    },
    /// `v = max(v0, C t / (R^2 log^2 R))` on a truncation of the plane.
    Cusp { c: f64 },
    /// Zero radial flux; the boundary node is solved for.
    None,
}

impl BoundaryForm {
    pub fn closure(&self) -> Closure {
        match self {
            BoundaryForm::None => Closure::Mirror,
            _ => Closure::Dirichlet,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundaryForm::Ramp { m } if !(m >= 0.0 && m.is_finite()) => {
                Err(Error::Config(format!("ramp needs m >= 0, got {m}")))
            }
            BoundaryForm::Cusp { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::Config(format!("cusp boundary needs C > 0, got {c}")))
            }
            BoundaryForm::HyperbolicGrowth { curvature } if !(curvature > 0.0 && curvature.is_finite()) => {
                Err(Error::Config(format!("hyperbolic growth needs curvature > 0, got {curvature}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundarySchedule {
    pub form: BoundaryForm,
    base: Vec<f64>,
    radii: Vec<f64>,
}

impl BoundarySchedule {
    /// `u0` supplies the base boundary values.
    pub fn new(form: BoundaryForm, u0: &ScalarField) -> Result<Self> {
        form.validate()?;
        let grid = u0.grid();
        form.closure().check(grid)?;
        if u0.support() != Support::Active {
            return Err(Error::GridMismatch("schedule needs boundary values".into()));
        }
        let radii: Vec<f64> = grid.boundary_nodes().iter().map(|n| n.radius()).collect();
        if let BoundaryForm::Cusp { .. } = form {
            if radii.iter().any(|&r| r <= 1.0) {
                return Err(Error::Config("cusp boundary data need R > 1".into()));
            }
        }
        Ok(Self {
            form,
            base: u0.boundary().to_vec(),
            radii,
        })
    }

    /// Boundary `u = ½ log v` at time `t`.
    pub fn u_at(&self, t: f64) -> Vec<f64> {
        match self.form {
            BoundaryForm::Frozen | BoundaryForm::None => self.base.clone(),
            // computed in log space so large m t^2 cannot overflow
            BoundaryForm::Ramp { m } => self.base.iter().map(|u| u + 0.5 * (m * t * t + 2.0 * t)).collect(),
            BoundaryForm::HyperbolicGrowth { curvature } => {
                let g = 0.5 * (2.0 * curvature * t).ln_1p();
                self.base.iter().map(|u| u + g).collect()
            }
            BoundaryForm::Cusp { c } => self
                .base
                .iter()
                .zip(&self.radii)
                .map(|(u, &r)| {
                    let l = r.ln();
                    let cusp = c * t / (r * r * l * l);
                    if cusp > 0.0 {
                        u.max(0.5 * cusp.ln())
                    } else {
                        *u
                    }
                })
                .collect(),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Newton and step-size controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    /// First step; `None` means `h^2`.
    pub dt0: Option<f64>,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub budget: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            dt0: None,
            dt_min: 1e-12,
            dt_max: 0.01,
            newton_tol: 1e-10,
            budget: 30,
        }
    }
}

/// A step counts as easy at or below this many Newton iterations.
pub const EASY_ITERATIONS: usize = 4;
/// Consecutive easy steps before the step doubles.
pub const EASY_STREAK: usize = 5;

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_max >= self.dt_min
            && self.dt0.map_or(true, |d| d >= self.dt_min && d <= self.dt_max)
            && self.newton_tol > 0.0
            && self.budget > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent stepping policy {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Time reached by the step.
    pub t: f64,
    pub dt: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Active-node values of `u`.
    pub u: Vec<f64>,
    pub newton_iterations: usize,
    pub newton_residual: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub label: String,
    pub grid: Arc<Grid>,
    pub boundary: Option<BoundaryForm>,
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    /// Failed step attempts that were retried with a smaller step.
    pub rejected: usize,
    pub fingerprint: String,
}

impl FlowTrajectory {
    pub fn state(&self, i: usize) -> Result<ConformalState> {
        let s = &self.snapshots[i];
        ConformalState::new(s.t, ScalarField::new(self.grid.clone(), Support::Active, s.u.clone())?)
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Times of every accepted step, for replaying on a companion run.
    pub fn step_times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.t).collect()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }

    /// Samples a closed-form flow `u(x, y, t)` at the given times.
    pub fn sample_exact(
        label: &str,
        grid: &Arc<Grid>,
        times: &[f64],
        f: impl Fn(f64, f64, f64) -> Result<f64>,
    ) -> Result<Self> {
        let mut snapshots = Vec::with_capacity(times.len());
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Config("sample times must increase".into()));
            }
        }
        for &t in times {
            let u = grid
                .active_nodes()
                .iter()
                .map(|n| f(n.x, n.y, t))
                .collect::<Result<Vec<_>>>()?;
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("closed form not finite at t = {t}")));
            }
            snapshots.push(Snapshot {
                t,
                u,
                newton_iterations: 0,
                newton_residual: 0.0,
            });
        }
        Ok(Self {
            label: label.to_string(),
            grid: grid.clone(),
            boundary: None,
            snapshots,
            steps: Vec::new(),
            rejected: 0,
            fingerprint: String::new(),
        })
    }
}

/// Per-trajectory scratch buffers.
struct Workspace {
    full: Vec<f64>,
    trial: Vec<f64>,
    lap: Vec<f64>,
    res: Vec<f64>,
    scale: Vec<f64>,
    shift: Vec<f64>,
}

impl Workspace {
    fn new(grid: &Grid) -> Self {
        let n = grid.n_active();
        Self {
            full: vec![0.0; n],
            trial: vec![0.0; n],
            lap: vec![0.0; n],
            res: vec![0.0; n],
            scale: vec![0.0; n],
            shift: vec![0.0; n],
        }
    }
}

/// `F = u+ - u - dt e^{-2u+} Δ_h u+` over the unknowns; returns the max norm,
/// or infinity if anything overflowed.
fn residual(grid: &Grid, closure: Closure, prev: &[f64], next: &[f64], dt: f64, lap: &mut [f64], res: &mut [f64]) -> f64 {
    let n = closure.unknowns(grid);
    apply_interior(grid, closure, next, lap);
    let mut m = 0.0f64;
    for i in 0..n {
        let r = next[i] - prev[i] - dt * (-2.0 * next[i]).exp() * lap[i];
        res[i] = r;
        if !r.is_finite() {
            return f64::INFINITY;
        }
        m = m.max(r.abs());
    }
    m
}

fn newton(
    grid: &Grid,
    closure: Closure,
    prev: &[f64],
    dt: f64,
    policy: &StepPolicy,
    ws: &mut Workspace,
) -> std::result::Result<NewtonStats, f64> {
    let n = closure.unknowns(grid);
    let mut res = residual(grid, closure, prev, &ws.full, dt, &mut ws.lap, &mut ws.res);
    for it in 0..=policy.budget {
        if res <= policy.newton_tol {
            return Ok(NewtonStats {
                iterations: it,
                residual: res,
            });
        }
        if it == policy.budget || !res.is_finite() {
            break;
        }
        for i in 0..n {
            let e = (-2.0 * ws.full[i]).exp();
            ws.scale[i] = -dt * e;
            ws.shift[i] = 1.0 + 2.0 * dt * e * ws.lap[i];
        }
        let lu = match assemble(grid, closure, &ws.scale, &ws.shift).factor() {
            Ok(lu) => lu,
            Err(_) => return Err(res),
        };
        let mut d = ws.res[..n].to_vec();
        lu.solve_in_place(&mut d);
        // Where e^{-2u} is large the residual has a rounding floor above
        // newton_tol; a correction this small means u itself has converged.
        if d.iter().fold(0.0f64, |m, x| m.max(x.abs())) <= policy.newton_tol {
            for i in 0..n {
                ws.full[i] -= d[i];
            }
            let r = residual(grid, closure, prev, &ws.full, dt, &mut ws.lap, &mut ws.res);
            return Ok(NewtonStats {
                iterations: it + 1,
                residual: r,
            });
        }

        // backtracking on the max-norm residual; full steps can overshoot
        // into e^{-2u} overflow
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            ws.trial.copy_from_slice(&ws.full);
            for i in 0..n {
                ws.trial[i] -= lambda * d[i];
            }
            let r = residual(grid, closure, prev, &ws.trial, dt, &mut ws.lap, &mut ws.res);
            if r < (1.0 - 1e-4 * lambda) * res {
                std::mem::swap(&mut ws.full, &mut ws.trial);
                res = r;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(res);
        }
    }
    Err(res)
}

/// One backward-Euler step of length `dt`, boundary data taken at `t + dt`.
pub fn step(
    state: &ConformalState,
    dt: f64,
    schedule: &BoundarySchedule,
    policy: &StepPolicy,
) -> Result<(ConformalState, NewtonStats)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("step needs dt > 0, got {dt}")));
    }
    let grid = state.grid().clone();
    let mut ws = Workspace::new(&grid);
    let (stats, u) = step_raw(&grid, state.u.values(), state.t, dt, schedule, policy, &mut ws)?;
    Ok((ConformalState::new(state.t + dt, ScalarField::new(grid, Support::Active, u)?)?, stats))
}

fn step_raw(
    grid: &Grid,
    prev: &[f64],
    t: f64,
    dt: f64,
    schedule: &BoundarySchedule,
    policy: &StepPolicy,
    ws: &mut Workspace,
) -> Result<(NewtonStats, Vec<f64>)> {
    let closure = schedule.form.closure();
    ws.full.copy_from_slice(prev);
    if closure == Closure::Dirichlet {
        let ni = grid.n_interior();
        ws.full[ni..].copy_from_slice(&schedule.u_at(t + dt));
    }
    match newton(grid, closure, prev, dt, policy, ws) {
        Ok(stats) => Ok((stats, ws.full.clone())),
        Err(residual) => Err(Error::NewtonDivergence { t, dt, residual }),
    }
}

/// How the time axis of a run is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeGrid {
    /// Start at `dt0`, halve on failure, double after an easy streak.
    Adaptive,
    /// Reach exactly these times, in order; a failing interval is bisected.
    Replay(Vec<f64>),
}

/// Integrates from `initial` to `t_end`, storing snapshots at `t = 0` and at
/// each time in `outputs` (which every step sequence lands on exactly).
pub fn evolve(
    label: &str,
    initial: &ConformalState,
    schedule: &BoundarySchedule,
    t_end: f64,
    policy: &StepPolicy,
    time_grid: &TimeGrid,
    outputs: &[f64],
) -> Result<FlowTrajectory> {
    policy.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
    }
    let grid = initial.grid().clone();
    let mut outs: Vec<f64> = outputs.iter().copied().filter(|&t| t > initial.t && t <= t_end).collect();
    outs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    outs.dedup();
    if outs.last() != Some(&t_end) {
        outs.push(t_end);
    }

    let mut traj = FlowTrajectory {
        label: label.to_string(),
        grid: grid.clone(),
        boundary: Some(schedule.form),
        snapshots: vec![Snapshot {
            t: initial.t,
            u: initial.u.values().to_vec(),
            newton_iterations: 0,
            newton_residual: 0.0,
        }],
        steps: Vec::new(),
        rejected: 0,
        fingerprint: String::new(),
    };
    let mut ws = Workspace::new(&grid);
    let mut u = initial.u.values().to_vec();
    let mut t = initial.t;
    let mut next_out = 0;

    let accept = |traj: &mut FlowTrajectory, u: &mut Vec<f64>, t: &mut f64, tn: f64, stats: NewtonStats, un: Vec<f64>, next_out: &mut usize| {
        traj.steps.push(StepRecord {
            t: tn,
            dt: tn - *t,
            iterations: stats.iterations,
            residual: stats.residual,
        });
        *u = un;
        *t = tn;
        if *next_out < outs.len() && tn == outs[*next_out] {
            traj.snapshots.push(Snapshot {
                t: tn,
                u: u.clone(),
                newton_iterations: stats.iterations,
                newton_residual: stats.residual,
            });
            *next_out += 1;
        }
    };

    match time_grid {
        TimeGrid::Adaptive => {
            let mut dt = policy.dt0.unwrap_or(grid.h() * grid.h()).clamp(policy.dt_min, policy.dt_max);
            let mut easy = 0;
            while next_out < outs.len() {
                let target = outs[next_out];
                let (tn, clipped) = if t + dt >= target - 1e-12 * target.max(1.0) {
                    (target, true)
                } else {
                    (t + dt, false)
                };
                let d = tn - t;
                match step_raw(&grid, &u, t, d, schedule, policy, &mut ws) {
                    Ok((stats, un)) => {
                        let iters = stats.iterations;
                        accept(&mut traj, &mut u, &mut t, tn, stats, un, &mut next_out);
                        if iters <= EASY_ITERATIONS {
                            easy += 1;
                            if easy >= EASY_STREAK && !clipped {
                                dt = (2.0 * dt).min(policy.dt_max);
                                easy = 0;
                            }
                        } else {
                            easy = 0;
                        }
                    }
                    Err(Error::NewtonDivergence { .. }) => {
                        traj.rejected += 1;
                        easy = 0;
                        dt = 0.5 * d;
                        if dt < policy.dt_min {
                            return Err(Error::StepUnderflow {
                                t,
                                dt_min: policy.dt_min,
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        TimeGrid::Replay(times) => {
            let t0 = t;
            for &target in times.iter().filter(|&&x| x > t0 && x <= t_end) {
                // bisect the interval until every piece converges
                let mut pending = vec![target];
                while let Some(&tn) = pending.last() {
                    match step_raw(&grid, &u, t, tn - t, schedule, policy, &mut ws) {
                        Ok((stats, un)) => {
                            accept(&mut traj, &mut u, &mut t, tn, stats, un, &mut next_out);
                            pending.pop();
                        }
                        Err(Error::NewtonDivergence { .. }) => {
                            traj.rejected += 1;
                            let mid = 0.5 * (t + tn);
                            if tn - mid < policy.dt_min {
                                return Err(Error::StepUnderflow {
                                    t,
                                    dt_min: policy.dt_min,
                                });
                            }
                            pending.push(mid);
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            if next_out < outs.len() {
                return Err(Error::Config(format!(
                    "replayed time grid misses output time {}",
                    outs[next_out]
                )));
            }
        }
    }
    Ok(traj)
}
