//! The two approximation limits of the construction: boundary ramps
//! `m -> ∞` on a fixed disk, and exhaustion by growing disks (`k -> ∞` inside
//! the unit disk, `R -> ∞` on the plane).
//!
//! Every rung of a ladder is integrated on one shared time grid: the last
//! rung runs adaptively and the others replay its accepted step times, so
//! pointwise comparisons are between solutions of the same discrete scheme.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{build_grid, evaluate, Grid, GridKind, InitialData, InitialForm};
use crate::metrics::{cusp_tail, volume, ConformalState, Region};
use crate::stepper::{evolve, BoundaryForm, BoundarySchedule, FlowTrajectory, StepPolicy, TimeGrid};

/// Times at which ladders are compared.
pub const PROBE_TIMES: [f64; 4] = [0.1, 0.25, 0.5, 1.0];
/// Probe nodes lie within this fraction of the domain radius.
pub const PROBE_FRACTION: f64 = 0.7;
/// Relative v-scale gap below which the ramp limit is declared reached.
pub const LADDER_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    MRamp,
    KExhaust,
    PlaneExhaust,
}

#[derive(Debug, Clone)]
pub struct LadderConfig {
    pub initial: InitialData,
    pub kind: GridKind,
    /// Common spacing of every rung, so node sets nest.
    pub h: f64,
    pub policy: StepPolicy,
    pub t_end: f64,
    /// Snapshot times; probe times inside the horizon are added.
    pub outputs: Vec<f64>,
}

impl LadderConfig {
    fn probe_times(&self) -> Vec<f64> {
        PROBE_TIMES.iter().copied().filter(|&t| t <= self.t_end).collect()
    }

    fn all_outputs(&self) -> Vec<f64> {
        let mut o = self.outputs.clone();
        o.extend(self.probe_times());
        o.retain(|&t| t > 0.0 && t <= self.t_end);
        o.sort_by(|a, b| a.partial_cmp(b).unwrap());
        o.dedup();
        o
    }
}

/// Comparison between two consecutive rungs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungComparison {
    pub lower_param: f64,
    pub upper_param: f64,
    /// sup over the probe set of `|v_a - v_b| / max(v_a, v_b)`.
    pub gap: f64,
    /// min over the probe set of `v_big / v_small - 1`, with the expected
    /// ordering; negative means the ordering is violated there.
    pub probe_margin: f64,
    /// Same as `probe_margin` over every shared node and snapshot.
    pub full_margin: f64,
    pub full_margin_t: f64,
    pub full_margin_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderDiagnostics {
    pub axis: Axis,
    pub params: Vec<f64>,
    pub comparisons: Vec<RungComparison>,
    /// Each gap strictly smaller than the one before.
    pub gaps_decreasing: bool,
    /// First parameter whose gap to its successor is below [`LADDER_TOL`].
    pub converged_at: Option<f64>,
    /// Plane ladders only: fitted area-loss slope per rung.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub volume_fits: Vec<VolumeFit>,
    pub monotonicity_enforced: bool,
}

#[derive(Debug, Clone)]
pub struct LadderRun {
    pub axis: Axis,
    pub params: Vec<f64>,
    pub trajectories: Vec<FlowTrajectory>,
    pub diagnostics: LadderDiagnostics,
}

impl LadderRun {
    /// The rung with the largest parameter.
    pub fn last(&self) -> &FlowTrajectory {
        self.trajectories.last().expect("ladders have at least three rungs")
    }
}

fn check_params(params: &[f64], what: &str) -> Result<()> {
    if params.len() < 3 {
        return Err(Error::Config(format!("{what} ladder needs at least 3 rungs")));
    }
    if params.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!("{what} ladder parameters must increase")));
    }
    Ok(())
}

fn disk_radius(k: f64) -> f64 {
    1.0 - 1.0 / k
}

/// Runs each `(grid, schedule)` pair on the time grid of the last one.
fn run_rungs(
    labels: Vec<String>,
    setups: Vec<(ConformalState, BoundarySchedule)>,
    cfg: &LadderConfig,
) -> Result<Vec<FlowTrajectory>> {
    let outputs = cfg.all_outputs();
    let (top_state, top_sched) = setups.last().unwrap();
    let top = evolve(
        labels.last().unwrap(),
        top_state,
        top_sched,
        cfg.t_end,
        &cfg.policy,
        &TimeGrid::Adaptive,
        &outputs,
    )?;
    let grid = TimeGrid::Replay(top.step_times());
    let n = setups.len();
    let mut rest: Vec<FlowTrajectory> = setups[..n - 1]
        .par_iter()
        .zip(labels[..n - 1].par_iter())
        .map(|((s, sched), label)| evolve(label, s, sched, cfg.t_end, &cfg.policy, &grid, &outputs))
        .collect::<Result<_>>()?;
    rest.push(top);
    Ok(rest)
}

fn setup(cfg: &LadderConfig, radius: f64, form: BoundaryForm) -> Result<(ConformalState, BoundarySchedule)> {
    let grid = Arc::new(build_grid(cfg.kind, radius, cfg.h)?);
    let u0 = evaluate(&cfg.initial, &grid)?;
    let sched = BoundarySchedule::new(form, &u0)?;
    Ok((ConformalState::new(0.0, u0)?, sched))
}

/// Boundary ramps `v0 e^{m t^2 + 2t}` on the disk of radius `1 - 1/k`.
pub fn run_m_ladder(cfg: &LadderConfig, k: f64, m_list: &[f64]) -> Result<LadderRun> {
    check_params(m_list, "m")?;
    if !(k >= 2.0) {
        return Err(Error::Config(format!("k must be >= 2, got {k}")));
    }
    let r = disk_radius(k);
    let setups = m_list
        .iter()
        .map(|&m| setup(cfg, r, BoundaryForm::Ramp { m }))
        .collect::<Result<Vec<_>>>()?;
    let labels = m_list.iter().map(|m| format!("k{k}_m{m}")).collect();
    let trajectories = run_rungs(labels, setups, cfg)?;
    finish(cfg, Axis::MRamp, m_list, trajectories, Order::Increasing, true)
}

/// Domain exhaustion at a fixed ramp `m_final`.
pub fn run_k_ladder(cfg: &LadderConfig, k_list: &[f64], m_final: f64) -> Result<LadderRun> {
    check_params(k_list, "k")?;
    if k_list[0] < 2.0 {
        return Err(Error::Config("k values must be >= 2".into()));
    }
    let setups = k_list
        .iter()
        .map(|&k| setup(cfg, disk_radius(k), BoundaryForm::Ramp { m: m_final }))
        .collect::<Result<Vec<_>>>()?;
    let labels = k_list.iter().map(|k| format!("k{k}_m{m_final}")).collect();
    let trajectories = run_rungs(labels, setups, cfg)?;
    finish(cfg, Axis::KExhaust, k_list, trajectories, Order::Decreasing, true)
}

/// Truncations of the plane to radius `R` with the given boundary data.
///
/// Ordering in `R` is guaranteed for ramp data only; for cusp-matched data it
/// is recorded but not enforced.
pub fn run_plane_exhaust(cfg: &LadderConfig, r_list: &[f64], boundary: BoundaryForm) -> Result<LadderRun> {
    check_params(r_list, "R")?;
    let setups = r_list
        .iter()
        .map(|&r| setup(cfg, r, boundary))
        .collect::<Result<Vec<_>>>()?;
    let labels = r_list.iter().map(|r| format!("R{r}")).collect();
    let trajectories = run_rungs(labels, setups, cfg)?;
    let enforce = matches!(boundary, BoundaryForm::Ramp { .. });
    let mut run = finish(cfg, Axis::PlaneExhaust, r_list, trajectories, Order::Decreasing, enforce)?;
    let tail_c = match boundary {
        BoundaryForm::Cusp { c } => c,
        _ => 0.0,
    };
    if let Some(vol0) = plane_volume(&cfg.initial) {
        run.diagnostics.volume_fits = run
            .trajectories
            .iter()
            .map(|tr| fit_volume(tr, tail_c, vol0))
            .collect::<Result<_>>()?;
    }
    Ok(run)
}

#[derive(Clone, Copy, PartialEq)]
enum Order {
    Increasing,
    Decreasing,
}

fn finish(
    cfg: &LadderConfig,
    axis: Axis,
    params: &[f64],
    trajectories: Vec<FlowTrajectory>,
    order: Order,
    enforce: bool,
) -> Result<LadderRun> {
    let probe_times = cfg.probe_times();
    let mut comparisons = Vec::new();
    for (i, w) in trajectories.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        // a has the smaller parameter; the expected larger one is `big`
        let (big, small) = match order {
            Order::Increasing => (b, a),
            Order::Decreasing => (a, b),
        };
        let c = compare(big, small, &probe_times, params[i], params[i + 1])?;
        if enforce && c.probe_margin < -10.0 * cfg.policy.newton_tol {
            return Err(Error::MonotonicityViolation {
                axis: format!("{axis:?}"),
                lower: params[i],
                upper: params[i + 1],
                margin: c.probe_margin,
                t: c.full_margin_t,
            });
        }
        comparisons.push(c);
    }
    let gaps_decreasing = comparisons.windows(2).all(|w| w[1].gap < w[0].gap);
    let converged_at = comparisons.iter().find(|c| c.gap < LADDER_TOL).map(|c| c.lower_param);
    Ok(LadderRun {
        axis,
        params: params.to_vec(),
        trajectories,
        diagnostics: LadderDiagnostics {
            axis,
            params: params.to_vec(),
            comparisons,
            gaps_decreasing,
            converged_at,
            volume_fits: Vec::new(),
            monotonicity_enforced: enforce,
        },
    })
}

/// Probe and full-domain comparison of `big >= small` on shared nodes.
pub fn compare(
    big: &FlowTrajectory,
    small: &FlowTrajectory,
    probe_times: &[f64],
    lower_param: f64,
    upper_param: f64,
) -> Result<RungComparison> {
    let pairs = big.grid.shared_nodes(&small.grid)?;
    let rho = big.grid.radius().min(small.grid.radius());
    let mut gap = 0.0f64;
    let mut probe_margin = f64::INFINITY;
    let mut full = (f64::INFINITY, 0.0, 0.0);
    for sb in &big.snapshots {
        let Some(ss) = small.snapshot_at(sb.t) else {
            continue;
        };
        let probe_t = probe_times.contains(&sb.t);
        for &(i, j) in &pairs {
            let (ub, us) = (sb.u[i], ss.u[j]);
            // v_big / v_small - 1 without forming either v
            let margin = (2.0 * (ub - us)).exp_m1();
            let r = big.grid.nodes()[i].radius();
            if margin < full.0 {
                full = (margin, sb.t, r);
            }
            if probe_t && r <= PROBE_FRACTION * rho + 1e-12 {
                probe_margin = probe_margin.min(margin);
                let rel = (2.0 * (ub - us).abs()).exp_m1() / (2.0 * (ub - us).abs()).exp();
                gap = gap.max(rel);
            }
        }
    }
    Ok(RungComparison {
        lower_param,
        upper_param,
        gap,
        probe_margin,
        full_margin: full.0,
        full_margin_t: full.1,
        full_margin_radius: full.2,
    })
}

/// Area of the initial metric on the whole plane, if finite and computable.
pub fn plane_volume(initial: &InitialData) -> Option<f64> {
    let InitialForm::Sphere { scale } = initial.form else {
        return None;
    };
    match initial.bump {
        None => Some(4.0 * PI * scale),
        Some(b) if b.center == [0.0, 0.0] => {
            Some(radial_integral(|r| initial.v_at(r, 0.0).unwrap_or(0.0)))
        }
        // TODO: 2D quadrature for off-centre bumps on the plane
        Some(_) => None,
    }
}

/// `∫ f 2πr dr` over `[0, 1e6]`, Simpson in `s = ln(1 + r)` so the core and
/// the `r^-4` tail are both resolved.
fn radial_integral(v: impl Fn(f64) -> f64) -> f64 {
    let n = 20000;
    let s_max = (1e6f64 + 1.0).ln();
    let hs = s_max / n as f64;
    let f = |s: f64| {
        let r = s.exp_m1();
        v(r) * 2.0 * PI * r * s.exp()
    };
    let mut acc = f(0.0) + f(s_max);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * hs);
    }
    acc * hs / 3.0
}

/// Least-squares line through total area (grid plus cusp tail) over
/// `t in [0.1 T, 0.6 T]`, `T = vol0 / 4π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFit {
    pub radius: f64,
    pub vol0: f64,
    pub t_expected: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root of the fitted line.
    pub t_estimate: f64,
    pub points: usize,
}

impl VolumeFit {
    pub fn slope_deviation(&self) -> f64 {
        (self.slope / (-4.0 * PI) - 1.0).abs()
    }

    pub fn extinction_deviation(&self) -> f64 {
        (self.t_estimate / self.t_expected - 1.0).abs()
    }
}

/// `(t, grid area + tail)` for every snapshot.
pub fn volume_series(tr: &FlowTrajectory, tail_c: f64) -> Result<Vec<(f64, f64)>> {
    let r = tr.grid.radius();
    (0..tr.snapshots.len())
        .map(|i| {
            let s = tr.state(i)?;
            let tail = if tail_c > 0.0 { cusp_tail(r, s.t, tail_c) } else { 0.0 };
            Ok((s.t, volume(&s, Region::All) + tail))
        })
        .collect()
}

pub fn fit_volume(tr: &FlowTrajectory, tail_c: f64, vol0: f64) -> Result<VolumeFit> {
    let t_expected = vol0 / (4.0 * PI);
    let (lo, hi) = (0.1 * t_expected, 0.6 * t_expected);
    let pts: Vec<(f64, f64)> = volume_series(tr, tail_c)?
        .into_iter()
        .filter(|&(t, _)| t >= lo - 1e-12 && t <= hi + 1e-12)
        .collect();
    if pts.len() < 3 {
        return Err(Error::Config(format!(
            "volume fit needs >= 3 snapshots in [{lo}, {hi}], found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stv: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let slope = stv / stt;
    let intercept = mv - slope * mt;
    Ok(VolumeFit {
        radius: tr.grid.radius(),
        vol0,
        t_expected,
        slope,
        intercept,
        t_estimate: -intercept / slope,
        points: pts.len(),
    })
}

/// Grid shared by all rungs with the given radius; exposed for callers that
/// need a companion run on a rung's grid.
pub fn rung_grid(cfg: &LadderConfig, radius: f64) -> Result<Arc<Grid>> {
    Ok(Arc::new(build_grid(cfg.kind, radius, cfg.h)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(form: InitialForm, h: f64, t_end: f64) -> LadderConfig {
        LadderConfig {
            initial: form.into(),
            kind: GridKind::Radial1d,
            h,
            policy: StepPolicy::default(),
            t_end,
            outputs: vec![],
        }
    }

    #[test]
    fn m_ladder_is_monotone_and_shares_initial_snapshot() {
        let c = cfg(InitialForm::HyperbolicDisk, 1.0 / 32.0, 0.5);
        let run = run_m_ladder(&c, 4.0, &[0.0, 4.0, 16.0]).unwrap();
        let first: Vec<_> = run.trajectories.iter().map(|t| t.snapshots[0].u.clone()).collect();
        assert!(first.windows(2).all(|w| w[0] == w[1]));
        for cmp in &run.diagnostics.comparisons {
            assert!(cmp.full_margin >= -1e-9, "{cmp:?}");
        }
        let st = run.trajectories.iter().map(|t| t.step_times()).collect::<Vec<_>>();
        assert!(st.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn k_ladder_decreases() {
        let c = cfg(InitialForm::Constant { value: 0.0 }, 1.0 / 32.0, 0.25);
        let run = run_k_ladder(&c, &[2.0, 4.0, 8.0], 16.0).unwrap();
        for cmp in &run.diagnostics.comparisons {
            assert!(cmp.full_margin >= -1e-9, "{cmp:?}");
        }
    }

    #[test]
    fn rejects_short_or_unsorted_ladders() {
        let c = cfg(InitialForm::HyperbolicDisk, 1.0 / 32.0, 0.5);
        assert!(run_m_ladder(&c, 4.0, &[0.0, 4.0]).is_err());
        assert!(run_m_ladder(&c, 4.0, &[0.0, 16.0, 4.0]).is_err());
    }

    #[test]
    fn flat_plane_is_static() {
        let mut c = cfg(InitialForm::Constant { value: 0.0 }, 0.5, 0.5);
        c.outputs = vec![0.25];
        let run = run_plane_exhaust(&c, &[4.0, 6.0, 8.0], BoundaryForm::Frozen).unwrap();
        for tr in &run.trajectories {
            let v = volume_series(tr, 0.0).unwrap();
            assert!(v.iter().all(|p| (p.1 - v[0].1).abs() < 1e-12));
        }
        assert!(run.diagnostics.volume_fits.is_empty());
    }

    #[test]
    fn sphere_plane_volume() {
        let v = plane_volume(&InitialForm::Sphere { scale: 2.0 }.into()).unwrap();
        assert!((v - 8.0 * PI).abs() < 1e-12);
        assert!(plane_volume(&InitialForm::Constant { value: 0.0 }.into()).is_none());
        let flat = radial_integral(|r| 4.0 / (1.0 + r * r).powi(2));
        assert!((flat - 4.0 * PI).abs() < 1e-5, "{flat}");
    }
}
