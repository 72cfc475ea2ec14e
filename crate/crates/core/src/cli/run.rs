use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{build_grid, evaluate, Grid, InitialData, ScalarField, Support};
use crate::ladder::{
    fit_volume, plane_volume, run_k_ladder, LadderRun, run_m_ladder, run_plane_exhaust, LadderConfig, LadderDiagnostics,
};
use crate::metrics::ConformalState;
use crate::operators::first_eigenpair;
use crate::oracle::{
    calibrate, check_aronson_benilan, check_comparison, check_conformal, check_eigen_barrier, check_k_lower,
    check_k_upper_neg, check_k_upper_pos, check_k_upper_zero, check_scaling_symmetry, check_volume_law,
    exact_error, observed_orders, scaling_discrepancy, BoundId, BoundReport, Calibration, ConformalBound, Verdict,
};
use crate::stepper::{evolve, BoundaryForm, BoundarySchedule, FlowTrajectory, StepPolicy, TimeGrid};

use super::scenario::{LadderSpec, Scenario, ScalingSpec, Validated};
use super::store::{save_trajectory, to_json, write_file};

pub const RUN_RECORD: &str = "run.json";
pub const SCENARIO_COPY: &str = "scenario.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRef {
    pub dir: String,
    pub header_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub id: BoundId,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_slack: Option<f64>,
}

/// Everything `verify` needs besides the trajectories themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub fingerprint: String,
    pub h: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    /// Discretization tolerance `c1 h^2 + c2 dt_max`.
    pub eps: f64,
    pub calibration: Calibration,
    /// Role -> stored trajectory. Roles: `primary`, `companion`,
    /// `plane/<i>`, `scaling/scaled`, `scaling/<i>`, `ladder/<label>`.
    pub trajectories: BTreeMap<String, TrajectoryRef>,
    pub ladders: Vec<LadderDiagnostics>,
    pub reports: Vec<ReportSummary>,
}

/// Trajectories the checks read.
#[derive(Debug, Clone)]
pub struct CheckInputs {
    pub primary: FlowTrajectory,
    pub companion: Option<FlowTrajectory>,
    /// Plane truncations ordered by radius.
    pub plane: Vec<FlowTrajectory>,
    pub scaled: Option<FlowTrajectory>,
    pub refinements: Vec<FlowTrajectory>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub record: RunRecord,
    pub reports: Vec<BoundReport>,
}

impl Outcome {
    pub fn failures(&self) -> Vec<BoundId> {
        self.reports.iter().filter(|r| !r.passed()).map(|r| r.id).collect()
    }
}

fn initial_state(initial: &InitialData, grid: &Arc<Grid>) -> Result<ConformalState> {
    ConformalState::new(0.0, evaluate(initial, grid)?)
}

fn ladder_config(v: &Validated) -> LadderConfig {
    LadderConfig {
        initial: v.initial,
        kind: v.scenario.domain.kind,
        h: v.h,
        policy: v.policy,
        t_end: v.scenario.t_end,
        outputs: v.outputs.clone(),
    }
}

/// Frozen-boundary flow from the same data on the same grid and time grid.
fn companion(v: &Validated, primary: &FlowTrajectory) -> Result<Option<FlowTrajectory>> {
    if matches!(primary.boundary, Some(BoundaryForm::Frozen) | Some(BoundaryForm::None) | None) {
        return Ok(None);
    }
    let s0 = initial_state(&v.initial, &primary.grid)?;
    let sched = BoundarySchedule::new(BoundaryForm::Frozen, &s0.u)?;
    let tr = evolve(
        &format!("{}_frozen", primary.label),
        &s0,
        &sched,
        v.scenario.t_end,
        &v.policy,
        &TimeGrid::Replay(primary.step_times()),
        &primary.times(),
    )?;
    Ok(Some(tr))
}

fn hyperbolic_curvature(b: Option<BoundaryForm>) -> f64 {
    match b {
        Some(BoundaryForm::HyperbolicGrowth { curvature }) => curvature,
        _ => 1.0,
    }
}

/// The rescaled companion and the refinement runs.
fn scaling_runs(v: &Validated, sc: &ScalingSpec, primary: &FlowTrajectory) -> Result<(FlowTrajectory, Vec<FlowTrajectory>)> {
    let a = sc.alpha;
    let a2 = a * a;
    let radius = primary.grid.radius();
    let kappa = hyperbolic_curvature(v.scenario.boundary);
    let initial = v.initial;
    let scaled = || -> Result<FlowTrajectory> {
        let grid = Arc::new(build_grid(primary.grid.kind(), a * radius, a * v.h)?);
        let u = grid
            .active_nodes()
            .iter()
            .map(|n| initial.u_at(n.x / a, n.y / a))
            .collect::<Result<Vec<_>>>()?;
        let s0 = ConformalState::new(0.0, ScalarField::new(grid.clone(), Support::Active, u)?)?;
        let sched = BoundarySchedule::new(BoundaryForm::HyperbolicGrowth { curvature: kappa / a2 }, &s0.u)?;
        let policy = StepPolicy {
            dt0: Some(a2 * v.policy.dt0.unwrap_or(v.h * v.h)),
            dt_min: a2 * v.policy.dt_min,
            dt_max: a2 * v.policy.dt_max,
            ..v.policy
        };
        let outputs: Vec<f64> = v.outputs.iter().map(|t| a2 * t).collect();
        evolve("scaled", &s0, &sched, a2 * v.scenario.t_end, &policy, &TimeGrid::Adaptive, &outputs)
    };
    let refine = || -> Result<Vec<FlowTrajectory>> {
        sc.n_list
            .par_iter()
            .map(|&n| {
                let h = radius / n as f64;
                let grid = Arc::new(build_grid(primary.grid.kind(), radius, h)?);
                let s0 = initial_state(&initial, &grid)?;
                let sched = BoundarySchedule::new(BoundaryForm::HyperbolicGrowth { curvature: kappa }, &s0.u)?;
                let dt_max = sc.dt_factor * h * h;
                let policy = StepPolicy {
                    dt0: None,
                    dt_min: v.policy.dt_min.min(dt_max),
                    dt_max,
                    ..v.policy
                };
                let every = v.scenario.stepping.snapshot_every;
                let k = (sc.t_end / every + 1e-9).floor() as usize;
                let outputs: Vec<f64> = (1..=k).map(|i| i as f64 * every).collect();
                evolve(&format!("refine_n{n}"), &s0, &sched, sc.t_end, &policy, &TimeGrid::Adaptive, &outputs)
            })
            .collect()
    };
    let (s, r) = rayon::join(scaled, refine);
    Ok((s?, r?))
}

struct Simulation {
    inputs: CheckInputs,
    ladders: Vec<LadderRun>,
}

fn simulate(v: &Validated) -> Result<Simulation> {
    let sc = &v.scenario;
    let mut ladders = Vec::new();
    let mut plane = Vec::new();
    let primary = match &sc.ladder {
        LadderSpec::None => {
            let r = sc.largest_radius()?;
            let grid = Arc::new(build_grid(sc.domain.kind, r, v.h)?);
            let s0 = initial_state(&v.initial, &grid)?;
            let sched = BoundarySchedule::new(sc.boundary.expect("validated"), &s0.u)?;
            evolve(&sc.name, &s0, &sched, sc.t_end, &v.policy, &TimeGrid::Adaptive, &v.outputs)?
        }
        LadderSpec::M { k, m_list } => {
            let run = run_m_ladder(&ladder_config(v), *k, m_list)?;
            let p = run.last().clone();
            ladders.push(run);
            p
        }
        LadderSpec::K { k_list, m_final } => {
            let run = run_k_ladder(&ladder_config(v), k_list, *m_final)?;
            let p = run.last().clone();
            ladders.push(run);
            p
        }
        LadderSpec::Mk { k_list, m_list } => {
            let cfg = ladder_config(v);
            let mrun = run_m_ladder(&cfg, *k_list.last().unwrap(), m_list)?;
            let krun = run_k_ladder(&cfg, k_list, *m_list.last().unwrap())?;
            let p = krun.last().clone();
            ladders.push(mrun);
            ladders.push(krun);
            p
        }
        LadderSpec::Plane { r_list } => {
            let run = run_plane_exhaust(&ladder_config(v), r_list, sc.boundary.expect("validated"))?;
            plane = run.trajectories.clone();
            let p = run.last().clone();
            ladders.push(run);
            p
        }
    };
    let needs_companion = v.checks.contains(&BoundId::Comparison);
    let needs_scaling = v.checks.contains(&BoundId::ScalingSymmetry) && sc.scaling.is_some();
    let (comp, scaling) = rayon::join(
        || if needs_companion { companion(v, &primary) } else { Ok(None) },
        || match (&sc.scaling, needs_scaling) {
            (Some(s), true) => scaling_runs(v, s, &primary).map(Some),
            _ => Ok(None),
        },
    );
    let (scaled, refinements) = match scaling? {
        Some((s, r)) => (Some(s), r),
        None => (None, Vec::new()),
    };
    Ok(Simulation {
        inputs: CheckInputs {
            primary,
            companion: comp?,
            plane,
            scaled,
            refinements,
        },
        ladders,
    })
}

fn cusp_c(b: Option<BoundaryForm>) -> f64 {
    match b {
        Some(BoundaryForm::Cusp { c }) => c,
        _ => 0.0,
    }
}

fn one_report(id: BoundId, v: &Validated, eps: f64, inp: &CheckInputs) -> Result<BoundReport> {
    let p = &inp.primary;
    let sc = &v.scenario;
    let is_plane = matches!(sc.ladder, LadderSpec::Plane { .. });
    match id {
        BoundId::KLower => check_k_lower(p, eps),
        BoundId::AbEstimate => check_aronson_benilan(p, eps),
        BoundId::KUpperNeg => check_k_upper_neg(p, eps),
        BoundId::KUpperPos => check_k_upper_pos(p, eps),
        BoundId::KUpperZero => check_k_upper_zero(p, eps),
        BoundId::ULowerHyp => check_conformal(
            p,
            ConformalBound::LowerHyp {
                t_min: sc.oracle.completeness_t_min,
            },
            eps,
        ),
        BoundId::UUpperHyp => check_conformal(p, ConformalBound::UpperHyp, eps),
        BoundId::UVsU0Neg => check_conformal(p, ConformalBound::VsU0Neg, eps),
        BoundId::UVsU0Pos => check_conformal(p, ConformalBound::VsU0Pos, eps),
        BoundId::UVsU0Zero => check_conformal(p, ConformalBound::VsU0Zero, eps),
        BoundId::ULowerCusp => check_conformal(p, ConformalBound::LowerCusp { r0: sc.oracle.cusp_r0 }, eps),
        BoundId::VolLaw => {
            if !is_plane {
                return Ok(BoundReport::skipped(id, &p.label, 0.0, "not a plane scenario"));
            }
            let Some(vol0) = plane_volume(&v.initial) else {
                return Ok(BoundReport::skipped(id, &p.label, 0.0, "initial area is infinite"));
            };
            let c = cusp_c(sc.boundary);
            let fits = inp.plane.iter().map(|t| fit_volume(t, c, vol0)).collect::<Result<Vec<_>>>()?;
            Ok(check_volume_law(&p.label, &fits))
        }
        BoundId::EigenBarrier => {
            if is_plane {
                return Ok(BoundReport::skipped(id, &p.label, 0.0, "plane truncation, not a disk flow"));
            }
            let pair = first_eigenpair(&p.grid)?;
            check_eigen_barrier(p, &pair)
        }
        BoundId::Comparison => match &inp.companion {
            Some(c) => check_comparison(p, c, v.policy.newton_tol),
            None => Ok(BoundReport::skipped(
                id,
                &p.label,
                0.0,
                "boundary data are frozen or free; there is no smaller companion",
            )),
        },
        BoundId::ScalingSymmetry => {
            let (Some(sc_spec), Some(scaled)) = (&sc.scaling, &inp.scaled) else {
                return Ok(BoundReport::skipped(id, &p.label, 0.0, "no [scaling] section"));
            };
            let kappa = hyperbolic_curvature(sc.boundary);
            let init = v.initial;
            let exact = |x: f64, y: f64, t: f64| Ok(init.u_at(x, y)? + 0.5 * (2.0 * kappa * t).ln_1p());
            let d = scaling_discrepancy(p, scaled, sc_spec.alpha)?;
            let e = exact_error(p, exact)?;
            let errs = inp
                .refinements
                .iter()
                .map(|t| exact_error(t, exact))
                .collect::<Result<Vec<_>>>()?;
            let mut r = check_scaling_symmetry(&p.label, d, e, &observed_orders(&errs));
            for (n, err) in sc_spec.n_list.iter().zip(&errs) {
                r = r.with_extra(&format!("error_n{n}"), *err);
            }
            Ok(r.with_extra("alpha", sc_spec.alpha))
        }
    }
}

/// Runs the requested checks concurrently, returned in registry order.
pub fn compute_reports(v: &Validated, eps: f64, inputs: &CheckInputs, ids: &[BoundId]) -> Result<Vec<BoundReport>> {
    ids.par_iter().map(|&id| one_report(id, v, eps, inputs)).collect()
}

pub fn report_path(dir: &Path, id: BoundId) -> PathBuf {
    dir.join("reports").join(format!("{id}.json"))
}

pub fn write_reports(dir: &Path, reports: &[BoundReport]) -> Result<()> {
    for r in reports {
        write_file(&report_path(dir, r.id), &to_json(r)?)?;
    }
    Ok(())
}

fn summaries(reports: &[BoundReport]) -> Vec<ReportSummary> {
    reports
        .iter()
        .map(|r| ReportSummary {
            id: r.id,
            verdict: r.verdict,
            worst_slack: r.worst_slack,
        })
        .collect()
}

/// Simulates a scenario, checks it and writes every artifact under the
/// output directory (`out`, else the scenario's `output`, else `runs/<name>`).
pub fn run(scenario: &Scenario, out: Option<&Path>) -> Result<Outcome> {
    let v = scenario.validate()?;
    let dir = match (out, &scenario.output) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => PathBuf::from("runs").join(&scenario.name),
    };
    let (cal, sim) = rayon::join(calibrate, || simulate(&v));
    let calibration = cal?;
    let sim = sim?;
    let eps = calibration.eps(v.h, v.policy.dt_max);
    let reports = compute_reports(&v, eps, &sim.inputs, &v.checks)?;

    // single writer for the whole directory
    let mut trajectories = BTreeMap::new();
    let mut save = |role: String, tr: &FlowTrajectory| -> Result<()> {
        let rel = format!("trajectories/{}", tr.label);
        let sha = save_trajectory(&dir.join(&rel), tr, &v.fingerprint)?;
        trajectories.insert(role, TrajectoryRef { dir: rel, header_sha256: sha });
        Ok(())
    };
    let inp = &sim.inputs;
    save("primary".into(), &inp.primary)?;
    if let Some(c) = &inp.companion {
        save("companion".into(), c)?;
    }
    for (i, t) in inp.plane.iter().enumerate() {
        save(format!("plane/{i}"), t)?;
    }
    if let Some(s) = &inp.scaled {
        save("scaling/scaled".into(), s)?;
    }
    for (i, t) in inp.refinements.iter().enumerate() {
        save(format!("scaling/{i}"), t)?;
    }
    for l in &sim.ladders {
        for t in &l.trajectories {
            save(format!("ladder/{}", t.label), t)?;
        }
    }
    let record = RunRecord {
        name: scenario.name.clone(),
        fingerprint: v.fingerprint.clone(),
        h: v.h,
        dt_max: v.policy.dt_max,
        newton_tol: v.policy.newton_tol,
        eps,
        calibration,
        trajectories,
        ladders: sim.ladders.iter().map(|l| l.diagnostics.clone()).collect(),
        reports: summaries(&reports),
    };
    let mut canonical = scenario.clone();
    canonical.output = None;
    write_file(&dir.join(SCENARIO_COPY), &to_json(&canonical)?)?;
    write_file(&dir.join(RUN_RECORD), &to_json(&record)?)?;
    write_reports(&dir, &reports)?;
    Ok(Outcome { dir, record, reports })
}

/// Refuses a scenario whose fingerprint is not the recorded one.
pub(crate) fn check_fingerprint(v: &Validated, record: &RunRecord, path: &Path) -> Result<()> {
    if v.fingerprint != record.fingerprint {
        return Err(Error::FingerprintMismatch {
            path: path.to_path_buf(),
            detail: format!("scenario hashes to {}, run record says {}", v.fingerprint, record.fingerprint),
        });
    }
    Ok(())
}
