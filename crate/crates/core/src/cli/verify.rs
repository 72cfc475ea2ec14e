use std::path::Path;

use crate::error::{Error, Result};
use crate::oracle::{BoundId, BoundReport};

use super::run::{check_fingerprint, compute_reports, write_reports, CheckInputs, RunRecord, RUN_RECORD, SCENARIO_COPY};
use super::scenario::Scenario;
use super::store::{from_json, load_trajectory};

/// Loads the record, scenario and stored trajectories of a run directory.
pub fn load_run(dir: &Path) -> Result<(RunRecord, Scenario, CheckInputs)> {
    let record: RunRecord = from_json(&dir.join(RUN_RECORD))?;
    let scenario: Scenario = from_json(&dir.join(SCENARIO_COPY))?;
    let v = scenario.validate()?;
    check_fingerprint(&v, &record, &dir.join(SCENARIO_COPY))?;
    let load = |role: &str| -> Result<Option<_>> {
        match record.trajectories.get(role) {
            None => Ok(None),
            Some(r) => load_trajectory(&dir.join(&r.dir), &record.fingerprint, &r.header_sha256).map(Some),
        }
    };
    let numbered = |prefix: &str| -> Result<Vec<_>> {
        let mut out = Vec::new();
        while let Some(t) = load(&format!("{prefix}/{}", out.len()))? {
            out.push(t);
        }
        Ok(out)
    };
    let primary = load("primary")?.ok_or_else(|| Error::FingerprintMismatch {
        path: dir.join(RUN_RECORD),
        detail: "no primary trajectory recorded".into(),
    })?;
    let inputs = CheckInputs {
        primary,
        companion: load("companion")?,
        plane: numbered("plane")?,
        scaled: load("scaling/scaled")?,
        refinements: numbered("scaling")?,
    };
    Ok((record, scenario, inputs))
}

/// Recomputes reports from stored trajectories, without simulating, and
/// rewrites them. `checks = None` means the scenario's own list.
pub fn verify(dir: &Path, checks: Option<&[BoundId]>) -> Result<Vec<BoundReport>> {
    let (record, scenario, inputs) = load_run(dir)?;
    let v = scenario.validate()?;
    let ids = checks.map_or_else(|| v.checks.clone(), |c| c.to_vec());
    let reports = compute_reports(&v, record.eps, &inputs, &ids)?;
    write_reports(dir, &reports)?;
    Ok(reports)
}
