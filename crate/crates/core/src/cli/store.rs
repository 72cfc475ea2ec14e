//! On-disk trajectories: a JSON header plus one little-endian `f64` file per
//! snapshot, in node-index order.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{build_grid, GridKind};
use crate::stepper::{BoundaryForm, FlowTrajectory, Snapshot, StepRecord};

use super::scenario::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub radius: f64,
    pub h: f64,
    pub n_active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub label: String,
    /// Fingerprint of the scenario that produced the trajectory.
    pub fingerprint: String,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryForm>,
    pub rejected: usize,
    pub snapshots: Vec<SnapshotEntry>,
    pub steps: Vec<StepRecord>,
}

pub const HEADER: &str = "header.json";

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn encode(u: &[f64]) -> Vec<u8> {
    u.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn decode(bytes: &[u8], path: &Path) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::FingerprintMismatch {
            path: path.to_path_buf(),
            detail: format!("{} bytes is not a whole number of f64 values", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Writes `traj` under `dir` and returns the SHA-256 of its header.
pub fn save_trajectory(dir: &Path, traj: &FlowTrajectory, fingerprint: &str) -> Result<String> {
    let mut snapshots = Vec::with_capacity(traj.snapshots.len());
    for (i, s) in traj.snapshots.iter().enumerate() {
        let file = format!("snap_{i:05}.bin");
        let bytes = encode(&s.u);
        write_file(&dir.join(&file), &bytes)?;
        snapshots.push(SnapshotEntry {
            t: s.t,
            newton_iterations: s.newton_iterations,
            newton_residual: s.newton_residual,
            file,
            sha256: sha256_hex(&bytes),
        });
    }
    let header = TrajectoryHeader {
        label: traj.label.clone(),
        fingerprint: fingerprint.to_string(),
        grid: GridSpec {
            kind: traj.grid.kind(),
            radius: traj.grid.radius(),
            h: traj.grid.h(),
            n_active: traj.grid.n_active(),
        },
        boundary: traj.boundary,
        rejected: traj.rejected,
        snapshots,
        steps: traj.steps.clone(),
    };
    let bytes = to_json(&header)?;
    write_file(&dir.join(HEADER), &bytes)?;
    Ok(sha256_hex(&bytes))
}

fn mismatch(path: &Path, detail: impl Into<String>) -> Error {
    Error::FingerprintMismatch {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

/// Loads a trajectory, refusing it unless the header hash, the scenario
/// fingerprint and every snapshot hash match.
pub fn load_trajectory(dir: &Path, fingerprint: &str, header_sha256: &str) -> Result<FlowTrajectory> {
    let hpath = dir.join(HEADER);
    let hbytes = read_file(&hpath)?;
    if sha256_hex(&hbytes) != header_sha256 {
        return Err(mismatch(&hpath, "header hash differs from the run record"));
    }
    let header: TrajectoryHeader = serde_json::from_slice(&hbytes).map_err(|e| Error::Parse {
        path: hpath.clone(),
        message: e.to_string(),
    })?;
    if header.fingerprint != fingerprint {
        return Err(mismatch(&hpath, format!("scenario fingerprint {} != {fingerprint}", header.fingerprint)));
    }
    let grid = Arc::new(build_grid(header.grid.kind, header.grid.radius, header.grid.h)?);
    if grid.n_active() != header.grid.n_active {
        return Err(mismatch(&hpath, "rebuilt grid has a different node count"));
    }
    let mut snapshots = Vec::with_capacity(header.snapshots.len());
    for e in &header.snapshots {
        let path: PathBuf = dir.join(&e.file);
        let bytes = read_file(&path)?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(mismatch(&path, "snapshot hash differs from header"));
        }
        let u = decode(&bytes, &path)?;
        if u.len() != grid.n_active() {
            return Err(mismatch(&path, format!("{} values for {} nodes", u.len(), grid.n_active())));
        }
        snapshots.push(Snapshot {
            t: e.t,
            u,
            newton_iterations: e.newton_iterations,
            newton_residual: e.newton_residual,
        });
    }
    Ok(FlowTrajectory {
        label: header.label,
        grid,
        boundary: header.boundary,
        snapshots,
        steps: header.steps,
        rejected: header.rejected,
        fingerprint: header.fingerprint,
    })
}
