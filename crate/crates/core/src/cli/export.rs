use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::fields::GridKind;
use crate::metrics::{cusp_tail, volume, weighted_laplacian, Region};
use crate::stepper::{BoundaryForm, FlowTrajectory};

use super::run::{RunRecord, RUN_RECORD};
use super::store::{from_json, load_trajectory, write_file};

/// Long-format field table: one row per node and snapshot. `K` and `p` are
/// empty on boundary nodes, where the stencil is not defined.
pub fn field_csv(tr: &FlowTrajectory) -> Result<String> {
    let g = &tr.grid;
    let radial = g.kind() == GridKind::Radial1d;
    let mut s = String::from(if radial { "t,r,u,v,K,p\n" } else { "t,x,y,u,v,K,p\n" });
    for snap in &tr.snapshots {
        let x = weighted_laplacian(g, &snap.u);
        for (i, n) in g.active_nodes().iter().enumerate() {
            let u = snap.u[i];
            if radial {
                write!(s, "{},{},{},{}", snap.t, n.x, u, (2.0 * u).exp()).unwrap();
            } else {
                write!(s, "{},{},{},{},{}", snap.t, n.x, n.y, u, (2.0 * u).exp()).unwrap();
            }
            match x.get(i) {
                Some(xi) => writeln!(s, ",{},{}", -xi, 2.0 * xi).unwrap(),
                None => s.push_str(",,\n"),
            }
        }
    }
    Ok(s)
}

/// Area per snapshot; `tail` is the cusp area outside the disk when the
/// boundary data are cusp-matched, else 0.
pub fn volume_csv(tr: &FlowTrajectory) -> Result<String> {
    let c = match tr.boundary {
        Some(BoundaryForm::Cusp { c }) => c,
        _ => 0.0,
    };
    let mut s = String::from("t,volume,tail,total\n");
    for i in 0..tr.snapshots.len() {
        let st = tr.state(i)?;
        let v = volume(&st, Region::All);
        let tail = if c > 0.0 { cusp_tail(tr.grid.radius(), st.t, c) } else { 0.0 };
        writeln!(s, "{},{},{},{}", st.t, v, tail, v + tail).unwrap();
    }
    Ok(s)
}

/// Writes `<label>.csv` and `<label>_volume.csv` for every stored
/// trajectory into `out` (default `<dir>/plots`); returns the files written.
pub fn export_plots(dir: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let out = out.map_or_else(|| dir.join("plots"), Path::to_path_buf);
    let record: RunRecord = from_json(&dir.join(RUN_RECORD))?;
    let mut written = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for r in record.trajectories.values() {
        if !seen.insert(r.dir.clone()) {
            continue;
        }
        let tr = load_trajectory(&dir.join(&r.dir), &record.fingerprint, &r.header_sha256)?;
        let f = out.join(format!("{}.csv", tr.label));
        write_file(&f, field_csv(&tr)?.as_bytes())?;
        let vf = out.join(format!("{}_volume.csv", tr.label));
        write_file(&vf, volume_csv(&tr)?.as_bytes())?;
        written.push(f);
        written.push(vf);
    }
    Ok(written)
}
