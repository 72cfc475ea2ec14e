use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Radially symmetric profile on nodes `r_i = i h`, `i = 0..=N`.
    #[serde(rename = "radial-1d")]
    Radial1d,
    /// Square lattice restricted to a disk, with cut nodes on the circle.
    CartesianMaskedDisk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub y: f64,
    pub class: NodeClass,
}

impl Node {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Row-compressed Dirichlet stencil: one row per interior node.
///
/// Row `i` reads `diag[i] * f[i] + sum(coef * f[col])`, where `col` indexes
/// the active (interior or boundary) node numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub diag: Vec<f64>,
    pub offsets: Vec<usize>,
    pub cols: Vec<usize>,
    pub coefs: Vec<f64>,
}

impl Stencil {
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        self.cols[a..b].iter().copied().zip(self.coefs[a..b].iter().copied())
    }

    pub fn rows(&self) -> usize {
        self.diag.len()
    }
}

/// A discretized disk.
///
/// Nodes are numbered interior first, then boundary, then exterior; fields
/// store values for the first `n_active()` nodes only.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: GridKind,
    radius: f64,
    h: f64,
    nodes: Vec<Node>,
    n_interior: usize,
    n_boundary: usize,
    stencil: Stencil,
    weights: Vec<f64>,
}

/// Lattice points closer than this fraction of `h` to the circle are
/// snapped to boundary nodes, keeping every stencil arm at least this long.
const SNAP: f64 = 1e-3;

pub fn build_grid(kind: GridKind, r: f64, h: f64) -> Result<Grid> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {r}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("spacing must be positive, got {h}")));
    }
    if h > r / 4.0 {
        return Err(Error::Config(format!(
            "spacing h = {h} is too coarse for radius {r} (need h <= r/4)"
        )));
    }
    match kind {
        GridKind::Radial1d => radial(r, h),
        GridKind::CartesianMaskedDisk => cartesian(r, h),
    }
}

fn radial(r: f64, h: f64) -> Result<Grid> {
    let n = (r / h).round() as usize;
    if ((n as f64) * h - r).abs() > 1e-9 * r {
        return Err(Error::Config(format!(
            "radial grid needs r/h integral, got r = {r}, h = {h}"
        )));
    }
    let nodes: Vec<Node> = (0..=n)
        .map(|i| Node {
            x: i as f64 * h,
            y: 0.0,
            class: if i == n {
                NodeClass::Boundary
            } else {
                NodeClass::Interior
            },
        })
        .collect();

    let h2 = h * h;
    let mut st = Stencil {
        diag: Vec::with_capacity(n),
        offsets: vec![0],
        cols: Vec::with_capacity(2 * n),
        coefs: Vec::with_capacity(2 * n),
    };
    // symmetry closure at the origin: f'' + f'/r -> 2 f'' = 4 (f_1 - f_0) / h^2
    st.diag.push(-4.0 / h2);
    st.cols.push(1);
    st.coefs.push(4.0 / h2);
    st.offsets.push(st.cols.len());
    for i in 1..n {
        let ri = nodes[i].x;
        st.diag.push(-2.0 / h2);
        st.cols.push(i - 1);
        st.coefs.push(1.0 / h2 - 1.0 / (2.0 * ri * h));
        st.cols.push(i + 1);
        st.coefs.push(1.0 / h2 + 1.0 / (2.0 * ri * h));
        st.offsets.push(st.cols.len());
    }

    // trapezoid rule for the integrand f(r) 2 pi r
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|nd| 2.0 * std::f64::consts::PI * nd.x * h)
        .collect();
    weights[n] *= 0.5;

    Ok(Grid {
        kind: GridKind::Radial1d,
        radius: r,
        h,
        nodes,
        n_interior: n,
        n_boundary: 1,
        stencil: st,
        weights,
    })
}

#[derive(Clone, Copy)]
enum Site {
    Interior(usize),
    OnCircle,
    Outside,
}

fn cartesian(r: f64, h: f64) -> Result<Grid> {
    let m = (r / h).ceil() as i64 + 1;
    let idx = |i: i64| i as f64 * h;
    let site_of = |i: i64, j: i64| {
        let d = r - idx(i).hypot(idx(j));
        if d >= SNAP * h {
            0
        } else if d > -SNAP * h {
            1
        } else {
            2
        }
    };

    // interior lattice points, row-major in (j, i) so the band stays narrow
    let mut sites: HashMap<(i64, i64), Site> = HashMap::new();
    let mut nodes = Vec::new();
    let mut lattice_of_interior = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            match site_of(i, j) {
                0 => {
                    sites.insert((i, j), Site::Interior(nodes.len()));
                    nodes.push(Node {
                        x: idx(i),
                        y: idx(j),
                        class: NodeClass::Interior,
                    });
                    lattice_of_interior.push((i, j));
                }
                1 => {
                    sites.insert((i, j), Site::OnCircle);
                }
                _ => {
                    sites.insert((i, j), Site::Outside);
                }
            }
        }
    }
    let n_interior = nodes.len();

    let h2 = h * h;
    let mut on_circle: HashMap<(i64, i64), usize> = HashMap::new();
    let mut boundary = Vec::new();
    let mut st = Stencil {
        diag: Vec::with_capacity(n_interior),
        offsets: vec![0],
        cols: Vec::with_capacity(4 * n_interior),
        coefs: Vec::with_capacity(4 * n_interior),
    };
    // boundary node ids are provisional (offset by n_interior later)
    let mut arm = |p: (i64, i64), d: (i64, i64), boundary: &mut Vec<Node>| -> (usize, f64) {
        let q = (p.0 + d.0, p.1 + d.1);
        match sites.get(&q).copied().unwrap_or(Site::Outside) {
            Site::Interior(k) => (k, 1.0),
            Site::OnCircle => {
                let id = *on_circle.entry(q).or_insert_with(|| {
                    boundary.push(Node {
                        x: idx(q.0),
                        y: idx(q.1),
                        class: NodeClass::Boundary,
                    });
                    boundary.len() - 1
                });
                (n_interior + id, 1.0)
            }
            Site::Outside => {
                let (px, py) = (idx(p.0), idx(p.1));
                // distance along the axis to the circle
                let s = if d.0 != 0 {
                    (r * r - py * py).sqrt() - d.0 as f64 * px
                } else {
                    (r * r - px * px).sqrt() - d.1 as f64 * py
                };
                let theta = (s / h).clamp(SNAP, 1.0);
                let s = theta * h;
                boundary.push(Node {
                    x: px + d.0 as f64 * s,
                    y: py + d.1 as f64 * s,
                    class: NodeClass::Boundary,
                });
                (n_interior + boundary.len() - 1, theta)
            }
        }
    };
    for &p in &lattice_of_interior {
        let (e, te) = arm(p, (1, 0), &mut boundary);
        let (w, tw) = arm(p, (-1, 0), &mut boundary);
        let (no, tn) = arm(p, (0, 1), &mut boundary);
        let (so, ts) = arm(p, (0, -1), &mut boundary);
        // Shortley-Weller unequal-arm second differences
        let cx = 2.0 / (h2 * (te + tw));
        let cy = 2.0 / (h2 * (tn + ts));
        st.diag.push(-2.0 / (h2 * te * tw) - 2.0 / (h2 * tn * ts));
        for (col, c) in [(e, cx / te), (w, cx / tw), (no, cy / tn), (so, cy / ts)] {
            st.cols.push(col);
            st.coefs.push(c);
        }
        st.offsets.push(st.cols.len());
    }
    let n_boundary = boundary.len();
    nodes.extend(boundary);

    // lattice points outside the active set, within two spacings of the circle
    let mut slivers = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            if let Site::Interior(_) = sites[&(i, j)] {
                continue;
            }
            if on_circle.contains_key(&(i, j)) {
                continue;
            }
            let (x, y) = (idx(i), idx(j));
            if x.hypot(y) < r + 2.0 * h {
                nodes.push(Node {
                    x,
                    y,
                    class: NodeClass::Exterior,
                });
            }
            slivers.push((x, y));
        }
    }

    // cell areas clipped to the disk; cells of non-interior lattice points
    // are lumped onto the nearest active node
    let n_active = n_interior + n_boundary;
    let mut weights = vec![0.0; n_active];
    for (k, nd) in nodes[..n_interior].iter().enumerate() {
        weights[k] = cell_area(r, nd.x, nd.y, h);
    }
    for &id in on_circle.values() {
        slivers.push((nodes[n_interior + id].x, nodes[n_interior + id].y));
    }
    slivers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (x, y) in slivers {
        let a = cell_area(r, x, y, h);
        if a <= 0.0 {
            continue;
        }
        let mut best = (f64::INFINITY, 0usize);
        for (k, nd) in nodes[..n_active].iter().enumerate() {
            let d = (nd.x - x).hypot(nd.y - y);
            if d < best.0 {
                best = (d, k);
            }
        }
        weights[best.1] += a;
    }

    Ok(Grid {
        kind: GridKind::CartesianMaskedDisk,
        radius: r,
        h,
        nodes,
        n_interior,
        n_boundary,
        stencil: st,
        weights,
    })
}

fn cell_area(r: f64, x: f64, y: f64, h: f64) -> f64 {
    disk_rect_area(r, x - 0.5 * h, x + 0.5 * h, y - 0.5 * h, y + 0.5 * h)
}

/// Exact area of `[x0, x1] x [y0, y1]` intersected with the disk of radius `r`.
pub(crate) fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b || y0 >= r || y1 <= -r {
        return 0.0;
    }
    let half = |x: f64| (r * r - x * x).max(0.0).sqrt();
    // antiderivative of sqrt(r^2 - x^2)
    let big_s = |x: f64| 0.5 * (x * half(x) + r * r * (x / r).clamp(-1.0, 1.0).asin());

    let mut cuts = vec![a, b];
    for yc in [y0, y1] {
        if yc.abs() < r {
            let q = (r * r - yc * yc).sqrt();
            cuts.extend([-q, q]);
        }
    }
    cuts.retain(|&c| c >= a && c <= b);
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();

    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let s_mid = half(0.5 * (lo + hi));
        let top_const = y1 < s_mid;
        let bot_const = y0 > -s_mid;
        let top = if top_const { y1 } else { s_mid };
        let bot = if bot_const { y0 } else { -s_mid };
        if top <= bot {
            continue;
        }
        let int_s = big_s(hi) - big_s(lo);
        let int_top = if top_const { y1 * (hi - lo) } else { int_s };
        let int_bot = if bot_const { y0 * (hi - lo) } else { -int_s };
        area += int_top - int_bot;
    }
    area
}

impl Grid {
    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn active_nodes(&self) -> &[Node] {
        &self.nodes[..self.n_active()]
    }

    pub fn interior_nodes(&self) -> &[Node] {
        &self.nodes[..self.n_interior]
    }

    pub fn boundary_nodes(&self) -> &[Node] {
        &self.nodes[self.n_interior..self.n_active()]
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.n_boundary
    }

    /// Interior plus boundary nodes; the length of a full field.
    pub fn n_active(&self) -> usize {
        self.n_interior + self.n_boundary
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    /// Quadrature weights over active nodes; they sum to the disk area.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest index distance between a row and any interior column.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.n_interior {
            for (c, _) in self.stencil.row(i) {
                if c < self.n_interior {
                    bw = bw.max(c.abs_diff(i));
                }
            }
        }
        bw
    }

    /// Distance from an active node to the boundary circle.
    pub fn depth(&self, node: usize) -> f64 {
        (self.radius - self.nodes[node].radius()).max(0.0)
    }

    /// Index of the active node at (x, y) if one sits there, to within `tol`.
    pub fn find_node(&self, x: f64, y: f64, tol: f64) -> Option<usize> {
        match self.kind {
            GridKind::Radial1d => {
                let i = (x.hypot(y) / self.h).round() as usize;
                (i < self.n_active() && (self.nodes[i].x - x.hypot(y)).abs() <= tol).then_some(i)
            }
            GridKind::CartesianMaskedDisk => self
                .active_nodes()
                .iter()
                .position(|n| (n.x - x).abs() <= tol && (n.y - y).abs() <= tol),
        }
    }

    /// Pairs `(i, j)` of active nodes where node `i` of `self` coincides with
    /// node `j` of `other`. Both grids must be of the same kind and spacing.
    pub fn shared_nodes(&self, other: &Grid) -> Result<Vec<(usize, usize)>> {
        if self.kind != other.kind || (self.h - other.h).abs() > 1e-12 * self.h {
            return Err(Error::GridMismatch(format!(
                "{:?} h = {} vs {:?} h = {}",
                self.kind, self.h, other.kind, other.h
            )));
        }
        let tol = 1e-9 * self.h;
        let mut out = Vec::new();
        match self.kind {
            GridKind::Radial1d => {
                let n = self.n_active().min(other.n_active());
                out.extend((0..n).map(|i| (i, i)));
            }
            GridKind::CartesianMaskedDisk => {
                let key = |n: &Node| ((n.x / tol).round() as i64, (n.y / tol).round() as i64);
                let map: HashMap<_, usize> = other
                    .active_nodes()
                    .iter()
                    .enumerate()
                    .map(|(j, n)| (key(n), j))
                    .collect();
                for (i, n) in self.active_nodes().iter().enumerate() {
                    if let Some(&j) = map.get(&key(n)) {
                        out.push((i, j));
                    }
                }
            }
        }
        Ok(out)
    }
}
