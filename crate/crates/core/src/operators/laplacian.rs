use crate::error::{Error, Result};
use crate::fields::{GridKind, ScalarField, Support};
use crate::fields::Grid;
use crate::linalg::BandMatrix;

/// How the outermost ring is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Boundary values are data; only interior nodes are unknowns.
    Dirichlet,
    /// Zero radial flux: the boundary node becomes an unknown with a mirrored
    /// ghost. Radial grids only.
    Mirror,
}

impl Closure {
    pub fn unknowns(self, grid: &Grid) -> usize {
        match self {
            Closure::Dirichlet => grid.n_interior(),
            Closure::Mirror => grid.n_active(),
        }
    }

    pub fn check(self, grid: &Grid) -> Result<()> {
        if self == Closure::Mirror && grid.kind() != GridKind::Radial1d {
            return Err(Error::Config(
                "the no-flux closure is only available on radial grids".into(),
            ));
        }
        Ok(())
    }
}

/// Discrete Laplacian of `f` at every interior node, using `boundary_values`
/// on the boundary nodes.
pub fn laplacian(f: &ScalarField, boundary_values: &[f64]) -> Result<ScalarField> {
    let grid = f.grid();
    if boundary_values.len() != grid.n_boundary() {
        return Err(Error::GridMismatch(format!(
            "{} boundary values for {} boundary nodes",
            boundary_values.len(),
            grid.n_boundary()
        )));
    }
    let mut full = f.interior().to_vec();
    full.extend_from_slice(boundary_values);
    let mut out = vec![0.0; grid.n_interior()];
    apply_interior(grid, Closure::Dirichlet, &full, &mut out);
    ScalarField::new(grid.clone(), Support::Interior, out)
}

/// Raw kernel: `u` holds all active values, `out` receives one value per
/// unknown of the closure.
pub fn apply_interior(grid: &Grid, closure: Closure, u: &[f64], out: &mut [f64]) {
    let st = grid.stencil();
    let ni = grid.n_interior();
    // rows sum to zero, so work with neighbour differences: the rounding
    // error then scales with |Δu| rather than |u|, which matters where
    // e^{-2u} is huge
    for i in 0..ni {
        let ui = u[i];
        let mut s = 0.0;
        for (c, w) in st.row(i) {
            s += w * (u[c] - ui);
        }
        out[i] = s;
    }
    if closure == Closure::Mirror {
        let h2 = grid.h() * grid.h();
        out[ni] = 2.0 * (u[ni - 1] - u[ni]) / h2;
    }
}

/// Assembles `diag(row_scale) * A + diag(shift)` over the unknowns of the
/// closure, where `A` is the Laplacian restricted to unknown columns.
pub fn assemble(grid: &Grid, closure: Closure, row_scale: &[f64], shift: &[f64]) -> BandMatrix {
    let n = closure.unknowns(grid);
    let bw = grid.bandwidth().max(1);
    let st = grid.stencil();
    let mut m = BandMatrix::zeros(n, bw, bw);
    for i in 0..grid.n_interior() {
        m.set(i, i, row_scale[i] * st.diag[i] + shift[i]);
        for (c, w) in st.row(i) {
            if c < n {
                m.add(i, c, row_scale[i] * w);
            }
        }
    }
    if closure == Closure::Mirror {
        let ni = grid.n_interior();
        let h2 = grid.h() * grid.h();
        m.set(ni, ni, row_scale[ni] * (-2.0 / h2) + shift[ni]);
        m.set(ni, ni - 1, row_scale[ni] * (2.0 / h2));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_grid, evaluate, InitialData, InitialForm};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn sample(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let v = grid.active_nodes().iter().map(|n| f(n.x, n.y)).collect();
        ScalarField::new(grid.clone(), Support::Active, v).unwrap()
    }

    #[test]
    fn constants_and_quadratics() {
        for kind in [GridKind::Radial1d, GridKind::CartesianMaskedDisk] {
            let g = Arc::new(build_grid(kind, 1.0, 0.05).unwrap());
            let c = sample(&g, |_, _| 3.5);
            let l = laplacian(&c, c.boundary()).unwrap();
            assert!(l.values().iter().all(|v| v.abs() < 1e-9));
            let q = sample(&g, |x, y| x * x + y * y);
            let l = laplacian(&q, q.boundary()).unwrap();
            for v in l.values() {
                assert!((v - 4.0).abs() < 1e-8, "{kind:?} {v}");
            }
        }
    }

    #[test]
    fn hyperbolic_profile_at_origin() {
        let hyp = InitialData::from(InitialForm::HyperbolicDisk);
        let mut errs = Vec::new();
        for n in [40, 80, 160] {
            let g = Arc::new(build_grid(GridKind::Radial1d, 0.5, 0.5 / n as f64).unwrap());
            let f = evaluate(&hyp, &g).unwrap();
            let l = laplacian(&f, f.boundary()).unwrap();
            errs.push((l.values()[0] - 4.0).abs());
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn mirror_rejected_on_cartesian() {
        let g = build_grid(GridKind::CartesianMaskedDisk, 1.0, 0.1).unwrap();
        assert!(Closure::Mirror.check(&g).is_err());
    }

    #[test]
    fn assembled_matrix_matches_kernel() {
        let g = Arc::new(build_grid(GridKind::CartesianMaskedDisk, 0.8, 0.1).unwrap());
        let n = g.n_interior();
        let f: Vec<f64> = (0..g.n_active()).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let mut interior_only = f.clone();
        for v in &mut interior_only[n..] {
            *v = 0.0;
        }
        let mut out = vec![0.0; n];
        apply_interior(&g, Closure::Dirichlet, &interior_only, &mut out);
        let m = assemble(&g, Closure::Dirichlet, &vec![1.0; n], &vec![0.0; n]);
        let y = m.mul_vec(&f[..n]);
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn linearity(a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
            let g = Arc::new(build_grid(GridKind::CartesianMaskedDisk, 1.0, 0.125).unwrap());
            let f = sample(&g, |x, y| (x * 3.0 + seed as f64).sin() * y.cos());
            let h = sample(&g, |x, y| (x - y).exp() + seed as f64 * 1e-3);
            let comb = sample(&g, |x, y| {
                a * (x * 3.0 + seed as f64).sin() * y.cos() + b * ((x - y).exp() + seed as f64 * 1e-3)
            });
            let lf = laplacian(&f, f.boundary()).unwrap();
            let lh = laplacian(&h, h.boundary()).unwrap();
            let lc = laplacian(&comb, comb.boundary()).unwrap();
            let scale = lf.values().iter().chain(lh.values()).fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..g.n_interior() {
                let want = a * lf.values()[i] + b * lh.values()[i];
                prop_assert!((lc.values()[i] - want).abs() <= 1e-12 * scale * (1.0 + a.abs() + b.abs()) * 1e2);
            }
        }

        /// Δ_h f ≥ 0 inside and f ≤ 0 on the boundary force f ≤ 0 inside.
        /// The instance is built by solving Δ_h f = s with s ≥ 0 directly.
        #[test]
        fn discrete_maximum_principle(seed in 0u64..500, cart in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let kind = if cart { GridKind::CartesianMaskedDisk } else { GridKind::Radial1d };
            let g = build_grid(kind, 1.0, 0.1).unwrap();
            let n = g.n_interior();
            let src: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let bdy: Vec<f64> = (0..g.n_boundary()).map(|_| -rng.gen_range(0.0..2.0)).collect();
            // A_uu f = s - A_ub b
            let mut rhs = src.clone();
            let st = g.stencil();
            for i in 0..n {
                for (c, w) in st.row(i) {
                    if c >= n {
                        rhs[i] -= w * bdy[c - n];
                    }
                }
            }
            let m = assemble(&g, Closure::Dirichlet, &vec![1.0; n], &vec![0.0; n]);
            let f = m.factor().unwrap().solve(&rhs);
            let mut full = f.clone();
            full.extend_from_slice(&bdy);
            let mut check = vec![0.0; n];
            apply_interior(&g, Closure::Dirichlet, &full, &mut check);
            for i in 0..n {
                prop_assert!(check[i] >= -1e-8);
                prop_assert!(f[i] <= 1e-12);
            }
        }
    }
}
