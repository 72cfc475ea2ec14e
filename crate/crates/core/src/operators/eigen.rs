use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField, Support};

use super::laplacian::{apply_interior, assemble, Closure};

/// Relative residual target `|A phi + lambda phi|_inf / (lambda |phi|_inf)`.
pub const EIGEN_TOL: f64 = 1e-10;
pub const EIGEN_BUDGET: usize = 500;

/// Smallest Dirichlet eigenvalue of `-Δ_h` with its positive eigenfunction.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    /// Active-supported; zero on boundary nodes, positive inside, unit
    /// discrete L2 norm under the grid quadrature.
    pub phi: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

/// Inverse power iteration on a banded factorization of `-Δ_h`.
pub fn first_eigenpair(grid: &Arc<Grid>) -> Result<EigenPair> {
    let n = grid.n_interior();
    let m = assemble(grid, Closure::Dirichlet, &vec![-1.0; n], &vec![0.0; n]);
    let lu = m.factor()?;

    let mut phi = vec![1.0; n];
    let mut full = vec![0.0; grid.n_active()];
    let mut aphi = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=EIGEN_BUDGET {
        lu.solve_in_place(&mut phi);
        let norm = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &mut phi {
            *v /= norm;
        }
        full[..n].copy_from_slice(&phi);
        apply_interior(grid, Closure::Dirichlet, &full, &mut aphi);
        // aphi = Δ_h phi, so -Δ_h phi = -aphi
        let num: f64 = phi.iter().zip(&aphi).map(|(p, a)| -p * a).sum();
        let den: f64 = phi.iter().map(|p| p * p).sum();
        let lambda = num / den;
        residual = phi
            .iter()
            .zip(&aphi)
            .fold(0.0f64, |m, (p, a)| m.max((a + lambda * p).abs()))
            / lambda;
        if residual <= EIGEN_TOL {
            let w = grid.weights();
            let l2: f64 = phi.iter().zip(w).map(|(p, w)| w * p * p).sum::<f64>().sqrt();
            let mut values: Vec<f64> = phi.iter().map(|p| p / l2).collect();
            values.resize(grid.n_active(), 0.0);
            if let Some(i) = values[..n].iter().position(|&p| p <= 0.0) {
                return Err(Error::Domain(format!(
                    "eigenfunction not positive at interior node {i}"
                )));
            }
            return Ok(EigenPair {
                lambda1: lambda,
                phi: ScalarField::new(grid.clone(), Support::Active, values)?,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: EIGEN_BUDGET,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_grid, GridKind};

    const J01_SQ: f64 = 5.783185962946784;

    fn radial(r: f64, n: usize) -> Arc<Grid> {
        Arc::new(build_grid(GridKind::Radial1d, r, r / n as f64).unwrap())
    }

    #[test]
    fn unit_disk_radial_and_cartesian() {
        let e = first_eigenpair(&radial(1.0, 128)).unwrap();
        assert!((e.lambda1 / J01_SQ - 1.0).abs() < 1e-3, "{}", e.lambda1);
        assert!(e.residual <= EIGEN_TOL);
        let g = Arc::new(build_grid(GridKind::CartesianMaskedDisk, 1.0, 1.0 / 24.0).unwrap());
        let e = first_eigenpair(&g).unwrap();
        assert!((e.lambda1 / J01_SQ - 1.0).abs() < 1e-2, "{}", e.lambda1);
    }

    #[test]
    fn half_disk_scales_by_four() {
        let a = first_eigenpair(&radial(1.0, 64)).unwrap();
        let b = first_eigenpair(&radial(0.5, 64)).unwrap();
        assert!((b.lambda1 / a.lambda1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn shape_and_normalization() {
        let g = radial(1.0, 100);
        let e = first_eigenpair(&g).unwrap();
        let p = e.phi.values();
        let max = p.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(p[0], max);
        // last interior node sits one spacing from the wall
        assert!(p[g.n_interior() - 1] < 5.0 * g.h() * max);
        let l2: f64 = p.iter().zip(g.weights()).map(|(p, w)| w * p * p).sum();
        assert!((l2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_of_convergence() {
        let l: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| first_eigenpair(&radial(1.0, n)).unwrap().lambda1)
            .collect();
        let order = ((l[0] - l[1]) / (l[1] - l[2])).log2();
        assert!(order >= 1.8, "{order}");
    }
}
