//! Curvature, pressure, area and the explicit barrier profiles of the flow.
//!
//! A state is a conformal factor `u` with metric `e^{2u} δ`; `v = e^{2u}`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Grid, ScalarField, Support};
use crate::operators::{apply_interior, Closure, EigenPair};

#[derive(Debug, Clone)]
pub struct ConformalState {
    pub t: f64,
    /// Active-supported conformal factor.
    pub u: ScalarField,
}

impl ConformalState {
    pub fn new(t: f64, u: ScalarField) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("state time must be >= 0, got {t}")));
        }
        if u.support() != Support::Active {
            return Err(Error::GridMismatch(
                "a state needs values on boundary nodes too".into(),
            ));
        }
        Ok(Self { t, u })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u.grid()
    }

    pub fn v(&self) -> Vec<f64> {
        self.u.values().iter().map(|u| (2.0 * u).exp()).collect()
    }
}

/// `e^{-2u} Δ_h u` at interior nodes; curvature and pressure are both read
/// off this one array so that `p = -2K` holds bit for bit.
pub fn weighted_laplacian(grid: &Grid, u: &[f64]) -> Vec<f64> {
    let mut l = vec![0.0; grid.n_interior()];
    apply_interior(grid, Closure::Dirichlet, u, &mut l);
    for (li, ui) in l.iter_mut().zip(u) {
        *li *= (-2.0 * ui).exp();
    }
    l
}

/// Gauss curvature `K = -e^{-2u} Δ_h u`.
pub fn curvature(state: &ConformalState) -> Result<ScalarField> {
    let el = weighted_laplacian(state.grid(), state.u.values());
    ScalarField::new(
        state.grid().clone(),
        Support::Interior,
        el.into_iter().map(|x| -x).collect(),
    )
}

/// Pressure `p = v_t / v = 2 e^{-2u} Δ_h u`.
pub fn pressure(state: &ConformalState) -> Result<ScalarField> {
    let el = weighted_laplacian(state.grid(), state.u.values());
    ScalarField::new(
        state.grid().clone(),
        Support::Interior,
        el.into_iter().map(|x| 2.0 * x).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    All,
    /// Active nodes with `|x| <= radius`.
    Ball(f64),
}

/// Quadrature of `e^{2u}` with the grid weights.
pub fn volume(state: &ConformalState, region: Region) -> f64 {
    let g = state.grid();
    let mut s = 0.0;
    for ((n, w), u) in g.active_nodes().iter().zip(g.weights()).zip(state.u.values()) {
        if let Region::Ball(rho) = region {
            if n.radius() > rho {
                continue;
            }
        }
        s += w * (2.0 * u).exp();
    }
    s
}

/// Area of the cusp barrier `C t / (|x|^2 log^2 |x|)` outside radius `r`.
pub fn cusp_tail(r: f64, t: f64, c: f64) -> f64 {
    2.0 * PI * c * t / r.ln()
}

/// `log(2(1+δ) / ((1+δ)^2 - |x|^2)) + ½ log(2t)`; solves `Δψ = e^{2ψ} / (2t)`.
pub fn barrier_hyperbolic(x: f64, t: f64, delta: f64) -> Result<f64> {
    if !(t > 0.0) || !(delta >= 0.0) {
        return Err(Error::Domain(format!(
            "hyperbolic barrier needs t > 0 and delta >= 0, got t = {t}, delta = {delta}"
        )));
    }
    let a = 1.0 + delta;
    if x.abs() >= a {
        return Err(Error::Domain(format!(
            "hyperbolic barrier undefined at |x| = {x} >= {a}"
        )));
    }
    Ok((2.0 * a / (a * a - x * x)).ln() + 0.5 * (2.0 * t).ln())
}

/// `log(2 / (1 - |x|^2)) + ½ log(2t + 1)`.
pub fn barrier_upper(x: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("upper barrier needs t >= 0, got {t}")));
    }
    if x.abs() >= 1.0 {
        return Err(Error::Domain(format!("upper barrier undefined at |x| = {x}")));
    }
    Ok((2.0 / (1.0 - x * x)).ln() + 0.5 * (2.0 * t).ln_1p())
}

/// v-scale cusp profile `C t / (|x|^2 log^2 |x|)`.
pub fn barrier_cusp(x: f64, t: f64, c: f64) -> Result<f64> {
    if x.abs() <= 1.0 {
        return Err(Error::Domain(format!("cusp barrier needs |x| > 1, got {x}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("cusp barrier needs t >= 0, got {t}")));
    }
    let l = x.abs().ln();
    Ok(c * t / (x * x * l * l))
}

/// u-scale cusp profile `-C' - log(|x| log |x|) + ½ log(2t)`.
///
/// Matches [`barrier_cusp`] through `C' = -½ log(C / 2)`.
pub fn barrier_cusp_u(x: f64, t: f64, c_prime: f64) -> Result<f64> {
    if x.abs() <= 1.0 {
        return Err(Error::Domain(format!("cusp barrier needs |x| > 1, got {x}")));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("u-scale cusp barrier needs t > 0, got {t}")));
    }
    let r = x.abs();
    Ok(-c_prime - (r * r.ln()).ln() + 0.5 * (2.0 * t).ln())
}

/// `C t / φ` at interior nodes.
pub fn barrier_eigen(t: f64, pair: &EigenPair, c: f64) -> Result<ScalarField> {
    if !(t >= 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!(
            "eigen barrier needs t >= 0 and C > 0, got t = {t}, C = {c}"
        )));
    }
    let phi = pair.phi.interior();
    ScalarField::new(
        pair.phi.grid().clone(),
        Support::Interior,
        phi.iter().map(|p| c * t / p).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_grid, evaluate, GridKind, InitialData, InitialForm};
    use crate::operators::first_eigenpair;
    use proptest::prelude::*;

    fn radial(r: f64, n: usize) -> Arc<Grid> {
        Arc::new(build_grid(GridKind::Radial1d, r, r / n as f64).unwrap())
    }

    fn state(g: &Arc<Grid>, t: f64, f: impl Fn(f64) -> f64) -> ConformalState {
        let u = g.active_nodes().iter().map(|n| f(n.radius())).collect();
        ConformalState::new(t, ScalarField::new(g.clone(), Support::Active, u).unwrap()).unwrap()
    }

    #[test]
    fn flat_and_constant_states_have_zero_curvature() {
        let g = radial(1.0, 50);
        for c in [0.0, 1.7, -3.0] {
            let k = curvature(&state(&g, 0.0, |_| c)).unwrap();
            assert!(k.values().iter().all(|&x| x.abs() < 1e-9));
        }
    }

    #[test]
    fn hyperbolic_curvature_is_minus_one() {
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = radial(0.8, n);
            let hyp = InitialData::from(InitialForm::HyperbolicDisk);
            let s = ConformalState::new(0.0, evaluate(&hyp, &g).unwrap()).unwrap();
            let k = curvature(&s).unwrap();
            let h = g.h();
            let e = g
                .interior_nodes()
                .iter()
                .zip(k.values())
                .filter(|(nd, _)| nd.radius() <= 0.8 - 2.0 * h)
                .fold(0.0f64, |m, (_, k)| m.max((k + 1.0).abs()));
            errs.push(e);
        }
        assert!(errs[1] < 1e-3 && errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn soliton_pressure_at_half() {
        let g = radial(0.8, 200);
        let s = state(&g, 0.5, |r| barrier_hyperbolic(r, 0.5, 0.0).unwrap());
        // K = -1/(2t) = -1, so p = -2K = 1/t = 2
        let p = pressure(&s).unwrap();
        assert!((p.values()[0] - 2.0).abs() < 1e-4, "{}", p.values()[0]);
    }

    #[test]
    fn disk_area_and_sphere_area() {
        let g = radial(1.0, 100);
        assert!((volume(&state(&g, 0.0, |_| 0.0), Region::All) - PI).abs() < 1e-12);
        let sph = InitialData::from(InitialForm::Sphere { scale: 1.0 });
        let mut prev = 0.0;
        for r in [10.0, 100.0, 1000.0] {
            let g = Arc::new(build_grid(GridKind::Radial1d, r, 0.01).unwrap());
            let s = ConformalState::new(0.0, evaluate(&sph, &g).unwrap()).unwrap();
            // analytic: 4π (1 - 1/(1 + R^2))
            let v = volume(&s, Region::All);
            assert!((v - 4.0 * PI * (1.0 - 1.0 / (1.0 + r * r))).abs() < 1e-3, "{v}");
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn shift_doubles_volume() {
        let g = Arc::new(build_grid(GridKind::CartesianMaskedDisk, 1.0, 0.05).unwrap());
        let a = volume(&state(&g, 0.0, |r| r * r), Region::All);
        let b = volume(&state(&g, 0.0, |r| r * r + 0.5 * 2f64.ln()), Region::All);
        assert!((b / a - 2.0).abs() < 1e-14);
    }

    #[test]
    fn barrier_values() {
        assert!((barrier_hyperbolic(0.0, 0.5, 0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((barrier_upper(0.0, 0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((barrier_upper(0.0, 1.5).unwrap() - 4f64.ln()).abs() < 1e-15);
        for &(x, t) in &[(0.3, 0.2), (0.9, 2.0)] {
            let a = barrier_upper(x, t).unwrap();
            let b = barrier_hyperbolic(x, t + 0.5, 0.0).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
        let e = std::f64::consts::E;
        assert!((barrier_cusp(e, 1.0, 1.0).unwrap() - (-2f64).exp()).abs() < 1e-16);
        assert_eq!(barrier_cusp(5.0, 0.3, 2.0).unwrap(), 2.0 * barrier_cusp(5.0, 0.3, 1.0).unwrap());
        assert!(barrier_cusp(1.0, 1.0, 1.0).is_err());
        assert!(barrier_hyperbolic(1.2, 1.0, 0.2).is_err());
        assert!(barrier_upper(1.0, 1.0).is_err());
    }

    #[test]
    fn eigen_barrier_shape() {
        let g = radial(1.0, 64);
        let pair = first_eigenpair(&g).unwrap();
        let z = barrier_eigen(0.0, &pair, 1.0).unwrap();
        assert!(z.values().iter().all(|&x| x == 0.0));
        let a = barrier_eigen(0.3, &pair, 1.0).unwrap();
        let b = barrier_eigen(0.6, &pair, 1.0).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((y / x - 2.0).abs() < 1e-15);
        }
        let v = a.values();
        let near = v[g.n_interior() - 1];
        let inner = v[..g.n_interior() - 1].iter().cloned().fold(0.0, f64::max);
        assert!(near > inner);
    }

    #[test]
    fn hyperbolic_barrier_discrete_residual() {
        // Δ_h ψ - e^{2ψ} / (2t) shrinks like h^2 away from the wall
        let mut errs = Vec::new();
        for n in [50, 100] {
            let g = radial(0.7, n);
            let t = 0.4;
            let s = state(&g, t, |r| barrier_hyperbolic(r, t, 0.1).unwrap());
            let mut l = vec![0.0; g.n_interior()];
            apply_interior(&g, Closure::Dirichlet, s.u.values(), &mut l);
            let e = l
                .iter()
                .zip(s.u.values())
                .fold(0.0f64, |m, (l, u)| m.max((l - (2.0 * u).exp() / (2.0 * t)).abs()));
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    proptest! {
        #[test]
        fn pressure_is_minus_twice_curvature(seed in 0u64..1000) {
            let g = Arc::new(build_grid(GridKind::CartesianMaskedDisk, 1.0, 0.1).unwrap());
            let a = (seed as f64 * 0.37).sin();
            let s = {
                let u = g.active_nodes().iter().map(|n| a * n.x * n.y + (n.y * 3.0 + a).cos()).collect();
                ConformalState::new(0.3, ScalarField::new(g.clone(), Support::Active, u).unwrap()).unwrap()
            };
            let k = curvature(&s).unwrap();
            let p = pressure(&s).unwrap();
            for (k, p) in k.values().iter().zip(p.values()) {
                prop_assert!((p + 2.0 * k).abs() <= 1e-13 * (1.0 + k.abs()));
            }
        }

        #[test]
        fn curvature_conformal_scaling(c in -2.0f64..2.0) {
            let g = radial(0.9, 40);
            let f = |r: f64| (2.0 / (1.0 - r * r)).ln() + (3.0 * r).sin();
            let k0 = curvature(&state(&g, 0.0, f)).unwrap();
            let k1 = curvature(&state(&g, 0.0, |r| f(r) + c)).unwrap();
            for (a, b) in k0.values().iter().zip(k1.values()) {
                prop_assert!((b - (-2.0 * c).exp() * a).abs() <= 1e-10 * (1.0 + a.abs()) * (-2.0 * c).exp().max(1.0));
            }
        }

        #[test]
        fn volume_monotone_in_u(seed in 0u64..1000, bump in 0.0f64..1.0) {
            let g = Arc::new(build_grid(GridKind::CartesianMaskedDisk, 1.0, 0.125).unwrap());
            let base = |x: f64, y: f64| ((x + seed as f64) * 2.0).sin() * y;
            let mk = |d: f64| {
                let u = g.active_nodes().iter().map(|n| base(n.x, n.y) + d * (n.x * n.x)).collect();
                ConformalState::new(0.0, ScalarField::new(g.clone(), Support::Active, u).unwrap()).unwrap()
            };
            prop_assert!(volume(&mk(0.0), Region::All) <= volume(&mk(bump), Region::All));
        }

        #[test]
        fn hyperbolic_barrier_monotone_in_delta(x in 0.0f64..0.999, t in 0.01f64..3.0, d in 1e-6f64..2.0) {
            prop_assert!(barrier_hyperbolic(x, t, d).unwrap() <= barrier_hyperbolic(x, t, 0.0).unwrap());
        }

        #[test]
        fn cusp_forms_agree(x in 1.01f64..1e4, t in 0.01f64..5.0, c in 0.01f64..10.0) {
            let cp = -0.5 * (c / 2.0).ln();
            let u = barrier_cusp_u(x, t, cp).unwrap();
            let v = barrier_cusp(x, t, c).unwrap();
            prop_assert!((2.0 * u - v.ln()).abs() < 1e-11 * (1.0 + v.ln().abs()));
        }
    }
}
