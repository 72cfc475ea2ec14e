use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::fields::{build_grid, Grid, GridKind};
use crate::metrics::barrier_hyperbolic;
use crate::operators::first_eigenpair;
use crate::stepper::FlowTrajectory;

fn radial(r: f64, n: usize) -> Arc<Grid> {
    Arc::new(build_grid(GridKind::Radial1d, r, r / n as f64).unwrap())
}

fn times() -> Vec<f64> {
    vec![0.0, 0.1, 0.25, 0.5, 1.0]
}

fn soliton(n: usize) -> FlowTrajectory {
    FlowTrajectory::sample_exact("soliton", &radial(0.9, n), &times()[1..], |x, y, t| {
        barrier_hyperbolic(x.hypot(y), t, 0.0)
    })
    .unwrap()
}

fn flat() -> FlowTrajectory {
    FlowTrajectory::sample_exact("flat", &radial(0.9, 32), &times(), |_, _, _| Ok(0.0)).unwrap()
}

fn hyperbolic_exact(n: usize) -> FlowTrajectory {
    FlowTrajectory::sample_exact("hyp", &radial(0.9, n), &times(), |x, y, t| {
        Ok((2.0 / (1.0 - x * x - y * y)).ln() + 0.5 * (2.0 * t).ln_1p())
    })
    .unwrap()
}

#[test]
fn soliton_attains_k_lower() {
    let mut prev = f64::INFINITY;
    for n in [32, 64, 128] {
        let r = check_k_lower(&soliton(n), 0.0).unwrap();
        let s = r.worst_slack.unwrap().abs();
        // the worst node sits just inside the boundary layer, where the
        // profile's scale is 1 - r, so the ratio only creeps up toward 4
        assert!(s < prev / 2.2, "n = {n}: {s}");
        prev = s;
    }
    assert!(prev < 2e-2);
}

#[test]
fn aronson_benilan_is_twice_k_lower() {
    for tr in [soliton(64), flat(), hyperbolic_exact(64)] {
        let k = check_k_lower(&tr, 1e-3).unwrap();
        let ab = check_aronson_benilan(&tr, 1e-3).unwrap();
        assert_eq!(ab.worst_slack.unwrap(), 2.0 * k.worst_slack.unwrap());
        assert_eq!(ab.location, k.location);
        assert_eq!(ab.tol, 2.0 * k.tol);
    }
}

#[test]
fn flat_bounds() {
    let tr = flat();
    let k = check_k_lower(&tr, 0.0).unwrap();
    // K = 0, so the slack 1/(2t) is smallest at the last time
    assert_eq!(k.worst_slack, Some(0.5));
    let ab = check_aronson_benilan(&tr, 0.0).unwrap();
    assert_eq!(ab.worst_slack, Some(1.0));
    assert_eq!(check_k_upper_neg(&tr, 1e-6).unwrap().verdict, Verdict::Skipped);
    assert_eq!(check_k_upper_pos(&tr, 1e-6).unwrap().verdict, Verdict::Skipped);
    let z = check_k_upper_zero(&tr, 1e-6).unwrap();
    assert_eq!((z.verdict, z.worst_slack), (Verdict::Pass, Some(0.0)));
    let u = check_conformal(&tr, ConformalBound::VsU0Zero, 1e-6).unwrap();
    assert_eq!(u.worst_slack, Some(0.0));
}

#[test]
fn hyperbolic_equality_cases() {
    let tr = hyperbolic_exact(128);
    let eps = 2e-2;
    let neg = check_k_upper_neg(&tr, eps).unwrap();
    assert_eq!(neg.verdict, Verdict::Pass);
    assert!(neg.worst_slack.unwrap().abs() < eps);
    let u = check_conformal(&tr, ConformalBound::VsU0Neg, eps).unwrap();
    // sampled exactly, so only rounding remains; t = 0 gives 0 exactly
    assert!(u.worst_slack.unwrap().abs() < 1e-14);
    let up = check_conformal(&tr, ConformalBound::UpperHyp, eps).unwrap();
    assert!(up.worst_slack.unwrap().abs() < 1e-14);
    let lo = check_conformal(&tr, ConformalBound::LowerHyp { t_min: 0.0 }, eps).unwrap();
    // u0 + ½log(2t+1) - ψ0 = ½log(1 + 1/(2t)), smallest at t = 1
    assert!((lo.worst_slack.unwrap() - 0.5 * 1.5f64.ln()).abs() < 1e-12);
    // K0 <= -1 also satisfies K0 <= 0
    assert_eq!(check_conformal(&tr, ConformalBound::VsU0Zero, eps).unwrap().verdict, Verdict::Pass);
    assert_eq!(check_conformal(&tr, ConformalBound::VsU0Pos, eps).unwrap().verdict, Verdict::Skipped);
}

#[test]
fn completeness_barrier_needs_unit_disk() {
    let g = radial(2.0, 16);
    let tr = FlowTrajectory::sample_exact("big", &g, &times(), |_, _, _| Ok(0.0)).unwrap();
    let r = check_conformal(&tr, ConformalBound::LowerHyp { t_min: 0.0 }, 0.0).unwrap();
    assert_eq!(r.verdict, Verdict::Skipped);
}

#[test]
fn cusp_constant() {
    let g = radial(20.0, 80);
    let c = 3.0;
    let tr = FlowTrajectory::sample_exact("cusp", &g, &[0.0, 0.5, 1.0], |x, y, t| {
        let r = x.hypot(y).max(2.0);
        let l = r.ln();
        Ok(0.5 * (c * t.max(1e-3) / (r * r * l * l)).ln())
    })
    .unwrap();
    let rep = check_conformal(&tr, ConformalBound::LowerCusp { r0: 2.0 }, 0.0).unwrap();
    assert!((rep.extras["C_star"] - c).abs() < 1e-12, "{rep:?}");
    assert!(rep.excluded > 0);
}

#[test]
fn eigen_constant_scales_with_v() {
    let g = radial(0.9, 64);
    let pair = first_eigenpair(&g).unwrap();
    let tr = hyperbolic_exact(64);
    let a = check_eigen_barrier(&tr, &pair).unwrap();
    let doubled = FlowTrajectory::sample_exact("2v", &g, &times(), |x, y, t| {
        Ok((2.0 / (1.0 - x * x - y * y)).ln() + 0.5 * (2.0 * t).ln_1p() + 0.5 * 2f64.ln())
    })
    .unwrap();
    let b = check_eigen_barrier(&doubled, &pair).unwrap();
    assert!(a.extras["C_star"] > 0.0);
    assert!((b.extras["C_star"] / a.extras["C_star"] - 2.0).abs() < 1e-12);
    assert_eq!(a.verdict, Verdict::Pass);
}

#[test]
fn comparison_cases() {
    let a = hyperbolic_exact(32);
    let r = check_comparison(&a, &a, 1e-10).unwrap();
    assert_eq!(r.worst_slack, Some(0.0));
    let f = flat();
    let r = check_comparison(&a, &f, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    let r = check_comparison(&f, &a, 1e-10).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(check_comparison(&a, &hyperbolic_exact(64), 1e-10).is_err());
}

#[test]
fn infinite_area_skips_volume_law() {
    assert_eq!(check_volume_law("flat", &[]).verdict, Verdict::Skipped);
}

#[test]
fn scaling_discrepancy_of_exact_rescaling() {
    let alpha = 0.5;
    let reference = hyperbolic_exact(32);
    let scaled_times: Vec<f64> = times().iter().map(|t| t * alpha * alpha).collect();
    let scaled = FlowTrajectory::sample_exact("scaled", &radial(0.9 * alpha, 32), &scaled_times, |x, y, s| {
        let (x, y, t) = (x / alpha, y / alpha, s / (alpha * alpha));
        Ok((2.0 / (1.0 - x * x - y * y)).ln() + 0.5 * (2.0 * t).ln_1p())
    })
    .unwrap();
    assert!(scaling_discrepancy(&reference, &scaled, alpha).unwrap() < 1e-13);
    assert!(scaling_discrepancy(&reference, &scaled, 0.4).is_err());
    let orders = observed_orders(&[4e-3, 1e-3, 2.5e-4]);
    assert!(orders.iter().all(|o| (o - 2.0).abs() < 1e-12));
    assert_eq!(check_scaling_symmetry("s", 1e-13, 1e-4, &orders).verdict, Verdict::Pass);
    assert_eq!(check_scaling_symmetry("s", 1e-13, 1e-4, &[1.5]).verdict, Verdict::Fail);
}

#[test]
fn reports_are_reproducible() {
    let tr = soliton(64);
    let a = serde_json::to_string(&check_k_lower(&tr, 1e-3).unwrap()).unwrap();
    let b = serde_json::to_string(&check_k_lower(&tr, 1e-3).unwrap()).unwrap();
    assert_eq!(a, b);
    let back: BoundReport = serde_json::from_str(&a).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), a);
}

proptest! {
    #[test]
    fn verdict_iff_slack_within_tol(values in prop::collection::vec(-1.0f64..1.0, 1..20), tol in 0.0f64..0.5) {
        let mut s = Slack::default();
        for (i, v) in values.iter().enumerate() {
            s.push(*v, i, 0.0, 1.0);
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let r = BoundReport::measured(BoundId::KLower, "p", s, tol, 0);
        prop_assert_eq!(r.worst_slack, Some(min));
        prop_assert_eq!(r.verdict == Verdict::Pass, min >= -tol);
    }

    #[test]
    fn ab_identity_on_random_states(seed in 0u64..200) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = radial(1.0, 24);
        let amp: f64 = rng.gen_range(-2.0..2.0);
        let tr = FlowTrajectory::sample_exact("rand", &g, &[0.0, 0.3, 0.7], |x, y, t| {
            Ok(amp * (x * x + y * y).sin() + t * rng_free(x))
        }).unwrap();
        let k = check_k_lower(&tr, 0.0).unwrap();
        let ab = check_aronson_benilan(&tr, 0.0).unwrap();
        prop_assert_eq!(ab.worst_slack.unwrap(), 2.0 * k.worst_slack.unwrap());
    }
}

fn rng_free(x: f64) -> f64 {
    (3.0 * x).cos()
}
