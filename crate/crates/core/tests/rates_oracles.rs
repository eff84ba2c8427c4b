mod common;

use periodic_mv::coefficients::{trapezoid, DeclaredConstants, LyapunovFn, TimeProfile};
use periodic_mv::rates::*;
use std::f64::consts::{E, PI};
use std::sync::Arc;

#[test]
fn eigenvalue_matches_finite_volume_oracle() {
    for d0 in [0.0, 1.0, 2.0] {
        for l in [0.5, 1.0, 2.0] {
            let (d1, _) = mixed_eigenvalue(d0, l).unwrap();
            let oracle = common::eigen_oracle(d0, l);
            assert!((d1 - oracle).abs() <= 1e-4 * oracle.max(1.0), "D0={d0} l={l}: {d1} vs {oracle}");
        }
    }
}

#[test]
fn eigen_table_is_a_scaled_sine_without_drift() {
    let psi = build_psi_eigen(0.0, PI / 2.0).unwrap();
    assert!((psi.param("d1").unwrap() - 2.0).abs() < 1e-8);
    let err = psi.grid.iter().zip(&psi.values).map(|(r, v)| (v - r.sin()).abs()).fold(0.0, f64::max);
    assert!(err < 1e-8, "{err}");
    // flat beyond l
    assert_eq!(psi.eval(5.0), psi.eval(PI / 2.0));
}

#[test]
fn example31_table_matches_direct_quadrature() {
    let (t1, t2, big_r) = (1.0, 1.0, 1.0);
    let psi = build_psi_example31(t1, t2, big_r, 1e-14).unwrap();
    for r in [0.0, 0.3, 1.0, 2.5, 7.0, 20.0] {
        let want = common::slope_oracle(t1, t2, big_r, r);
        assert!((psi.deriv(r) - want).abs() < 1e-8 * want, "ψ′({r}): {} vs {want}", psi.deriv(r));
    }
    // ψ(r) = ∫₀^r ψ′ with the slope oracle
    for r in [0.5, 3.0] {
        let want = common::simpson(|s| common::slope_oracle(t1, t2, big_r, s), 0.0, r, 200);
        assert!((psi.eval(r) - want).abs() < 1e-7 * want, "ψ({r}): {} vs {want}", psi.eval(r));
    }
}

#[test]
fn example31_other_parameters() {
    let psi = build_psi_example31(0.49, 1.0, 2.0 * 1.49f64.sqrt(), 1e-14).unwrap();
    for r in [0.0, 1.0, 4.0] {
        let want = common::slope_oracle(0.49, 1.0, 2.0 * 1.49f64.sqrt(), r);
        assert!((psi.deriv(r) - want).abs() < 1e-8 * want);
    }
    assert!(psi.c1 > 0.0 && psi.c1 < psi.c2);
}

#[test]
fn kappa_matches_brute_force_grid() {
    let v = LyapunovFn::ExpPower { p: 1.0 };
    let e = kappa_l_beta(0.0, 1.0, &v, 2.0, 1.0, 6.0, 1).unwrap();
    // 2-scalar grid over (x, y) with |x − y| ≥ 2
    let steps = 1200;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = -6.0 + 12.0 * i as f64 / steps as f64;
            let y = -6.0 + 12.0 * j as f64 / steps as f64;
            if (x - y).abs() >= 2.0 {
                let s = x.abs().exp() + y.abs().exp();
                best = best.min(s / (1.0 + s));
            }
        }
    }
    let exact = 2.0 * E / (1.0 + 2.0 * E);
    assert!((best - exact).abs() < 1e-4);
    assert!((e.value - best).abs() < 1e-4, "{} vs {best}", e.value);
    assert!((e.value - exact).abs() < 1e-10);
    assert!(!e.boundary_hit);
}

#[test]
fn kappa_for_non_radial_weight_in_one_dimension() {
    let v = LyapunovFn::Custom {
        value: Arc::new(|x: &[f64]| x[0].abs().exp()),
        gradient: Arc::new(|x: &[f64], g: &mut [f64]| g[0] = x[0].signum() * x[0].abs().exp()),
    };
    let e = kappa_l_beta(0.0, 1.0, &v, 2.0, 1.0, 6.0, 1).unwrap();
    assert!((e.value - 2.0 * E / (1.0 + 2.0 * E)).abs() < 1e-8);
    assert!(kappa_l_beta(0.0, 1.0, &v, 2.0, 1.0, 6.0, 2).is_err());
}

#[test]
fn kappa_scales_with_the_diffusion_strength() {
    // K₀ = α θ₀, K₁ = α θ₁ gives κ = k₀ α
    let v = LyapunovFn::SmoothExpPower { p: 1.0 };
    let (theta0, theta1) = (4.0, 1.0);
    let k = |a: f64| kappa_l_beta(a * theta0, a * theta1, &v, 2.0, 0.1, 8.0, 1).unwrap().value;
    let k0 = k(1.0);
    for a in [0.5, 1.5, 3.0] {
        assert!((k(a) - k0 * a).abs() < 1e-10 * a.max(1.0));
    }
}

#[test]
fn kappa_flags_a_box_that_is_too_small() {
    // (10 − S)/(1 + S) decreases in S, so the infimum sits at the box corner
    let v = LyapunovFn::Quadratic { scale: 1.0 };
    let e = kappa_l_beta(-5.0, -1.0, &v, 1.0, 1.0, 3.0, 2).unwrap();
    assert!(e.boundary_hit);
    assert!((e.value - (10.0 - 18.0) / 19.0).abs() < 1e-9);
    // (−S − 2)/(1 + S) increases in S: interior minimum on |x| + |y| = l
    let e = kappa_l_beta(1.0, -1.0, &v, 1.0, 1.0, 3.0, 2).unwrap();
    assert!(!e.boundary_hit);
    assert!((e.value + 1.0 + 1.0 / 1.5).abs() < 1e-6, "{}", e.value);
}

#[test]
fn alpha_for_quadratic_weight_matches_brute_force() {
    let v = LyapunovFn::Quadratic { scale: 1.0 };
    let (beta, c_psi) = (0.7, 0.9);
    let e = alpha_l_beta(1.0, &v, None, c_psi, 1.0, beta, 3.0, 1).unwrap();
    let mut best: f64 = 0.0;
    let steps = 600;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = -3.0 + 6.0 * i as f64 / steps as f64;
            let y = -3.0 + 6.0 * j as f64 / steps as f64 + 1e-7;
            let r = (x - y).abs();
            if r > 0.0 && r < 1.0 {
                let q = c_psi * (2.0 * x - 2.0 * y).abs() / (r * (1.0 / beta + x * x + y * y));
                best = best.max(q);
            }
        }
    }
    assert!((e.value - 2.0 * beta * c_psi).abs() < 1e-9);
    assert!((e.value - best).abs() < 1e-4, "{} vs {best}", e.value);
}

#[test]
fn alpha_vanishes_monotonically_as_beta_shrinks() {
    let v = LyapunovFn::SmoothExpPower { p: 1.0 };
    let vals: Vec<f64> = [1.0, 0.1, 0.01]
        .iter()
        .map(|&b| alpha_l_beta(1.0, &v, None, 1.0, 2.0, b, 4.0, 1).unwrap().value)
        .collect();
    assert!(vals[0] > vals[1] && vals[1] > vals[2] && vals[2] > 0.0, "{vals:?}");
    // radial search in two dimensions agrees with the 1-D value along a line
    let two = alpha_l_beta(1.0, &v, None, 1.0, 2.0, 0.1, 4.0, 2).unwrap().value;
    assert!(two >= vals[1] - 1e-9, "{two} vs {}", vals[1]);
}

#[test]
fn alpha_with_diffusion_deviation() {
    // σ̂(x) = x in 1-D adds |x − y||x V′(x) + y V′(y)|/(|x − y|(...))
    let v = LyapunovFn::Quadratic { scale: 1.0 };
    let sh = |x: &[f64]| nalgebra::DMatrix::from_element(1, 1, x[0]);
    let with = alpha_l_beta(0.0, &v, Some(&sh), 1.0, 1.0, 1.0, 2.0, 1).unwrap().value;
    // brute force of (2x² + 2y²)/(1 + x² + y²) over the box
    let want = 2.0 * 8.0 / 9.0;
    assert!((with - want).abs() < 1e-6, "{with} vs {want}");
}

fn constants(k0: f64, k1: f64, theta: f64) -> DeclaredConstants {
    DeclaredConstants {
        k0: Some(TimeProfile::Constant(k0)),
        k1: Some(TimeProfile::Constant(k1)),
        theta: Some(TimeProfile::Constant(theta)),
        alpha: Some(TimeProfile::Constant(1.0)),
        beta: Some(1.0),
        l: Some(1.0),
        lyapunov: Some(LyapunovFn::Constant { value: 1.0 }),
        ..Default::default()
    }
}

#[test]
fn wpsiv_takes_the_smaller_branch() {
    // κ = 2K₁/(1 + 2) = 3 and u_l − 2K₀β − α = 1
    let mut inputs = RateInputs::new(1.0, 1, constants(0.0, 4.5, 0.0));
    inputs.u_l = Some(TimeProfile::Constant(1.0));
    let psi = TabulatedCostFunction::linear();
    let r = rate_wpsiv(&inputs, &psi, 1.0).unwrap();
    assert!((r.kappa_branch_integral - 3.0).abs() < 1e-12);
    assert!((r.local_branch_integral - 1.0).abs() < 1e-12);
    assert!((r.lambda - 1.0).abs() < 1e-12);
    // θ equal to the minimum cancels it
    let mut inputs = RateInputs::new(1.0, 1, constants(0.0, 4.5, 1.0));
    inputs.u_l = Some(TimeProfile::Constant(1.0));
    assert!(rate_wpsiv(&inputs, &psi, 1.0).unwrap().lambda.abs() < 1e-12);
}

#[test]
fn wpsiv_reproduces_hand_composed_constants() {
    let scn = periodic_mv::coefficients::scenario_by_name("nondissipative-periodic").unwrap();
    let c = scn.coefficients.constants.clone();
    let (d0, l, beta) = (c.d0.unwrap(), c.l.unwrap(), c.beta.unwrap());
    let psi = build_psi_eigen(d0, l).unwrap();
    let inputs = RateInputs::new(1.0, 1, c.clone());
    let r = rate_wpsiv(&inputs, &psi, 1.0).unwrap();
    let d1 = mixed_eigenvalue(d0, l).unwrap().0;
    assert!((r.d1 - d1).abs() < 1e-12);
    let v = c.lyapunov.clone().unwrap();
    let alpha = c.alpha.clone().unwrap();
    let unit_alpha = alpha_l_beta(1.0, &v, None, psi.c_psi, l, beta, inputs.search_bound, 1).unwrap().value;
    for s in r.samples.iter().step_by(17) {
        let a = alpha.eval(s.t, 1.0);
        let k0 = c.k0.as_ref().unwrap().eval(s.t, 1.0);
        let k1 = c.k1.as_ref().unwrap().eval(s.t, 1.0);
        let kappa = kappa_l_beta(k0, k1, &v, l, beta, inputs.search_bound, 1).unwrap().value;
        // second branch α_t(D₁ − 2θ₀β) − α_{l,β}(t)
        let theta0 = k0 / a;
        let local = a * (d1 - 2.0 * theta0 * beta) - a * unit_alpha;
        assert!((s.kappa_lb - kappa).abs() < 1e-9);
        assert!((s.local - local).abs() < 1e-9 * (1.0 + local.abs()), "{} vs {local}", s.local);
        assert!((s.lambda_lb - kappa.min(local)).abs() < 1e-12);
    }
    let h = 1.0 / WPSIV_SAMPLES as f64;
    let by_hand: f64 = r.samples.iter().map(|s| s.lambda_lb - s.theta).sum::<f64>() * h;
    assert!((r.lambda - by_hand).abs() < 1e-12);
    assert!(r.k1_integral > 0.0);
}

#[test]
fn granular_psi_rate_composition() {
    let psi = build_psi_example31(1.0, 1.0, 1.0, 1e-14).unwrap();
    let alpha = TimeProfile::sinusoid(1.0, 0.5);
    let zero = TimeProfile::Constant(0.0);
    let g = granular_psi_rates(&alpha, &zero, &psi, 1.0);
    // θ ≡ 0: λ = ∫κ = 2∫α/c₂, and the two forms agree
    assert!((g.composed_rate - 2.0 / psi.c2).abs() < 1e-9);
    assert!(!g.mismatch);
    let w = TimeProfile::Constant(0.1);
    let g = granular_psi_rates(&alpha, &w, &psi, 1.0);
    let composed = 2.0 / psi.c2 - 0.2 * psi.c2 / psi.c1;
    let display = 2.0 * (1.0 / psi.c2 - 0.1 / psi.c1);
    assert!((g.composed_rate - composed).abs() < 1e-9);
    assert!((g.display_rate - display).abs() < 1e-9);
    assert!(g.mismatch);
    // κ ≡ θ c₂ gives zero
    let k = TimeProfile::Constant(0.3);
    let th = TimeProfile::Constant(0.3 / psi.c2);
    assert!(rate_wpsi(&k, &th, &psi, 1.0).abs() < 1e-12);
}

#[test]
fn quadratures_are_resolution_stable() {
    let k1 = TimeProfile::sinusoid(-1.0, 0.7);
    let k2 = TimeProfile::Constant(0.2);
    let coarse = rate_w2(&k1, &k2, 1.0);
    let fine = -trapezoid(|t| k1.eval(t, 1.0) + k2.eval(t, 1.0), 1.0, 2 * PERIOD_NODES);
    assert!((coarse - fine).abs() < 1e-6 * fine.abs());
    let g = TimeProfile::sinusoid(1.0, 0.5);
    let a = TimeProfile::Constant(1.0);
    let lam = TimeProfile::Constant(1.0);
    let c = log_sobolev_constant(&g, &a, &lam, 0.0, 0.0, 1.0, 1.0);
    let doubled = log_sobolev_constant(&g, &TimeProfile::Constant(2.0), &lam, 0.0, 0.0, 1.0, 1.0);
    assert!((doubled - 4.0 * c).abs() < 1e-12 * c);
    assert_eq!(log_sobolev_constant(&g, &TimeProfile::Constant(0.0), &lam, 0.3, 0.0, 1.0, 1.0), 0.0);
}

#[test]
fn phi_closed_form() {
    let want = 1.0 / (1.0 - (-1.0f64).exp());
    assert!((entropy_constant_phi(1.0, 1.0, 0.0, 1.0) - want).abs() < 1e-15);
    assert!((want - 1.581_976_706_869_326_4).abs() < 1e-15);
}

#[test]
fn entropy_constant_from_declared_profiles() {
    let c = DeclaredConstants {
        gamma: Some(TimeProfile::Constant(1.0)),
        sigma_norm: Some(TimeProfile::Constant(1.0)),
        lambda: Some(TimeProfile::Constant(0.5)),
        kappa1: Some(TimeProfile::Constant(0.0)),
        kappa2: Some(TimeProfile::Constant(0.0)),
        ..Default::default()
    };
    let inputs = RateInputs::new(1.0, 2, c);
    let e = entropy_decay_constant(&inputs, 1.0, 1.0).unwrap();
    // κ̄₁ = κ̄₂ = 0 leaves φ = λ̄; c = 4∫₀¹ e^{−2(1−τ)} dτ with zero start
    assert!((e.phi - 0.5).abs() < 1e-12);
    let c_sr = 2.0 * (1.0 - (-2.0f64).exp());
    assert!((e.c_sr - c_sr).abs() < 1e-6, "{} vs {c_sr}", e.c_sr);
    assert!((e.combined - e.c_sr * e.phi).abs() < 1e-15);
    assert!(entropy_decay_constant(&inputs, 2.0, 1.0).is_err());
    let missing = RateInputs::new(1.0, 2, DeclaredConstants::default());
    assert!(entropy_decay_constant(&missing, 1.0, 1.0).is_err());
}
