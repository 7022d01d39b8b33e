use super::*;
use crate::ode::Termination;

fn params(lambda: f64, q: f64) -> ModelParams {
    ModelParams::new(lambda, q).unwrap()
}

#[test]
fn parameter_regime_is_enforced() {
    assert!(ModelParams::new(1.0, 2.0).is_err()); // q must exceed 2 strictly
    assert!(ModelParams::new(1.0, 1.5).is_err());
    assert!(ModelParams::new(0.0, 3.0).is_err());
    assert!(ModelParams::new(-1.0, 3.0).is_err());
    assert!(ModelParams::new(1.0, 2.0 + 1e-9).is_ok());
}

#[test]
fn exponents_match_closed_form() {
    let e = exponents(&params(1.0, 3.0));
    assert_eq!(e.alpha, 0.25);
    assert_eq!(e.beta, -0.5);
    let e = exponents(&params(2.0, 4.0));
    assert!((e.alpha - 1.0 / 3.0).abs() < 1e-15);
    // alpha → 0 as q → 2⁺.
    let e = exponents(&params(1.0, 2.0 + 1e-9));
    assert!(e.alpha.abs() < 1e-9);
    // 0 < alpha < 1/2 across the regime.
    for q in [2.001, 2.5, 3.0, 10.0, 1e6] {
        let a = exponents(&params(1.0, q)).alpha;
        assert!(a > 0.0 && a < 0.5);
    }
}

#[test]
fn zero_gradient_power_is_zero() {
    assert_eq!(pow_abs(0.0, 2.5), 0.0);
    assert_eq!(pow_abs(-0.0, 7.3), 0.0);
    assert_eq!(pow_abs(-2.0, 3.0), 8.0);
}

#[test]
fn rhs_at_origin_gives_alpha_curvature() {
    // f″(0) = −α·f(0); for f(0) = −1 this is exactly α > 0.
    for (lambda, q) in [(1.0, 3.0), (0.5, 2.5), (2.0, 4.0)] {
        let p = params(lambda, q);
        let alpha = exponents(&p).alpha;
        let (d0, d1) = profile_rhs(0.0, -1.0, 0.0, &p);
        assert_eq!(d0, 0.0);
        assert_eq!(d1, alpha);
        // Sign flip for positive f(0).
        let (_, d1) = profile_rhs(0.0, 2.0, 0.0, &p);
        assert_eq!(d1, -2.0 * alpha);
        assert!(d1 < 0.0);
    }
}

#[test]
fn rhs_hand_evaluated_point() {
    // ξ=1, (f, f′) = (0, 1), λ=1, q=3: f″ = −1 + 1/2 − 0 = −0.5.
    let (d0, d1) = profile_rhs(1.0, 0.0, 1.0, &params(1.0, 3.0));
    assert_eq!(d0, 1.0);
    assert_eq!(d1, -0.5);
}

#[test]
fn small_xi_matches_taylor_expansion() {
    // f(ξ) = −1 + (α/2)ξ² + (α(1−α)/24)ξ⁴ + O(ξ⁶)  (odd derivatives vanish:
    // f is even; f⁗(0) = (1−α)f″(0) since (|f′|^q)″ → 0 at f′=0 for q > 2).
    let p = params(1.0, 3.0);
    let alpha = 0.25;
    let tol = Tolerances::default()
        .with_rel_tol(1e-13)
        .with_abs_tol(1e-15);
    let sol = solve_profile(&p, -1.0, 0.5, &tol).unwrap();
    let xi = 0.01;
    let (f, _) = sol.eval(xi).unwrap();
    let taylor2 = -1.0 + 0.5 * alpha * xi * xi;
    let taylor4 = taylor2 + alpha * (1.0 - alpha) / 24.0 * xi.powi(4);
    assert_eq!(taylor2, -1.0 + 1.25e-5);
    assert!(
        (f - taylor2).abs() < 1e-10,
        "two-term gap {:e}",
        (f - taylor2).abs()
    );
    assert!(
        (f - taylor4).abs() < 1e-12,
        "four-term gap {:e}",
        (f - taylor4).abs()
    );
}

#[test]
fn initial_state_is_exact() {
    let sol = solve_profile(&params(1.0, 3.0), -1.0, 10.0, &Tolerances::default()).unwrap();
    let (xi, f, fp) = sol.nodes().next().unwrap();
    assert_eq!(xi, 0.0);
    assert_eq!(f, -1.0);
    assert_eq!(fp, 0.0);
}

#[test]
fn degenerate_initial_value_is_rejected() {
    assert!(solve_profile(&params(1.0, 3.0), 0.0, 10.0, &Tolerances::default()).is_err());
}

#[test]
fn negative_start_crosses_zero_once_and_reaches_end() {
    let p = params(1.0, 3.0);
    let sol = solve_profile(&p, -1.0, 100.0, &Tolerances::default()).unwrap();
    assert_eq!(sol.termination, Termination::ReachedEnd);
    assert!(sol.violations.is_empty(), "{:?}", sol.violations);
    let xi0 = sol.xi0.expect("zero crossing");
    let (f_at, _) = sol.eval(xi0).unwrap();
    assert!(f_at.abs() < 1e-9, "f(xi0) = {f_at:e}");
    // f < 0 before ξ₀ and f > 0 after (single sign change).
    let mut sign_changes = 0;
    let mut prev = -1.0_f64;
    for (xi, f, _) in sol.nodes().skip(1) {
        if xi > 0.0 && f.signum() != prev.signum() && f != 0.0 {
            sign_changes += 1;
            prev = f;
        }
    }
    assert_eq!(sign_changes, 1);
    // Cross-check ξ₀ against a 10× tighter re-integration.
    let tight = Tolerances::default()
        .with_rel_tol(1e-11)
        .with_abs_tol(1e-13);
    let sol2 = solve_profile(&p, -1.0, 100.0, &tight).unwrap();
    let xi0_tight = sol2.xi0.unwrap();
    assert!(
        (xi0 - xi0_tight).abs() < 1e-6,
        "xi0 spread {:e}",
        (xi0 - xi0_tight).abs()
    );
}

#[test]
fn positive_start_collapses_at_finite_xi() {
    let sol = solve_profile(&params(1.0, 3.0), 1.0, 1e6, &Tolerances::default()).unwrap();
    match sol.termination {
        Termination::StepCollapsed { t_last } => {
            assert!(t_last.is_finite() && t_last > 0.0 && t_last < 1e6);
        }
        other => panic!("expected collapse, got {other:?}"),
    }
    assert!(sol.violations.is_empty());
}

#[test]
fn monotonicity_holds_on_negative_branch() {
    let sol = solve_profile(&params(1.0, 3.0), -1.0, 100.0, &Tolerances::default()).unwrap();
    let report = check_monotonicity(&sol).unwrap();
    assert!(
        report.passed(),
        "violations: {:?}",
        report.violations.first()
    );
    assert!(report.nodes_checked > 100);
}

#[test]
fn monotonicity_check_refuses_positive_start() {
    let sol = solve_profile(&params(1.0, 3.0), 1.0, 1e6, &Tolerances::default()).unwrap();
    assert!(check_monotonicity(&sol).is_err());
}

#[test]
fn monotonicity_check_catches_planted_defect() {
    let p = params(1.0, 3.0);
    let nodes = vec![(0.5, -0.9, 0.1), (1.0, -0.8, -0.05), (1.5, -0.7, 0.2)];
    let report = check_nodes_monotonicity(&p, nodes.into_iter());
    assert_eq!(report.violations.len(), 1);
    assert_eq!(report.violations[0].xi, 1.0);
}

#[test]
fn gradient_bound_is_one_at_two_lambda() {
    for (lambda, q) in [(1.0, 3.0), (0.5, 2.5), (2.0, 4.0), (3.3, 7.7)] {
        let b = gradient_bound_value(2.0 * lambda, &params(lambda, q));
        assert!((b - 1.0).abs() < 1e-14);
    }
}

#[test]
fn gradient_bound_holds_past_first_zero() {
    for (lambda, q) in [(1.0, 3.0), (2.0, 2.5)] {
        let p = params(lambda, q);
        let sol = solve_profile(&p, -1.0, 200.0, &Tolerances::default()).unwrap();
        let report = check_gradient_bound(&sol).unwrap();
        assert!(
            report.passed(),
            "({lambda}, {q}): {:?}",
            report.violations.first()
        );
        // Independent confirmation at 10× tighter tolerance.
        let tight = Tolerances::default()
            .with_rel_tol(1e-11)
            .with_abs_tol(1e-13);
        let sol2 = solve_profile(&p, -1.0, 200.0, &tight).unwrap();
        assert!(check_gradient_bound(&sol2).unwrap().passed());
    }
}

#[test]
fn rescaling_is_identity_at_minus_one() {
    let p = params(1.0, 3.0);
    let (rescaled, scale) = rescale_initial_value(&p, -1.0).unwrap();
    assert_eq!(scale, 1.0);
    assert_eq!(rescaled.lambda, 1.0);
}

#[test]
fn rescaling_collects_gradient_coefficient() {
    let p = params(1.0, 3.0);
    let (rescaled, scale) = rescale_initial_value(&p, -2.0).unwrap();
    assert_eq!(scale, 2.0);
    assert_eq!(rescaled.lambda, 4.0);
    assert!(rescale_initial_value(&p, 0.5).is_err());
    assert!(rescale_initial_value(&p, 0.0).is_err());
}

#[test]
fn rescaled_route_agrees_pointwise() {
    let p = params(1.0, 3.0);
    let f0 = -2.0;
    let (p2, scale) = rescale_initial_value(&p, f0).unwrap();
    let tol = Tolerances::default();
    let direct = solve_profile(&p, f0, 10.0, &tol).unwrap();
    let reduced = solve_profile(&p2, -1.0, 10.0, &tol).unwrap();
    for xi in [0.5, 1.0, 2.0] {
        let (fa, fpa) = direct.eval(xi).unwrap();
        let (fb, fpb) = reduced.eval(xi).unwrap();
        // The two routes agree to within 10× the integration tolerance.
        let bound = |v: f64| 10.0 * (tol.abs_tol + tol.rel_tol * v.abs());
        assert!(
            (fa - scale * fb).abs() < bound(fa),
            "f mismatch {:e} at xi={xi}",
            (fa - scale * fb).abs()
        );
        assert!((fpa - scale * fpb).abs() < bound(fpa));
    }
}

#[test]
fn tail_leg_continues_past_switch() {
    let p = params(1.0, 3.0);
    let sol = solve_profile(&p, -1.0, 1e4, &Tolerances::default()).unwrap();
    assert_eq!(sol.termination, Termination::ReachedEnd);
    assert!(sol.violations.is_empty(), "{:?}", sol.violations);
    assert!((sol.xi_max_reached - 1e4).abs() < 1e-6);
    // Dense output continuous across the seam.
    let seam = sol.head_end();
    let (f_a, fp_a) = sol.eval(seam * (1.0 - 1e-9)).unwrap();
    let (f_b, fp_b) = sol.eval(seam * (1.0 + 1e-9)).unwrap();
    assert!(((f_a - f_b) / f_a).abs() < 1e-6);
    assert!(((fp_a - fp_b) / fp_a).abs() < 1e-6);
}

#[test]
fn ode_residual_small_on_dense_output() {
    let p = params(1.0, 3.0);
    let sol = solve_profile(&p, -1.0, 1e6, &Tolerances::default()).unwrap();
    let worst = ode_residual_max(&sol, 1000).unwrap();
    assert!(worst < 1e-6, "max scaled residual {worst:e}");
}

#[test]
fn csv_export_shape_and_roundtrip() {
    let sol = solve_profile(&params(1.0, 3.0), -1.0, 100.0, &Tolerances::default()).unwrap();
    let csv = profile_csv(&sol, DEFAULT_CSV_SAMPLES).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "xi,f,fp,fpp");
    assert_eq!(lines.len(), 1 + DEFAULT_CSV_SAMPLES);
    // Shortest round-trip formatting: values parse back bit-identically.
    let fields: Vec<&str> = lines[33].split(',').collect();
    let xi: f64 = fields[0].parse().unwrap();
    let f: f64 = fields[1].parse().unwrap();
    let (f_again, _) = sol.eval(xi).unwrap();
    assert_eq!(f.to_bits(), f_again.to_bits());
}
