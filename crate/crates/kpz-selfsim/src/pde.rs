//! Method-of-lines cross-check of the self-similar ansatz at PDE level.
//!
//! The field `u(x,t) = (T0−t)^α f(ξ)`, `ξ = |x|(T0−t)^{−1/2}` solves
//! `u_t = u_xx + λ|u_x|^q` exactly. This module evolves that PDE on a
//! uniform grid over [−L, L] by second-order central differences in space
//! (both for u_xx and u_x; the comparison solution is smooth, so central
//! differencing keeps the order study clean) and the adaptive explicit
//! engine in time, from exact self-similar initial data with exact
//! time-dependent Dirichlet boundary data. Agreement with the closed form
//! at `t_end` and a clean second-order refinement ratio validate the
//! ansatz, the exponents, and the profile all at once.
//!
//! The time step is capped at 0.4·dx² on top of error control.

use crate::ode::{self, IvpSpec, Termination, Tolerances};
use crate::profile::{exponents, pow_abs, ModelParams, ProfileSolution};
use crate::{Error, Result};

pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
pub const DEFAULT_GRID_POINTS: usize = 1025;
pub const DEFAULT_T_END: f64 = 0.5;

/// A 1-D grid field: uniform odd-count grid on [−L, L] (so x = 0 is a
/// node), values, and time stamp.
#[derive(Debug, Clone)]
pub struct PdeField {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub time: f64,
    pub dx: f64,
    pub half_width: f64,
}

impl PdeField {
    /// Largest |u(x) − u(−x)| over the grid.
    pub fn evenness_gap(&self) -> f64 {
        let n = self.u.len();
        (0..n / 2)
            .map(|i| (self.u[i] - self.u[n - 1 - i]).abs())
            .fold(0.0, f64::max)
    }
}

fn validate_grid(l: f64, n: usize) -> Result<f64> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidInput("half-width L must be positive".into()));
    }
    if n < 65 || n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "grid count must be odd and >= 65, got {n}"
        )));
    }
    Ok(2.0 * l / (n - 1) as f64)
}

/// Symmetric grid with x = 0 exactly at the center node.
fn make_grid(l: f64, n: usize, dx: f64) -> Vec<f64> {
    let mid = (n - 1) / 2;
    (0..n)
        .map(|i| {
            if i == mid {
                0.0
            } else {
                (i as f64 - mid as f64) * dx
            }
        })
        .map(|x| x.clamp(-l, l))
        .collect()
}

/// The closed-form self-similar field built on a computed profile.
pub struct SelfSimilarField<'a> {
    pub params: ModelParams,
    pub profile: &'a ProfileSolution,
}

impl<'a> SelfSimilarField<'a> {
    pub fn new(params: ModelParams, profile: &'a ProfileSolution) -> Self {
        Self { params, profile }
    }

    fn tau(&self, t: f64) -> Result<f64> {
        let t0 = self.params.t0;
        if !(t < t0) || t < 0.0 {
            return Err(Error::InvalidInput(format!(
                "time {t} outside [0, T0 = {t0})"
            )));
        }
        Ok(t0 - t)
    }

    /// u(x, t) = (T0−t)^α f(|x|(T0−t)^{−1/2}); even in x by construction.
    pub fn u(&self, x: f64, t: f64) -> Result<f64> {
        let tau = self.tau(t)?;
        let alpha = exponents(&self.params).alpha;
        let xi = x.abs() / tau.sqrt();
        let (f, _) = self.profile.eval(xi)?;
        Ok(tau.powf(alpha) * f)
    }

    /// Exact time derivative:
    /// u_t = (T0−t)^{α−1} (−α f(ξ) + (ξ/2) f′(ξ)).
    pub fn u_t(&self, x: f64, t: f64) -> Result<f64> {
        let tau = self.tau(t)?;
        let alpha = exponents(&self.params).alpha;
        let xi = x.abs() / tau.sqrt();
        let (f, fp) = self.profile.eval(xi)?;
        Ok(tau.powf(alpha - 1.0) * (-alpha * f + 0.5 * xi * fp))
    }
}

/// Semidiscrete right-hand side: second-order central differences at
/// interior nodes, the exact Dirichlet data's time derivative at the two
/// boundary nodes. The symmetric form `(u[i−1] + u[i+1]) − 2u[i]` keeps the
/// stencil bitwise even in x.
pub fn semidiscrete_rhs(
    field: &PdeField,
    params: &ModelParams,
    boundary: &SelfSimilarField<'_>,
    out: &mut [f64],
) -> Result<()> {
    let n = field.u.len();
    if out.len() != n {
        return Err(Error::InvalidInput("output buffer length mismatch".into()));
    }
    let inv_dx2 = 1.0 / (field.dx * field.dx);
    let inv_2dx = 1.0 / (2.0 * field.dx);
    let (lambda, q) = (params.lambda, params.q);
    for i in 1..n - 1 {
        let uxx = ((field.u[i - 1] + field.u[i + 1]) - 2.0 * field.u[i]) * inv_dx2;
        let ux = (field.u[i + 1] - field.u[i - 1]) * inv_2dx;
        out[i] = uxx + lambda * pow_abs(ux, q);
    }
    out[0] = boundary.u_t(-field.half_width, field.time)?;
    out[n - 1] = boundary.u_t(field.half_width, field.time)?;
    Ok(())
}

/// One method-of-lines run compared against the closed form at `t_end`.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub n: usize,
    pub dx: f64,
    pub t_end: f64,
    pub max_rel_err: f64,
    pub l2_rel_err: f64,
    /// Set when the discrete system broke down before `t_end`.
    pub collapsed_at: Option<f64>,
    pub field: PdeField,
    pub u_exact: Vec<f64>,
}

pub fn evolve_once(
    params: &ModelParams,
    profile: &ProfileSolution,
    l: f64,
    n: usize,
    t_end: f64,
    tol: &Tolerances,
) -> Result<EvolveOutcome> {
    let dx = validate_grid(l, n)?;
    let t0_model = params.t0;
    if !(t_end < t0_model) || t_end < 0.0 {
        return Err(Error::InvalidInput(format!(
            "t_end = {t_end} must lie in [0, T0 = {t0_model})"
        )));
    }
    let xi_reach = l / (t0_model - t_end).sqrt();
    if xi_reach > profile.xi_max_reached {
        return Err(Error::OutOfRange(format!(
            "profile covers xi up to {}, but the run needs {xi_reach}; enlarge xi_max",
            profile.xi_max_reached
        )));
    }

    let ssf = SelfSimilarField::new(*params, profile);
    let x = make_grid(l, n, dx);
    let u0: Vec<f64> = x.iter().map(|&xi| ssf.u(xi, 0.0)).collect::<Result<_>>()?;

    let exact_at = |t: f64| -> Result<Vec<f64>> { x.iter().map(|&xx| ssf.u(xx, t)).collect() };

    let (field, collapsed_at) = if t_end == 0.0 {
        (
            PdeField {
                x: x.clone(),
                u: u0,
                time: 0.0,
                dx,
                half_width: l,
            },
            None,
        )
    } else {
        let (lambda, q) = (params.lambda, params.q);
        let inv_dx2 = 1.0 / (dx * dx);
        let inv_2dx = 1.0 / (2.0 * dx);
        let ssf_rhs = SelfSimilarField::new(*params, profile);
        let rhs = move |t: f64, u: &[f64], du: &mut [f64]| {
            let nn = u.len();
            for i in 1..nn - 1 {
                let uxx = ((u[i - 1] + u[i + 1]) - 2.0 * u[i]) * inv_dx2;
                let ux = (u[i + 1] - u[i - 1]) * inv_2dx;
                du[i] = uxx + lambda * pow_abs(ux, q);
            }
            // Boundary tracks the exact solution; errors surface as NaN.
            du[0] = ssf_rhs.u_t(-l, t).unwrap_or(f64::NAN);
            du[nn - 1] = ssf_rhs.u_t(l, t).unwrap_or(f64::NAN);
        };
        let spec = IvpSpec::new(rhs, 0.0, t_end, u0);
        let tol_run = Tolerances {
            max_step: (0.4 * dx * dx).min(tol.max_step),
            ..*tol
        };
        let traj = ode::integrate(&spec, &tol_run, &[])?;
        let collapsed = match traj.termination() {
            Termination::ReachedEnd => None,
            Termination::StepCollapsed { t_last } => Some(t_last),
            Termination::EventFired { t, .. } => Some(t),
        };
        let time = traj.t_last();
        let u = traj.last_y().to_vec();
        (
            PdeField {
                x: x.clone(),
                u,
                time,
                dx,
                half_width: l,
            },
            collapsed,
        )
    };

    let u_exact = exact_at(field.time)?;
    let mut max_abs = 0.0_f64;
    let mut scale = 0.0_f64;
    let mut l2_num = 0.0_f64;
    let mut l2_den = 0.0_f64;
    for i in 0..n {
        let d = field.u[i] - u_exact[i];
        max_abs = max_abs.max(d.abs());
        scale = scale.max(u_exact[i].abs());
        l2_num += d * d;
        l2_den += u_exact[i] * u_exact[i];
    }
    Ok(EvolveOutcome {
        n,
        dx,
        t_end: field.time,
        max_rel_err: if max_abs == 0.0 { 0.0 } else { max_abs / scale },
        l2_rel_err: if l2_num == 0.0 {
            0.0
        } else {
            (l2_num / l2_den).sqrt()
        },
        collapsed_at,
        field,
        u_exact,
    })
}

/// Refinement table: the run at N and at 2N−1, with the max-norm error
/// ratio (≈ 4 for second order).
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub coarse: EvolveOutcome,
    pub fine: EvolveOutcome,
    pub refinement_ratio: f64,
}

pub fn evolve_and_compare(
    params: &ModelParams,
    profile: &ProfileSolution,
    l: f64,
    n: usize,
    t_end: f64,
    tol: &Tolerances,
) -> Result<ComparisonReport> {
    let coarse = evolve_once(params, profile, l, n, t_end, tol)?;
    let fine = evolve_once(params, profile, l, 2 * n - 1, t_end, tol)?;
    if let Some(t) = coarse.collapsed_at.or(fine.collapsed_at) {
        return Err(Error::InvariantViolation(format!(
            "discrete system broke down at t = {t} before t_end = {t_end}"
        )));
    }
    let refinement_ratio = coarse.max_rel_err / fine.max_rel_err;
    Ok(ComparisonReport {
        coarse,
        fine,
        refinement_ratio,
    })
}

/// CSV snapshot: header `x,u_numeric,u_exact,abs_err`.
pub fn snapshot_csv(outcome: &EvolveOutcome) -> String {
    let mut out = String::from("x,u_numeric,u_exact,abs_err\n");
    for i in 0..outcome.n {
        let err = (outcome.field.u[i] - outcome.u_exact[i]).abs();
        out.push_str(&format!(
            "{},{},{},{}\n",
            outcome.field.x[i], outcome.field.u[i], outcome.u_exact[i], err
        ));
    }
    out
}

/// JSON summary {lambda, q, T0, L, N, t_end, max_rel_err, l2_rel_err,
/// refinement_ratio}.
pub fn summary_json(params: &ModelParams, report: &ComparisonReport) -> serde_json::Value {
    serde_json::json!({
        "lambda": params.lambda,
        "q": params.q,
        "T0": params.t0,
        "L": report.coarse.field.half_width,
        "N": report.coarse.n,
        "t_end": report.coarse.t_end,
        "max_rel_err": report.coarse.max_rel_err,
        "l2_rel_err": report.coarse.l2_rel_err,
        "refinement_ratio": report.refinement_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::solve_profile;

    fn params(lambda: f64, q: f64) -> ModelParams {
        ModelParams::new(lambda, q).unwrap()
    }

    fn profile_to(params: &ModelParams, xi_max: f64) -> ProfileSolution {
        solve_profile(params, -1.0, xi_max, &Tolerances::default()).unwrap()
    }

    #[test]
    fn field_value_at_origin_and_evenness() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 50.0);
        let ssf = SelfSimilarField::new(p, &prof);
        // x = 0, t = 0, T0 = 1, f0 = −1: u = 1^α · f(0) = −1.
        assert_eq!(ssf.u(0.0, 0.0).unwrap(), -1.0);
        for (x, t) in [(0.7, 0.0), (3.0, 0.3), (7.5, 0.6)] {
            let a = ssf.u(x, t).unwrap();
            let b = ssf.u(-x, t).unwrap();
            assert_eq!(a, b, "evenness at ({x}, {t})");
        }
        assert!(ssf.u(0.0, 1.0).is_err()); // t must stay below T0
        assert!(ssf.u(1e9, 0.0).is_err()); // xi out of computed range
    }

    #[test]
    fn scaled_field_approaches_stationary_power_law() {
        // (T0−t)^{1/(q−1)}·u(x, t) → C·|x|^{q/(q−1)} as t → T0⁻: the ansatz
        // exponents give α − q/(2(q−1)) = −1/(q−1), so the scaled value at
        // q=3, λ=1, |x|=1 tends to C ≈ 0.3849.
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 2e3);
        let ssf = SelfSimilarField::new(p, &prof);
        let c = crate::asymptotics::constants(&p).c;
        let t = 1.0 - 1e-6; // xi = 1000 at x = 1
        let scaled = (1.0_f64 - t).powf(0.5) * ssf.u(1.0, t).unwrap();
        assert!(
            ((scaled - c) / c).abs() < 1e-3,
            "scaled limit {scaled} vs C = {c}"
        );
        assert!((c - 0.3849).abs() < 1e-4);
    }

    #[test]
    fn exact_time_derivative_matches_finite_difference() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 100.0);
        let ssf = SelfSimilarField::new(p, &prof);
        let (x, t, h) = (1.3, 0.4, 1e-6);
        let fd = (ssf.u(x, t + h).unwrap() - ssf.u(x, t - h).unwrap()) / (2.0 * h);
        let exact = ssf.u_t(x, t).unwrap();
        assert!((fd - exact).abs() < 1e-7, "gap {:e}", (fd - exact).abs());
    }

    #[test]
    fn rhs_vanishes_on_constant_field() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 100.0);
        let ssf = SelfSimilarField::new(p, &prof);
        let n = 65;
        let dx = validate_grid(4.0, n).unwrap();
        let x = make_grid(4.0, n, dx);
        let field = PdeField {
            x,
            u: vec![2.5; n],
            time: 0.1,
            dx,
            half_width: 4.0,
        };
        let mut out = vec![0.0; n];
        semidiscrete_rhs(&field, &p, &ssf, &mut out).unwrap();
        for v in &out[1..n - 1] {
            assert_eq!(*v, 0.0);
        }
    }

    #[test]
    fn rhs_on_linear_field_is_gradient_power() {
        // u = a + bx: u_xx = 0 and u_x = b exactly under central differences,
        // so the interior rhs is |b|³ at λ=1, q=3.
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 100.0);
        let ssf = SelfSimilarField::new(p, &prof);
        let n = 65;
        let (a, b) = (0.3, -1.7);
        let dx = validate_grid(4.0, n).unwrap();
        let x = make_grid(4.0, n, dx);
        let u = x.iter().map(|&xx| a + b * xx).collect();
        let field = PdeField {
            x,
            u,
            time: 0.0,
            dx,
            half_width: 4.0,
        };
        let mut out = vec![0.0; n];
        semidiscrete_rhs(&field, &p, &ssf, &mut out).unwrap();
        let expect = b.abs().powi(3);
        for v in &out[1..n - 1] {
            assert!((v - expect).abs() < 1e-12, "rhs {v} vs {expect}");
        }
    }

    #[test]
    fn rhs_consistency_is_second_order_on_exact_field() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 100.0);
        let ssf = SelfSimilarField::new(p, &prof);
        let worst = |n: usize| -> f64 {
            let dx = validate_grid(8.0, n).unwrap();
            let x = make_grid(8.0, n, dx);
            let u: Vec<f64> = x.iter().map(|&xx| ssf.u(xx, 0.0).unwrap()).collect();
            let field = PdeField {
                x: x.clone(),
                u,
                time: 0.0,
                dx,
                half_width: 8.0,
            };
            let mut out = vec![0.0; n];
            semidiscrete_rhs(&field, &p, &ssf, &mut out).unwrap();
            let mut w = 0.0_f64;
            for i in 1..n - 1 {
                w = w.max((out[i] - ssf.u_t(x[i], 0.0).unwrap()).abs());
            }
            w
        };
        let e1 = worst(129);
        let e2 = worst(257);
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "rhs refinement ratio {ratio}");
    }

    #[test]
    fn zero_horizon_gives_zero_error() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 50.0);
        let out = evolve_once(&p, &prof, 8.0, 65, 0.0, &Tolerances::default()).unwrap();
        assert_eq!(out.max_rel_err, 0.0);
        assert_eq!(out.l2_rel_err, 0.0);
    }

    #[test]
    fn evolution_tracks_closed_form_with_second_order_refinement() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 50.0);
        let tol = Tolerances::default();
        let report = evolve_and_compare(&p, &prof, 8.0, 257, 0.25, &tol).unwrap();
        assert!(
            report.coarse.max_rel_err < 1e-2,
            "coarse err {:e}",
            report.coarse.max_rel_err
        );
        assert!(report.fine.max_rel_err < report.coarse.max_rel_err);
        assert!(
            (3.0..=5.0).contains(&report.refinement_ratio),
            "ratio {}",
            report.refinement_ratio
        );
    }

    #[test]
    fn evolution_preserves_evenness() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 50.0);
        let tol = Tolerances::default();
        let out = evolve_once(&p, &prof, 8.0, 129, 0.25, &tol).unwrap();
        let gap = out.field.evenness_gap();
        let bound = 10.0 * (tol.abs_tol + tol.rel_tol * 12.0);
        assert!(gap < bound, "evenness gap {gap:e}");
    }

    #[test]
    fn gradient_reach_grows_toward_blowup_time() {
        // Exponent consistency (qualitative): the ξ reach scales like
        // (T0−t)^{−1/2}, so max|u_x| of the evolved field must grow
        // monotonically as t → T0 and stay close to the closed form's.
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 80.0);
        let tol = Tolerances::default();
        let max_ux = |out: &EvolveOutcome| -> f64 {
            let u = &out.field.u;
            let mut w = 0.0_f64;
            for i in 1..u.len() - 1 {
                w = w.max(((u[i + 1] - u[i - 1]) / (2.0 * out.dx)).abs());
            }
            w
        };
        let mut prev = 0.0;
        for t_end in [0.2, 0.5, 0.8, 0.95] {
            let out = evolve_once(&p, &prof, 8.0, 129, t_end, &tol).unwrap();
            let grown = max_ux(&out);
            assert!(grown > prev, "max|u_x| fell from {prev} at t_end = {t_end}");
            prev = grown;
            // Against the closed form: u_x peaks at the domain edge where
            // u_x = (T0−t)^{α−1/2} f′(ξ_edge).
            let tau: f64 = p.t0 - t_end;
            let xi_edge = 8.0 / tau.sqrt();
            let (_, fp) = prof.eval(xi_edge).unwrap();
            let exact = tau.powf(exponents(&p).alpha - 0.5) * fp;
            assert!(
                (grown - exact).abs() / exact < 0.05,
                "max|u_x| {grown} vs exact {exact}"
            );
        }
    }

    #[test]
    fn grid_and_horizon_preconditions() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 50.0);
        let tol = Tolerances::default();
        // Even N and tiny N rejected.
        assert!(evolve_once(&p, &prof, 8.0, 64, 0.1, &tol).is_err());
        assert!(evolve_once(&p, &prof, 8.0, 33, 0.1, &tol).is_err());
        // t_end beyond T0 rejected.
        assert!(evolve_once(&p, &prof, 8.0, 65, 1.5, &tol).is_err());
        // Profile range too short for the xi reach.
        let short = profile_to(&p, 5.0);
        assert!(evolve_once(&p, &short, 8.0, 65, 0.5, &tol).is_err());
    }

    #[test]
    fn csv_and_json_exports() {
        let p = params(1.0, 3.0);
        let prof = profile_to(&p, 50.0);
        let tol = Tolerances::default();
        let report = evolve_and_compare(&p, &prof, 8.0, 65, 0.1, &tol).unwrap();
        let csv = snapshot_csv(&report.coarse);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,u_numeric,u_exact,abs_err");
        assert_eq!(lines.len(), 1 + 65);
        let doc = summary_json(&p, &report);
        for key in [
            "lambda",
            "q",
            "T0",
            "L",
            "N",
            "t_end",
            "max_rel_err",
            "l2_rel_err",
            "refinement_ratio",
        ] {
            assert!(doc.get(key).is_some(), "missing key {key}");
        }
    }
}
