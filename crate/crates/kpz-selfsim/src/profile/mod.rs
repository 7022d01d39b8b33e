//! The self-similar profile ODE and its qualitative checks.
//!
//! Substituting `u(x,t) = (T0−t)^α f(ξ)`, `ξ = |x|(T0−t)^{−1/2}` into
//! `u_t = u_xx + λ|u_x|^q` forces `α = (q−2)/(2(q−1))` and the profile
//! equation
//!
//! ```text
//! f″ + λ|f′|^q − (ξ/2) f′ + α f = 0,   f′(0) = 0.
//! ```
//!
//! For `f(0) < 0` the solution exists globally, `f′ > 0` and `f″ > 0` for
//! ξ > 0, f crosses zero exactly once (at ξ₀), and the gradient obeys
//! `f′(ξ) < (ξ/(2λ))^{1/(q−1)}` for ξ ≥ ξ₀. For `f(0) > 0` the gradient
//! blows up at a finite ξ⋆ (see [`crate::blowup`]). [`solve_profile`]
//! integrates either regime and the `check_*` operations verify the
//! qualitative facts on the computed trajectory, node by node.
//!
//! Integration strategy: the explicit engine ([`crate::ode`]) covers
//! [0, ξ_switch]; beyond that the attracting slow solution makes the
//! equation stiff (stability step ~ 1/ξ), so the tail is continued to
//! ξ_max with an L-stable TR-BDF2 scheme on the exact log-variable
//! form. Both legs expose dense output through [`ProfileSolution::eval`].

mod tail;

use crate::ode::{self, Event, IvpSpec, Termination, Tolerances, Trajectory};
use crate::{Error, Result};
pub(crate) use tail::TailTrajectory;

/// Default right end of the integration interval.
pub const DEFAULT_XI_MAX: f64 = 1e6;
/// Default hand-off point from the explicit leg to the stiff tail leg.
pub const DEFAULT_XI_SWITCH: f64 = 1e3;
/// Default number of rows in a CSV export.
pub const DEFAULT_CSV_SAMPLES: usize = 512;

/// The free inputs of the whole problem: λ > 0, q > 2, and the blow-up
/// time T0 > 0 used only by the PDE cross-check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub q: f64,
    pub t0: f64,
}

impl ModelParams {
    /// Rejects λ ≤ 0 and q ≤ 2 (the regime is strictly λ > 0, q > 2).
    pub fn new(lambda: f64, q: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(q > 2.0) || !q.is_finite() {
            return Err(Error::InvalidInput(format!("q must exceed 2, got {q}")));
        }
        Ok(Self { lambda, q, t0: 1.0 })
    }

    pub fn with_t0(mut self, t0: f64) -> Result<Self> {
        if !(t0 > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "T0 must be positive, got {t0}"
            )));
        }
        self.t0 = t0;
        Ok(self)
    }
}

/// Similarity exponents: α = (q−2)/(2(q−1)), β = −1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarExponents {
    pub alpha: f64,
    pub beta: f64,
}

pub fn exponents(params: &ModelParams) -> SelfSimilarExponents {
    SelfSimilarExponents {
        alpha: (params.q - 2.0) / (2.0 * (params.q - 1.0)),
        beta: -0.5,
    }
}

/// |s|^q with the convention 0^q = 0 (the map is C² for q > 2, so no
/// smoothing is needed at s = 0).
pub fn pow_abs(s: f64, q: f64) -> f64 {
    s.abs().powf(q)
}

/// Right-hand side of the profile equation solved for f″:
/// returns (f′, −λ|f′|^q + (ξ/2)f′ − αf).
pub fn profile_rhs(xi: f64, f: f64, fp: f64, params: &ModelParams) -> (f64, f64) {
    let alpha = exponents(params).alpha;
    (
        fp,
        -params.lambda * pow_abs(fp, params.q) + 0.5 * xi * fp - alpha * f,
    )
}

/// Gradient bound (ξ/(2λ))^{1/(q−1)}; equals 1 at ξ = 2λ for every q.
pub fn gradient_bound_value(xi: f64, params: &ModelParams) -> f64 {
    (xi / (2.0 * params.lambda)).powf(1.0 / (params.q - 1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub xi_max: f64,
    pub xi_switch: f64,
    pub tol: Tolerances,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            xi_max: DEFAULT_XI_MAX,
            xi_switch: DEFAULT_XI_SWITCH,
            tol: Tolerances::default(),
        }
    }
}

/// Dense-output profile run: explicit head leg in ξ, optional stiff tail
/// leg in t = ln ξ, the located first zero ξ₀, and the certified right end
/// `xi_max_reached` (the right end actually integrated, with no claim that
/// it equals the maximal existence endpoint).
pub struct ProfileSolution {
    pub params: ModelParams,
    pub f0: f64,
    pub xi0: Option<f64>,
    pub xi_max_reached: f64,
    pub termination: Termination,
    /// Runtime contradictions of guaranteed properties (empty = all good).
    pub violations: Vec<String>,
    head: Trajectory,
    tail: Option<TailTrajectory>,
}

impl ProfileSolution {
    /// (f, f′) anywhere in the computed span [0, xi_max_reached].
    pub fn eval(&self, xi: f64) -> Result<(f64, f64)> {
        if xi < 0.0 {
            return Err(Error::OutOfRange(format!("xi = {xi} is negative")));
        }
        if xi <= self.head.t_last() {
            let mut buf = [0.0; 2];
            self.head.eval_into(xi, &mut buf)?;
            return Ok((buf[0], buf[1]));
        }
        if let Some(tail) = &self.tail {
            if xi <= self.xi_max_reached {
                let (r, g) = tail.eval(xi.ln());
                let m = 1.0 / (self.params.q - 1.0);
                return Ok((r * xi.powf(1.0 + m), g * xi.powf(m)));
            }
        }
        Err(Error::OutOfRange(format!(
            "xi = {xi} beyond computed range (xi_max_reached = {})",
            self.xi_max_reached
        )))
    }

    /// f″ from the equation at the dense state.
    pub fn fpp(&self, xi: f64) -> Result<f64> {
        let (f, fp) = self.eval(xi)?;
        Ok(profile_rhs(xi, f, fp, &self.params).1)
    }

    /// All accepted nodes as (ξ, f, f′), both legs, strictly increasing ξ.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let m = 1.0 / (self.params.q - 1.0);
        let head = self.head.nodes().map(|(t, y)| (t, y[0], y[1]));
        let tail = self.tail.iter().flat_map(move |tt| {
            (1..tt.len()).map(move |i| {
                let xi = tt.xi[i];
                (xi, tt.r[i] * xi.powf(1.0 + m), tt.g[i] * xi.powf(m))
            })
        });
        head.chain(tail)
    }

    /// End of the explicit head leg.
    pub fn head_end(&self) -> f64 {
        self.head.t_last()
    }

    /// Wrap a breakdown-regime (f0 > 0) head trajectory produced by the
    /// blow-up detector.
    pub(crate) fn from_breakdown_head(params: ModelParams, f0: f64, head: Trajectory) -> Self {
        // Event 1 in the detector's list records the first zero of f.
        let xi0 = head.event_time(1);
        Self {
            params,
            f0,
            xi0,
            xi_max_reached: head.t_last(),
            termination: head.termination(),
            violations: Vec::new(),
            head,
            tail: None,
        }
    }
}

/// Integrate the profile from ξ = 0 with initial state (f0, 0).
///
/// Events: the first zero of f is recorded as ξ₀; step collapse is the
/// blow-up signal. For `f0 < 0` the run is expected to reach `xi_max`
/// (a collapse is reported in `violations`, never silently accepted);
/// for `f0 > 0` it is expected to collapse at finite ξ (reaching `xi_max`
/// is likewise a violation). `f0 = 0` is rejected as degenerate.
pub fn solve_profile(
    params: &ModelParams,
    f0: f64,
    xi_max: f64,
    tol: &Tolerances,
) -> Result<ProfileSolution> {
    solve_profile_with(
        params,
        f0,
        &SolveOptions {
            xi_max,
            tol: *tol,
            ..SolveOptions::default()
        },
    )
}

pub fn solve_profile_with(
    params: &ModelParams,
    f0: f64,
    options: &SolveOptions,
) -> Result<ProfileSolution> {
    if f0 == 0.0 || !f0.is_finite() {
        return Err(Error::InvalidInput(
            "f0 = 0 is degenerate (f ≡ 0 solves the equation); pick f0 ≠ 0".into(),
        ));
    }
    if !(options.xi_max > 0.0) {
        return Err(Error::InvalidInput("xi_max must be positive".into()));
    }

    let lambda = params.lambda;
    let q = params.q;
    let alpha = exponents(params).alpha;
    let rhs = move |xi: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = -lambda * pow_abs(y[1], q) + 0.5 * xi * y[1] - alpha * y[0];
    };
    let events = [Event::sign_change(0).recording()];

    if f0 > 0.0 {
        // Breakdown regime: one explicit leg, collapse expected.
        let spec = IvpSpec::new(rhs, 0.0, options.xi_max, vec![f0, 0.0]);
        let head = ode::integrate(&spec, &options.tol, &events)?;
        let xi0 = head.event_time(0);
        let mut violations = Vec::new();
        if head.termination() == Termination::ReachedEnd {
            violations.push(format!(
                "run with f0 = {f0} > 0 reached xi_max = {} without gradient collapse; \
                 finite-interval breakdown was expected",
                options.xi_max
            ));
        }
        return Ok(ProfileSolution {
            params: *params,
            f0,
            xi0,
            xi_max_reached: head.t_last(),
            termination: head.termination(),
            violations,
            head,
            tail: None,
        });
    }

    // Global regime. The head leg must both contain ξ₀ and end where the
    // tail system is firmly on the attracting branch (λq·g^{q−1} > 3/4).
    let m = 1.0 / (q - 1.0);
    let mut head_end = options.xi_switch.min(options.xi_max);
    let head = loop {
        let spec = IvpSpec::new(rhs, 0.0, head_end, vec![f0, 0.0]);
        let head = ode::integrate(&spec, &options.tol, &events)?;
        if head.termination() != Termination::ReachedEnd {
            break head;
        }
        if head_end >= options.xi_max {
            break head;
        }
        let zero_found = head.event_time(0).is_some();
        let g_end = head.last_y()[1] * head.t_last().powf(-m);
        let slaved = lambda * q * pow_abs(g_end, q - 1.0) > 0.75;
        if (zero_found && slaved) || head_end >= 1e5 {
            break head;
        }
        head_end = (head_end * 2.0).min(options.xi_max);
    };

    let xi0 = head.event_time(0);
    let mut violations = Vec::new();
    let mut termination = head.termination();
    if let Termination::StepCollapsed { t_last } = termination {
        violations.push(format!(
            "run with f0 = {f0} < 0 collapsed at xi = {t_last}; global existence was expected"
        ));
    }
    if termination == Termination::ReachedEnd && xi0.is_none() {
        violations.push(format!(
            "run with f0 = {f0} < 0 reached xi = {} without f crossing zero; \
             exactly one sign change was expected",
            head.t_last()
        ));
    }

    let mut tail_traj = None;
    let mut xi_max_reached = head.t_last();
    if termination == Termination::ReachedEnd && head.t_last() < options.xi_max {
        let xi_s = head.t_last();
        let y_s = head.last_y();
        let r0 = y_s[0] * xi_s.powf(-(1.0 + m));
        let g0 = y_s[1] * xi_s.powf(-m);
        let rel = (options.tol.rel_tol * 0.1).clamp(1e-13, 1e-8);
        let abs = (options.tol.abs_tol * 0.1).clamp(1e-15, 1e-10);
        match tail::integrate_tail(params, xi_s.ln(), r0, g0, options.xi_max, rel, abs) {
            Ok(tt) => {
                if let Some(i) = (0..tt.len()).find(|&i| tt.g[i] <= 0.0) {
                    violations.push(format!(
                        "gradient variable g became non-positive at xi = {}; f′ > 0 was expected",
                        tt.xi[i]
                    ));
                }
                xi_max_reached = *tt.xi.last().unwrap();
                tail_traj = Some(tt);
            }
            Err(fail) => {
                let xi_fail = fail.t_reached.exp();
                violations.push(format!(
                    "tail integration stalled at xi = {xi_fail} ({}); global existence was expected",
                    fail.reason
                ));
                termination = Termination::StepCollapsed { t_last: xi_fail };
            }
        }
    }

    Ok(ProfileSolution {
        params: *params,
        f0,
        xi0,
        xi_max_reached,
        termination,
        violations,
        head,
        tail: tail_traj,
    })
}

/// A node at which a pointwise check failed.
#[derive(Debug, Clone)]
pub struct NodeViolation {
    pub xi: f64,
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
    pub what: String,
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub nodes_checked: usize,
    pub violations: Vec<NodeViolation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// f′ > 0 and f″ > 0 at every node with ξ > 0, for f0 < 0 runs.
///
/// Refuses f0 > 0 solutions: there the signs are provably the opposite
/// and [`crate::blowup::check_differential_inequality`] applies instead.
pub fn check_monotonicity(sol: &ProfileSolution) -> Result<CheckReport> {
    if sol.f0 >= 0.0 {
        return Err(Error::InvalidInput(
            "monotonicity check applies to f0 < 0 runs only (signs flip for f0 > 0)".into(),
        ));
    }
    Ok(check_nodes_monotonicity(&sol.params, sol.nodes()))
}

/// Node-level monotonicity check; exposed separately so corrupted node
/// sets can be fed in directly by tests.
pub fn check_nodes_monotonicity(
    params: &ModelParams,
    nodes: impl Iterator<Item = (f64, f64, f64)>,
) -> CheckReport {
    let mut report = CheckReport::default();
    for (xi, f, fp) in nodes {
        if xi <= 0.0 {
            continue;
        }
        report.nodes_checked += 1;
        let fpp = profile_rhs(xi, f, fp, params).1;
        if fp <= 0.0 {
            report.violations.push(NodeViolation {
                xi,
                f,
                fp,
                fpp,
                what: format!("f' = {fp} is not positive"),
            });
        }
        if fpp <= 0.0 {
            report.violations.push(NodeViolation {
                xi,
                f,
                fp,
                fpp,
                what: format!("f'' = {fpp} is not positive"),
            });
        }
    }
    report
}

/// f′(ξ) < (ξ/(2λ))^{1/(q−1)} at every node with ξ ≥ ξ₀, for f0 < 0 runs.
pub fn check_gradient_bound(sol: &ProfileSolution) -> Result<CheckReport> {
    if sol.f0 >= 0.0 {
        return Err(Error::InvalidInput(
            "gradient bound applies to f0 < 0 runs only".into(),
        ));
    }
    let Some(xi0) = sol.xi0 else {
        return Err(Error::InvalidInput(
            "gradient bound needs xi0 (no zero of f was located)".into(),
        ));
    };
    Ok(check_nodes_gradient_bound(&sol.params, xi0, sol.nodes()))
}

pub fn check_nodes_gradient_bound(
    params: &ModelParams,
    xi0: f64,
    nodes: impl Iterator<Item = (f64, f64, f64)>,
) -> CheckReport {
    let mut report = CheckReport::default();
    for (xi, f, fp) in nodes {
        if xi < xi0 {
            continue;
        }
        report.nodes_checked += 1;
        let bound = gradient_bound_value(xi, params);
        if fp >= bound {
            let fpp = profile_rhs(xi, f, fp, params).1;
            report.violations.push(NodeViolation {
                xi,
                f,
                fp,
                fpp,
                what: format!("f' = {fp} reached the bound {bound}"),
            });
        }
    }
    report
}

/// Normalize the initial value: substituting h = f/|f0| into the profile
/// equation multiplies the gradient coefficient by |f0|^{q−1}, so
/// solve(λ, q, f0) = |f0| · solve(λ|f0|^{q−1}, q, −1) pointwise.
/// Returns the rescaled parameters and the scale |f0|.
pub fn rescale_initial_value(params: &ModelParams, f0_neg: f64) -> Result<(ModelParams, f64)> {
    if !(f0_neg < 0.0) {
        return Err(Error::InvalidInput(format!(
            "rescaling applies to negative initial values, got {f0_neg}"
        )));
    }
    let scale = f0_neg.abs();
    let rescaled = ModelParams {
        lambda: params.lambda * scale.powf(params.q - 1.0),
        q: params.q,
        t0: params.t0,
    };
    Ok((rescaled, scale))
}

/// Maximum of |ℒf| / max(1, |each term|) over `n_samples` log-spaced
/// points, with f″ taken from a centered difference of the dense f′ (so
/// the check is independent of the algebraic identity f″ = rhs).
pub fn ode_residual_max(sol: &ProfileSolution, n_samples: usize) -> Result<f64> {
    let lo = 1e-2_f64.min(sol.xi_max_reached * 0.5);
    let hi = sol.xi_max_reached * (1.0 - 3e-5); // keep xi ± h inside the span
    let alpha = exponents(&sol.params).alpha;
    let mut worst = 0.0_f64;
    for i in 0..n_samples {
        let frac = i as f64 / (n_samples - 1) as f64;
        let xi = lo * (hi / lo).powf(frac);
        let h = (xi * 1e-5).max(1e-7);
        let (f, fp) = sol.eval(xi)?;
        let (_, fp_plus) = sol.eval(xi + h)?;
        let (_, fp_minus) = sol.eval(xi - h)?;
        let fpp = (fp_plus - fp_minus) / (2.0 * h);
        let t_grad = sol.params.lambda * pow_abs(fp, sol.params.q);
        let t_drift = -0.5 * xi * fp;
        let t_zero = alpha * f;
        let residual = fpp + t_grad + t_drift + t_zero;
        let scale = 1.0_f64
            .max(fpp.abs())
            .max(t_grad.abs())
            .max(t_drift.abs())
            .max(t_zero.abs());
        worst = worst.max(residual.abs() / scale);
    }
    Ok(worst)
}

/// CSV export: header `xi,f,fp,fpp`, log-spaced samples, shortest
/// round-trip decimal formatting.
pub fn profile_csv(sol: &ProfileSolution, samples: usize) -> Result<String> {
    let first_pos = sol
        .nodes()
        .find(|(xi, _, _)| *xi > 0.0)
        .map(|(xi, _, _)| xi)
        .unwrap_or(1e-3);
    let lo = first_pos.max(1e-3);
    let hi = sol.xi_max_reached;
    let mut out = String::from("xi,f,fp,fpp\n");
    for i in 0..samples {
        let frac = i as f64 / (samples - 1) as f64;
        let xi = lo * (hi / lo).powf(frac);
        let (f, fp) = sol.eval(xi)?;
        let fpp = sol.fpp(xi)?;
        out.push_str(&format!("{xi},{f},{fp},{fpp}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
