//! Finite-ξ gradient breakdown for f(0) > 0: certification and bracketing.
//!
//! For `f(0) = f0 > 0` the profile has `f′ < 0`, `f″ < 0` for ξ > 0 and the
//! gradient diverges at a finite ξ⋆. Integrating `f‴ < −λ(|f′|^q)′` twice
//! gives the a priori bound used for the bracket's upper edge:
//!
//! ```text
//! f″(ξ) < −λ|f′(ξ)|^q      (holds from ξ = 0 on),
//! ξ⋆ ≤ ξ₁ + 1/(λ(q−1)|f′(ξ₁)|^{q−1})   for any ξ₁ in the existence range.
//! ```
//!
//! Detection runs in two phases. Phase 1 integrates in ξ with the explicit
//! engine until |f′| reaches `w_switch`. Phase 2 re-parametrizes the same
//! equation by σ = ln|f′| with state (ξ, f) — near breakdown ξ stalls at
//! f64 resolution while |f′| still grows, so stepping in σ is the only way
//! to certify gradient magnitudes like 1e12 (plain ξ-stepping saturates at
//! |f′| ~ (eps·ξ⋆·λ(q−1))^{−1/(q−1)}, far below 1e6 for larger q).
//!
//! The bracket is `lo` = last certified ξ and `hi` = tightest a priori
//! bound plus an explicit numerical-uncertainty margin
//! ξ·(10·rel_tol + 10³·eps); the deepest bounds are tight beyond f64
//! resolution, so the margin is what keeps the bracket meaningful (and it
//! shrinks with the tolerance, as a certified bracket should).

use crate::ode::{self, Direction, Event, IvpSpec, Termination, Tolerances};
use crate::profile::{
    exponents, pow_abs, profile_rhs, CheckReport, ModelParams, NodeViolation, ProfileSolution,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct BlowupOptions {
    /// Reaching this ξ without collapse is an invariant violation.
    pub xi_max: f64,
    /// Gradient magnitude at which phase 2 takes over.
    pub w_switch: f64,
    /// Gradient magnitude certified at collapse (the |f′| > 1e12 threshold).
    pub w_final: f64,
    pub tol: Tolerances,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        Self {
            xi_max: 1e6,
            w_switch: 1e3,
            w_final: 1e12,
            tol: Tolerances::default(),
        }
    }
}

/// How the breakdown was detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapseKind {
    /// |f′| reached `w_final`.
    GradientThreshold,
    /// The step controller hit the floor first.
    StepFloor,
}

impl CollapseKind {
    pub fn name(&self) -> &'static str {
        match self {
            CollapseKind::GradientThreshold => "gradient_threshold",
            CollapseKind::StepFloor => "step_floor",
        }
    }
}

/// An a priori bound evaluated at one sample point.
#[derive(Debug, Clone, Copy)]
pub struct AprioriBound {
    pub xi1: f64,
    pub fp1: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct BlowupReport {
    pub params: ModelParams,
    pub f0: f64,
    /// Certified bracket: lo = last integrated ξ, hi = tightest bound + margin.
    pub xi_star_bracket: (f64, f64),
    /// (ξ, f, f′) at the last integrated point.
    pub last_state: (f64, f64, f64),
    pub apriori_bounds: Vec<AprioriBound>,
    pub f_at_collapse: f64,
    pub fp_at_collapse: f64,
    pub collapse: CollapseKind,
    /// Nodes of the σ = ln|f′| continuation phase as (ξ, f, f′).
    pub zoom_nodes: Vec<(f64, f64, f64)>,
}

/// Report plus the phase-1 profile solution the checks run on.
pub struct BlowupRun {
    pub report: BlowupReport,
    pub solution: ProfileSolution,
}

pub fn detect_blowup(params: &ModelParams, f0: f64, tol: &Tolerances) -> Result<BlowupRun> {
    detect_blowup_with(
        params,
        f0,
        &BlowupOptions {
            tol: *tol,
            ..BlowupOptions::default()
        },
    )
}

pub fn detect_blowup_with(
    params: &ModelParams,
    f0: f64,
    options: &BlowupOptions,
) -> Result<BlowupRun> {
    if !(f0 > 0.0) || !f0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "breakdown detection applies to f0 > 0, got {f0}"
        )));
    }
    let (lambda, q) = (params.lambda, params.q);
    let alpha = exponents(params).alpha;

    // Phase 1: explicit run in ξ until the gradient reaches −w_switch.
    let rhs = move |xi: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = -lambda * pow_abs(y[1], q) + 0.5 * xi * y[1] - alpha * y[0];
    };
    let events = [
        Event::threshold(1, -options.w_switch, Direction::Falling),
        Event::sign_change(0).recording(),
    ];
    let spec = IvpSpec::new(rhs, 0.0, options.xi_max, vec![f0, 0.0]);
    let head = ode::integrate(&spec, &options.tol, &events)?;

    let head_term = head.termination();
    let (xi_sw, f_sw, w_sw) = {
        let y = head.last_y();
        (head.t_last(), y[0], -y[1])
    };
    match head_term {
        Termination::ReachedEnd => {
            return Err(Error::InvariantViolation(format!(
                "f0 = {f0} > 0 reached xi_max = {} with f' = {} and no breakdown; \
                 finite-interval gradient collapse was expected",
                options.xi_max, -w_sw
            )));
        }
        Termination::StepCollapsed { .. } if w_sw < 10.0 => {
            return Err(Error::InvariantViolation(format!(
                "step collapse at xi = {xi_sw} with small gradient f' = {}; \
                 this contradicts the breakdown mechanism",
                -w_sw
            )));
        }
        _ => {}
    }

    // Phase 2: continue the same equation parametrized by σ = ln|f′|,
    // state (ξ, f). With w = e^σ and f′ = −w:
    //   dw/dξ = −f″ = λw^q + (ξ/2)w + αf > 0 in this regime,
    //   dξ/dσ = w/(dw/dξ),  df/dσ = f′·dξ/dσ = −w²/(dw/dξ).
    let zoom_rhs = move |sigma: f64, z: &[f64], dz: &mut [f64]| {
        let w = sigma.exp();
        let denom = lambda * w.powf(q) + 0.5 * z[0] * w + alpha * z[1];
        dz[0] = w / denom;
        dz[1] = -w * w / denom;
    };
    let zoom_spec = IvpSpec::new(zoom_rhs, w_sw.ln(), options.w_final.ln(), vec![xi_sw, f_sw]);
    let zoom = ode::integrate(&zoom_spec, &options.tol, &[])?;

    let collapse = match zoom.termination() {
        Termination::ReachedEnd => CollapseKind::GradientThreshold,
        Termination::StepCollapsed { .. } => CollapseKind::StepFloor,
        Termination::EventFired { .. } => unreachable!("zoom phase has no events"),
    };

    // Zoom nodes as (ξ, f, f′); ξ is mathematically nondecreasing, so
    // sub-ulp rounding wobble in the accumulated increments is clamped.
    let mut zoom_nodes = Vec::with_capacity(zoom.len());
    let mut xi_mono = xi_sw;
    for (sigma, z) in zoom.nodes() {
        xi_mono = xi_mono.max(z[0]);
        zoom_nodes.push((xi_mono, z[1], -sigma.exp()));
    }

    let &(lo, f_end, fp_end) = zoom_nodes.last().unwrap();

    // A priori bounds at 16 samples: 8 across phase 1 (f′ < 0), 8 across
    // the zoom phase. The bound is valid at every sample; deeper samples
    // give tighter bounds.
    let bound_at =
        |xi1: f64, fp1: f64| -> f64 { xi1 + 1.0 / (lambda * (q - 1.0) * pow_abs(fp1, q - 1.0)) };
    let mut bounds = Vec::with_capacity(16);
    let head_candidates: Vec<(f64, f64)> = head
        .nodes()
        .filter(|(_, y)| y[1] < 0.0)
        .map(|(xi, y)| (xi, y[1]))
        .collect();
    for k in 0..8 {
        if head_candidates.is_empty() {
            break;
        }
        let idx = k * (head_candidates.len() - 1) / 7;
        let (xi1, fp1) = head_candidates[idx];
        bounds.push(AprioriBound {
            xi1,
            fp1,
            bound: bound_at(xi1, fp1),
        });
    }
    for k in 0..8 {
        let idx = k * (zoom_nodes.len() - 1) / 7;
        let (xi1, _, fp1) = zoom_nodes[idx];
        bounds.push(AprioriBound {
            xi1,
            fp1,
            bound: bound_at(xi1, fp1),
        });
    }

    // The deepest bounds are tight beyond f64 resolution; clamp sub-ulp
    // rounding below the certified point and add the uncertainty margin.
    let margin = lo * (10.0 * options.tol.rel_tol + 1e3 * f64::EPSILON);
    for b in &mut bounds {
        if b.bound < lo - 10.0 * margin {
            return Err(Error::InvariantViolation(format!(
                "a priori bound {} at xi1 = {} fell below the certified existence point {lo}",
                b.bound, b.xi1
            )));
        }
        b.bound = b.bound.max(lo);
    }
    let hi = bounds.iter().map(|b| b.bound).fold(f64::INFINITY, f64::min) + margin;

    let report = BlowupReport {
        params: *params,
        f0,
        xi_star_bracket: (lo, hi),
        last_state: (lo, f_end, fp_end),
        apriori_bounds: bounds,
        f_at_collapse: f_end,
        fp_at_collapse: fp_end,
        collapse,
        zoom_nodes,
    };

    let solution = ProfileSolution::from_breakdown_head(*params, f0, head);
    Ok(BlowupRun { report, solution })
}

/// Pointwise check of f″ < −λ|f′|^q at every node (ξ = 0 included: there
/// the gap is −α·f0 < 0). On the trajectory f″ + λ|f′|^q = (ξ/2)f′ − αf
/// exactly, so the gap is evaluated in that cancellation-free form — the
/// direct comparison of f″ against −λ|f′|^q ties in f64 once |f′|^q
/// dwarfs the other terms.
pub fn check_differential_inequality(
    report: &BlowupReport,
    sol: &ProfileSolution,
) -> Result<CheckReport> {
    if sol.f0 <= 0.0 {
        return Err(Error::InvalidInput(
            "differential inequality applies to f0 > 0 runs".into(),
        ));
    }
    let alpha = exponents(&sol.params).alpha;
    let mut out = CheckReport::default();
    for (xi, f, fp) in sol.nodes().chain(report.zoom_nodes.iter().copied()) {
        out.nodes_checked += 1;
        let gap = 0.5 * xi * fp - alpha * f;
        if gap >= 0.0 {
            out.violations.push(NodeViolation {
                xi,
                f,
                fp,
                fpp: profile_rhs(xi, f, fp, &sol.params).1,
                what: format!("f'' + λ|f'|^q = {gap} is not negative"),
            });
        }
    }
    Ok(out)
}

/// Monotone decrease: f′ < 0 and f″ < 0 at every node with ξ > 0.
pub fn check_descent(report: &BlowupReport, sol: &ProfileSolution) -> Result<CheckReport> {
    if sol.f0 <= 0.0 {
        return Err(Error::InvalidInput(
            "descent check applies to f0 > 0 runs".into(),
        ));
    }
    let mut out = CheckReport::default();
    for (xi, f, fp) in sol.nodes().chain(report.zoom_nodes.iter().copied()) {
        if xi <= 0.0 {
            continue;
        }
        out.nodes_checked += 1;
        let fpp = profile_rhs(xi, f, fp, &sol.params).1;
        if fp >= 0.0 {
            out.violations.push(NodeViolation {
                xi,
                f,
                fp,
                fpp,
                what: format!("f' = {fp} is not negative"),
            });
        }
        if fpp >= 0.0 {
            out.violations.push(NodeViolation {
                xi,
                f,
                fp,
                fpp,
                what: format!("f'' = {fpp} is not negative"),
            });
        }
    }
    Ok(out)
}

/// JSON document with the bracket, bounds list and last state.
pub fn report_to_json(report: &BlowupReport) -> serde_json::Value {
    serde_json::json!({
        "lambda": report.params.lambda,
        "q": report.params.q,
        "f0": report.f0,
        "bracket": { "lo": report.xi_star_bracket.0, "hi": report.xi_star_bracket.1 },
        "last_state": {
            "xi": report.last_state.0,
            "f": report.last_state.1,
            "fp": report.last_state.2,
        },
        "f_at_collapse": report.f_at_collapse,
        "fp_at_collapse": report.fp_at_collapse,
        "collapse": report.collapse.name(),
        "apriori_bounds": report
            .apriori_bounds
            .iter()
            .map(|b| serde_json::json!({ "xi1": b.xi1, "fp1": b.fp1, "bound": b.bound }))
            .collect::<Vec<_>>(),
    })
}
