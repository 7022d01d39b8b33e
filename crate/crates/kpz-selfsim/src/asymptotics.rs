//! Log-variable trace, transformed-equation residual, and limit extraction.
//!
//! The substitution `f′(ξ) = ξ^{1/(q−1)} g(t)`, `ξ = e^t` turns the
//! power-law growth of the gradient into a horizontal asymptote:
//! `g(t) → C0 = (1/(λq))^{1/(q−1)}` and `f(ξ)/ξ^{q/(q−1)} → C` with
//!
//! ```text
//! C = [ (1/(λ(q−1))) ((q−1)/q)^q ]^{1/(q−1)} = C0·(q−1)/q.
//! ```
//!
//! Differentiating the profile equation in t gives
//!
//! ```text
//! g″ + ((3−q)/(q−1))·g′ − ((q−2)/(q−1)²)·g
//!     = { g′/2 − λ(g^q)′ + g/(q−1) − (λq/(q−1))·g^q } · e^{2t},
//! ```
//!
//! which is hopelessly stiff as an IVP (the brace carries e^{2t}) and is
//! used here only as a finite-difference residual check on the computed
//! trace — never integrated. `C1 = (1/(2λq))^{1/(q−1)}` is where the
//! combination `g′/2 − λ(g^q)′` changes sign.
//!
//! Limits are extracted by Aitken Δ² on geometrically spaced samples
//! (ratio 2 in ξ, 8 points, last 3-term window reported). No convergence
//! rate is assumed: the observed contraction of the deltas is reported,
//! and a non-contracting tail falls back to the raw last value with
//! `accel_method = "none"`.

use crate::profile::{pow_abs, ModelParams, ProfileSolution};
use crate::{Error, Result};

/// Closed-form constants of the far-field behavior.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Constants {
    pub c: f64,
    pub c0: f64,
    pub c1: f64,
}

pub fn constants(params: &ModelParams) -> Constants {
    let (lambda, q) = (params.lambda, params.q);
    let m = 1.0 / (q - 1.0);
    Constants {
        c: (1.0 / (lambda * (q - 1.0)) * ((q - 1.0) / q).powf(q)).powf(m),
        c0: (1.0 / (lambda * q)).powf(m),
        c1: (1.0 / (2.0 * lambda * q)).powf(m),
    }
}

/// The brace of the transformed equation at a point: `g′/2 − λ(g^q)′ +
/// g/(q−1) − (λq/(q−1))·g^q` with `(g^q)′ = q g^{q−1} g′`.
///
/// Vanishes identically at g ≡ C0 (definition of C0); its g′-coefficient
/// `1/2 − λq g^{q−1}` vanishes at g = C1 (definition of C1).
pub fn transformed_brace(g: f64, gp: f64, params: &ModelParams) -> f64 {
    let (lambda, q) = (params.lambda, params.q);
    let gq1 = pow_abs(g, q - 1.0) * g.signum();
    let gq = pow_abs(g, q) * g.signum();
    0.5 * gp - lambda * q * gq1 * gp + g / (q - 1.0) - lambda * q / (q - 1.0) * gq
}

#[derive(Debug, Clone, Copy)]
pub struct LogTraceOptions {
    /// Sample density; dt = ln(10)/points_per_decade.
    pub points_per_decade: f64,
    /// Lower end in ξ; default max(ξ₀, 1).
    pub xi_lo: Option<f64>,
    /// Upper end in ξ; default the solution's computed right end.
    pub xi_hi: Option<f64>,
}

impl Default for LogTraceOptions {
    fn default() -> Self {
        Self {
            points_per_decade: 60.0,
            xi_lo: None,
            xi_hi: None,
        }
    }
}

/// Uniform-in-t samples of g(t) = f′(e^t)·e^{−t/(q−1)}.
#[derive(Debug, Clone)]
pub struct LogTrace {
    pub t0: f64,
    pub dt: f64,
    pub g: Vec<f64>,
    pub params: ModelParams,
    /// First zero of f in the source solution (bound checks start there).
    pub xi0: Option<f64>,
}

impl LogTrace {
    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn t_last(&self) -> f64 {
        self.t(self.g.len() - 1)
    }

    pub fn xi_lo(&self) -> f64 {
        self.t0.exp()
    }

    pub fn xi_hi(&self) -> f64 {
        self.t_last().exp()
    }

    /// Assemble a trace from raw samples (no invariant checks; intended
    /// for synthetic inputs in tests and calibration).
    pub fn from_samples(t0: f64, dt: f64, g: Vec<f64>, params: ModelParams) -> Self {
        Self {
            t0,
            dt,
            g,
            params,
            xi0: None,
        }
    }

    /// Linear interpolation of g at abscissa `t` within the trace span.
    pub fn g_at(&self, t: f64) -> f64 {
        let pos = (t - self.t0) / self.dt;
        let i = (pos.floor().max(0.0) as usize).min(self.g.len() - 2);
        let s = pos - i as f64;
        self.g[i] * (1.0 - s) + self.g[i + 1] * s
    }
}

pub fn to_log_trace(sol: &ProfileSolution) -> Result<LogTrace> {
    to_log_trace_with(sol, &LogTraceOptions::default())
}

/// Trace over the tail region — past the transient knee, taken as
/// ξ ≥ max(2·ξ₀, 1) — at grid spacing `dt`. This is the window the
/// transformed-equation residual check is calibrated on; closer to ξ₀
/// the curvature of g inflates the finite-difference truncation error.
pub fn tail_trace(sol: &ProfileSolution, dt: f64) -> Result<LogTrace> {
    let xi0 = sol.xi0.unwrap_or(1.0);
    to_log_trace_with(
        sol,
        &LogTraceOptions {
            points_per_decade: std::f64::consts::LN_10 / dt,
            xi_lo: Some((2.0 * xi0).max(1.0)),
            xi_hi: None,
        },
    )
}

/// Sample g on a uniform t-grid over [ln ξ_lo, ln ξ_hi].
///
/// Checks the sign and bound facts on every sample: g > 0 everywhere and
/// g < (1/(2λ))^{1/(q−1)} from ξ₀ on; a violation is an error, not a
/// silently returned trace.
pub fn to_log_trace_with(sol: &ProfileSolution, options: &LogTraceOptions) -> Result<LogTrace> {
    if sol.f0 >= 0.0 {
        return Err(Error::InvalidInput(
            "log trace applies to f0 < 0 runs only".into(),
        ));
    }
    if sol.termination != crate::ode::Termination::ReachedEnd {
        return Err(Error::InvalidInput(
            "log trace needs a run that reached its right end".into(),
        ));
    }
    if !(options.points_per_decade > 0.0) {
        return Err(Error::InvalidInput(
            "points_per_decade must be positive".into(),
        ));
    }
    let xi_lo = options
        .xi_lo
        .unwrap_or_else(|| sol.xi0.unwrap_or(1.0).max(1.0));
    let xi_hi = options.xi_hi.unwrap_or(sol.xi_max_reached);
    if !(xi_lo > 0.0) || !(xi_hi > xi_lo) || xi_hi > sol.xi_max_reached {
        return Err(Error::InvalidInput(format!(
            "bad trace range [{xi_lo}, {xi_hi}] for a solution computed up to {}",
            sol.xi_max_reached
        )));
    }

    let dt = std::f64::consts::LN_10 / options.points_per_decade;
    let t0 = xi_lo.ln();
    let t1 = xi_hi.ln();
    let n = ((t1 - t0) / dt).floor() as usize + 1;
    let m = 1.0 / (sol.params.q - 1.0);
    let bound = (1.0 / (2.0 * sol.params.lambda)).powf(m);
    let xi0 = sol.xi0.unwrap_or(f64::INFINITY);

    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        let xi = t.exp().min(sol.xi_max_reached);
        let (_, fp) = sol.eval(xi)?;
        let gi = fp * xi.powf(-m);
        if gi <= 0.0 {
            return Err(Error::InvariantViolation(format!(
                "g = {gi} is not positive at xi = {xi}"
            )));
        }
        if xi >= xi0 && gi >= bound {
            return Err(Error::InvariantViolation(format!(
                "g = {gi} reached the bound {bound} at xi = {xi}"
            )));
        }
        g.push(gi);
    }
    Ok(LogTrace {
        t0,
        dt,
        g,
        params: sol.params,
        xi0: sol.xi0,
    })
}

/// One interior sample of the transformed-equation residual.
#[derive(Debug, Clone, Copy)]
pub struct ResidualSample {
    pub t: f64,
    pub scaled_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub dt: f64,
    pub max_scaled_residual: f64,
    pub samples: Vec<ResidualSample>,
}

/// Substitute centered finite differences of the trace into the
/// transformed equation; the residual at each interior sample is scaled
/// by the largest individual term's magnitude.
pub fn check_transformed_residual(
    trace: &LogTrace,
    params: &ModelParams,
) -> Result<ResidualReport> {
    if trace.g.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "residual check needs at least 5 samples, got {}",
            trace.g.len()
        )));
    }
    let (lambda, q) = (params.lambda, params.q);
    let dt = trace.dt;
    let mut samples = Vec::with_capacity(trace.g.len() - 2);
    let mut worst = 0.0_f64;
    for i in 1..trace.g.len() - 1 {
        let (gm, gi, gp) = (trace.g[i - 1], trace.g[i], trace.g[i + 1]);
        let t = trace.t(i);
        let d1 = (gp - gm) / (2.0 * dt);
        let d2 = (gp - 2.0 * gi + gm) / (dt * dt);
        let e2t = (2.0 * t).exp();

        let lhs1 = d2;
        let lhs2 = (3.0 - q) / (q - 1.0) * d1;
        let lhs3 = -(q - 2.0) / ((q - 1.0) * (q - 1.0)) * gi;
        let rhs1 = 0.5 * d1 * e2t;
        let rhs2 = -lambda * q * pow_abs(gi, q - 1.0) * d1 * e2t;
        let rhs3 = gi / (q - 1.0) * e2t;
        let rhs4 = -lambda * q / (q - 1.0) * pow_abs(gi, q) * e2t;

        let residual = (lhs1 + lhs2 + lhs3) - (rhs1 + rhs2 + rhs3 + rhs4);
        let scale = lhs1
            .abs()
            .max(lhs2.abs())
            .max(lhs3.abs())
            .max(rhs1.abs())
            .max(rhs2.abs())
            .max(rhs3.abs())
            .max(rhs4.abs())
            .max(f64::MIN_POSITIVE);
        let scaled = residual.abs() / scale;
        worst = worst.max(scaled);
        samples.push(ResidualSample {
            t,
            scaled_residual: scaled,
        });
    }
    Ok(ResidualReport {
        dt,
        max_scaled_residual: worst,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitTarget {
    GLimit,
    RatioLimit,
}

impl LimitTarget {
    pub fn name(&self) -> &'static str {
        match self {
            LimitTarget::GLimit => "g_limit",
            LimitTarget::RatioLimit => "ratio_limit",
        }
    }
}

/// An extracted limit with its exact counterpart and diagnostics.
#[derive(Debug, Clone)]
pub struct AsymptoticEstimate {
    pub target: LimitTarget,
    /// The geometric tail samples fed to the accelerator.
    pub raw_values: Vec<f64>,
    pub accelerated_value: f64,
    pub exact_value: f64,
    /// |accelerated − exact| / exact.
    pub rel_error: f64,
    /// "aitken", or "none" when the tail defeats acceleration.
    pub accel_method: &'static str,
    /// Observed contraction |Δ_last|/|Δ_prev| of the sample deltas
    /// (reported, never assumed).
    pub observed_contraction: Option<f64>,
}

const ACCEL_POINTS: usize = 8;

fn aitken_last_window(raw: &[f64]) -> (f64, &'static str, Option<f64>) {
    let n = raw.len();
    let (x0, x1, x2) = (raw[n - 3], raw[n - 2], raw[n - 1]);
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let denom = d2 - d1;
    let scale = x0.abs().max(x1.abs()).max(x2.abs());
    let contraction = if d1 != 0.0 {
        Some((d2 / d1).abs())
    } else {
        None
    };
    // A tail whose deltas no longer contract (or cancel below the noise
    // floor) defeats Δ²; fall back to the raw last value, flagged.
    let degenerate = denom.abs() <= 1e3 * f64::EPSILON * scale || d2.abs() >= d1.abs();
    if degenerate {
        (x2, "none", contraction)
    } else {
        (x2 - d2 * d2 / denom, "aitken", contraction)
    }
}

fn require_five_decades(xi0: Option<f64>, xi_hi: f64) -> Result<()> {
    let base = xi0.unwrap_or(1.0).max(1.0);
    let decades = (xi_hi / base).log10();
    if decades < 5.0 - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "need at least 5 decades of xi beyond the first zero; have {decades:.2} \
             (from {base} to {xi_hi})"
        )));
    }
    Ok(())
}

/// Accelerated estimate of lim g(t) against C0.
pub fn estimate_g_limit(trace: &LogTrace, consts: &Constants) -> Result<AsymptoticEstimate> {
    require_five_decades(trace.xi0, trace.xi_hi())?;
    let t_hi = trace.t_last();
    let ln2 = std::f64::consts::LN_2;
    let raw: Vec<f64> = (0..ACCEL_POINTS)
        .map(|j| trace.g_at(t_hi - (ACCEL_POINTS - 1 - j) as f64 * ln2))
        .collect();
    let (value, method, contraction) = aitken_last_window(&raw);
    Ok(AsymptoticEstimate {
        target: LimitTarget::GLimit,
        raw_values: raw,
        accelerated_value: value,
        exact_value: consts.c0,
        rel_error: (value - consts.c0).abs() / consts.c0,
        accel_method: method,
        observed_contraction: contraction,
    })
}

/// Accelerated estimate of lim f(ξ)/ξ^{q/(q−1)} against C.
pub fn estimate_ratio_limit(
    sol: &ProfileSolution,
    consts: &Constants,
) -> Result<AsymptoticEstimate> {
    if sol.f0 >= 0.0 {
        return Err(Error::InvalidInput(
            "ratio limit applies to f0 < 0 runs only".into(),
        ));
    }
    require_five_decades(sol.xi0, sol.xi_max_reached)?;
    let p = sol.params.q / (sol.params.q - 1.0);
    let xi_hi = sol.xi_max_reached;
    let raw: Vec<f64> = (0..ACCEL_POINTS)
        .map(|j| {
            let xi = xi_hi / f64::powi(2.0, (ACCEL_POINTS - 1 - j) as i32);
            let (f, _) = sol.eval(xi)?;
            Ok(f * xi.powf(-p))
        })
        .collect::<Result<_>>()?;
    let (value, method, contraction) = aitken_last_window(&raw);
    Ok(AsymptoticEstimate {
        target: LimitTarget::RatioLimit,
        raw_values: raw,
        accelerated_value: value,
        exact_value: consts.c,
        rel_error: (value - consts.c).abs() / consts.c,
        accel_method: method,
        observed_contraction: contraction,
    })
}

/// JSON document with the pinned key set
/// {target, exact, estimate, rel_error, method, xi_max, lambda, q}.
pub fn estimate_to_json(
    est: &AsymptoticEstimate,
    params: &ModelParams,
    xi_max: f64,
) -> serde_json::Value {
    serde_json::json!({
        "target": est.target.name(),
        "exact": est.exact_value,
        "estimate": est.accelerated_value,
        "rel_error": est.rel_error,
        "method": est.accel_method,
        "xi_max": xi_max,
        "lambda": params.lambda,
        "q": params.q,
    })
}
