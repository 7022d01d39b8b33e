//! L-stable TR-BDF2 integration of the far profile tail.
//!
//! Past ξ ≈ 10³ the profile ODE carries a fast contracting mode with rate
//! ≈ ξ/2 (∂f″/∂f′ = ξ/2 − λq(f′)^{q−1} → −ξ/2 on the attracting solution),
//! which limits any explicit method to steps of order 1/ξ. The tail is
//! therefore integrated in t = ln ξ with the one-step L-stable TR-BDF2
//! scheme on the bounded variables
//!
//! ```text
//! r(t) = f(ξ)/ξ^{q/(q−1)},   g(t) = f′(ξ)/ξ^{1/(q−1)},   ξ = e^t,
//! r′ = g − (1+m)·r,
//! g′ = −m·g + e^{2t}·( g/2 − λ|g|^q − α·r ),   m = 1/(q−1),
//! ```
//!
//! the exact first-order form of the profile equation in log variables.
//! Stage systems are 2×2 and solved by damped Newton with a closed-form
//! linear solve; the embedded third-order estimate (filtered through the
//! stage matrix) drives the step controller.

use crate::profile::ModelParams;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Accepted tail nodes with derivatives for cubic Hermite evaluation.
pub(crate) struct TailTrajectory {
    pub t: Vec<f64>,
    pub xi: Vec<f64>,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub dr: Vec<f64>,
    pub dg: Vec<f64>,
}

pub(crate) struct TailFailure {
    pub t_reached: f64,
    pub reason: String,
}

impl TailTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    /// Cubic Hermite evaluation of (r, g) at `t` within the computed span.
    ///
    /// Node derivatives of g are dominated by rounding noise once the
    /// balance e^{2t}(g/2 − λg^q − αr) sits at the f64 cancellation floor
    /// (absolute noise ~ eps·e^{2t}), so each interval limits the
    /// derivatives to 3× the secant slope: inactive where the data is
    /// smooth, degrades gracefully toward linear interpolation at the
    /// noise floor.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.t.len();
        debug_assert!(t >= self.t[0] && t <= self.t[n - 1]);
        if t == self.t[n - 1] {
            return (self.r[n - 1], self.g[n - 1]);
        }
        let mut i = self.t.partition_point(|&x| x <= t);
        i = i.saturating_sub(1).min(n - 2);
        let h = self.t[i + 1] - self.t[i];
        let s = (t - self.t[i]) / h;
        let hermite = |y0: f64, y1: f64, d0: f64, d1: f64| {
            let secant = (y1 - y0) / h;
            let cap = 3.0 * secant.abs();
            let d0 = d0.clamp(-cap, cap);
            let d1 = d1.clamp(-cap, cap);
            let s2 = s * s;
            let s3 = s2 * s;
            y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                + d0 * h * (s3 - 2.0 * s2 + s)
                + y1 * (-2.0 * s3 + 3.0 * s2)
                + d1 * h * (s3 - s2)
        };
        (
            hermite(self.r[i], self.r[i + 1], self.dr[i], self.dr[i + 1]),
            hermite(self.g[i], self.g[i + 1], self.dg[i], self.dg[i + 1]),
        )
    }
}

struct LogSystem {
    lambda: f64,
    q: f64,
    m: f64,
    p: f64,
    alpha: f64,
}

impl LogSystem {
    fn new(params: &ModelParams) -> Self {
        let q = params.q;
        let m = 1.0 / (q - 1.0);
        Self {
            lambda: params.lambda,
            q,
            m,
            p: 1.0 + m,
            alpha: (q - 2.0) / (2.0 * (q - 1.0)),
        }
    }

    fn rhs(&self, t: f64, r: f64, g: f64) -> (f64, f64) {
        let e2t = (2.0 * t).exp();
        let gq = g.abs().powf(self.q);
        (
            g - self.p * r,
            -self.m * g + e2t * (0.5 * g - self.lambda * gq - self.alpha * r),
        )
    }

    /// Jacobian entries (drr, drg, dgr, dgg) of the rhs at (t, r, g).
    fn jacobian(&self, t: f64, _r: f64, g: f64) -> (f64, f64, f64, f64) {
        let e2t = (2.0 * t).exp();
        let dgq = self.q * g.abs().powf(self.q - 1.0) * g.signum();
        (
            -self.p,
            1.0,
            -self.alpha * e2t,
            -self.m + e2t * (0.5 - self.lambda * dgq),
        )
    }
}

/// Solve (I − c·h·J)·x = b for 2-vector b with J evaluated at (t, r, g).
fn solve_stage_matrix(
    sys: &LogSystem,
    t: f64,
    r: f64,
    g: f64,
    ch: f64,
    b: (f64, f64),
) -> Option<(f64, f64)> {
    let (jrr, jrg, jgr, jgg) = sys.jacobian(t, r, g);
    let a11 = 1.0 - ch * jrr;
    let a12 = -ch * jrg;
    let a21 = -ch * jgr;
    let a22 = 1.0 - ch * jgg;
    let det = a11 * a22 - a12 * a21;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(((b.0 * a22 - b.1 * a12) / det, (a11 * b.1 - a21 * b.0) / det))
}

/// Newton solve of z − c·h·F(t_stage, z) = rhs_const; returns the stage value.
fn newton_stage(
    sys: &LogSystem,
    t_stage: f64,
    ch: f64,
    rhs_const: (f64, f64),
    predictor: (f64, f64),
    rtol: f64,
    atol: f64,
) -> Option<(f64, f64)> {
    let (mut zr, mut zg) = predictor;
    let mut prev_norm = f64::INFINITY;
    for _ in 0..12 {
        let (fr, fg) = sys.rhs(t_stage, zr, zg);
        let res = (zr - ch * fr - rhs_const.0, zg - ch * fg - rhs_const.1);
        let (dxr, dxg) = solve_stage_matrix(sys, t_stage, zr, zg, ch, res)?;
        zr -= dxr;
        zg -= dxg;
        if !(zr.is_finite() && zg.is_finite()) {
            return None;
        }
        let norm = (dxr / (atol + rtol * zr.abs()))
            .abs()
            .max((dxg / (atol + rtol * zg.abs())).abs());
        if norm <= 0.05 {
            return Some((zr, zg));
        }
        if norm > 4.0 * prev_norm {
            return None; // diverging
        }
        prev_norm = norm;
    }
    None
}

/// Integrate the tail system from (t0, r0, g0) up to ξ = xi_end.
pub(crate) fn integrate_tail(
    params: &ModelParams,
    t0: f64,
    r0: f64,
    g0: f64,
    xi_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<TailTrajectory, TailFailure> {
    let t_end = xi_end.ln();
    let sys = LogSystem::new(params);
    let gamma = 2.0 - SQRT2;
    let c = gamma / 2.0; // shared stage coefficient for TR-BDF2 at this gamma
    let a_bdf = 1.0 / (gamma * (2.0 - gamma));
    let b_bdf = (1.0 - gamma) * (1.0 - gamma) / (gamma * (2.0 - gamma));
    // Quadrature weights and the embedded third-order weights.
    let b1 = 1.0 / (2.0 * (2.0 - gamma));
    let b2 = b1;
    let b3 = (1.0 - gamma) / (2.0 - gamma);
    let bh2 = 1.0 / (6.0 * gamma * (1.0 - gamma));
    let bh3 = 0.5 - gamma * bh2;
    let bh1 = 1.0 - bh2 - bh3;

    let rtol = rel_tol;
    let atol = abs_tol;
    let max_h = 0.05;

    let mut traj = TailTrajectory {
        t: vec![t0],
        xi: vec![t0.exp()],
        r: vec![r0],
        g: vec![g0],
        dr: Vec::new(),
        dg: Vec::new(),
    };
    let (dr0, dg0) = sys.rhs(t0, r0, g0);
    traj.dr.push(dr0);
    traj.dg.push(dg0);

    let mut t = t0;
    let mut y = (r0, g0);
    let mut k1 = (dr0, dg0);
    let mut h: f64 = 1e-4;
    let mut rejected_last = false;

    while t < t_end {
        h = h.min(max_h);
        let remaining = t_end - t;
        let landing = h >= remaining;
        let h_this = if landing { remaining } else { h };
        if !landing && h_this < 1e-12 {
            return Err(TailFailure {
                t_reached: t,
                reason: "step collapsed in tail".into(),
            });
        }
        let t2 = if landing { t_end } else { t + h_this };

        let attempt = (|| {
            // TR stage to t + γh.
            let t1 = t + gamma * h_this;
            let rhs1 = (y.0 + c * h_this * k1.0, y.1 + c * h_this * k1.1);
            let pred1 = (y.0 + gamma * h_this * k1.0, y.1 + gamma * h_this * k1.1);
            let z1 = newton_stage(&sys, t1, c * h_this, rhs1, pred1, rtol, atol)?;
            let k2 = sys.rhs(t1, z1.0, z1.1);
            // BDF2 stage to t + h.
            let rhs2 = (a_bdf * z1.0 - b_bdf * y.0, a_bdf * z1.1 - b_bdf * y.1);
            let pred2 = (
                y.0 + h_this * (b1 * k1.0 + b2 * k2.0 + b3 * k2.0),
                y.1 + h_this * (b1 * k1.1 + b2 * k2.1 + b3 * k2.1),
            );
            let z2 = newton_stage(&sys, t2, c * h_this, rhs2, pred2, rtol, atol)?;
            let k3 = sys.rhs(t2, z2.0, z2.1);
            Some((z1, k2, z2, k3))
        })();

        let Some((_z1, k2, z2, k3)) = attempt else {
            h = 0.3 * h_this;
            rejected_last = true;
            continue;
        };

        // Embedded error estimate, filtered through the stage matrix.
        let est = (
            h_this * ((bh1 - b1) * k1.0 + (bh2 - b2) * k2.0 + (bh3 - b3) * k3.0),
            h_this * ((bh1 - b1) * k1.1 + (bh2 - b2) * k2.1 + (bh3 - b3) * k3.1),
        );
        let Some(filtered) = solve_stage_matrix(&sys, t2, z2.0, z2.1, c * h_this, est) else {
            h = 0.3 * h_this;
            rejected_last = true;
            continue;
        };
        let er = filtered.0 / (atol + rtol * y.0.abs().max(z2.0.abs()));
        let eg = filtered.1 / (atol + rtol * y.1.abs().max(z2.1.abs()));
        let err = ((er * er + eg * eg) / 2.0).sqrt();
        if !err.is_finite() {
            h = 0.3 * h_this;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            t = t2;
            y = z2;
            k1 = k3;
            traj.t.push(t);
            // Pin the final node to the requested endpoint (exp(ln ξ) can
            // land an ulp short of ξ).
            traj.xi.push(if t == t_end { xi_end } else { t.exp() });
            traj.r.push(y.0);
            traj.g.push(y.1);
            traj.dr.push(k1.0);
            traj.dg.push(k1.1);
            let mut fac = (0.9 * (1.0 / err.max(1e-16)).powf(1.0 / 3.0)).clamp(0.2, 5.0);
            if rejected_last {
                fac = fac.min(1.0);
                rejected_last = false;
            }
            h = h_this * fac;
        } else {
            rejected_last = true;
            h = h_this * (0.9 * (1.0 / err).powf(1.0 / 3.0)).clamp(0.2, 1.0);
        }
    }

    Ok(traj)
}
