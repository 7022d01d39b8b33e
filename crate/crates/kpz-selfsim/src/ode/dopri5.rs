//! Dormand–Prince 5(4) stepper: FSAL, quartic dense output, PI controller.

use super::{
    crosses, Event, EventAction, EventKind, IvpSpec, Stats, Termination, Tolerances, Trajectory,
};

// Classic DOPRI5 tableau (Hairer, Nørsett & Wanner).
const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - 0.75 * BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct Work {
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    buf: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            ytmp: vec![0.0; n],
            ynew: vec![0.0; n],
            buf: vec![0.0; n],
        }
    }
}

pub(super) fn run<F: Fn(f64, &[f64], &mut [f64])>(
    spec: &IvpSpec<F>,
    tol: &Tolerances,
    events: &[Event],
) -> Trajectory {
    let n = spec.dimension;
    let mut w = Work::new(n);
    let mut stats = Stats::default();
    let mut events_fired: Vec<(usize, f64)> = Vec::new();

    let mut t = spec.t_start;
    let mut y = spec.y_start.clone();

    let mut ts = vec![t];
    let mut ys = y.clone();
    let mut cont: Vec<f64> = Vec::new();
    let mut seg_h: Vec<f64> = Vec::new();

    let finish = |termination, ts, ys, cont, seg_h, stats, events_fired| Trajectory {
        dim: n,
        ts,
        ys,
        cont,
        seg_h,
        termination,
        stats,
        events_fired,
    };

    (spec.rhs)(t, &y, &mut w.k[0]);
    stats.rhs_evals += 1;
    if !w.k[0].iter().all(|v| v.is_finite()) {
        return finish(
            Termination::StepCollapsed { t_last: t },
            ts,
            ys,
            cont,
            seg_h,
            stats,
            events_fired,
        );
    }

    let mut h = initial_step(spec, tol, &y, &w.k[0], &mut w.ytmp, &mut w.buf, &mut stats);
    let mut facold: f64 = 1e-4;
    let mut rejected_last = false;

    loop {
        h = h.min(tol.max_step);
        let landing = t + h >= spec.t_end;
        if !landing && h < tol.min_step_at(t) {
            return finish(
                Termination::StepCollapsed { t_last: t },
                ts,
                ys,
                cont,
                seg_h,
                stats,
                events_fired,
            );
        }
        let h_this = if landing { spec.t_end - t } else { h };

        let (err, ok) = attempt_step(spec, tol, t, &y, h_this, &mut w, &mut stats);
        if !ok {
            // Non-finite stage or state: retry smaller, collapse at the floor.
            stats.steps_rejected += 1;
            rejected_last = true;
            h = 0.25 * h_this;
            if h < tol.min_step_at(t) {
                return finish(
                    Termination::StepCollapsed { t_last: t },
                    ts,
                    ys,
                    cont,
                    seg_h,
                    stats,
                    events_fired,
                );
            }
            continue;
        }

        let fac11 = if err > 0.0 { err.powf(EXPO1) } else { 0.0 };

        if err <= 1.0 {
            stats.steps_accepted += 1;
            let t_new = if landing { spec.t_end } else { t + h_this };

            // Dense coefficients for this segment.
            let base = cont.len();
            cont.resize(base + 5 * n, 0.0);
            for j in 0..n {
                let ydiff = w.ynew[j] - y[j];
                let bspl = h_this * w.k[0][j] - ydiff;
                cont[base + j] = y[j];
                cont[base + n + j] = ydiff;
                cont[base + 2 * n + j] = bspl;
                cont[base + 3 * n + j] = ydiff - h_this * w.k[6][j] - bspl;
                cont[base + 4 * n + j] = h_this
                    * (D1 * w.k[0][j]
                        + D3 * w.k[2][j]
                        + D4 * w.k[3][j]
                        + D5 * w.k[4][j]
                        + D6 * w.k[5][j]
                        + D7 * w.k[6][j]);
            }
            seg_h.push(h_this);
            ts.push(t_new);
            ys.extend_from_slice(&w.ynew);

            // Event scan over [t, t_new] on the fresh interpolant.
            let seg = &cont[base..base + 5 * n];
            let mut halt: Option<(usize, f64)> = None;
            let mut recorded = Vec::new();
            for (idx, ev) in events.iter().enumerate() {
                if ev.kind == EventKind::StepCollapse {
                    continue;
                }
                let offset = match ev.kind {
                    EventKind::ThresholdOnComponent => ev.threshold,
                    _ => 0.0,
                };
                let ga = y[ev.component] - offset;
                let gb = w.ynew[ev.component] - offset;
                if crosses(ga, gb, ev.direction) {
                    let t_ev =
                        bisect_segment(seg, n, ev.component, t, h_this, t_new, ga, offset, tol);
                    match ev.action {
                        EventAction::Halt => {
                            if halt.is_none_or(|(_, tcur)| t_ev < tcur) {
                                halt = Some((idx, t_ev));
                            }
                        }
                        EventAction::Record => recorded.push((idx, t_ev)),
                    }
                }
            }
            // Firings past a halting event never happened.
            let t_cut = halt.map_or(f64::INFINITY, |(_, t_ev)| t_ev);
            events_fired.extend(recorded.into_iter().filter(|&(_, t_ev)| t_ev <= t_cut));
            if let Some((idx, t_ev)) = halt {
                events_fired.push((idx, t_ev));
                // Truncate the final node at the event time.
                eval_segment(seg, n, t, h_this, t_ev, &mut w.buf);
                ts.pop();
                ys.truncate(ys.len() - n);
                ts.push(t_ev);
                ys.extend_from_slice(&w.buf);
                return finish(
                    Termination::EventFired {
                        event: idx,
                        t: t_ev,
                    },
                    ts,
                    ys,
                    cont,
                    seg_h,
                    stats,
                    events_fired,
                );
            }

            if landing {
                return finish(
                    Termination::ReachedEnd,
                    ts,
                    ys,
                    cont,
                    seg_h,
                    stats,
                    events_fired,
                );
            }

            // FSAL: k7 becomes next step's k1.
            w.k.swap(0, 6);
            y.copy_from_slice(&w.ynew);
            t = t_new;

            let fac =
                (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
            facold = err.max(1e-4);
            let mut h_new = h_this / fac;
            if rejected_last {
                h_new = h_new.min(h_this);
                rejected_last = false;
            }
            h = h_new;
        } else {
            stats.steps_rejected += 1;
            rejected_last = true;
            h = h_this / (fac11 / SAFETY).clamp(1.0, 1.0 / MIN_FACTOR);
        }
    }
}

/// One trial step; fills `w.ynew`, `w.k[1..7]`. Returns `(scaled error, finite?)`.
fn attempt_step<F: Fn(f64, &[f64], &mut [f64])>(
    spec: &IvpSpec<F>,
    tol: &Tolerances,
    t: f64,
    y: &[f64],
    h: f64,
    w: &mut Work,
    stats: &mut Stats,
) -> (f64, bool) {
    let n = spec.dimension;
    for j in 0..n {
        w.ytmp[j] = y[j] + h * A21 * w.k[0][j];
    }
    (spec.rhs)(t + C2 * h, &w.ytmp, &mut w.k[1]);
    for j in 0..n {
        w.ytmp[j] = y[j] + h * (A31 * w.k[0][j] + A32 * w.k[1][j]);
    }
    (spec.rhs)(t + C3 * h, &w.ytmp, &mut w.k[2]);
    for j in 0..n {
        w.ytmp[j] = y[j] + h * (A41 * w.k[0][j] + A42 * w.k[1][j] + A43 * w.k[2][j]);
    }
    (spec.rhs)(t + C4 * h, &w.ytmp, &mut w.k[3]);
    for j in 0..n {
        w.ytmp[j] =
            y[j] + h * (A51 * w.k[0][j] + A52 * w.k[1][j] + A53 * w.k[2][j] + A54 * w.k[3][j]);
    }
    (spec.rhs)(t + C5 * h, &w.ytmp, &mut w.k[4]);
    for j in 0..n {
        w.ytmp[j] = y[j]
            + h * (A61 * w.k[0][j]
                + A62 * w.k[1][j]
                + A63 * w.k[2][j]
                + A64 * w.k[3][j]
                + A65 * w.k[4][j]);
    }
    (spec.rhs)(t + h, &w.ytmp, &mut w.k[5]);
    for j in 0..n {
        w.ynew[j] = y[j]
            + h * (B1 * w.k[0][j]
                + B3 * w.k[2][j]
                + B4 * w.k[3][j]
                + B5 * w.k[4][j]
                + B6 * w.k[5][j]);
    }
    (spec.rhs)(t + h, &w.ynew, &mut w.k[6]);
    stats.rhs_evals += 6;

    let mut err = 0.0;
    let mut finite = w.ynew.iter().all(|v| v.is_finite());
    if finite {
        for j in 0..n {
            let e = h
                * (E1 * w.k[0][j]
                    + E3 * w.k[2][j]
                    + E4 * w.k[3][j]
                    + E5 * w.k[4][j]
                    + E6 * w.k[5][j]
                    + E7 * w.k[6][j]);
            let sk = tol.abs_tol + tol.rel_tol * y[j].abs().max(w.ynew[j].abs());
            err += (e / sk) * (e / sk);
        }
        err = (err / n as f64).sqrt();
        finite = err.is_finite();
    }
    (err, finite)
}

/// Hairer's deterministic initial step size guess.
fn initial_step<F: Fn(f64, &[f64], &mut [f64])>(
    spec: &IvpSpec<F>,
    tol: &Tolerances,
    y: &[f64],
    f0: &[f64],
    ytmp: &mut [f64],
    f1: &mut [f64],
    stats: &mut Stats,
) -> f64 {
    let n = spec.dimension;
    let span = spec.t_end - spec.t_start;
    let rms = |num: &dyn Fn(usize) -> f64| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            let sk = tol.abs_tol + tol.rel_tol * y[j].abs();
            let v = num(j) / sk;
            s += v * v;
        }
        (s / n as f64).sqrt()
    };
    let d0 = rms(&|j| y[j]);
    let d1 = rms(&|j| f0[j]);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * (d0 / d1)
    };
    h0 = h0.min(span).min(tol.max_step);

    for j in 0..n {
        ytmp[j] = y[j] + h0 * f0[j];
    }
    (spec.rhs)(spec.t_start + h0, ytmp, f1);
    stats.rhs_evals += 1;
    let d2 = if f1.iter().all(|v| v.is_finite()) {
        rms(&|j| f1[j] - f0[j]) / h0
    } else {
        1.0 / h0
    };

    let der12 = d1.max(d2);
    let h1 = if der12 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span).min(tol.max_step)
}

fn eval_segment(seg: &[f64], n: usize, t0: f64, h: f64, t: f64, out: &mut [f64]) {
    let s = (t - t0) / h;
    let s1 = 1.0 - s;
    for j in 0..n {
        let (c0, c1, c2, c3, c4) = (
            seg[j],
            seg[n + j],
            seg[2 * n + j],
            seg[3 * n + j],
            seg[4 * n + j],
        );
        out[j] = c0 + s * (c1 + s1 * (c2 + s * (c3 + s1 * c4)));
    }
}

#[allow(clippy::too_many_arguments)]
fn bisect_segment(
    seg: &[f64],
    n: usize,
    component: usize,
    t0: f64,
    h: f64,
    t1: f64,
    ga: f64,
    offset: f64,
    tol: &Tolerances,
) -> f64 {
    let mut buf = vec![0.0; n];
    let sa = ga.signum();
    let (mut a, mut b) = (t0, t1);
    while (b - a) > tol.rel_tol * b.abs().max(a.abs()) + tol.abs_tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        eval_segment(seg, n, t0, h, m, &mut buf);
        let gm = buf[component] - offset;
        if gm == 0.0 {
            return m;
        }
        if gm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    b
}
