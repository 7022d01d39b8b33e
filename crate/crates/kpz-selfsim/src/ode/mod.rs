//! Adaptive explicit Runge–Kutta integration with dense output and events.
//!
//! The engine is the Dormand–Prince 5(4) embedded pair (FSAL, 6 function
//! evaluations per step) with the classic quartic dense interpolant and a
//! PI step-size controller (safety 0.9, growth clamp [0.2, 5.0]).
//!
//! Termination is always reported truthfully in [`Termination`]:
//! reaching `t_end`, a halting [`Event`], or step collapse (the controller
//! would have to step below the `min_step` floor, or the right-hand side
//! returned a non-finite value). The last good state is preserved in all
//! cases.
//!
//! Everything here is pure and deterministic: identical inputs produce
//! bit-identical trajectories.

mod dopri5;

use crate::{Error, Result};

/// An initial value problem `y′ = rhs(t, y)`, `y(t_start) = y_start`.
pub struct IvpSpec<F> {
    pub dimension: usize,
    pub rhs: F,
    pub t_start: f64,
    pub t_end: f64,
    pub y_start: Vec<f64>,
}

impl<F: Fn(f64, &[f64], &mut [f64])> IvpSpec<F> {
    pub fn new(rhs: F, t_start: f64, t_end: f64, y_start: Vec<f64>) -> Self {
        let dimension = y_start.len();
        Self {
            dimension,
            rhs,
            t_start,
            t_end,
            y_start,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dimension < 1 {
            return Err(Error::InvalidInput("ivp dimension must be >= 1".into()));
        }
        if self.y_start.len() != self.dimension {
            return Err(Error::InvalidInput(format!(
                "y_start has {} entries, expected {}",
                self.y_start.len(),
                self.dimension
            )));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidInput(format!(
                "t_end ({}) must exceed t_start ({})",
                self.t_end, self.t_start
            )));
        }
        if !self.y_start.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("y_start must be finite".into()));
        }
        Ok(())
    }
}

/// Error-control and step-size limits.
///
/// The local error per step is held below `abs_tol + rel_tol·|y|`
/// componentwise (RMS norm). `min_step` is a relative floor: the step may
/// not drop below `min_step·max(1, |t|)`; when the controller asks for
/// less, the run terminates with [`Termination::StepCollapsed`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1e150,
            min_step: 1e-14,
        }
    }
}

impl Tolerances {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.rel_tol) || !pos(self.abs_tol) || !pos(self.max_step) || !pos(self.min_step) {
            return Err(Error::InvalidInput(
                "tolerances and step bounds must be strictly positive".into(),
            ));
        }
        if !(self.min_step < self.max_step) {
            return Err(Error::InvalidInput(
                "min_step must be below max_step".into(),
            ));
        }
        Ok(())
    }

    /// Step floor at abscissa `t`.
    pub fn min_step_at(&self, t: f64) -> f64 {
        self.min_step * t.abs().max(1.0)
    }

    /// Mixed error scale at state value `y`.
    pub fn scale(&self, y: f64) -> f64 {
        self.abs_tol + self.rel_tol * y.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    SignChangeOfComponent,
    ThresholdOnComponent,
    /// Step collapse is always detected by the controller; listing it as an
    /// event merely documents that the caller expects it.
    StepCollapse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

/// Whether a fired event stops the integration or is only recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventAction {
    Halt,
    Record,
}

/// A state-dependent event, located on the dense interpolant by bisection
/// to within `rel_tol·|t| + abs_tol`.
#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub kind: EventKind,
    pub component: usize,
    pub threshold: f64,
    pub direction: Direction,
    pub action: EventAction,
}

impl Event {
    pub fn sign_change(component: usize) -> Self {
        Self {
            kind: EventKind::SignChangeOfComponent,
            component,
            threshold: 0.0,
            direction: Direction::Any,
            action: EventAction::Halt,
        }
    }

    pub fn threshold(component: usize, threshold: f64, direction: Direction) -> Self {
        Self {
            kind: EventKind::ThresholdOnComponent,
            component,
            threshold,
            direction,
            action: EventAction::Halt,
        }
    }

    pub fn step_collapse() -> Self {
        Self {
            kind: EventKind::StepCollapse,
            component: 0,
            threshold: 0.0,
            direction: Direction::Any,
            action: EventAction::Halt,
        }
    }

    pub fn recording(mut self) -> Self {
        self.action = EventAction::Record;
        self
    }
}

/// Why the integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    ReachedEnd,
    EventFired { event: usize, t: f64 },
    StepCollapsed { t_last: f64 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
}

/// An accepted solution: nodes, per-step dense interpolants, termination
/// cause and step statistics. Node abscissae are strictly increasing and
/// the interpolant reproduces stored nodes exactly at node abscissae.
pub struct Trajectory {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>,
    /// Interpolant coefficients, 5·dim per segment (Hairer's quartic).
    cont: Vec<f64>,
    /// Original step length per segment (differs from node spacing only on
    /// a final segment truncated by an event).
    seg_h: Vec<f64>,
    termination: Termination,
    stats: Stats,
    events_fired: Vec<(usize, f64)>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.ts[i]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_last(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn last_y(&self) -> &[f64] {
        self.y(self.len() - 1)
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// All recorded event firings as `(event index, t)`.
    pub fn events_fired(&self) -> &[(usize, f64)] {
        &self.events_fired
    }

    /// First firing time of event `idx`, if it fired.
    pub fn event_time(&self, idx: usize) -> Option<f64> {
        self.events_fired
            .iter()
            .find(|(i, _)| *i == idx)
            .map(|(_, t)| *t)
    }

    /// Evaluate the dense interpolant at `t` (must lie within the computed
    /// span) into `out`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        if self.ts.len() < 2 {
            if t == self.ts[0] {
                out.copy_from_slice(self.y(0));
                return Ok(());
            }
            return Err(Error::OutOfRange(format!(
                "trajectory has a single node at {}",
                self.ts[0]
            )));
        }
        if t < self.t_start() || t > self.t_last() {
            return Err(Error::OutOfRange(format!(
                "t = {} outside computed span [{}, {}]",
                t,
                self.t_start(),
                self.t_last()
            )));
        }
        if t == self.t_last() {
            out.copy_from_slice(self.last_y());
            return Ok(());
        }
        // Segment i spans [ts[i], ts[i+1]); the last segment is closed.
        let nseg = self.ts.len() - 1;
        let mut i = self.ts.partition_point(|&x| x <= t);
        i = i.saturating_sub(1).min(nseg - 1);
        let s = (t - self.ts[i]) / self.seg_h[i];
        let s1 = 1.0 - s;
        let c = &self.cont[i * 5 * self.dim..(i + 1) * 5 * self.dim];
        let d = self.dim;
        for j in 0..d {
            let (c0, c1, c2, c3, c4) = (c[j], c[d + j], c[2 * d + j], c[3 * d + j], c[4 * d + j]);
            out[j] = c0 + s * (c1 + s1 * (c2 + s * (c3 + s1 * c4)));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Iterate `(t, y)` over stored nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.ts.iter().enumerate().map(|(i, &t)| (t, self.y(i)))
    }

    fn eval_component(&self, t: f64, component: usize, buf: &mut [f64]) -> f64 {
        self.eval_into(t, buf).expect("in-span evaluation");
        buf[component]
    }
}

/// Integrate `spec` under `tol`, watching `events`.
///
/// A non-finite right-hand side or a controller step below the floor halts
/// the run with [`Termination::StepCollapsed`] and the last good state kept;
/// it is not an `Err`. `Err` is reserved for usage errors.
pub fn integrate<F: Fn(f64, &[f64], &mut [f64])>(
    spec: &IvpSpec<F>,
    tol: &Tolerances,
    events: &[Event],
) -> Result<Trajectory> {
    spec.validate()?;
    tol.validate()?;
    for ev in events {
        if ev.kind != EventKind::StepCollapse && ev.component >= spec.dimension {
            return Err(Error::InvalidInput(format!(
                "event component {} out of range for dimension {}",
                ev.component, spec.dimension
            )));
        }
    }
    Ok(dopri5::run(spec, tol, events))
}

/// Smallest `t` at which `component` of the dense solution crosses zero,
/// refined by bisection; `None` when there is no crossing.
pub fn locate_sign_change(traj: &Trajectory, component: usize) -> Result<Option<f64>> {
    if component >= traj.dim() {
        return Err(Error::InvalidInput(format!(
            "component {} out of range for dimension {}",
            component,
            traj.dim()
        )));
    }
    if traj.len() < 2 {
        return Err(Error::InvalidInput(
            "trajectory needs at least 2 nodes".into(),
        ));
    }
    let mut buf = vec![0.0; traj.dim()];
    for i in 0..traj.len() - 1 {
        let (ta, tb) = (traj.t(i), traj.t(i + 1));
        let tm = 0.5 * (ta + tb);
        let ga = traj.y(i)[component];
        let gm = traj.eval_component(tm, component, &mut buf);
        let gb = traj.y(i + 1)[component];
        // Check half-segments so an interior double crossing within one
        // step is not silently skipped.
        for (a, b, fa, fb) in [(ta, tm, ga, gm), (tm, tb, gm, gb)] {
            if fa == 0.0 {
                return Ok(Some(a));
            }
            if crosses(fa, fb, Direction::Any) {
                let t = bisect(traj, component, a, b, fa, 0.0, 1e-10, 1e-12, &mut buf);
                return Ok(Some(t));
            }
        }
    }
    let last = traj.last_y()[component];
    if last == 0.0 {
        return Ok(Some(traj.t_last()));
    }
    Ok(None)
}

fn crosses(fa: f64, fb: f64, direction: Direction) -> bool {
    let hit = fa != 0.0 && (fa.signum() != fb.signum() || fb == 0.0);
    match direction {
        Direction::Any => hit,
        Direction::Rising => hit && fa < 0.0,
        Direction::Falling => hit && fa > 0.0,
    }
}

/// Bisect `g(t) = y[component](t) − offset` on `[a, b]` with `g(a) = fa − offset`
/// of known sign; returns the located crossing time.
#[allow(clippy::too_many_arguments)]
fn bisect(
    traj: &Trajectory,
    component: usize,
    mut a: f64,
    mut b: f64,
    fa: f64,
    offset: f64,
    rel_tol: f64,
    abs_tol: f64,
    buf: &mut [f64],
) -> f64 {
    let sa = (fa - offset).signum();
    while (b - a) > rel_tol * b.abs().max(a.abs()) + abs_tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break; // f64 exhausted
        }
        let gm = traj.eval_component(m, component, buf) - offset;
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
