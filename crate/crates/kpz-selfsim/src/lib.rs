//! Numerical laboratory for self-similar gradient blow-up in the generalized
//! deterministic KPZ equation `u_t = u_xx + λ|u_x|^q` with `λ > 0`, `q > 2`.
//!
//! The library builds the self-similar profile `u(x,t) = (T0−t)^α f(ξ)`,
//! `ξ = |x|(T0−t)^{−1/2}`, integrates the profile ODE
//!
//! ```text
//! f″ + λ|f′|^q − (ξ/2) f′ + α f = 0,   α = (q−2)/(2(q−1)),
//! ```
//!
//! and turns the qualitative theory into machine-checked facts:
//!
//! - [`ode`] — adaptive embedded Runge–Kutta 5(4) with dense output, PI step
//!   control and event location; the shared integration engine.
//! - [`profile`] — the profile ODE for both initial-data regimes
//!   (`f(0) < 0` global, `f(0) > 0` finite-ξ breakdown), sign/monotonicity and
//!   gradient-bound checks, and the `f ↦ f/|f0|` rescaling identity.
//! - [`asymptotics`] — log-variable trace `g(t) = f′(e^t)·e^{−t/(q−1)}`,
//!   residual validation of the transformed equation, and Aitken-accelerated
//!   extraction of the limits `g → C0` and `f/ξ^{q/(q−1)} → C`.
//! - [`blowup`] — certified bracketing of the breakdown point ξ⋆ for
//!   `f(0) > 0` together with the a priori bound
//!   `ξ⋆ ≤ ξ₁ + 1/(λ(q−1)|f′(ξ₁)|^{q−1})`.
//! - [`pde`] — method-of-lines cross-check of the ansatz against the PDE
//!   itself, with a second-order mesh-refinement study.
//! - [`cli`] — the `kpz-selfsim` command line (single runs and parameter
//!   sweeps with deterministic artifacts).
//!
//! Every computation is deterministic: no RNG, no time-dependent values in
//! result payloads, and identical inputs produce byte-identical outputs.
//! See the `examples/` directory for one runnable example per capability.

// `!(x > 0.0)` is used instead of `x <= 0.0` throughout: the negated form
// also rejects NaN. Index loops over several parallel arrays stay as-is.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod blowup;
pub mod cli;
pub mod ode;
pub mod pde;
pub mod profile;

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller violated an operation's precondition (usage error).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A runtime check contradicted a property the theory guarantees.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    /// An evaluation point fell outside the computed range.
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
