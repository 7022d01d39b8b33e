//! The initial-value normalization: substituting h = f/|f0| shows that
//! solve(λ, q, f0) = |f0| · solve(λ|f0|^{q−1}, q, −1) pointwise, so
//! f(0) = −1 loses no generality. Both routes are integrated here and
//! compared.
//!
//! Run with: `cargo run --release --example rescaling_identity`

use kpz_selfsim::ode::Tolerances;
use kpz_selfsim::profile::{rescale_initial_value, solve_profile, ModelParams};

fn main() -> kpz_selfsim::Result<()> {
    let params = ModelParams::new(1.0, 3.0)?;
    let f0 = -2.0;
    let (rescaled, scale) = rescale_initial_value(&params, f0)?;
    println!(
        "direct run: lambda = {}, f0 = {f0};  reduced run: lambda' = {}, f0 = -1, scale = {scale}",
        params.lambda, rescaled.lambda
    );

    let tol = Tolerances::default();
    let direct = solve_profile(&params, f0, 10.0, &tol)?;
    let reduced = solve_profile(&rescaled, -1.0, 10.0, &tol)?;

    println!("\n  xi     f(direct)        scale·h(reduced)  difference");
    for xi in [0.5, 1.0, 2.0, 5.0] {
        let (fa, _) = direct.eval(xi)?;
        let (fb, _) = reduced.eval(xi)?;
        println!(
            "  {xi:<6} {fa:<16.12} {:<17.12} {:.2e}",
            scale * fb,
            (fa - scale * fb).abs()
        );
    }
    Ok(())
}
