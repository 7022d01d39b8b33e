//! Integrate the self-similar profile for f(0) = −1, locate the first
//! zero ξ₀, and verify the sign and gradient-bound facts node by node.
//!
//! Run with: `cargo run --release --example profile_portrait`

use kpz_selfsim::ode::Tolerances;
use kpz_selfsim::profile::{
    check_gradient_bound, check_monotonicity, exponents, gradient_bound_value, profile_csv,
    solve_profile, ModelParams,
};

fn main() -> kpz_selfsim::Result<()> {
    let params = ModelParams::new(1.0, 3.0)?;
    let e = exponents(&params);
    println!(
        "lambda = {}, q = {}: alpha = {}, beta = {}",
        params.lambda, params.q, e.alpha, e.beta
    );

    let sol = solve_profile(&params, -1.0, 1e6, &Tolerances::default())?;
    println!("termination: {:?}", sol.termination);
    println!(
        "first zero of f: xi0 = {}",
        sol.xi0.expect("zero crossing exists")
    );

    println!("\n  xi        f             f'            bound (xi/(2λ))^(1/(q−1))");
    for xi in [0.5, 1.0, 2.0, 5.0, 20.0, 100.0, 1e4, 1e6] {
        let (f, fp) = sol.eval(xi)?;
        println!(
            "  {xi:<9} {f:<13.6e} {fp:<13.6e} {:.6e}",
            gradient_bound_value(xi, &params)
        );
    }

    let mono = check_monotonicity(&sol)?;
    let grad = check_gradient_bound(&sol)?;
    println!(
        "\npositivity of f' and f'':  {} violations / {} nodes",
        mono.violations.len(),
        mono.nodes_checked
    );
    println!(
        "gradient bound (xi >= xi0): {} violations / {} nodes",
        grad.violations.len(),
        grad.nodes_checked
    );

    let csv = profile_csv(&sol, 512)?;
    std::fs::write("profile.csv", &csv)?;
    println!("\nwrote profile.csv ({} rows)", csv.lines().count() - 1);
    Ok(())
}
