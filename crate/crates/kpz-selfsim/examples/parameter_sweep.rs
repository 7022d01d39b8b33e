//! In-process parameter sweep: the 9-cell (λ, q) grid of ratio-limit
//! estimates, evaluated in parallel with deterministic, ordered output.
//! (The `kpz-selfsim sweep` subcommand wraps the same pattern with
//! JSON-lines artifacts.)
//!
//! Run with: `cargo run --release --example parameter_sweep`

use kpz_selfsim::asymptotics::{constants, estimate_ratio_limit};
use kpz_selfsim::ode::Tolerances;
use kpz_selfsim::profile::{solve_profile, ModelParams};
use rayon::prelude::*;

fn main() -> kpz_selfsim::Result<()> {
    let mut grid = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        for q in [2.5, 3.0, 4.0] {
            grid.push((lambda, q));
        }
    }

    // Cells run concurrently; results are collected in grid order, so the
    // table is identical for any thread count.
    let rows: Vec<_> = grid
        .par_iter()
        .map(|&(lambda, q)| {
            let params = ModelParams::new(lambda, q)?;
            let sol = solve_profile(&params, -1.0, 1e6, &Tolerances::default())?;
            let est = estimate_ratio_limit(&sol, &constants(&params))?;
            Ok((lambda, q, est))
        })
        .collect::<kpz_selfsim::Result<_>>()?;

    println!(" lambda  q     C(exact)       estimate       rel err");
    for (lambda, q, est) in rows {
        println!(
            " {lambda:<6} {q:<5} {:<14.9} {:<14.9} {:.2e}",
            est.exact_value, est.accelerated_value, est.rel_error
        );
    }
    Ok(())
}
