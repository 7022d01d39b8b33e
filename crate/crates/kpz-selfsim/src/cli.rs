//! Command-line front end: single experiments, parameter sweeps, and
//! deterministic CSV/JSON artifacts.
//!
//! Subcommands: `profile`, `asymptotics`, `blowup`, `pde-check`, `sweep`.
//! Exit codes: 0 = all checks pass, 1 = an invariant or tolerance failed,
//! 2 = usage error; no other codes. Result payloads carry no timestamps
//! (wall time is reported only in the stdout record, outside the
//! determinism contract), so identical invocations produce byte-identical
//! artifacts and sweeps merge deterministically regardless of parallelism.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::ode::{Termination, Tolerances};
use crate::{asymptotics, blowup, pde, profile, Error};

pub const SCHEMA_VERSION: u64 = 1;
const OUT_DIR_ENV: &str = "KPZ_SELFSIM_OUT";

#[derive(Parser)]
#[command(
    name = "kpz-selfsim",
    version,
    about = "Self-similar gradient blow-up laboratory for u_t = u_xx + λ|u_x|^q (λ > 0, q > 2)",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Reserved flag documenting the determinism guarantee: nothing here
    /// uses randomness, so requesting seedless mode is rejected as a
    /// usage error rather than silently accepted.
    #[arg(long, global = true)]
    seedless: bool,
    /// Directory for output artifacts; overrides KPZ_SELFSIM_OUT.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the profile equation and check the sign/bound facts.
    Profile(ProfileArgs),
    /// Estimate the far-field limits and compare with the closed forms.
    Asymptotics(AsymptoticsArgs),
    /// Certify finite-ξ gradient breakdown and bracket ξ⋆.
    Blowup(BlowupArgs),
    /// Method-of-lines cross-check against the closed-form field.
    PdeCheck(PdeCheckArgs),
    /// Run a subcommand over a cartesian (λ, q, f0) grid.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct ProfileArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    f0: f64,
    #[arg(long, default_value_t = profile::DEFAULT_XI_MAX)]
    xi_max: f64,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
}

#[derive(Args, Clone)]
struct AsymptoticsArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    f0: f64,
    #[arg(long, default_value_t = profile::DEFAULT_XI_MAX)]
    xi_max: f64,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Acceptance threshold on the relative error of each estimate.
    #[arg(long, default_value_t = 2e-2)]
    tol: f64,
    /// Also estimate the gradient-variable limit against C0.
    #[arg(long)]
    report_g: bool,
}

#[derive(Args, Clone)]
struct BlowupArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, allow_hyphen_values = true)]
    f0: f64,
    #[arg(long, default_value_t = 1e6)]
    xi_max: f64,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
}

#[derive(Args, Clone)]
struct PdeCheckArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    t0: f64,
    #[arg(long, default_value_t = pde::DEFAULT_HALF_WIDTH)]
    half_width: f64,
    #[arg(long, default_value_t = pde::DEFAULT_GRID_POINTS)]
    grid_points: usize,
    #[arg(long, default_value_t = pde::DEFAULT_T_END)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Acceptance threshold on the max-norm relative error.
    #[arg(long, default_value_t = 1e-2)]
    tol: f64,
}

#[derive(Args, Clone)]
struct SweepArgs {
    /// Which subcommand to run per grid cell.
    #[arg(long, value_parser = ["profile", "asymptotics", "blowup", "pde-check"])]
    command: String,
    /// Comma-separated λ values.
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    /// Comma-separated q values.
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<f64>,
    /// Comma-separated f0 values (defaults depend on the subcommand;
    /// ignored by pde-check).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    f0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Acceptance threshold passed through to asymptotics / pde-check.
    #[arg(long)]
    tol: Option<f64>,
}

/// Parse argv and execute; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.seedless {
        eprintln!(
            "--seedless is reserved: every computation here is deterministic and uses no \
             randomness, so there is no seed to disable"
        );
        return 2;
    }
    let out_dir = cli
        .out_dir
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let started = std::time::Instant::now();
    let outcome = match &cli.command {
        Command::Profile(a) => run_profile(a, &out_dir),
        Command::Asymptotics(a) => run_asymptotics(a, &out_dir),
        Command::Blowup(a) => run_blowup(a, &out_dir),
        Command::PdeCheck(a) => run_pde_check(a, &out_dir),
        Command::Sweep(a) => run_sweep(a, &out_dir),
    };

    match outcome {
        Err(Error::InvalidInput(msg)) | Err(Error::OutOfRange(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
        Ok(record) => {
            let code = if record.failures.is_empty() { 0 } else { 1 };
            for f in &record.failures {
                eprintln!("FAIL: {f}");
            }
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": record.command,
                "params": record.params,
                "inputs": record.inputs,
                "outputs": record.outputs,
                "invariant_failures": record.failures,
                "artifact_paths": record.artifacts,
                "wall_time_seconds": started.elapsed().as_secs_f64(),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("serializable record")
            );
            code
        }
    }
}

struct Outcome {
    command: &'static str,
    params: Value,
    inputs: Value,
    outputs: Value,
    failures: Vec<String>,
    artifacts: Vec<String>,
}

fn tolerances(rtol: f64, atol: f64) -> crate::Result<Tolerances> {
    let tol = Tolerances::default().with_rel_tol(rtol).with_abs_tol(atol);
    tol.validate()?;
    Ok(tol)
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> crate::Result<String> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path.to_string_lossy().into_owned())
}

fn write_json(dir: &Path, name: &str, doc: &Value) -> crate::Result<String> {
    let mut text = serde_json::to_string_pretty(doc).expect("serializable artifact");
    text.push('\n');
    write_artifact(dir, name, &text)
}

fn termination_label(t: Termination) -> String {
    match t {
        Termination::ReachedEnd => "reached_end".into(),
        Termination::EventFired { event, t } => format!("event_{event}_at_{t}"),
        Termination::StepCollapsed { t_last } => format!("step_collapsed_at_{t_last}"),
    }
}

fn check_to_json(report: &profile::CheckReport) -> Value {
    json!({
        "nodes_checked": report.nodes_checked,
        "violations": report
            .violations
            .iter()
            .map(|v| json!({ "xi": v.xi, "f": v.f, "fp": v.fp, "fpp": v.fpp, "what": v.what }))
            .collect::<Vec<_>>(),
    })
}

/// Shared body of `profile`: solve, check, export. Returns (outputs,
/// failures, artifacts written).
fn profile_payload(
    a: &ProfileArgs,
    out_dir: Option<&Path>,
) -> crate::Result<(Value, Vec<String>, Vec<String>)> {
    let params = profile::ModelParams::new(a.lambda, a.q)?;
    let tol = tolerances(a.rtol, a.atol)?;
    let sol = profile::solve_profile(&params, a.f0, a.xi_max, &tol)?;

    let mut failures: Vec<String> = sol.violations.clone();
    let mut checks = json!({});
    if a.f0 < 0.0 {
        let mono = profile::check_monotonicity(&sol)?;
        if !mono.passed() {
            failures.push(format!(
                "positivity of f' and f'' failed at {} node(s)",
                mono.violations.len()
            ));
        }
        // The bound check needs ξ₀; a run without one is already flagged
        // as a violation above.
        let grad_json = if sol.xi0.is_some() {
            let grad = profile::check_gradient_bound(&sol)?;
            if !grad.passed() {
                failures.push(format!(
                    "gradient bound failed at {} node(s)",
                    grad.violations.len()
                ));
            }
            check_to_json(&grad)
        } else {
            Value::Null
        };
        checks = json!({
            "monotonicity": check_to_json(&mono),
            "gradient_bound": grad_json,
        });
    }

    let outputs = json!({
        "lambda": params.lambda,
        "q": params.q,
        "f0": a.f0,
        "xi_max": a.xi_max,
        "xi0": sol.xi0,
        "xi_max_reached": sol.xi_max_reached,
        "termination": termination_label(sol.termination),
        "checks": checks,
    });

    let mut artifacts = Vec::new();
    if let Some(dir) = out_dir {
        let csv = profile::profile_csv(&sol, profile::DEFAULT_CSV_SAMPLES)?;
        artifacts.push(write_artifact(dir, "profile.csv", &csv)?);
        artifacts.push(write_json(dir, "profile_checks.json", &outputs)?);
    }
    Ok((outputs, failures, artifacts))
}

fn run_profile(a: &ProfileArgs, out_dir: &Path) -> crate::Result<Outcome> {
    let (outputs, failures, artifacts) = profile_payload(a, Some(out_dir))?;
    Ok(Outcome {
        command: "profile",
        params: json!({ "lambda": a.lambda, "q": a.q, "t0": 1.0 }),
        inputs: json!({
            "lambda": a.lambda, "q": a.q, "f0": a.f0, "xi_max": a.xi_max,
            "rtol": a.rtol, "atol": a.atol,
        }),
        outputs,
        failures,
        artifacts,
    })
}

fn asymptotics_payload(
    a: &AsymptoticsArgs,
    out_dir: Option<&Path>,
) -> crate::Result<(Value, Vec<String>, Vec<String>)> {
    let params = profile::ModelParams::new(a.lambda, a.q)?;
    let tol = tolerances(a.rtol, a.atol)?;
    if !(a.f0 < 0.0) {
        return Err(Error::InvalidInput(format!(
            "asymptotics needs f0 < 0 (global regime), got {}",
            a.f0
        )));
    }
    let sol = profile::solve_profile(&params, a.f0, a.xi_max, &tol)?;
    if !sol.violations.is_empty() {
        // A broken base run is an invariant failure, not a usage error;
        // the estimators' preconditions would misreport it as the latter.
        return Err(Error::InvariantViolation(sol.violations.join("; ")));
    }
    let mut failures = Vec::new();
    let consts = asymptotics::constants(&params);
    let ratio = asymptotics::estimate_ratio_limit(&sol, &consts)?;
    if ratio.rel_error >= a.tol {
        failures.push(format!(
            "ratio-limit relative error {:e} is not below tol {:e}",
            ratio.rel_error, a.tol
        ));
    }
    let ratio_doc = asymptotics::estimate_to_json(&ratio, &params, a.xi_max);

    let mut g_doc = None;
    if a.report_g {
        let trace = asymptotics::to_log_trace(&sol)?;
        let g = asymptotics::estimate_g_limit(&trace, &consts)?;
        if g.rel_error >= a.tol {
            failures.push(format!(
                "g-limit relative error {:e} is not below tol {:e}",
                g.rel_error, a.tol
            ));
        }
        g_doc = Some(asymptotics::estimate_to_json(&g, &params, a.xi_max));
    }

    let mut outputs = json!({
        "constants": { "c": consts.c, "c0": consts.c0, "c1": consts.c1 },
        "ratio_limit": ratio_doc,
    });
    if let Some(g) = &g_doc {
        outputs["g_limit"] = g.clone();
    }

    let mut artifacts = Vec::new();
    if let Some(dir) = out_dir {
        artifacts.push(write_json(
            dir,
            "asymptotics.json",
            &outputs["ratio_limit"],
        )?);
        if let Some(g) = &g_doc {
            artifacts.push(write_json(dir, "asymptotics_g.json", g)?);
        }
    }
    Ok((outputs, failures, artifacts))
}

fn run_asymptotics(a: &AsymptoticsArgs, out_dir: &Path) -> crate::Result<Outcome> {
    let (outputs, failures, artifacts) = asymptotics_payload(a, Some(out_dir))?;
    Ok(Outcome {
        command: "asymptotics",
        params: json!({ "lambda": a.lambda, "q": a.q, "t0": 1.0 }),
        inputs: json!({
            "lambda": a.lambda, "q": a.q, "f0": a.f0, "xi_max": a.xi_max,
            "rtol": a.rtol, "atol": a.atol, "tol": a.tol, "report_g": a.report_g,
        }),
        outputs,
        failures,
        artifacts,
    })
}

fn blowup_payload(
    a: &BlowupArgs,
    out_dir: Option<&Path>,
) -> crate::Result<(Value, Vec<String>, Vec<String>)> {
    let params = profile::ModelParams::new(a.lambda, a.q)?;
    let tol = tolerances(a.rtol, a.atol)?;
    if !(a.f0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "breakdown detection needs f0 > 0, got {}",
            a.f0
        )));
    }
    let options = blowup::BlowupOptions {
        xi_max: a.xi_max,
        tol,
        ..Default::default()
    };
    let run = blowup::detect_blowup_with(&params, a.f0, &options)?;

    let mut failures = Vec::new();
    let (lo, hi) = run.report.xi_star_bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        failures.push(format!(
            "breakdown bracket [{lo}, {hi}] is not a finite interval"
        ));
    }
    let ineq = blowup::check_differential_inequality(&run.report, &run.solution)?;
    if !ineq.passed() {
        failures.push(format!(
            "gradient differential inequality failed at {} node(s)",
            ineq.violations.len()
        ));
    }
    let descent = blowup::check_descent(&run.report, &run.solution)?;
    if !descent.passed() {
        failures.push(format!(
            "monotone decrease failed at {} node(s)",
            descent.violations.len()
        ));
    }

    let outputs = blowup::report_to_json(&run.report);
    let mut artifacts = Vec::new();
    if let Some(dir) = out_dir {
        artifacts.push(write_json(dir, "blowup.json", &outputs)?);
    }
    Ok((outputs, failures, artifacts))
}

fn run_blowup(a: &BlowupArgs, out_dir: &Path) -> crate::Result<Outcome> {
    let (outputs, failures, artifacts) = blowup_payload(a, Some(out_dir))?;
    Ok(Outcome {
        command: "blowup",
        params: json!({ "lambda": a.lambda, "q": a.q, "t0": 1.0 }),
        inputs: json!({
            "lambda": a.lambda, "q": a.q, "f0": a.f0, "xi_max": a.xi_max,
            "rtol": a.rtol, "atol": a.atol,
        }),
        outputs,
        failures,
        artifacts,
    })
}

fn pde_payload(
    a: &PdeCheckArgs,
    out_dir: Option<&Path>,
) -> crate::Result<(Value, Vec<String>, Vec<String>)> {
    let params = profile::ModelParams::new(a.lambda, a.q)?.with_t0(a.t0)?;
    let tol = tolerances(a.rtol, a.atol)?;
    if !(a.t_end >= 0.0 && a.t_end < a.t0) {
        return Err(Error::InvalidInput(format!(
            "t_end = {} must lie in [0, T0 = {})",
            a.t_end, a.t0
        )));
    }
    // The profile only needs to cover the xi reach of the run.
    let xi_need = a.half_width / (a.t0 - a.t_end).sqrt();
    let sol = profile::solve_profile(&params, -1.0, (2.0 * xi_need).max(20.0), &tol)?;
    let report =
        pde::evolve_and_compare(&params, &sol, a.half_width, a.grid_points, a.t_end, &tol)?;

    let mut failures = Vec::new();
    if !(report.coarse.max_rel_err < a.tol) {
        failures.push(format!(
            "max-norm relative error {:e} is not below tol {:e}",
            report.coarse.max_rel_err, a.tol
        ));
    }
    if !(3.0..=5.0).contains(&report.refinement_ratio) {
        failures.push(format!(
            "refinement ratio {} is outside [3, 5]",
            report.refinement_ratio
        ));
    }

    let outputs = pde::summary_json(&params, &report);
    let mut artifacts = Vec::new();
    if let Some(dir) = out_dir {
        artifacts.push(write_artifact(
            dir,
            "pde_snapshot.csv",
            &pde::snapshot_csv(&report.coarse),
        )?);
        artifacts.push(write_json(dir, "pde_summary.json", &outputs)?);
    }
    Ok((outputs, failures, artifacts))
}

fn run_pde_check(a: &PdeCheckArgs, out_dir: &Path) -> crate::Result<Outcome> {
    let (outputs, failures, artifacts) = pde_payload(a, Some(out_dir))?;
    Ok(Outcome {
        command: "pde-check",
        params: json!({ "lambda": a.lambda, "q": a.q, "t0": a.t0 }),
        inputs: json!({
            "lambda": a.lambda, "q": a.q, "T0": a.t0, "half_width": a.half_width,
            "grid_points": a.grid_points, "t_end": a.t_end,
            "rtol": a.rtol, "atol": a.atol, "tol": a.tol,
        }),
        outputs,
        failures,
        artifacts,
    })
}

const SWEEP_CELL_LIMIT: usize = 10_000;

fn run_sweep(a: &SweepArgs, out_dir: &Path) -> crate::Result<Outcome> {
    let mut lambdas = a.lambda.clone();
    let mut qs = a.q.clone();
    let uses_f0 = a.command != "pde-check";
    let mut f0s = match (&a.f0, a.command.as_str()) {
        (Some(v), _) => v.clone(),
        (None, "blowup") => vec![1.0],
        _ => vec![-1.0],
    };
    for v in [&mut lambdas, &mut qs, &mut f0s] {
        v.sort_by(|x, y| x.partial_cmp(y).expect("finite grid values"));
        v.dedup();
    }
    if !uses_f0 {
        f0s = vec![f64::NAN]; // placeholder; pde-check cells ignore f0
    }
    let mut cells: Vec<(f64, f64, Option<f64>)> = Vec::new();
    for &l in &lambdas {
        for &q in &qs {
            for &f0 in &f0s {
                cells.push((l, q, if f0.is_nan() { None } else { Some(f0) }));
            }
        }
    }
    if cells.len() > SWEEP_CELL_LIMIT {
        return Err(Error::InvalidInput(format!(
            "sweep has {} cells, above the {SWEEP_CELL_LIMIT}-cell guard rail",
            cells.len()
        )));
    }
    if a.parallelism == 0 {
        return Err(Error::InvalidInput("parallelism must be at least 1".into()));
    }

    let run_cell = |&(lambda, q, f0): &(f64, f64, Option<f64>)| -> Value {
        let result = match a.command.as_str() {
            "profile" => profile_payload(
                &ProfileArgs {
                    lambda,
                    q,
                    f0: f0.unwrap_or(-1.0),
                    xi_max: a.xi_max.unwrap_or(profile::DEFAULT_XI_MAX),
                    rtol: a.rtol,
                    atol: a.atol,
                },
                None,
            ),
            "asymptotics" => asymptotics_payload(
                &AsymptoticsArgs {
                    lambda,
                    q,
                    f0: f0.unwrap_or(-1.0),
                    xi_max: a.xi_max.unwrap_or(profile::DEFAULT_XI_MAX),
                    rtol: a.rtol,
                    atol: a.atol,
                    tol: a.tol.unwrap_or(2e-2),
                    report_g: false,
                },
                None,
            ),
            "blowup" => blowup_payload(
                &BlowupArgs {
                    lambda,
                    q,
                    f0: f0.unwrap_or(1.0),
                    xi_max: a.xi_max.unwrap_or(1e6),
                    rtol: a.rtol,
                    atol: a.atol,
                },
                None,
            ),
            "pde-check" => pde_payload(
                &PdeCheckArgs {
                    lambda,
                    q,
                    t0: 1.0,
                    half_width: pde::DEFAULT_HALF_WIDTH,
                    grid_points: pde::DEFAULT_GRID_POINTS,
                    t_end: pde::DEFAULT_T_END,
                    rtol: a.rtol,
                    atol: a.atol,
                    tol: a.tol.unwrap_or(1e-2),
                },
                None,
            ),
            other => unreachable!("clap restricts the command list, got {other}"),
        };
        match result {
            Ok((outputs, failures, _)) => json!({
                "lambda": lambda, "q": q, "f0": f0,
                "ok": failures.is_empty(),
                "outputs": outputs,
                "invariant_failures": failures,
            }),
            Err(e) => json!({
                "lambda": lambda, "q": q, "f0": f0,
                "ok": false,
                "outputs": Value::Null,
                "invariant_failures": [e.to_string()],
            }),
        }
    };

    // Bounded parallelism; the output order is the (sorted) grid order,
    // independent of completion order.
    let results: Vec<Value> = if a.parallelism == 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(a.parallelism)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            cells.par_iter().map(run_cell).collect()
        })
    };

    let mut failures = Vec::new();
    let mut lines = String::new();
    for r in &results {
        if !r["ok"].as_bool().unwrap_or(false) {
            failures.push(format!(
                "cell lambda={} q={} f0={} failed: {}",
                r["lambda"], r["q"], r["f0"], r["invariant_failures"]
            ));
        }
        lines.push_str(&serde_json::to_string(r).expect("serializable cell"));
        lines.push('\n');
    }
    let artifact = write_artifact(out_dir, "sweep.jsonl", &lines)?;

    Ok(Outcome {
        command: "sweep",
        params: Value::Null, // varies per cell; see the JSON-lines artifact
        inputs: json!({
            "command": a.command,
            "lambda": lambdas,
            "q": qs,
            "f0": if uses_f0 { json!(f0s) } else { Value::Null },
            "parallelism": a.parallelism,
            "xi_max": a.xi_max,
            "rtol": a.rtol,
            "atol": a.atol,
            "tol": a.tol,
        }),
        outputs: json!({
            "cells": results.len(),
            "passed": results.len() - failures.len(),
            "failed": failures.len(),
        }),
        failures,
        artifacts: vec![artifact],
    })
}
