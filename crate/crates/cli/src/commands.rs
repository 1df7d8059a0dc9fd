//! The four subcommands: optimize, run, search, tradeoff.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use qlmm_core::optimizer::{select_best, solve_for_k, Objective, SolveError};
use qlmm_core::oraclesim::{durr_hoyer, SearchResult};
use qlmm_core::qlmm::{depth_estimate, resource_estimate, run_exact_real, Scheme};
use serde_json::json;

use crate::config::{Config, OracleModeKind};
use crate::report::{
    build_problem, deviation_samples, failed_constraints, five_number_summary, load_scheme,
    report_json, require_feasible, run_candidates, scheme_to_file, stats_json, trajectory_csv,
};
use crate::scenario::{build, Scenario};
use crate::CliError;

fn ensure_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn load(config_path: &Path) -> Result<(Config, Scenario), CliError> {
    let config = Config::load(config_path)?;
    let scenario = build(&config)?;
    scenario
        .ivp
        .validate()
        .map_err(|e| CliError::Config(format!("ivp: {e}")))?;
    Ok((config, scenario))
}

/// Synthesizes the best scheme per step count, selects the overall winner and
/// writes `scheme.toml`, `feasibility.json` and the per-k `objectives.csv`.
pub fn cmd_optimize(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let (config, scenario) = load(config_path)?;
    let problem = build_problem(&config, &scenario)?;
    ensure_out(out)?;

    let mut table = String::from("k,status,objective,nodes\n");
    for &k in &config.optimize.k_range {
        match solve_for_k(&problem, k) {
            Ok(solved) => {
                writeln!(table, "{k},feasible,{},{}", solved.objective, solved.nodes_visited)
                    .expect("string write");
                println!(
                    "k={k}: objective {} (qubits {}, depth {})",
                    solved.objective,
                    resource_estimate(&solved.scheme, &problem.cost_model),
                    depth_estimate(&solved.scheme, &problem.cost_model),
                );
            }
            Err(SolveError::Infeasible) => {
                writeln!(table, "{k},infeasible,,").expect("string write");
                println!("k={k}: infeasible");
            }
            Err(SolveError::BudgetExceeded) => {
                writeln!(table, "{k},budget_exceeded,,").expect("string write");
                println!("k={k}: node budget exceeded");
            }
        }
    }
    fs::write(out.join("objectives.csv"), &table)?;

    let (k_best, solved) = select_best(&problem).map_err(|e| match e {
        SolveError::Infeasible => CliError::Infeasible("no feasible scheme for any k".into()),
        SolveError::BudgetExceeded => {
            CliError::Infeasible("node budget exceeded before a best scheme was proven".into())
        }
    })?;
    let scheme_file = scheme_to_file(&solved.scheme);
    let toml_text =
        toml::to_string_pretty(&scheme_file).map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(out.join("scheme.toml"), toml_text)?;
    let report = serde_json::to_string_pretty(&report_json(&solved.report))
        .map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(out.join("feasibility.json"), report + "\n")?;

    println!(
        "selected k={k_best}: h={}, steps={}, alpha={:?}, beta={:?}",
        solved.scheme.h(),
        solved.scheme.steps(),
        solved.scheme.coeffs().alpha(),
        solved.scheme.coeffs().beta(),
    );
    println!("wrote {}", out.join("scheme.toml").display());
    Ok(())
}

/// Runs every candidate bit-exactly, writes per-candidate trajectory CSVs and
/// the error statistics against the scenario reference and the exact-real
/// integration of the same scheme.
pub fn cmd_run(config_path: &Path, scheme_path: &Path, out: &Path, jobs: usize) -> Result<(), CliError> {
    let (config, scenario) = load(config_path)?;
    let scheme = load_scheme(scheme_path)?;
    let problem = build_problem(&config, &scenario)?;
    require_feasible(&scheme, &problem)?;
    ensure_out(out)?;

    let records = run_candidates(&scenario, &scheme, &problem.cost_model, jobs)?;
    let mut stats_rows = Vec::new();
    for (candidate, record) in records.iter().enumerate() {
        let csv = trajectory_csv(candidate, &scheme, &scenario, record);
        fs::write(out.join(format!("trajectory_c{candidate:02}.csv")), csv)?;

        let params = &scenario.candidates[candidate];
        let exact = run_exact_real(&scheme, &scenario.ivp, params);
        let mut soft_dev = deviation_samples(&scenario, &scheme, params, &record.decoded);
        let mut exact_dev = deviation_samples(&scenario, &scheme, params, &exact);
        stats_rows.push(json!({
            "candidate": candidate,
            "parameter": scenario.labels[candidate],
            "qlmm": stats_json(&five_number_summary(&mut soft_dev)),
            "exact_lmm": stats_json(&five_number_summary(&mut exact_dev)),
            "consumed_ancillas": record.ledger.consumed(),
            "reusable_peak": record.ledger.reusable_peak(),
            "modeled_depth": record.modeled_depth,
        }));
    }
    let stats = serde_json::to_string_pretty(&serde_json::Value::Array(stats_rows))
        .map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(out.join("error_stats.json"), stats + "\n")?;
    println!(
        "wrote {} trajectories and error_stats.json to {}",
        records.len(),
        out.display()
    );
    Ok(())
}

/// Runs the threshold search over the candidate sweep and writes the result.
pub fn cmd_search(
    config_path: &Path,
    scheme_path: &Path,
    mode: Option<OracleModeKind>,
    seed: Option<u64>,
    out: &Path,
    jobs: usize,
) -> Result<(), CliError> {
    let (config, scenario) = load(config_path)?;
    let scheme = load_scheme(scheme_path)?;
    let problem = build_problem(&config, &scenario)?;
    require_feasible(&scheme, &problem)?;
    ensure_out(out)?;

    let mode = mode.unwrap_or(config.oracle.mode);
    let seed = seed.unwrap_or(config.seed);
    let predicate = scenario.predicate(&config, &scheme, mode)?;
    let records = run_candidates(&scenario, &scheme, &problem.cost_model, jobs)?;
    let result: SearchResult = durr_hoyer(&records, &predicate, scheme.k(), seed)
        .map_err(|_| CliError::NoFeasibleCandidate)?;

    let parameter = scenario.labels[result.winner];
    let payload = json!({
        "winner": result.winner,
        "winner_parameter": parameter,
        "winner_value": result.winner_value,
        "iterations": result.iterations,
        "oracle_calls_estimate": result.oracle_calls_estimate,
        "seed": result.seed,
        "analytic_optimum": scenario.analytic_optimum,
    });
    let text = serde_json::to_string_pretty(&payload).map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(out.join("search.json"), text + "\n")?;

    match scenario.analytic_optimum {
        Some(opt) => println!(
            "winner: {} = {} (analytic optimum {}); {} iterations, ~{:.1} oracle calls",
            scenario.parameter_name, parameter, opt, result.iterations, result.oracle_calls_estimate
        ),
        None => println!(
            "winner: {} = {}; {} iterations, ~{:.1} oracle calls",
            scenario.parameter_name, parameter, result.iterations, result.oracle_calls_estimate
        ),
    }
    Ok(())
}

/// Optimizes under each objective variant and tabulates (qubits, depth).
pub fn cmd_tradeoff(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let (config, scenario) = load(config_path)?;
    let mut problem = build_problem(&config, &scenario)?;
    ensure_out(out)?;

    let mut rows = String::from("variant,qubit_cap,status,k,qubits,depth\n");
    let solve_variant = |problem: &mut qlmm_core::optimizer::OptimizationProblem,
                             objective: Objective|
     -> Option<(usize, u64, u64)> {
        problem.objective = objective;
        match select_best(problem) {
            Ok((k, solved)) => {
                let qubits = resource_estimate(&solved.scheme, &problem.cost_model);
                let depth = depth_estimate(&solved.scheme, &problem.cost_model);
                Some((k, qubits, depth))
            }
            Err(_) => None,
        }
    };

    let min_qubits = solve_variant(&mut problem, Objective::MinQubits);
    match min_qubits {
        Some((k, q, d)) => writeln!(rows, "min_qubits,,feasible,{k},{q},{d}").expect("write"),
        None => writeln!(rows, "min_qubits,,infeasible,,,").expect("write"),
    }
    let min_depth = solve_variant(&mut problem, Objective::MinDepth);
    match min_depth {
        Some((k, q, d)) => writeln!(rows, "min_depth,,feasible,{k},{q},{d}").expect("write"),
        None => writeln!(rows, "min_depth,,infeasible,,,").expect("write"),
    }

    let caps: Vec<u64> = match &config.tradeoff.caps {
        Some(caps) => caps.clone(),
        None => match (min_qubits, min_depth) {
            (Some((_, qlo, _)), Some((_, qhi, _))) if qhi > qlo => {
                let n = 6u64;
                let mut caps: Vec<u64> =
                    (0..n).map(|i| qlo + (qhi - qlo) * i / (n - 1)).collect();
                caps.dedup();
                caps
            }
            (Some((_, qlo, _)), _) => vec![qlo],
            _ => Vec::new(),
        },
    };
    for cap in caps {
        match solve_variant(&mut problem, Objective::MinDepthUnderQubitCap(cap)) {
            Some((k, q, d)) => {
                writeln!(rows, "min_depth_under_qubit_cap,{cap},feasible,{k},{q},{d}")
                    .expect("write")
            }
            None => writeln!(rows, "min_depth_under_qubit_cap,{cap},infeasible,,,").expect("write"),
        }
    }
    fs::write(out.join("tradeoff.csv"), &rows)?;
    println!("wrote {}", out.join("tradeoff.csv").display());
    Ok(())
}

/// Human-readable list of failed constraints for diagnostics.
pub fn describe_failures(scheme: &Scheme, config_path: &Path) -> Result<Vec<String>, CliError> {
    let (config, scenario) = load(config_path)?;
    let problem = build_problem(&config, &scenario)?;
    let report = qlmm_core::optimizer::check_feasible(scheme, &problem);
    Ok(failed_constraints(&report))
}
