//! Problem assembly, scheme (de)serialization and the CSV/JSON reports.

use std::fmt::Write as _;

use qlmm_core::bitfloat::FloatFormat;
use qlmm_core::lmm::LmmCoefficients;
use qlmm_core::optimizer::{
    check_feasible, jacobian_spectrum, ConstraintCheck, FeasibilityReport, OptimizationProblem,
};
use qlmm_core::qlmm::{run, CostModel, QlmmError, RunRecord, Scheme};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Config, DimensionFile, SchemeFile};
use crate::scenario::Scenario;
use crate::CliError;

/// Assembles the optimizer problem for a scenario: objective and box from the
/// config, stability spectrum from the candidates' Jacobians.
pub fn build_problem<'a>(
    config: &Config,
    scenario: &'a Scenario,
) -> Result<OptimizationProblem<'a>, CliError> {
    let spectrum = jacobian_spectrum(&scenario.ivp, &scenario.candidates)
        .map_err(|e| CliError::Run(format!("stability spectrum: {e}")))?;
    if let Some(bad) = spectrum.iter().find(|l| l.re > 1e-9) {
        return Err(CliError::Config(format!(
            "ivp: Jacobian eigenvalue {bad} has positive real part; absolute stability is undefined"
        )));
    }
    Ok(OptimizationProblem {
        ivp: &scenario.ivp,
        epsilon: config.optimize.epsilon,
        objective: config.objective(),
        k_range: config.optimize.k_range.clone(),
        variable_box: config.variable_box(),
        deriv_bound: config.optimize.deriv_bound.clone(),
        test_spectrum: spectrum,
        cost_model: config.cost_model.build(),
        h_cap: config.optimize.h_cap,
        node_limit: config.node_limit(),
    })
}

pub fn scheme_to_file(scheme: &Scheme) -> SchemeFile {
    SchemeFile {
        k: scheme.k(),
        a0: scheme.a0(),
        h: scheme.h(),
        steps: scheme.steps(),
        alpha: scheme.coeffs().alpha().to_vec(),
        beta: scheme.coeffs().beta().to_vec(),
        dimension: scheme
            .formats()
            .iter()
            .zip(scheme.bias_requested())
            .map(|(f, &bias)| DimensionFile {
                mantissa: f.mantissa_bits(),
                exponent: f.exponent_bits(),
                margin: f.margin_bits(),
                offset: f.exponent_offset(),
                bias,
            })
            .collect(),
    }
}

pub fn scheme_from_file(file: &SchemeFile) -> Result<Scheme, CliError> {
    if file.alpha.len() != file.k || file.beta.len() != file.k {
        return Err(CliError::Config(
            "scheme: alpha and beta must each hold k coefficients".into(),
        ));
    }
    let coeffs = LmmCoefficients::new(file.alpha.clone(), file.beta.clone());
    let mut formats = Vec::new();
    let mut bias = Vec::new();
    for d in &file.dimension {
        formats.push(
            FloatFormat::new(d.mantissa, d.exponent, d.offset, d.margin)
                .map_err(|e| CliError::Config(format!("scheme: {e}")))?,
        );
        bias.push(d.bias);
    }
    Scheme::new(coeffs, file.a0, file.h, file.steps, formats, bias)
        .map_err(|e| CliError::Config(format!("scheme: {e}")))
}

pub fn load_scheme(path: &std::path::Path) -> Result<Scheme, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let file: SchemeFile = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    scheme_from_file(&file)
}

/// Runs every candidate's trajectory, in parallel when `jobs != 1`, keeping
/// candidate order. The first failing candidate (in order) decides the error.
pub fn run_candidates(
    scenario: &Scenario,
    scheme: &Scheme,
    model: &CostModel,
    jobs: usize,
) -> Result<Vec<RunRecord>, CliError> {
    let work = |params: &Vec<f64>| run(scheme, &scenario.ivp, params, model);
    let results: Vec<Result<RunRecord, QlmmError>> = if jobs == 1 {
        scenario.candidates.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Run(e.to_string()))?;
        pool.install(|| scenario.candidates.par_iter().map(work).collect())
    };
    let mut records = Vec::with_capacity(results.len());
    for (candidate, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => records.push(r),
            Err(QlmmError::Margin { step, dim, .. }) => {
                return Err(CliError::Margin { candidate, step, dim })
            }
            Err(e) => return Err(CliError::Run(format!("candidate {candidate}: {e}"))),
        }
    }
    Ok(records)
}

/// Validates a loaded scheme against the scenario's constraints.
pub fn require_feasible(
    scheme: &Scheme,
    problem: &OptimizationProblem,
) -> Result<FeasibilityReport, CliError> {
    let report = check_feasible(scheme, problem);
    if !report.feasible() {
        return Err(CliError::Infeasible(format!(
            "scheme fails feasibility: {}",
            failed_constraints(&report).join(", ")
        )));
    }
    Ok(report)
}

pub fn failed_constraints(report: &FeasibilityReport) -> Vec<String> {
    let mut failed = Vec::new();
    let mut check = |name: &str, c: &ConstraintCheck| {
        if !c.pass {
            failed.push(format!("{name} (residual {:.3e})", c.residual));
        }
    };
    check("dyadic_alpha0", &report.dyadic_alpha0);
    check("consistency", &report.consistency);
    check("zero_stability", &report.zero_stability);
    check("absolute_stability", &report.absolute_stability);
    for (d, c) in report.overflow.iter().enumerate() {
        check(&format!("overflow[{d}]"), c);
    }
    for (d, c) in report.underflow.iter().enumerate() {
        check(&format!("underflow[{d}]"), c);
    }
    for (d, c) in report.error_budget.iter().enumerate() {
        check(&format!("error_budget[{d}]"), c);
    }
    for (d, c) in report.margin.iter().enumerate() {
        check(&format!("margin[{d}]"), c);
    }
    failed
}

fn check_json(c: &ConstraintCheck) -> Value {
    json!({ "pass": c.pass, "residual": finite_or_null(c.residual) })
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn report_json(report: &FeasibilityReport) -> Value {
    json!({
        "feasible": report.feasible(),
        "order": report.order,
        "dyadic_alpha0": check_json(&report.dyadic_alpha0),
        "consistency": check_json(&report.consistency),
        "zero_stability": check_json(&report.zero_stability),
        "absolute_stability": check_json(&report.absolute_stability),
        "overflow": report.overflow.iter().map(check_json).collect::<Vec<_>>(),
        "underflow": report.underflow.iter().map(check_json).collect::<Vec<_>>(),
        "error_budget": report.error_budget.iter().map(check_json).collect::<Vec<_>>(),
        "margin": report.margin.iter().map(check_json).collect::<Vec<_>>(),
    })
}

/// Register-level trajectory dump;erased bits are the comparison basis, so
/// the mantissa and exponent fields carry the contract and the decoded value
/// is informational.
pub fn trajectory_csv(candidate: usize, scheme: &Scheme, scenario: &Scenario, record: &RunRecord) -> String {
    let mut out = String::from("candidate,n,t,dim,mantissa,exponent_field,decoded_x\n");
    for (n, (y, x)) in record.trajectory.iter().zip(&record.decoded).enumerate() {
        let t = scenario.ivp.t0 + n as f64 * scheme.h();
        for (dim, (value, decoded)) in y.iter().zip(x).enumerate() {
            writeln!(
                out,
                "{candidate},{n},{t},{dim},{},{},{decoded}",
                value.mantissa(),
                value.exponent_field()
            )
            .expect("string write");
        }
    }
    out
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn five_number_summary(samples: &mut [f64]) -> Stats {
    assert!(!samples.is_empty());
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let q = |p: f64| -> f64 {
        let idx = p * (samples.len() as f64 - 1.0);
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let w = idx - lo as f64;
        samples[lo] * (1.0 - w) + samples[hi] * w
    };
    Stats {
        min: samples[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: samples[samples.len() - 1],
    }
}

pub fn stats_json(s: &Stats) -> Value {
    json!({ "min": s.min, "q1": s.q1, "median": s.median, "q3": s.q3, "max": s.max })
}

/// Absolute deviations of a trajectory from the scenario reference, sampled
/// at every stored step and dimension.
pub fn deviation_samples(
    scenario: &Scenario,
    scheme: &Scheme,
    params: &[f64],
    states: &[Vec<f64>],
) -> Vec<f64> {
    let times: Vec<f64> = (0..states.len())
        .map(|n| scenario.ivp.t0 + n as f64 * scheme.h())
        .collect();
    let reference = scenario.reference_trajectory(params, &times, 50);
    let mut samples = Vec::with_capacity(states.len() * scenario.ivp.dimension);
    for (state, refv) in states.iter().zip(&reference) {
        for (a, b) in state.iter().zip(refv) {
            samples.push((a - b).abs());
        }
    }
    samples
}
