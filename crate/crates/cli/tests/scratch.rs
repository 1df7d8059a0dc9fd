//! Temporary calibration harness: prints measured quantities used to freeze
//! the reproduction configs. Not part of the regular suite.

use qlmm_core::bitfloat::FloatFormat;
use qlmm_core::lmm::{rk4_step, IvpSpec, LmmCoefficients};
use qlmm_core::optimizer::scheme_offset;
use qlmm_core::oraclesim::{durr_hoyer, OraclePredicate};
use qlmm_core::qlmm::{run, run_exact_real, CostModel, Scheme};

fn spring_ivp(deriv_upper: Vec<f64>, deriv_lower: Vec<f64>) -> IvpSpec {
    IvpSpec {
        dimension: 2,
        deriv: Box::new(|_, x, p| vec![x[1], -40.0 * x[0] - p[0] * x[1]]),
        initial: Box::new(|_| vec![0.0, 1.0]),
        t0: 0.0,
        tf: 1.4,
        deriv_upper,
        deriv_lower,
        x0_max: vec![0.0, 1.0],
        x0_min: vec![0.0, 1.0],
        time_independent: true,
    }
}

fn spring_analytic(t: f64, pc: f64) -> Vec<f64> {
    qlmm_cli::scenario::damped_oscillator(t, 1.0, 40.0, pc)
}

#[test]
#[ignore]
fn calibrate_spring() {
    let pcs: Vec<f64> = (0..16).map(|i| 3.0 + 2.0 * i as f64).collect();
    let ivp = spring_ivp(vec![10.0, 10.0], vec![-10.0, -40.0]);
    let (mut f0_min, mut f0_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut f1_min, mut f1_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut d2 = [0.0f64; 2];
    let mut d3 = [0.0f64; 2];
    for &pc in &pcs {
        let mut x = vec![0.0, 1.0];
        let h = 1e-4;
        let mut t = 0.0;
        while t < 1.4 {
            let f1 = -40.0 * x[0] - pc * x[1];
            f0_min = f0_min.min(x[1]);
            f0_max = f0_max.max(x[1]);
            f1_min = f1_min.min(f1);
            f1_max = f1_max.max(f1);
            let x2_1 = -40.0 * x[1] - pc * f1;
            d2[0] = d2[0].max(f1.abs());
            d2[1] = d2[1].max(x2_1.abs());
            d3[0] = d3[0].max(x2_1.abs());
            d3[1] = d3[1].max((-40.0 * f1 - pc * x2_1).abs());
            x = rk4_step(&x, t, h, &ivp, &[pc]);
            t += h;
        }
    }
    println!("spring f0 in [{f0_min:.4}, {f0_max:.4}], f1 in [{f1_min:.4}, {f1_max:.4}]");
    println!("spring |x''| <= [{:.1}, {:.1}], |x'''| <= [{:.1}, {:.1}]", d2[0], d2[1], d3[0], d3[1]);
}

fn published_spring_scheme(deriv_lower: &[f64]) -> Scheme {
    let coeffs = LmmCoefficients::new(vec![-0.5, -0.7427, 0.2427], vec![0.0, 0.8714, 1.8714]);
    let bias = [10.0, 69.7];
    let span = 1.4;
    let x0_min = [0.0, 1.0];
    let mut formats = Vec::new();
    for (d, (m, e)) in [(25u32, 3u32), (27, 4)].iter().enumerate() {
        let lo = x0_min[d] + bias[d] + span * deriv_lower[d].min(0.0);
        let off = scheme_offset(lo, 1, 3, 0.01243, deriv_lower[d]).unwrap();
        println!("spring dim {d}: lo={lo:.4} offset={off}");
        formats.push(FloatFormat::new(*m, *e, off, 1).unwrap());
    }
    Scheme::new(coeffs, 1, 0.01243, 112, formats, bias.to_vec()).unwrap()
}

#[test]
#[ignore]
fn spring_published_run() {
    let deriv_upper = vec![1.0, 2.2];
    let deriv_lower = vec![-0.55, -33.0];
    let ivp = spring_ivp(deriv_upper.clone(), deriv_lower.clone());
    let scheme = published_spring_scheme(&deriv_lower);
    let model = CostModel::default();

    // Implied epsilon under the frozen bounds.
    let span = 1.4;
    let order = 2u32;
    let c3 = {
        let coeffs = scheme.coeffs();
        qlmm_core::lmm::principal_error_constant(coeffs, order)
    };
    println!("C3 = {c3}");
    for (d, (m, b)) in [(25u32, 1049.0f64), (27, 33297.0)].iter().enumerate() {
        let hi = ivp.x0_max[d] + scheme.bias()[d] + span * deriv_upper[d].max(0.0);
        let roundoff = hi * 0.5f64.powi(*m as i32);
        let tau = c3.abs() * 0.01243f64.powi(order as i32) * span * b;
        println!("spring dim {d}: hi={hi:.3} roundoff={roundoff:.3e} tau={tau:.4} lhs={:.4}", roundoff + tau);
    }

    // Deviation between bit-level and exact-real trajectories for pc = 13.
    let record = run(&scheme, &ivp, &[13.0], &model).expect("run pc=13");
    let exact = run_exact_real(&scheme, &ivp, &[13.0]);
    let mut max_dev = [0.0f64; 2];
    for (ys, xs) in record.decoded.iter().zip(&exact) {
        for d in 0..2 {
            max_dev[d] = max_dev[d].max((ys[d] - xs[d]).abs());
        }
    }
    println!("max |soft - exact| per dim = [{:.3e}, {:.3e}]", max_dev[0], max_dev[1]);
    let env_sum: f64 = (0..2)
        .map(|d| {
            let hi = ivp.x0_max[d] + scheme.bias()[d] + span * deriv_upper[d].max(0.0);
            hi * 0.5f64.powi(scheme.formats()[d].mantissa_bits() as i32)
        })
        .sum();
    println!(
        "envelope sum = {:.3e}, cumulative (N x) = {:.3e}",
        env_sum,
        112.0 * env_sum
    );

    // Error stats vs the analytic solution for both methods.
    let mut soft_err: Vec<f64> = Vec::new();
    let mut exact_err: Vec<f64> = Vec::new();
    for (n, (ys, xs)) in record.decoded.iter().zip(&exact).enumerate() {
        let reference = spring_analytic(n as f64 * scheme.h(), 13.0);
        for d in 0..2 {
            soft_err.push((ys[d] - reference[d]).abs());
            exact_err.push((xs[d] - reference[d]).abs());
        }
    }
    let mut soft_err0: Vec<f64> = Vec::new();
    let mut exact_err0: Vec<f64> = Vec::new();
    for (n, (ys, xs)) in record.decoded.iter().zip(&exact).enumerate() {
        let reference = spring_analytic(n as f64 * scheme.h(), 13.0);
        soft_err0.push((ys[0] - reference[0]).abs());
        exact_err0.push((xs[0] - reference[0]).abs());
    }
    soft_err0.sort_by(|a, b| a.partial_cmp(b).unwrap());
    exact_err0.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "dim0-only medians: soft = {:.4e}, exact = {:.4e}",
        soft_err0[soft_err0.len() / 2],
        exact_err0[exact_err0.len() / 2]
    );
    soft_err.sort_by(|a, b| a.partial_cmp(b).unwrap());
    exact_err.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let med = |v: &Vec<f64>| v[v.len() / 2];
    println!(
        "median |err| soft = {:.4e}, exact = {:.4e}, max soft = {:.4e}, max exact = {:.4e}",
        med(&soft_err),
        med(&exact_err),
        soft_err.last().unwrap(),
        exact_err.last().unwrap()
    );

    // Winner over the full sweep.
    let pcs: Vec<f64> = (0..16).map(|i| 3.0 + 2.0 * i as f64).collect();
    let mut records = Vec::new();
    for &pc in &pcs {
        records.push(run(&scheme, &ivp, &[pc], &model).expect("run"));
    }
    let predicate = OraclePredicate::FinalTime { dim: 0, bias: scheme.bias()[0], maximize: false };
    for seed in 0..5 {
        let res = durr_hoyer(&records, &predicate, 3, seed).expect("search");
        println!("seed {seed}: winner pc = {} (value {:.6})", pcs[res.winner], res.winner_value);
    }
    // Feasible set (never below bias).
    for (i, r) in records.iter().enumerate() {
        let feasible = predicate.candidate_value(r, 3).is_some();
        let final_x = r.decoded[112][0];
        println!("pc={}: feasible={feasible} x_N={final_x:.6e}", pcs[i]);
    }
}

#[test]
#[ignore]
fn spring_convergence_ratio() {
    let deriv_upper = vec![1.0, 2.2];
    let deriv_lower = vec![-0.55, -33.0];
    let ivp = spring_ivp(deriv_upper, deriv_lower);
    let coeffs = LmmCoefficients::new(vec![-0.5, -0.7427, 0.2427], vec![0.0, 0.8714, 1.8714]);
    let fmt = FloatFormat::new(30, 5, 0, 1).unwrap();
    let err_at = |h: f64| -> f64 {
        let steps = (1.4 / h).floor() as usize;
        let scheme = Scheme::new(
            coeffs.clone(),
            1,
            h,
            steps,
            vec![fmt, fmt],
            vec![10.0, 69.7],
        )
        .unwrap();
        let exact = run_exact_real(&scheme, &ivp, &[13.0]);
        let mut worst = 0.0f64;
        for (n, xs) in exact.iter().enumerate() {
            let reference = spring_analytic(n as f64 * h, 13.0);
            for d in 0..2 {
                worst = worst.max((xs[d] - reference[d]).abs());
            }
        }
        worst
    };
    let e1 = err_at(0.01243);
    let e2 = err_at(0.01243 / 2.0);
    let e3 = err_at(0.01243 / 4.0);
    println!("exact-real max err: h={:.5} -> {e1:.4e}, h/2 -> {e2:.4e}, h/4 -> {e3:.4e}", 0.01243);
    println!("ratios: {:.3}, {:.3}", e1 / e2, e2 / e3);
}

#[test]
#[ignore]
fn ballistic_published_run() {
    let speed = 40.0f64;
    let gravity = 9.8f64;
    let tf = 7.5f64;
    let thetas: Vec<f64> = (0..16).map(|i| 31.0 + 2.0 * i as f64).collect();
    // Hand bounds: f0 = v cos(theta) in [v cos 61, v cos 31]; f1 = x2 in
    // [v sin 31 - g tf, v sin 61]; f2 = -g exactly.
    let f0_lo = speed * 61f64.to_radians().cos();
    let f0_hi = speed * 31f64.to_radians().cos();
    let f1_lo = speed * 31f64.to_radians().sin() - gravity * tf;
    let f1_hi = speed * 61f64.to_radians().sin();
    println!("ballistic f0 in [{f0_lo:.4}, {f0_hi:.4}], f1 in [{f1_lo:.4}, {f1_hi:.4}], f2 = -9.8");
    let x0_2: Vec<f64> = thetas.iter().map(|t| speed * t.to_radians().sin()).collect();
    println!(
        "x0[2] in [{:.4}, {:.4}]",
        x0_2.iter().cloned().fold(f64::INFINITY, f64::min),
        x0_2.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    );

    let deriv_upper = vec![34.3, 35.0, -9.8];
    let deriv_lower = vec![18.1, -53.0, -9.8];
    let x0_min = vec![0.0, 0.0, 20.6];
    let x0_max = vec![0.0, 0.0, 35.0];
    let ivp = IvpSpec {
        dimension: 3,
        deriv: Box::new(move |_, x, p| {
            vec![speed * p[0].to_radians().cos(), x[2], -gravity]
        }),
        initial: Box::new(move |p| vec![0.0, 0.0, speed * p[0].to_radians().sin()]),
        t0: 0.0,
        tf,
        deriv_upper: deriv_upper.clone(),
        deriv_lower: deriv_lower.clone(),
        x0_max: x0_max.clone(),
        x0_min: x0_min.clone(),
        time_independent: true,
    };

    let bias = [16.0, 663.0, 56.2];
    let mut formats = Vec::new();
    for (d, (m, e)) in [(16u32, 4u32), (18, 5), (14, 4)].iter().enumerate() {
        let lo = x0_min[d] + bias[d] + tf * deriv_lower[d].min(0.0);
        let off = scheme_offset(lo, 1, 2, 0.05, deriv_lower[d]).unwrap();
        println!("ballistic dim {d}: lo={lo:.4} offset={off}");
        formats.push(FloatFormat::new(*m, *e, off, 1).unwrap());
    }
    let coeffs = LmmCoefficients::new(vec![-0.5, -0.5], vec![0.0, 1.5]);
    let scheme = Scheme::new(coeffs, 1, 0.05, 150, formats, bias.to_vec()).unwrap();

    // Implied epsilon.
    let c2 = qlmm_core::lmm::principal_error_constant(scheme.coeffs(), 1);
    for (d, (m, b)) in [(16u32, 0.0f64), (18, 9.8), (14, 0.0)].iter().enumerate() {
        let hi = x0_max[d] + bias[d] + tf * deriv_upper[d].max(0.0);
        let roundoff = hi * 0.5f64.powi(*m as i32);
        let tau = c2.abs() * 0.05 * tf * b;
        println!("ballistic dim {d}: hi={hi:.3} roundoff={roundoff:.3e} tau={tau:.4} lhs={:.4}", roundoff + tau);
    }

    let model = CostModel::default();
    let mut records = Vec::new();
    for &theta in &thetas {
        records.push(run(&scheme, &ivp, &[theta], &model).expect("run"));
    }
    let predicate = OraclePredicate::AllSteps {
        objective_dim: 0,
        crossing_dim: 1,
        crossing_bias: scheme.bias()[1],
        maximize: true,
    };
    for (i, r) in records.iter().enumerate() {
        let value = predicate.candidate_value(r, 2);
        println!("theta={}: crossing value = {value:?}", thetas[i]);
    }
    for seed in 0..5 {
        let res = durr_hoyer(&records, &predicate, 2, seed).expect("search");
        println!("seed {seed}: winner theta = {}", thetas[res.winner]);
    }
}

#[test]
#[ignore]
fn frozen_config_checks() {
    use qlmm_cli::config::Config;
    use qlmm_cli::report::{build_problem, failed_constraints, load_scheme};
    use qlmm_cli::scenario::build;
    use qlmm_core::optimizer::{check_feasible, select_best, solve_for_k};
    use std::path::Path;
    use std::time::Instant;

    for (config_path, scheme_path) in [
        ("../../configs/spring_mass.toml", "../../schemes/spring_3step.toml"),
        ("../../configs/ballistic.toml", "../../schemes/ballistic_2step.toml"),
    ] {
        println!("== {config_path}");
        let config = Config::load(Path::new(config_path)).expect("config");
        let scenario = build(&config).expect("scenario");
        let problem = build_problem(&config, &scenario).expect("problem");
        println!("spectrum size = {}", problem.test_spectrum.len());
        let scheme = load_scheme(Path::new(scheme_path)).expect("scheme");
        let report = check_feasible(&scheme, &problem);
        println!("published feasible = {}, failures = {:?}", report.feasible(), failed_constraints(&report));
        println!(
            "published objective (qubits) = {}",
            qlmm_core::qlmm::resource_estimate(&scheme, &problem.cost_model)
        );

        for &k in &config.optimize.k_range {
            let t = Instant::now();
            match solve_for_k(&problem, k) {
                Ok(solved) => println!(
                    "k={k}: objective={} nodes={} h={} steps={} alpha={:?} beta={:?} formats={:?} in {:?}",
                    solved.objective,
                    solved.nodes_visited,
                    solved.scheme.h(),
                    solved.scheme.steps(),
                    solved.scheme.coeffs().alpha(),
                    solved.scheme.coeffs().beta(),
                    solved
                        .scheme
                        .formats()
                        .iter()
                        .map(|f| format!("{f}"))
                        .collect::<Vec<_>>(),
                    t.elapsed(),
                ),
                Err(e) => println!("k={k}: {e} in {:?}", t.elapsed()),
            }
        }
        let t = Instant::now();
        match select_best(&problem) {
            Ok((k, solved)) => println!("select_best -> k={k} objective={} in {:?}", solved.objective, t.elapsed()),
            Err(e) => println!("select_best -> {e} in {:?}", t.elapsed()),
        }
    }
}
