//! Built-in candidate-sweep scenarios and their reference solutions.

use qlmm_core::lmm::{rk4_step, IvpSpec};
use qlmm_core::oraclesim::OraclePredicate;
use qlmm_core::qlmm::Scheme;

use crate::config::{Config, IvpKind, OracleModeKind};
use crate::CliError;

pub struct Scenario {
    pub ivp: IvpSpec,
    /// One parameter vector per candidate.
    pub candidates: Vec<Vec<f64>>,
    /// Display value of the swept parameter per candidate.
    pub labels: Vec<f64>,
    pub parameter_name: String,
    pub reference: Reference,
    /// Known optimum of the swept parameter, printed next to search results.
    pub analytic_optimum: Option<f64>,
}

/// How reference trajectories for error statistics are produced.
pub enum Reference {
    /// Closed-form solution `x(t, params)`.
    ClosedForm(Box<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>),
    /// Dense fixed-step integration of the same problem.
    FineGrid,
}

impl Scenario {
    /// Reference solution at a time, closed form or a dense integration from
    /// `t0` with the given resolution multiplier.
    pub fn reference_trajectory(&self, params: &[f64], times: &[f64], refine: usize) -> Vec<Vec<f64>> {
        match &self.reference {
            Reference::ClosedForm(f) => times.iter().map(|&t| f(t, params)).collect(),
            Reference::FineGrid => {
                let mut out = Vec::with_capacity(times.len());
                let mut x = self.ivp.initial_state(params);
                let mut t = self.ivp.t0;
                for &target in times {
                    while t < target - 1e-12 {
                        let h = ((target - t) / refine as f64).min(self.ivp.span() / 10_000.0);
                        x = rk4_step(&x, t, h, &self.ivp, params);
                        t += h;
                    }
                    out.push(x.clone());
                }
                out
            }
        }
    }

    /// Oracle predicate for this scenario under a concrete scheme (the
    /// comparisons run against the scheme's stored register biases).
    pub fn predicate(&self, config: &Config, scheme: &Scheme, mode: OracleModeKind) -> Result<OraclePredicate, CliError> {
        let oracle = &config.oracle;
        Ok(match mode {
            OracleModeKind::FinalTime => OraclePredicate::FinalTime {
                dim: oracle.objective_dim,
                bias: scheme.bias()[oracle.objective_dim],
                maximize: oracle.maximize,
            },
            OracleModeKind::AllSteps => {
                if !self.ivp.time_independent {
                    return Err(CliError::Config(
                        "oracle: all-steps mode needs a time-independent derivative".into(),
                    ));
                }
                OraclePredicate::AllSteps {
                    objective_dim: oracle.objective_dim,
                    crossing_dim: oracle.crossing_dim,
                    crossing_bias: scheme.bias()[oracle.crossing_dim],
                    maximize: oracle.maximize,
                }
            }
        })
    }
}

pub fn build(config: &Config) -> Result<Scenario, CliError> {
    let labels = config.sweep.values();
    let candidates: Vec<Vec<f64>> = labels.iter().map(|&v| vec![v]).collect();
    match config.ivp.kind {
        IvpKind::SpringMassDamper => spring_mass(config, candidates, labels),
        IvpKind::Ballistic => ballistic(config, candidates, labels),
        IvpKind::LinearSystem => linear_system(config, candidates, labels),
    }
}

/// Mass on a spring with a damper, state (position, velocity), swept damping
/// coefficient, released from rest offset velocity 1.
fn spring_mass(config: &Config, candidates: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Scenario, CliError> {
    let mass = config.ivp.mass.unwrap_or(1.0);
    let spring = config.ivp.spring.unwrap_or(40.0);
    let ivp = IvpSpec {
        dimension: 2,
        deriv: Box::new(move |_t, x, p| vec![x[1], -(spring / mass) * x[0] - (p[0] / mass) * x[1]]),
        initial: Box::new(|_| vec![0.0, 1.0]),
        t0: config.ivp.t0,
        tf: config.ivp.tf,
        deriv_upper: config.ivp.deriv_upper.clone(),
        deriv_lower: config.ivp.deriv_lower.clone(),
        x0_max: vec![0.0, 1.0],
        x0_min: vec![0.0, 1.0],
        time_independent: true,
    };
    let analytic = move |t: f64, p: &[f64]| damped_oscillator(t, mass, spring, p[0]);
    Ok(Scenario {
        ivp,
        candidates,
        labels,
        parameter_name: config.sweep.parameter.clone(),
        reference: Reference::ClosedForm(Box::new(analytic)),
        analytic_optimum: Some(2.0 * (mass * spring).sqrt()),
    })
}

/// Position and velocity of `m x'' = -k x - c x'` from `x(0) = 0, x'(0) = 1`.
pub fn damped_oscillator(t: f64, mass: f64, spring: f64, damping: f64) -> Vec<f64> {
    let gamma = damping / (2.0 * mass);
    let omega0_sq = spring / mass;
    let disc = gamma * gamma - omega0_sq;
    if disc.abs() < 1e-12 {
        // Critically damped.
        let e = (-gamma * t).exp();
        vec![t * e, e * (1.0 - gamma * t)]
    } else if disc < 0.0 {
        let omega = (-disc).sqrt();
        let e = (-gamma * t).exp();
        let x = e * (omega * t).sin() / omega;
        let v = e * ((omega * t).cos() - (gamma / omega) * (omega * t).sin());
        vec![x, v]
    } else {
        let mu = disc.sqrt();
        let (r1, r2) = (-gamma + mu, -gamma - mu);
        let x = ((r1 * t).exp() - (r2 * t).exp()) / (2.0 * mu);
        let v = (r1 * (r1 * t).exp() - r2 * (r2 * t).exp()) / (2.0 * mu);
        vec![x, v]
    }
}

/// Projectile state (horizontal position, height, vertical velocity), swept
/// launch angle in degrees.
fn ballistic(config: &Config, candidates: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Scenario, CliError> {
    let speed = config.ivp.speed.ok_or_else(|| CliError::Config("ivp: ballistic needs `speed`".into()))?;
    let gravity = config.ivp.gravity.unwrap_or(9.8);
    let initial = move |p: &[f64]| {
        let theta = p[0].to_radians();
        vec![0.0, 0.0, speed * theta.sin()]
    };
    let x0s: Vec<Vec<f64>> = candidates.iter().map(|p| initial(p)).collect();
    let ivp = IvpSpec {
        dimension: 3,
        deriv: Box::new(move |_t, x, p| vec![speed * p[0].to_radians().cos(), x[2], -gravity]),
        initial: Box::new(initial),
        t0: config.ivp.t0,
        tf: config.ivp.tf,
        deriv_upper: config.ivp.deriv_upper.clone(),
        deriv_lower: config.ivp.deriv_lower.clone(),
        x0_max: component_max(&x0s),
        x0_min: component_min(&x0s),
        time_independent: true,
    };
    let t0 = config.ivp.t0;
    let analytic = move |t: f64, p: &[f64]| {
        let theta = p[0].to_radians();
        let (vx, vy) = (speed * theta.cos(), speed * theta.sin());
        let dt = t - t0;
        vec![vx * dt, vy * dt - 0.5 * gravity * dt * dt, vy - gravity * dt]
    };
    Ok(Scenario {
        ivp,
        candidates,
        labels,
        parameter_name: config.sweep.parameter.clone(),
        reference: Reference::ClosedForm(Box::new(analytic)),
        analytic_optimum: Some(45.0),
    })
}

/// Constant-matrix linear system with one matrix entry swept.
fn linear_system(config: &Config, candidates: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Scenario, CliError> {
    let matrix = config.ivp.matrix.clone().expect("validated");
    let x0 = config.ivp.x0.clone().expect("validated");
    let entry = config.ivp.entry;
    let dim = matrix.len();
    let ivp = IvpSpec {
        dimension: dim,
        deriv: Box::new(move |_t, x, p| {
            let mut out = vec![0.0; x.len()];
            for i in 0..x.len() {
                for j in 0..x.len() {
                    let a = match entry {
                        Some([r, c]) if r == i && c == j => p[0],
                        _ => matrix[i][j],
                    };
                    out[i] += a * x[j];
                }
            }
            out
        }),
        initial: Box::new(move |_| x0.clone()),
        t0: config.ivp.t0,
        tf: config.ivp.tf,
        deriv_upper: config.ivp.deriv_upper.clone(),
        deriv_lower: config.ivp.deriv_lower.clone(),
        x0_max: config.ivp.x0.clone().expect("validated"),
        x0_min: config.ivp.x0.clone().expect("validated"),
        time_independent: true,
    };
    Ok(Scenario {
        ivp,
        candidates,
        labels,
        parameter_name: config.sweep.parameter.clone(),
        reference: Reference::FineGrid,
        analytic_optimum: None,
    })
}

fn component_max(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows[0].len();
    (0..dim).map(|d| rows.iter().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max)).collect()
}

fn component_min(rows: &[Vec<f64>]) -> Vec<f64> {
    let dim = rows[0].len();
    (0..dim).map(|d| rows.iter().map(|r| r[d]).fold(f64::INFINITY, f64::min)).collect()
}
