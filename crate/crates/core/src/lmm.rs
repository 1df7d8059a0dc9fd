//! Classical reference numerics and linear-multistep scheme analysis.
//!
//! Everything here runs in plain f64 arithmetic and serves two roles: as the
//! exact-real reference the bit-level stepper is compared against, and as the
//! analysis layer (consistency order, zero-stability, absolute stability)
//! that the scheme optimizer builds its constraint checks on.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64;

use crate::poly::{monic_roots, RootFindingError};

/// Default modulus tolerance for classifying roots against the unit circle.
pub const ROOT_MODULUS_TOL: f64 = 1e-9;
/// Two computed roots closer than this are treated as one multiple root.
pub const ROOT_CLUSTER_TOL: f64 = 1e-6;
/// Default residual tolerance for the consistency conditions; published
/// coefficient tables are four-decimal truncations, so residuals of order
/// 1e-4 still count as satisfied.
pub const CONSISTENCY_TOL: f64 = 1e-3;

/// Coefficients of an explicit k-step scheme in the normalized form
/// `x_{n+k} + sum_i alpha_i x_{n+i} = h * sum_j beta_j f_{n+j}`
/// (the coefficient of `x_{n+k}` is one, both sums run over `0..k`).
#[derive(Debug, Clone, PartialEq)]
pub struct LmmCoefficients {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl LmmCoefficients {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Self {
        assert_eq!(alpha.len(), beta.len(), "alpha and beta must share length k");
        assert!(!alpha.is_empty(), "need at least a 1-step scheme");
        Self { alpha, beta }
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

pub type DerivFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
pub type InitialFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// An initial value problem over a candidate family: the derivative and the
/// initial state both take the candidate's parameter vector, and the bound
/// vectors must hold over every candidate the sweep will evaluate.
pub struct IvpSpec {
    pub dimension: usize,
    pub deriv: Box<DerivFn>,
    pub initial: Box<InitialFn>,
    pub t0: f64,
    pub tf: f64,
    /// Componentwise upper bound on the derivative over all candidates/times.
    pub deriv_upper: Vec<f64>,
    /// Componentwise lower bound on the derivative over all candidates/times.
    pub deriv_lower: Vec<f64>,
    pub x0_max: Vec<f64>,
    pub x0_min: Vec<f64>,
    /// Set when the derivative does not depend on `t`; required by the
    /// all-steps oracle mode.
    pub time_independent: bool,
}

impl IvpSpec {
    pub fn span(&self) -> f64 {
        self.tf - self.t0
    }

    pub fn eval(&self, t: f64, x: &[f64], params: &[f64]) -> Vec<f64> {
        (self.deriv)(t, x, params)
    }

    pub fn initial_state(&self, params: &[f64]) -> Vec<f64> {
        (self.initial)(params)
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.t0 < self.tf) {
            return Err("time window is empty");
        }
        let d = self.dimension;
        if self.deriv_upper.len() != d
            || self.deriv_lower.len() != d
            || self.x0_max.len() != d
            || self.x0_min.len() != d
        {
            return Err("bound vectors must match the dimension");
        }
        for i in 0..d {
            if self.deriv_lower[i] > self.deriv_upper[i] || self.x0_min[i] > self.x0_max[i] {
                return Err("lower bounds exceed upper bounds");
            }
        }
        Ok(())
    }
}

impl fmt::Debug for IvpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IvpSpec")
            .field("dimension", &self.dimension)
            .field("t0", &self.t0)
            .field("tf", &self.tf)
            .field("time_independent", &self.time_independent)
            .finish_non_exhaustive()
    }
}

/// One forward Euler step.
pub fn euler_step(x: &[f64], t: f64, h: f64, ivp: &IvpSpec, params: &[f64]) -> Vec<f64> {
    let f = ivp.eval(t, x, params);
    x.iter().zip(&f).map(|(xi, fi)| xi + h * fi).collect()
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step(x: &[f64], t: f64, h: f64, ivp: &IvpSpec, params: &[f64]) -> Vec<f64> {
    let k1 = ivp.eval(t, x, params);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(xi, ki)| xi + 0.5 * h * ki).collect();
    let k2 = ivp.eval(t + 0.5 * h, &x2, params);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(xi, ki)| xi + 0.5 * h * ki).collect();
    let k3 = ivp.eval(t + 0.5 * h, &x3, params);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(xi, ki)| xi + h * ki).collect();
    let k4 = ivp.eval(t + h, &x4, params);
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// One k-step LMM update from the k most recent states and derivatives:
/// `x_{n+k} = -sum_i alpha_i x_{n+i} + h sum_j beta_j f_{n+j}`.
pub fn lmm_step(
    history: &[Vec<f64>],
    f_history: &[Vec<f64>],
    coeffs: &LmmCoefficients,
    h: f64,
) -> Vec<f64> {
    let k = coeffs.k();
    assert_eq!(history.len(), k, "history must hold exactly k states");
    assert_eq!(f_history.len(), k, "derivative history must hold exactly k entries");
    let dim = history[0].len();
    let mut next = Vec::with_capacity(dim);
    for d in 0..dim {
        let mut acc = 0.0;
        for i in 0..k {
            acc -= coeffs.alpha[i] * history[i][d];
            acc += h * coeffs.beta[i] * f_history[i][d];
        }
        next.push(acc);
    }
    next
}

/// Residual of the m-th order condition (m = 0 is the preconsistency sum).
/// The conditions read `k^m + sum_i i^m alpha_i = m * sum_j j^(m-1) beta_j`
/// with the `0^0 = 1` convention on the right-hand side.
pub fn order_condition_residual(coeffs: &LmmCoefficients, m: u32) -> f64 {
    let k = coeffs.k();
    if m == 0 {
        return 1.0 + coeffs.alpha.iter().sum::<f64>();
    }
    let mut lhs = (k as f64).powi(m as i32);
    for (i, &a) in coeffs.alpha.iter().enumerate() {
        if i > 0 {
            lhs += (i as f64).powi(m as i32) * a;
        }
    }
    let mut sigma = 0.0;
    for (j, &b) in coeffs.beta.iter().enumerate() {
        let w = if m == 1 {
            1.0
        } else if j == 0 {
            0.0
        } else {
            (j as f64).powi(m as i32 - 1)
        };
        sigma += w * b;
    }
    lhs - m as f64 * sigma
}

/// Largest p such that the order conditions hold for every m in `1..=p`
/// within `tol`; returns 0 when the preconsistency condition already fails.
/// Capped at `2k + 2` which is beyond the first Dahlquist barrier.
pub fn consistency_order(coeffs: &LmmCoefficients, tol: f64) -> u32 {
    assert!(tol > 0.0);
    if order_condition_residual(coeffs, 0).abs() > tol {
        return 0;
    }
    let cap = 2 * coeffs.k() as u32 + 2;
    let mut p = 0;
    for m in 1..=cap {
        if order_condition_residual(coeffs, m).abs() > tol {
            break;
        }
        p = m;
    }
    p
}

/// Principal error constant `C_{p+1}` of a scheme of consistency order p:
/// the leading Taylor coefficient of the truncation operator,
/// `(k^{p+1} + sum i^{p+1} alpha_i) / (p+1)! - (sum j^p beta_j) / p!`.
pub fn principal_error_constant(coeffs: &LmmCoefficients, p: u32) -> f64 {
    let q = p + 1;
    let mut lhs = (coeffs.k() as f64).powi(q as i32);
    for (i, &a) in coeffs.alpha.iter().enumerate() {
        if i > 0 {
            lhs += (i as f64).powi(q as i32) * a;
        }
    }
    let mut sigma = 0.0;
    for (j, &b) in coeffs.beta.iter().enumerate() {
        let w = if p == 0 {
            1.0
        } else if j == 0 {
            0.0
        } else {
            (j as f64).powi(p as i32)
        };
        sigma += w * b;
    }
    lhs / factorial(q) - sigma / factorial(p)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product::<f64>().max(1.0)
}

/// Root condition shared by zero- and absolute stability: every root stays
/// inside the `1 + tol` disk and at most one root sits on the unit circle
/// (within `tol`), which must additionally be simple.
pub fn satisfies_root_condition(roots: &[Complex64], tol: f64) -> bool {
    for r in roots {
        if r.norm() >= 1.0 + tol {
            return false;
        }
    }
    let unit: Vec<&Complex64> = roots.iter().filter(|r| r.norm() > 1.0 - tol).collect();
    match unit.len() {
        0 => true,
        1 => {
            let u = *unit[0];
            roots
                .iter()
                .filter(|r| (**r - u).norm() < ROOT_CLUSTER_TOL)
                .count()
                == 1
        }
        _ => false,
    }
}

/// Roots of the first characteristic polynomial `rho(r) = r^k + sum alpha_i r^i`.
pub fn rho_roots(coeffs: &LmmCoefficients) -> Result<Vec<Complex64>, RootFindingError> {
    let low: Vec<Complex64> = coeffs.alpha.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    monic_roots(&low)
}

/// Zero-stability: the root condition on `rho`.
pub fn zero_stable(coeffs: &LmmCoefficients, tol: f64) -> Result<bool, RootFindingError> {
    Ok(satisfies_root_condition(&rho_roots(coeffs)?, tol))
}

/// Roots of the stability polynomial `rho(r) - hl * sigma(r)` with
/// `sigma(r) = sum_{j<k} beta_j r^j` (explicit scheme convention).
pub fn stability_roots(
    coeffs: &LmmCoefficients,
    hlambda: Complex64,
) -> Result<Vec<Complex64>, RootFindingError> {
    let low: Vec<Complex64> = coeffs
        .alpha
        .iter()
        .zip(&coeffs.beta)
        .map(|(&a, &b)| Complex64::new(a, 0.0) - hlambda * b)
        .collect();
    monic_roots(&low)
}

/// Absolute stability at a given `h * lambda` (callers supply values with a
/// non-positive real part): the root condition on the stability polynomial.
/// At `hlambda == 0` this degenerates to zero-stability.
pub fn absolutely_stable(
    coeffs: &LmmCoefficients,
    hlambda: Complex64,
    tol: f64,
) -> Result<bool, RootFindingError> {
    Ok(satisfies_root_condition(&stability_roots(coeffs, hlambda)?, tol))
}

/// Jury test for a 2-step scheme at a real `h * lambda`: certifies that both
/// roots of the stability quadratic lie strictly inside the unit disk.
pub fn jury_stable(coeffs: &LmmCoefficients, hlambda: f64) -> bool {
    assert_eq!(coeffs.k(), 2, "the Jury test applies to 2-step schemes");
    let b = coeffs.alpha[1] - hlambda * coeffs.beta[1];
    let c = coeffs.alpha[0] - hlambda * coeffs.beta[0];
    c < 1.0 && 1.0 + b + c > 0.0 && 1.0 - b + c > 0.0
}
