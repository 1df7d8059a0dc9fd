//! Synthesis of cost-minimal feasible schemes by branch and bound.
//!
//! The integer variables are the per-dimension register widths (mantissa,
//! exponent, margin), the dyadic shift `a0` and the step count `N`; they are
//! explored depth-first in ascending order with monotone objective bounds
//! pruning whole subtrees. At each integer leaf the order conditions are
//! solved for the remaining coefficients (closed form for two steps, a line
//! search over the single free parameter maximizing the stability margin for
//! three, coordinate descent beyond that), the step size is set to the
//! largest value passing the error budget and any cap, and the assembled
//! scheme is accepted only if the full constraint report passes.
//!
//! Everything is deterministic: fixed traversal order, fixed search grids,
//! single-threaded.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;
use num_complex::Complex64;

use crate::bitfloat::FloatFormat;
use crate::lmm::{
    consistency_order, order_condition_residual, principal_error_constant, rho_roots,
    satisfies_root_condition, stability_roots, IvpSpec, LmmCoefficients, CONSISTENCY_TOL,
    ROOT_MODULUS_TOL,
};
use crate::poly::{real_matrix_eigenvalues, RootFindingError};
use crate::qlmm::{depth_estimate, resource_estimate, CostModel, Scheme};

pub const DEFAULT_NODE_LIMIT: u64 = 1_000_000;

/// What the search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Total qubits: state registers + consumed ancillas + workspace.
    MinQubits,
    /// Total modeled circuit depth.
    MinDepth,
    /// Depth, subject to the qubit total staying within the cap.
    MinDepthUnderQubitCap(u64),
}

/// Inclusive integer ranges searched per variable. The same range applies to
/// every dimension of a per-dimension variable; dimensions still pick their
/// values independently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableBox {
    pub mantissa_bits: RangeInclusive<u32>,
    pub exponent_bits: RangeInclusive<u32>,
    pub margin_bits: RangeInclusive<u32>,
    pub a0: RangeInclusive<u32>,
    pub steps: RangeInclusive<usize>,
}

impl VariableBox {
    pub fn is_empty(&self) -> bool {
        self.mantissa_bits.is_empty()
            || self.exponent_bits.is_empty()
            || self.margin_bits.is_empty()
            || self.a0.is_empty()
            || self.steps.is_empty()
    }
}

/// The full search problem: the candidate-family IVP, the error budget, the
/// objective, the variable box, the error-model inputs and the stability test
/// spectrum (unscaled eigenvalues; they are multiplied by the step size at
/// check time).
#[derive(Debug)]
pub struct OptimizationProblem<'a> {
    pub ivp: &'a IvpSpec,
    pub epsilon: f64,
    pub objective: Objective,
    pub k_range: Vec<usize>,
    pub variable_box: VariableBox,
    /// Per-dimension bound on the (p+1)-th solution derivative feeding the
    /// accumulated-method-error term; callers supply values valid for every
    /// consistency order the searched schemes can reach.
    pub deriv_bound: Vec<f64>,
    pub test_spectrum: Vec<Complex64>,
    pub cost_model: CostModel,
    /// Optional upper limit on the step size.
    pub h_cap: Option<f64>,
    pub node_limit: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("no feasible scheme in the variable box")]
    Infeasible,
    #[error("branch-and-bound node limit exceeded")]
    BudgetExceeded,
}

/// One constraint's verdict with its signed residual (positive = satisfied
/// with that much slack).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCheck {
    pub pass: bool,
    pub residual: f64,
}

impl ConstraintCheck {
    fn strict(residual: f64) -> Self {
        Self { pass: residual > 0.0, residual }
    }
}

/// Per-constraint feasibility verdicts with exact residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `alpha_0 + 2^-a0` must vanish exactly.
    pub dyadic_alpha0: ConstraintCheck,
    /// Order conditions up to first order; `order` is the achieved order.
    pub consistency: ConstraintCheck,
    pub order: u32,
    /// Root condition on the first characteristic polynomial.
    pub zero_stability: ConstraintCheck,
    /// Root condition at every scaled spectrum point (worst margin).
    pub absolute_stability: ConstraintCheck,
    /// Per dimension: `w_upper - (x0_max + v + span*u)`.
    pub overflow: Vec<ConstraintCheck>,
    /// Per dimension: `(x0_min + v + span*l) - w_lower`.
    pub underflow: Vec<ConstraintCheck>,
    /// Per dimension: `epsilon - (roundoff envelope + accumulated method error)`.
    pub error_budget: Vec<ConstraintCheck>,
    /// Per dimension: adder margin inequality residual.
    pub margin: Vec<ConstraintCheck>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.dyadic_alpha0.pass
            && self.consistency.pass
            && self.zero_stability.pass
            && self.absolute_stability.pass
            && self.overflow.iter().all(|c| c.pass)
            && self.underflow.iter().all(|c| c.pass)
            && self.error_budget.iter().all(|c| c.pass)
            && self.margin.iter().all(|c| c.pass)
    }
}

/// Trajectory envelope of the biased state: per-dimension `(lo, hi)` with
/// `lo = x0_min + v + span*min(l, 0)` and `hi = x0_max + v + span*max(u, 0)`.
/// Clamping the derivative bounds at zero keeps the envelope valid when a
/// derivative component does not straddle zero.
pub fn biased_envelope(ivp: &IvpSpec, bias: &[f64]) -> Vec<(f64, f64)> {
    let span = ivp.span();
    (0..ivp.dimension)
        .map(|d| {
            let lo = ivp.x0_min[d] + bias[d] + span * ivp.deriv_lower[d].min(0.0);
            let hi = ivp.x0_max[d] + bias[d] + span * ivp.deriv_upper[d].max(0.0);
            (lo, hi)
        })
        .collect()
}

/// Default bias rule: enough to keep the lower envelope positive, plus ten
/// percent of the dynamic range as slack.
pub fn default_bias(ivp: &IvpSpec) -> Vec<f64> {
    let span = ivp.span();
    (0..ivp.dimension)
        .map(|d| {
            let lo = ivp.x0_min[d] + span * ivp.deriv_lower[d].min(0.0);
            let hi = ivp.x0_max[d] + span * ivp.deriv_upper[d].max(0.0);
            (-lo).max(0.0) + 0.1 * (hi - lo)
        })
        .collect()
}

fn floor_log2(x: f64) -> i32 {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i32;
    if exp_field == 0 {
        // Subnormal: count from the fraction's top bit.
        let frac = bits & ((1u64 << 52) - 1);
        -1075 + (63 - frac.leading_zeros() as i32)
    } else {
        exp_field - 1023
    }
}

fn is_power_of_two(x: f64) -> bool {
    let bits = x.to_bits();
    let exp_field = (bits >> 52) & 0x7ff;
    let frac = bits & ((1u64 << 52) - 1);
    exp_field != 0 && frac == 0
}

/// Exponent offset bracketing the envelope from below: the largest offset
/// with `w_lower = 2^offset` strictly below `lo`.
pub fn choose_offset(lo: f64) -> Option<i32> {
    if !(lo > 0.0) || !lo.is_finite() {
        return None;
    }
    let mut off = floor_log2(lo);
    if is_power_of_two(lo) {
        off -= 1;
    }
    Some(off)
}

/// Exponent offset for a stored dimension of a scheme. The window floor must
/// sit below every value the register holds during a step, not only the
/// stored states: the trajectory extends `k - 1` states past the final time,
/// the oldest state is scaled down by `2^-a0` in place, and the weighted
/// remainder `y_{n+k} - 2^-a0 y_n` is at least
/// `(1 - 2^-a0) * y_n - k h max(-l, 0)` on the way in.
pub fn scheme_offset(lo: f64, a0: u32, k: usize, h: f64, deriv_lower: f64) -> Option<i32> {
    let lo_ext = lo + (k as f64 - 1.0) * h * deriv_lower.min(0.0);
    let shift = 0.5f64.powi(a0 as i32);
    let scaled = shift * lo_ext;
    let remainder_floor = (1.0 - shift) * lo_ext - k as f64 * h * (-deriv_lower).max(0.0);
    choose_offset(scaled.min(remainder_floor))
}

/// Accumulated method-error model: `|C_{p+1}| * h^p * span * bound`.
pub fn accumulated_method_error(error_constant: f64, p: u32, h: f64, span: f64, bound: f64) -> f64 {
    error_constant.abs() * h.powi(p as i32) * span * bound
}

/// Per-constraint feasibility of a fully assembled scheme. Infeasibility is
/// data, not an error: root-solving failures surface as failed stability
/// entries with a negative-infinity residual.
pub fn check_feasible(scheme: &Scheme, problem: &OptimizationProblem) -> FeasibilityReport {
    let ivp = problem.ivp;
    let coeffs = scheme.coeffs();
    let k = scheme.k();
    let span = ivp.span();
    let h = scheme.h();

    let dyadic = {
        let residual = coeffs.alpha()[0] + 0.5f64.powi(scheme.a0() as i32);
        ConstraintCheck { pass: residual == 0.0, residual }
    };

    let order = consistency_order(coeffs, CONSISTENCY_TOL);
    let consistency = ConstraintCheck {
        pass: order >= 1,
        residual: order_condition_residual(coeffs, 0)
            .abs()
            .max(order_condition_residual(coeffs, 1).abs()),
    };

    let zero_stability = match rho_roots(coeffs) {
        Ok(roots) => ConstraintCheck {
            pass: satisfies_root_condition(&roots, ROOT_MODULUS_TOL),
            residual: 1.0 - max_modulus(&roots),
        },
        Err(_) => ConstraintCheck { pass: false, residual: f64::NEG_INFINITY },
    };

    let mut abs_pass = true;
    let mut abs_residual = f64::INFINITY;
    for lambda in &problem.test_spectrum {
        match stability_roots(coeffs, lambda * h) {
            Ok(roots) => {
                abs_pass &= satisfies_root_condition(&roots, ROOT_MODULUS_TOL);
                abs_residual = abs_residual.min(1.0 - max_modulus(&roots));
            }
            Err(_) => {
                abs_pass = false;
                abs_residual = f64::NEG_INFINITY;
            }
        }
    }
    if problem.test_spectrum.is_empty() {
        abs_residual = 1.0;
    }
    let absolute_stability = ConstraintCheck { pass: abs_pass, residual: abs_residual };

    let envelope = biased_envelope(ivp, scheme.bias());
    let alpha0_mag = 0.5f64.powi(scheme.a0() as i32);
    let mut overflow = Vec::new();
    let mut underflow = Vec::new();
    let mut error_budget = Vec::new();
    let mut margin = Vec::new();
    for d in 0..ivp.dimension {
        let fmt = &scheme.formats()[d];
        let (lo, hi) = envelope[d];
        overflow.push(ConstraintCheck::strict(fmt.w_upper() - hi));
        underflow.push(ConstraintCheck::strict(lo - fmt.w_lower()));
        let roundoff = hi * 0.5f64.powi(fmt.mantissa_bits() as i32);
        let tau = if order >= 1 {
            accumulated_method_error(
                principal_error_constant(coeffs, order),
                order,
                h,
                span,
                problem.deriv_bound[d],
            )
        } else {
            f64::INFINITY
        };
        error_budget.push(ConstraintCheck::strict(problem.epsilon - (roundoff + tau)));
        margin.push(ConstraintCheck::strict(margin_residual(
            alpha0_mag,
            fmt.margin_bits(),
            lo,
            h,
            k,
            ivp.deriv_upper[d],
        )));
    }

    FeasibilityReport {
        dyadic_alpha0: dyadic,
        consistency,
        order,
        zero_stability,
        absolute_stability,
        overflow,
        underflow,
        error_budget,
        margin,
    }
}

/// Adder-margin inequality residual:
/// `(|alpha_0| (2^A + 1) - 1) * min_n y_n - h k u`, with the trajectory
/// minimum replaced by the lower envelope.
fn margin_residual(alpha0_mag: f64, margin_bits: u32, lo: f64, h: f64, k: usize, u: f64) -> f64 {
    let gain = alpha0_mag * ((1u64 << margin_bits) + 1) as f64 - 1.0;
    gain * lo - h * k as f64 * u.max(0.0)
}

fn max_modulus(roots: &[Complex64]) -> f64 {
    roots.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

/// Builds coefficients of maximal structural order `k - 1` from `alpha_0` and
/// the free parameters `alpha_2 .. alpha_{k-1}`: `alpha_1` comes from the
/// preconsistency sum and the betas solve the order-condition system.
pub fn consistent_coefficients(k: usize, alpha0: f64, free_alpha: &[f64]) -> LmmCoefficients {
    assert!(k >= 2);
    assert_eq!(free_alpha.len(), k - 2);
    let mut alpha = vec![0.0; k];
    alpha[0] = alpha0;
    for (i, &a) in free_alpha.iter().enumerate() {
        alpha[i + 2] = a;
    }
    alpha[1] = -1.0 - alpha0 - free_alpha.iter().sum::<f64>();

    // m-th condition (m = 1..k-1): sum_j m j^(m-1) beta_j = k^m + sum_i i^m alpha_i.
    let n = k - 1;
    let mut matrix = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for m in 1..=n {
        for j in 1..=n {
            matrix[(m - 1) * n + (j - 1)] = m as f64 * (j as f64).powi(m as i32 - 1);
        }
        let mut r = (k as f64).powi(m as i32);
        for (i, &a) in alpha.iter().enumerate().skip(1) {
            r += (i as f64).powi(m as i32) * a;
        }
        rhs[m - 1] = r;
    }
    solve_dense(&mut matrix, &mut rhs, n);

    let mut beta = vec![0.0; k];
    beta[1..k].copy_from_slice(&rhs[..(k - 1)]);
    LmmCoefficients::new(alpha, beta)
}

/// In-place Gaussian elimination with partial pivoting on a row-major
/// `n x n` system; the solution lands in `rhs`.
fn solve_dense(matrix: &mut [f64], rhs: &mut [f64], n: usize) {
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if matrix[row * n + col].abs() > matrix[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            for j in 0..n {
                matrix.swap(col * n + j, pivot * n + j);
            }
            rhs.swap(col, pivot);
        }
        let diag = matrix[col * n + col];
        for row in (col + 1)..n {
            let factor = matrix[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                matrix[row * n + j] -= factor * matrix[col * n + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for j in (col + 1)..n {
            acc -= matrix[col * n + j] * rhs[j];
        }
        rhs[col] = acc / matrix[col * n + col];
    }
}

/// Stability margin of a coefficient set at step size `h`: the smallest
/// `1 - max |root|` over the scaled spectrum, combined with the zero-
/// stability margin (ignoring the single structural unit root). Negative or
/// non-finite values mean the scheme is not stability-feasible.
pub fn stability_margin(coeffs: &LmmCoefficients, spectrum: &[Complex64], h: f64) -> f64 {
    let Ok(roots) = rho_roots(coeffs) else {
        return f64::NEG_INFINITY;
    };
    if !satisfies_root_condition(&roots, ROOT_MODULUS_TOL) {
        return f64::NEG_INFINITY;
    }
    // The unit root demanded by consistency is structural; measure the rest.
    let unit_idx = roots
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            let da = (*a - Complex64::new(1.0, 0.0)).norm();
            let db = (*b - Complex64::new(1.0, 0.0)).norm();
            da.partial_cmp(&db).unwrap()
        })
        .map(|(i, _)| i);
    let mut margin = 1.0
        - roots
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != unit_idx)
            .map(|(_, r)| r.norm())
            .fold(0.0, f64::max);
    for lambda in spectrum {
        if lambda.norm() == 0.0 {
            continue;
        }
        let Ok(roots) = stability_roots(coeffs, lambda * h) else {
            return f64::NEG_INFINITY;
        };
        if !satisfies_root_condition(&roots, ROOT_MODULUS_TOL) {
            return f64::NEG_INFINITY;
        }
        margin = margin.min(1.0 - max_modulus(&roots));
    }
    margin
}

/// Free parameters maximizing the stability margin: a deterministic grid scan
/// refined by golden-section search, coordinate-wise when there are two or
/// more free parameters.
fn choose_free_parameters(k: usize, alpha0: f64, spectrum: &[Complex64], h: f64) -> Vec<f64> {
    let dof = k - 2;
    if dof == 0 {
        return Vec::new();
    }
    let mut free = vec![0.0; dof];
    let rounds = if dof == 1 { 1 } else { 3 };
    for _ in 0..rounds {
        for idx in 0..dof {
            let mut probe = free.clone();
            let eval = |x: f64, probe: &mut Vec<f64>| {
                probe[idx] = x;
                let coeffs = consistent_coefficients(k, alpha0, probe);
                stability_margin(&coeffs, spectrum, h)
            };
            // Coarse scan over a generous coefficient range.
            let (lo, hi) = (-2.5f64, 2.5f64);
            let steps = 80usize;
            let mut best_x = lo;
            let mut best_m = f64::NEG_INFINITY;
            for s in 0..=steps {
                let x = lo + (hi - lo) * s as f64 / steps as f64;
                let m = eval(x, &mut probe);
                if m > best_m {
                    best_m = m;
                    best_x = x;
                }
            }
            if best_m == f64::NEG_INFINITY {
                free[idx] = 0.0;
                continue;
            }
            let width = (hi - lo) / steps as f64;
            let (mut a, mut b) = (best_x - width, best_x + width);
            // Golden-section refinement of the winning bracket.
            let phi = 0.618_033_988_749_894_9;
            let mut x1 = b - phi * (b - a);
            let mut x2 = a + phi * (b - a);
            let mut f1 = eval(x1, &mut probe);
            let mut f2 = eval(x2, &mut probe);
            for _ in 0..50 {
                if f1 >= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - phi * (b - a);
                    f1 = eval(x1, &mut probe);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + phi * (b - a);
                    f2 = eval(x2, &mut probe);
                }
            }
            let refined = if f1 >= f2 { x1 } else { x2 };
            free[idx] = if eval(refined, &mut probe) >= best_m { refined } else { best_x };
        }
    }
    free
}

/// One leaf of the integer search tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeafAssignment {
    pub a0: u32,
    pub steps: usize,
    /// Per-dimension (mantissa, exponent, margin) widths.
    pub widths: Vec<(u32, u32, u32)>,
}

/// The continuous sub-solution shared by every leaf with the same `a0` and
/// step count: coefficients from the order conditions (free parameters tuned
/// for stability at the largest candidate step size), the achieved order and
/// the principal error constant.
#[derive(Debug, Clone)]
struct ContinuousSolve {
    coeffs: LmmCoefficients,
    order: u32,
    error_constant: f64,
}

type SolveMemo = BTreeMap<(u32, usize), Option<ContinuousSolve>>;

/// Largest step size a step count can realize under the cap; a leaf is only
/// valid when the realized step size stays above `span / (N + 1)`, so that
/// `floor(span / h) = N`.
fn candidate_h0(problem: &OptimizationProblem, steps: usize) -> f64 {
    let h = problem.ivp.span() / steps as f64;
    match problem.h_cap {
        Some(cap) => h.min(cap),
        None => h,
    }
}

fn continuous_solve(
    problem: &OptimizationProblem,
    k: usize,
    a0: u32,
    steps: usize,
    memo: &mut SolveMemo,
) -> Option<ContinuousSolve> {
    if let Some(cached) = memo.get(&(a0, steps)) {
        return cached.clone();
    }
    let h0 = candidate_h0(problem, steps);
    let solved = (|| {
        let alpha0 = -0.5f64.powi(a0 as i32);
        let free = choose_free_parameters(k, alpha0, &problem.test_spectrum, h0);
        let coeffs = consistent_coefficients(k, alpha0, &free);
        let order = consistency_order(&coeffs, CONSISTENCY_TOL);
        if order == 0 {
            return None;
        }
        if stability_margin(&coeffs, &problem.test_spectrum, h0) <= 0.0 {
            return None;
        }
        let error_constant = principal_error_constant(&coeffs, order);
        Some(ContinuousSolve { coeffs, order, error_constant })
    })();
    memo.insert((a0, steps), solved.clone());
    solved
}

/// Largest step size passing every per-dimension error budget, starting from
/// `h0`, for mantissa widths given by `mantissa(d)`. `None` when some
/// dimension's round-off envelope alone exceeds the budget.
fn error_capped_h(
    problem: &OptimizationProblem,
    solve: &ContinuousSolve,
    envelope: &[(f64, f64)],
    h0: f64,
    mantissa: impl Fn(usize) -> u32,
) -> Option<f64> {
    let span = problem.ivp.span();
    let mut h = h0;
    for (d, &(_, hi)) in envelope.iter().enumerate() {
        let roundoff = hi * 0.5f64.powi(mantissa(d) as i32);
        let budget = problem.epsilon - roundoff;
        if budget <= 0.0 {
            return None;
        }
        let rate = solve.error_constant.abs() * span * problem.deriv_bound[d];
        if rate > 0.0 {
            h = h.min((budget / rate).powf(1.0 / solve.order as f64));
        }
    }
    Some(h)
}

/// Problem-constant data shared by every leaf evaluation.
#[derive(Debug, Clone)]
struct SearchContext {
    bias: Vec<f64>,
    envelope: Vec<(f64, f64)>,
}

impl SearchContext {
    fn new(problem: &OptimizationProblem) -> Self {
        let bias = default_bias(problem.ivp);
        let envelope = biased_envelope(problem.ivp, &bias);
        Self { bias, envelope }
    }
}

fn objective_of(problem: &OptimizationProblem, scheme: &Scheme) -> Option<u64> {
    let qubits = resource_estimate(scheme, &problem.cost_model);
    match problem.objective {
        Objective::MinQubits => Some(qubits),
        Objective::MinDepth => Some(depth_estimate(scheme, &problem.cost_model)),
        Objective::MinDepthUnderQubitCap(cap) => {
            (qubits <= cap).then(|| depth_estimate(scheme, &problem.cost_model))
        }
    }
}

fn evaluate_leaf_with(
    problem: &OptimizationProblem,
    ctx: &SearchContext,
    k: usize,
    leaf: &LeafAssignment,
    memo: &mut SolveMemo,
) -> Option<(Scheme, u64, FeasibilityReport)> {
    let ivp = problem.ivp;
    let dim = ivp.dimension;
    assert_eq!(leaf.widths.len(), dim);

    let window_lo = ivp.span() / (leaf.steps as f64 + 1.0);
    let h0 = candidate_h0(problem, leaf.steps);
    if h0 <= window_lo {
        return None; // the cap pushes h below what this step count spans
    }
    let solve = continuous_solve(problem, k, leaf.a0, leaf.steps, memo)?;
    let h = error_capped_h(problem, &solve, &ctx.envelope, h0, |d| leaf.widths[d].0)?;
    if h <= window_lo {
        return None;
    }

    // Cheap per-dimension range and margin screens before any root solving.
    let alpha0_mag = 0.5f64.powi(leaf.a0 as i32);
    let mut formats = Vec::with_capacity(dim);
    for d in 0..dim {
        let (m, e, a) = leaf.widths[d];
        let off = scheme_offset(ctx.envelope[d].0, leaf.a0, k, h, ivp.deriv_lower[d])?;
        let fmt = FloatFormat::new(m, e, off, a).ok()?;
        let (lo, hi) = ctx.envelope[d];
        if fmt.w_upper() <= hi || lo <= fmt.w_lower() {
            return None;
        }
        if margin_residual(alpha0_mag, a, lo, h, k, ivp.deriv_upper[d]) <= 0.0 {
            return None;
        }
        formats.push(fmt);
    }

    let scheme =
        Scheme::new(solve.coeffs.clone(), leaf.a0, h, leaf.steps, formats, ctx.bias.clone()).ok()?;
    let report = check_feasible(&scheme, problem);
    if !report.feasible() {
        return None;
    }
    let objective = objective_of(problem, &scheme)?;
    Some((scheme, objective, report))
}

/// Evaluates one integer assignment end to end: continuous sub-solve, step
/// size selection, format assembly and the full feasibility report. Returns
/// the scheme, its objective value and its report, or `None` when the leaf is
/// infeasible. This is the exact function the branch-and-bound search runs at
/// its leaves, so exhaustive enumeration over a box reproduces the search's
/// objective value.
pub fn evaluate_leaf(
    problem: &OptimizationProblem,
    k: usize,
    leaf: &LeafAssignment,
) -> Option<(Scheme, u64, FeasibilityReport)> {
    let ctx = SearchContext::new(problem);
    let mut memo = SolveMemo::new();
    evaluate_leaf_with(problem, &ctx, k, leaf, &mut memo)
}

/// A feasible scheme found by the search, with its objective value, report
/// and the number of tree nodes visited.
#[derive(Debug, Clone)]
pub struct Solved {
    pub scheme: Scheme,
    pub objective: u64,
    pub report: FeasibilityReport,
    pub nodes_visited: u64,
}

struct Search<'p, 'a> {
    problem: &'p OptimizationProblem<'a>,
    k: usize,
    ctx: SearchContext,
    memo: SolveMemo,
    incumbent: Option<(Scheme, u64, FeasibilityReport)>,
    nodes: u64,
    exceeded: bool,
}

impl Search<'_, '_> {
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.problem.node_limit {
            self.exceeded = true;
        }
        self.exceeded
    }

    /// Objective lower bound for a partial assignment, with unassigned
    /// variables at their range minima. `None` means the subtree cannot meet
    /// the qubit cap even at the minima.
    fn lower_bound(&self, steps: Option<usize>, widths: &[(u32, u32, u32)]) -> Option<u64> {
        let bx = &self.problem.variable_box;
        let dim = self.problem.ivp.dimension;
        let model = &self.problem.cost_model;
        let k = self.k as u64;
        let n = steps.unwrap_or(*bx.steps.start()) as u64;

        let mut m_bits = 0u64;
        let mut e_bits = 0u64;
        let mut rc = 0u64;
        for d in 0..dim {
            let (m, e, a) = if d < widths.len() {
                widths[d]
            } else {
                (*bx.mantissa_bits.start(), *bx.exponent_bits.start(), *bx.margin_bits.start())
            };
            m_bits += m as u64;
            e_bits += e as u64;
            rc += (a + a.ilog2() + 3) as u64;
        }
        let value_bits = m_bits + e_bits;
        let workspace = (model.workspace_per_value_bit * (k as f64 - 1.0) * value_bits as f64)
            .max(0.0)
            .ceil() as u64;
        let qubits = k * value_bits + n * rc + workspace;
        match self.problem.objective {
            Objective::MinQubits => Some(qubits),
            Objective::MinDepth | Objective::MinDepthUnderQubitCap(_) => {
                if let Objective::MinDepthUnderQubitCap(cap) = self.problem.objective {
                    if qubits > cap {
                        return None;
                    }
                }
                let per_step = (model.depth_per_mantissa_bit * m_bits as f64
                    + model.depth_per_exponent_bit * e_bits as f64
                    + model.depth_per_consumed_ancilla * rc as f64
                    + model.depth_constant)
                    .max(0.0)
                    .ceil() as u64;
                Some(n * per_step)
            }
        }
    }

    fn beats_incumbent(&self, bound: Option<u64>) -> bool {
        match (bound, &self.incumbent) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(b), Some((_, best, _))) => b < *best,
        }
    }

    fn run(&mut self) {
        let a0_range = self.problem.variable_box.a0.clone();
        for a0 in a0_range {
            if self.tick() {
                return;
            }
            // The objective is independent of a0: if even the minimal
            // assignment cannot beat the incumbent, nothing below can.
            if !self.beats_incumbent(self.lower_bound(None, &[])) {
                return;
            }
            let steps_range = self.problem.variable_box.steps.clone();
            for steps in steps_range {
                if self.tick() {
                    return;
                }
                if !self.beats_incumbent(self.lower_bound(Some(steps), &[])) {
                    break; // the objective grows with the step count
                }
                if !self.steps_can_realize_h(a0, steps) {
                    continue;
                }
                let mut widths = Vec::new();
                self.descend(a0, steps, &mut widths);
                if self.exceeded {
                    return;
                }
            }
        }
    }

    /// Subtree pre-screen: even with every mantissa at its maximum, the
    /// realized step size must stay inside this step count's window. Sound
    /// because the error-capped h grows with the mantissa widths.
    fn steps_can_realize_h(&mut self, a0: u32, steps: usize) -> bool {
        let window_lo = self.problem.ivp.span() / (steps as f64 + 1.0);
        let h0 = candidate_h0(self.problem, steps);
        if h0 <= window_lo {
            return false;
        }
        let Some(solve) = continuous_solve(self.problem, self.k, a0, steps, &mut self.memo) else {
            return false;
        };
        let m_max = *self.problem.variable_box.mantissa_bits.end();
        match error_capped_h(self.problem, &solve, &self.ctx.envelope, h0, |_| m_max) {
            Some(h) => h > window_lo,
            None => false,
        }
    }

    fn descend(&mut self, a0: u32, steps: usize, widths: &mut Vec<(u32, u32, u32)>) {
        let dim = self.problem.ivp.dimension;
        if widths.len() == dim {
            let leaf = LeafAssignment { a0, steps, widths: widths.clone() };
            if let Some((scheme, objective, report)) =
                evaluate_leaf_with(self.problem, &self.ctx, self.k, &leaf, &mut self.memo)
            {
                let better = match &self.incumbent {
                    None => true,
                    Some((_, best, _)) => objective < *best,
                };
                if better {
                    self.incumbent = Some((scheme, objective, report));
                }
            }
            return;
        }
        let bx = self.problem.variable_box.clone();
        for m in bx.mantissa_bits.clone() {
            if self.tick() {
                return;
            }
            widths.push((m, *bx.exponent_bits.start(), *bx.margin_bits.start()));
            let prune_m = !self.beats_incumbent(self.lower_bound(Some(steps), widths));
            widths.pop();
            if prune_m {
                break; // the objective grows with every register width
            }
            for e in bx.exponent_bits.clone() {
                if self.tick() {
                    return;
                }
                widths.push((m, e, *bx.margin_bits.start()));
                let prune_e = !self.beats_incumbent(self.lower_bound(Some(steps), widths));
                widths.pop();
                if prune_e {
                    break;
                }
                for a in bx.margin_bits.clone() {
                    if self.tick() {
                        return;
                    }
                    widths.push((m, e, a));
                    let prune_a = !self.beats_incumbent(self.lower_bound(Some(steps), widths));
                    if !prune_a {
                        self.descend(a0, steps, widths);
                    }
                    widths.pop();
                    if prune_a {
                        break;
                    }
                    if self.exceeded {
                        return;
                    }
                }
                if self.exceeded {
                    return;
                }
            }
            if self.exceeded {
                return;
            }
        }
    }
}

/// Best feasible scheme for one step count, by deterministic depth-first
/// branch and bound with monotone bound pruning.
pub fn solve_for_k(problem: &OptimizationProblem, k: usize) -> Result<Solved, SolveError> {
    assert!(problem.k_range.contains(&k), "k must come from the problem's k range");
    if problem.variable_box.is_empty() {
        return Err(SolveError::Infeasible);
    }
    let mut search = Search {
        problem,
        k,
        ctx: SearchContext::new(problem),
        memo: SolveMemo::new(),
        incumbent: None,
        nodes: 0,
        exceeded: false,
    };
    search.run();
    if search.exceeded {
        return Err(SolveError::BudgetExceeded);
    }
    match search.incumbent {
        Some((scheme, objective, report)) => Ok(Solved {
            scheme,
            objective,
            report,
            nodes_visited: search.nodes,
        }),
        None => Err(SolveError::Infeasible),
    }
}

/// Optimizes every step count in the range and keeps the best objective,
/// breaking ties toward the smaller step count. Budget exhaustion on any
/// step count aborts the whole selection (a partial answer would not be
/// trustworthy).
pub fn select_best(problem: &OptimizationProblem) -> Result<(usize, Solved), SolveError> {
    let mut ks = problem.k_range.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut best: Option<(usize, Solved)> = None;
    let mut budget_hit = false;
    for k in ks {
        match solve_for_k(problem, k) {
            Ok(solved) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => solved.objective < b.objective,
                };
                if better {
                    best = Some((k, solved));
                }
            }
            Err(SolveError::Infeasible) => {}
            Err(SolveError::BudgetExceeded) => budget_hit = true,
        }
    }
    if budget_hit {
        return Err(SolveError::BudgetExceeded);
    }
    best.ok_or(SolveError::Infeasible)
}

/// Default stability test spectrum: Jacobian eigenvalues of the derivative at
/// each candidate's initial state (central differences), deduplicated.
pub fn jacobian_spectrum(
    ivp: &IvpSpec,
    candidates: &[Vec<f64>],
) -> Result<Vec<Complex64>, RootFindingError> {
    let d = ivp.dimension;
    let mut spectrum: Vec<Complex64> = Vec::new();
    for params in candidates {
        let x0 = ivp.initial_state(params);
        let mut jac = vec![0.0; d * d];
        for j in 0..d {
            let eps = 1e-6 * (1.0 + x0[j].abs());
            let mut plus = x0.clone();
            plus[j] += eps;
            let mut minus = x0.clone();
            minus[j] -= eps;
            let fp = ivp.eval(ivp.t0, &plus, params);
            let fm = ivp.eval(ivp.t0, &minus, params);
            for i in 0..d {
                jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        for eig in real_matrix_eigenvalues(&jac, d)? {
            let dup = spectrum.iter().any(|s| (s - eig).norm() < 1e-9 * (1.0 + eig.norm()));
            if !dup {
                spectrum.push(eig);
            }
        }
    }
    Ok(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::boxed::Box;

    fn spring_ivp() -> IvpSpec {
        IvpSpec {
            dimension: 2,
            deriv: Box::new(|_, x, p| vec![x[1], -40.0 * x[0] - p[0] * x[1]]),
            initial: Box::new(|_| vec![0.0, 1.0]),
            t0: 0.0,
            tf: 1.4,
            deriv_upper: vec![1.0, 2.5],
            deriv_lower: vec![-0.6, -33.0],
            x0_max: vec![0.0, 1.0],
            x0_min: vec![0.0, 1.0],
            time_independent: true,
        }
    }

    fn spring_problem(ivp: &IvpSpec) -> OptimizationProblem<'_> {
        OptimizationProblem {
            ivp,
            epsilon: 4.2,
            objective: Objective::MinQubits,
            k_range: vec![2, 3],
            variable_box: VariableBox {
                mantissa_bits: 4..=30,
                exponent_bits: 1..=6,
                margin_bits: 1..=2,
                a0: 1..=3,
                steps: 50..=200,
            },
            deriv_bound: vec![1049.0, 33297.0],
            test_spectrum: vec![Complex64::new(-5.0, 0.0), Complex64::new(-8.0, 0.0)],
            cost_model: CostModel::default(),
            h_cap: None,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }

    #[test]
    fn two_step_coefficients_are_forced() {
        let coeffs = consistent_coefficients(2, -0.5, &[]);
        assert_eq!(coeffs.alpha(), &[-0.5, -0.5]);
        assert_eq!(coeffs.beta(), &[0.0, 1.5]);
        let coeffs = consistent_coefficients(2, -0.25, &[]);
        assert_eq!(coeffs.alpha(), &[-0.25, -0.75]);
        assert_eq!(coeffs.beta(), &[0.0, 1.25]);
    }

    #[test]
    fn three_step_family_matches_hand_solution() {
        // With alpha_0 = -1/2 and free alpha_2 the betas are
        // beta_2 = 2 + alpha_2/2 + alpha_0/2, beta_1 = alpha_2/2 - 3 alpha_0/2.
        let coeffs = consistent_coefficients(3, -0.5, &[0.2427]);
        assert!((coeffs.alpha()[1] - (-0.7427)).abs() < 1e-12);
        assert!((coeffs.beta()[2] - 1.87135).abs() < 1e-12);
        assert!((coeffs.beta()[1] - 0.87135).abs() < 1e-12);
        assert!(consistency_order(&coeffs, 1e-9) >= 2);
    }

    #[test]
    fn bias_rule_clears_the_lower_envelope() {
        let ivp = spring_ivp();
        let bias = default_bias(&ivp);
        let envelope = biased_envelope(&ivp, &bias);
        for (lo, hi) in envelope {
            assert!(lo > 0.0);
            assert!(hi > lo);
        }
    }

    #[test]
    fn offset_brackets_strictly_from_below() {
        assert_eq!(choose_offset(9.27), Some(3));
        assert_eq!(choose_offset(16.0), Some(3)); // exact power of two steps down
        assert_eq!(choose_offset(0.3), Some(-2));
        assert_eq!(choose_offset(0.0), None);
    }

    #[test]
    fn spring_jacobian_spectrum() {
        let ivp = spring_ivp();
        let spec = jacobian_spectrum(&ivp, &[vec![13.0]]).unwrap();
        assert_eq!(spec.len(), 2);
        let mut res: Vec<f64> = spec.iter().map(|e| e.re).collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((res[0] + 8.0).abs() < 1e-4);
        assert!((res[1] + 5.0).abs() < 1e-4);
    }

    #[test]
    fn solver_finds_a_feasible_spring_scheme() {
        let ivp = spring_ivp();
        let problem = spring_problem(&ivp);
        let solved = solve_for_k(&problem, 3).unwrap();
        assert!(solved.report.feasible());
        assert!(check_feasible(&solved.scheme, &problem).feasible());
        assert_eq!(solved.scheme.k(), 3);
        assert!(solved.objective > 0);
    }

    #[test]
    fn empty_box_is_infeasible() {
        let ivp = spring_ivp();
        let mut problem = spring_problem(&ivp);
        problem.variable_box.mantissa_bits = 10..=9;
        assert_eq!(solve_for_k(&problem, 2).unwrap_err(), SolveError::Infeasible);
    }

    #[test]
    fn node_budget_is_enforced() {
        let ivp = spring_ivp();
        let mut problem = spring_problem(&ivp);
        problem.node_limit = 10;
        assert_eq!(solve_for_k(&problem, 3).unwrap_err(), SolveError::BudgetExceeded);
    }
}
