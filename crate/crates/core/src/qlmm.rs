//! The biased k-step stepper in soft-float register arithmetic.
//!
//! A scheme stores the biased state `y_n = x_n + v` (componentwise, `v` keeps
//! every register positive) and advances it as
//!
//! ```text
//! y_{n+k} = 2^{-a0} * y_n  (+)  sum_{i>=1} -alpha_i y_{n+i} + h sum_{j>=1} beta_j f_{n+j}
//! ```
//!
//! where the left term is a pure exponent shift, the bracketed weighted sum
//! runs in uncomputable workspace registers truncated to the stored mantissa
//! width, and `(+)` is the margined addition that consumes ancillas. The
//! first `k` states come from a Runge-Kutta startup run in the same truncated
//! arithmetic.

use alloc::vec;
use alloc::vec::Vec;

use crate::bitfloat::{AncillaLedger, FloatError, FloatFormat, SoftValue, Work};
use crate::lmm::{
    consistency_order, lmm_step, rk4_step, zero_stable, IvpSpec, LmmCoefficients, CONSISTENCY_TOL,
    ROOT_MODULUS_TOL,
};
use crate::poly::RootFindingError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QlmmError {
    #[error("invalid scheme: {0}")]
    InvalidScheme(&'static str),
    #[error("root solving failed while validating the scheme")]
    RootFinding(#[from] RootFindingError),
    /// The margined adder ran out of alignment margin mid-run; the scheme is
    /// infeasible for this trajectory and the run is aborted rather than
    /// silently saturated.
    #[error("alignment margin exhausted at step {step}, dimension {dim}: {source}")]
    Margin {
        step: usize,
        dim: usize,
        source: FloatError,
    },
    #[error("register arithmetic failed at step {step}, dimension {dim}: {source}")]
    Arithmetic {
        step: usize,
        dim: usize,
        source: FloatError,
    },
    #[error(transparent)]
    Float(#[from] FloatError),
}

/// A fully specified k-step scheme: coefficients with the dyadic leading
/// constraint, step size and count, and per-dimension formats and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    coeffs: LmmCoefficients,
    a0: u32,
    h: f64,
    steps: usize,
    formats: Vec<FloatFormat>,
    bias: Vec<f64>,
    bias_requested: Vec<f64>,
}

impl Scheme {
    /// Validates the structural scheme invariants:
    /// `alpha_0 = -2^-a0` exactly, `beta_0 = 0`, first-order consistency and
    /// zero-stability, one format and bias per dimension. Biases are
    /// truncated into their dimension's format on construction (the stored
    /// register bias is what the circuit would hold), with the requested
    /// value kept for reference.
    pub fn new(
        coeffs: LmmCoefficients,
        a0: u32,
        h: f64,
        steps: usize,
        formats: Vec<FloatFormat>,
        bias: Vec<f64>,
    ) -> Result<Self, QlmmError> {
        if coeffs.k() < 2 {
            return Err(QlmmError::InvalidScheme("a scheme needs at least two steps"));
        }
        if a0 == 0 || a0 > 60 {
            return Err(QlmmError::InvalidScheme("a0 must lie in 1..=60"));
        }
        if coeffs.alpha()[0] != -exp2_neg(a0) {
            return Err(QlmmError::InvalidScheme("alpha_0 must equal -2^-a0 exactly"));
        }
        if coeffs.beta()[0] != 0.0 {
            return Err(QlmmError::InvalidScheme("beta_0 must be zero"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(QlmmError::InvalidScheme("step size must be positive"));
        }
        if formats.len() != bias.len() || formats.is_empty() {
            return Err(QlmmError::InvalidScheme("need one format and bias per dimension"));
        }
        if consistency_order(&coeffs, CONSISTENCY_TOL) < 1 {
            return Err(QlmmError::InvalidScheme("scheme is not consistent"));
        }
        if !zero_stable(&coeffs, ROOT_MODULUS_TOL)? {
            return Err(QlmmError::InvalidScheme("scheme is not zero-stable"));
        }
        let mut effective = Vec::with_capacity(bias.len());
        for (v, fmt) in bias.iter().zip(&formats) {
            if *v == 0.0 {
                effective.push(0.0);
            } else {
                effective.push(fmt.encode(*v)?.decode());
            }
        }
        Ok(Self {
            coeffs,
            a0,
            h,
            steps,
            formats,
            bias: effective,
            bias_requested: bias,
        })
    }

    pub fn coeffs(&self) -> &LmmCoefficients {
        &self.coeffs
    }

    pub fn k(&self) -> usize {
        self.coeffs.k()
    }

    pub fn a0(&self) -> u32 {
        self.a0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of stepper applications N; the trajectory holds `N + k` states.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dimension(&self) -> usize {
        self.formats.len()
    }

    pub fn formats(&self) -> &[FloatFormat] {
        &self.formats
    }

    /// Effective per-dimension bias (truncated into the register format).
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Bias as requested before format truncation.
    pub fn bias_requested(&self) -> &[f64] {
        &self.bias_requested
    }

    /// Shift induced by storing the bias in the register format.
    pub fn bias_shift(&self, dim: usize) -> f64 {
        self.bias_requested[dim] - self.bias[dim]
    }

    pub fn time_at(&self, ivp: &IvpSpec, n: usize) -> f64 {
        ivp.t0 + n as f64 * self.h
    }
}

fn exp2_neg(a0: u32) -> f64 {
    0.5f64.powi(a0 as i32)
}

/// Linear resource and depth model. The consumed-per-step count follows the
/// margined adder's closed form; workspace and depth are linear in the
/// register widths with overridable coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub depth_per_mantissa_bit: f64,
    pub depth_per_exponent_bit: f64,
    pub depth_per_consumed_ancilla: f64,
    pub depth_constant: f64,
    /// Reusable workspace per derivative register, as a multiple of the
    /// summed value-register width; there is one such register per past step.
    pub workspace_per_value_bit: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            depth_per_mantissa_bit: 1.0,
            depth_per_exponent_bit: 1.0,
            depth_per_consumed_ancilla: 1.0,
            depth_constant: 10.0,
            workspace_per_value_bit: 2.0,
        }
    }
}

impl CostModel {
    /// Ancillas consumed per stepper application: one margined addition per
    /// dimension, `A + floor(log2 A) + 3` each.
    pub fn consumed_per_step(&self, formats: &[FloatFormat]) -> u64 {
        formats.iter().map(|f| f.consumed_per_add()).sum()
    }

    fn value_bits(formats: &[FloatFormat]) -> u64 {
        formats
            .iter()
            .map(|f| (f.mantissa_bits() + f.exponent_bits()) as u64)
            .sum()
    }

    /// Reusable workspace held while one step executes (the k-1 derivative
    /// registers plus arithmetic temporaries).
    pub fn reusable_workspace(&self, k: usize, formats: &[FloatFormat]) -> u64 {
        let per_register = self.workspace_per_value_bit * Self::value_bits(formats) as f64;
        ((k as f64 - 1.0) * per_register).max(0.0).ceil() as u64
    }

    /// Modeled circuit depth of one stepper application.
    pub fn step_depth(&self, formats: &[FloatFormat]) -> u64 {
        let m: f64 = formats.iter().map(|f| f.mantissa_bits() as f64).sum();
        let e: f64 = formats.iter().map(|f| f.exponent_bits() as f64).sum();
        let rc = self.consumed_per_step(formats) as f64;
        (self.depth_per_mantissa_bit * m
            + self.depth_per_exponent_bit * e
            + self.depth_per_consumed_ancilla * rc
            + self.depth_constant)
            .max(0.0)
            .ceil() as u64
    }
}

/// Total qubit estimate: `k` state registers plus consumed ancillas over all
/// steps plus the reusable workspace high-water mark.
pub fn resource_estimate(scheme: &Scheme, model: &CostModel) -> u64 {
    let k = scheme.k() as u64;
    k * CostModel::value_bits(scheme.formats())
        + scheme.steps() as u64 * model.consumed_per_step(scheme.formats())
        + model.reusable_workspace(scheme.k(), scheme.formats())
}

/// Total modeled circuit depth: `N` sequential stepper applications.
pub fn depth_estimate(scheme: &Scheme, model: &CostModel) -> u64 {
    scheme.steps() as u64 * model.step_depth(scheme.formats())
}

/// Full bit-level trajectory plus the resource tally of producing it.
#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Biased register states `y_0 .. y_{N+k-1}`.
    pub trajectory: Vec<Vec<SoftValue>>,
    /// The same states decoded and un-biased back to `x_n`.
    pub decoded: Vec<Vec<f64>>,
    pub ledger: AncillaLedger,
    pub modeled_depth: u64,
}

fn decode_window(window: &[Vec<SoftValue>], bias: &[f64]) -> Vec<Vec<f64>> {
    window
        .iter()
        .map(|y| y.iter().zip(bias).map(|(v, b)| v.decode() - b).collect())
        .collect()
}

/// Startup states `y_0 .. y_{k-1}`: the initial state is encoded directly and
/// the rest come from Runge-Kutta steps evaluated in the same truncated
/// register arithmetic (every stage product and sum is truncated to the
/// dimension's mantissa width before it is used).
pub fn init_prefix(
    scheme: &Scheme,
    ivp: &IvpSpec,
    params: &[f64],
) -> Result<Vec<Vec<SoftValue>>, QlmmError> {
    let dim = scheme.dimension();
    let x0 = ivp.initial_state(params);
    if x0.len() != dim {
        return Err(QlmmError::InvalidScheme("initial state dimension mismatch"));
    }
    let mut y0 = Vec::with_capacity(dim);
    for d in 0..dim {
        y0.push(scheme.formats()[d].encode(x0[d] + scheme.bias()[d])?);
    }
    let mut prefix = vec![y0];
    for s in 1..scheme.k() {
        let prev = &prefix[s - 1];
        let t = scheme.time_at(ivp, s - 1);
        let next = rk4_step_soft(prev, t, scheme, ivp, params)
            .map_err(|(dim, source)| QlmmError::Arithmetic { step: s, dim, source })?;
        prefix.push(next);
    }
    Ok(prefix)
}

/// One RK4 step on the biased state, all arithmetic truncated to the format.
fn rk4_step_soft(
    y: &[SoftValue],
    t: f64,
    scheme: &Scheme,
    ivp: &IvpSpec,
    params: &[f64],
) -> Result<Vec<SoftValue>, (usize, FloatError)> {
    let dim = y.len();
    let h = scheme.h();
    let bias = scheme.bias();
    let m_bits: Vec<u32> = scheme.formats().iter().map(|f| f.mantissa_bits()).collect();
    let state: Vec<Work> = y.iter().map(Work::from_soft).collect();

    let eval = |dt: f64, stage: &[Work]| -> Vec<Work> {
        let x: Vec<f64> = stage
            .iter()
            .zip(bias)
            .map(|(w, b)| w.to_f64() - b)
            .collect();
        let f = ivp.eval(t + dt, &x, params);
        f.iter()
            .zip(&m_bits)
            .map(|(&fi, &m)| Work::from_f64_trunc(fi, m))
            .collect()
    };
    let advance = |base: &[Work], slope: &[Work], w: f64| -> Vec<Work> {
        base.iter()
            .zip(slope)
            .zip(&m_bits)
            .map(|((b, s), &m)| b.add_trunc(s.mul_f64_trunc(w, m), m))
            .collect()
    };

    let k1 = eval(0.0, &state);
    let k2 = eval(0.5 * h, &advance(&state, &k1, 0.5 * h));
    let k3 = eval(0.5 * h, &advance(&state, &k2, 0.5 * h));
    let k4 = eval(h, &advance(&state, &k3, h));

    let mut next = Vec::with_capacity(dim);
    for d in 0..dim {
        let m = m_bits[d];
        let combo = k1[d]
            .add_trunc(k2[d].mul_f64_trunc(2.0, m), m)
            .add_trunc(k3[d].mul_f64_trunc(2.0, m), m)
            .add_trunc(k4[d], m);
        let y_next = state[d].add_trunc(combo.mul_f64_trunc(h / 6.0, m), m);
        next.push(y_next.into_soft(&scheme.formats()[d]).map_err(|e| (d, e))?);
    }
    Ok(next)
}

/// Advances one step from the window `y_n .. y_{n+k-1}` (`n` is the window's
/// first step index, used for the derivative evaluation times).
///
/// Derivatives are evaluated in plain f64 on the decoded, un-biased states
/// and truncated into the register format; the weighted sum accumulates in
/// workspace (terms in ascending step order, state terms before derivative
/// terms) and the final margined addition consumes ancillas.
pub fn qlmm_step(
    window: &[Vec<SoftValue>],
    n: usize,
    scheme: &Scheme,
    ivp: &IvpSpec,
    params: &[f64],
    model: &CostModel,
    ledger: &mut AncillaLedger,
) -> Result<Vec<SoftValue>, QlmmError> {
    let k = scheme.k();
    assert_eq!(window.len(), k, "window must hold exactly k states");
    let dim = scheme.dimension();
    let alpha = scheme.coeffs().alpha();
    let beta = scheme.coeffs().beta();
    let step = n + k;

    let xs = decode_window(window, scheme.bias());
    let mut f_vals: Vec<Vec<f64>> = Vec::with_capacity(k);
    f_vals.push(Vec::new()); // f_n is never used: beta_0 = 0
    for j in 1..k {
        f_vals.push(ivp.eval(scheme.time_at(ivp, n + j), &xs[j], params));
    }

    let workspace = model.reusable_workspace(k, scheme.formats());
    ledger.acquire_reusable(workspace);
    let mut next = Vec::with_capacity(dim);
    for d in 0..dim {
        let fmt = &scheme.formats()[d];
        let m = fmt.mantissa_bits();
        let mut acc = Work::Zero;
        for i in 1..k {
            acc = acc.add_trunc(Work::from_soft(&window[i][d]).mul_f64_trunc(-alpha[i], m), m);
        }
        for j in 1..k {
            let f_reg = Work::from_f64_trunc(f_vals[j][d], m);
            acc = acc.add_trunc(f_reg.mul_f64_trunc(scheme.h() * beta[j], m), m);
        }
        let weighted = acc
            .into_soft(fmt)
            .map_err(|source| QlmmError::Arithmetic { step, dim: d, source })?;
        let shifted = window[0][d]
            .scale_pow2(-(scheme.a0() as i32))
            .map_err(|source| QlmmError::Arithmetic { step, dim: d, source })?;
        let y_next = shifted.add_margined(&weighted, ledger).map_err(|source| match source {
            FloatError::Margin { .. } => QlmmError::Margin { step, dim: d, source },
            other => QlmmError::Arithmetic { step, dim: d, source: other },
        })?;
        next.push(y_next);
    }
    ledger.release_reusable(workspace);
    Ok(next)
}

/// Runs the full trajectory: startup prefix plus N stepper applications.
pub fn run(
    scheme: &Scheme,
    ivp: &IvpSpec,
    params: &[f64],
    model: &CostModel,
) -> Result<RunRecord, QlmmError> {
    if ivp.dimension != scheme.dimension() {
        return Err(QlmmError::InvalidScheme("scheme and problem dimensions differ"));
    }
    let k = scheme.k();
    let mut trajectory = init_prefix(scheme, ivp, params)?;
    let mut ledger = AncillaLedger::new();
    for n in 0..scheme.steps() {
        let next = qlmm_step(&trajectory[n..n + k], n, scheme, ivp, params, model, &mut ledger)?;
        trajectory.push(next);
    }
    let decoded = decode_window(&trajectory, scheme.bias());
    Ok(RunRecord {
        trajectory,
        decoded,
        ledger,
        modeled_depth: depth_estimate(scheme, model),
    })
}

/// The same trajectory in exact f64 arithmetic (no formats, no bias): the
/// reference the bit-level run is compared against. Returns un-biased states
/// `x_0 .. x_{N+k-1}`.
pub fn run_exact_real(scheme: &Scheme, ivp: &IvpSpec, params: &[f64]) -> Vec<Vec<f64>> {
    let k = scheme.k();
    let mut xs = vec![ivp.initial_state(params)];
    for s in 1..k {
        let t = scheme.time_at(ivp, s - 1);
        let next = rk4_step(&xs[s - 1], t, scheme.h(), ivp, params);
        xs.push(next);
    }
    for n in 0..scheme.steps() {
        let history = &xs[n..n + k];
        let f_history: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                if j == 0 {
                    vec![0.0; ivp.dimension] // beta_0 = 0
                } else {
                    ivp.eval(scheme.time_at(ivp, n + j), &history[j], params)
                }
            })
            .collect();
        let next = lmm_step(history, &f_history, scheme.coeffs(), scheme.h());
        xs.push(next);
    }
    xs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmm::IvpSpec;
    use alloc::boxed::Box;

    fn fmt(m: u32, e: u32, off: i32) -> FloatFormat {
        FloatFormat::new(m, e, off, 1).unwrap()
    }

    fn eq30_scheme(h: f64, steps: usize, formats: Vec<FloatFormat>, bias: Vec<f64>) -> Scheme {
        let coeffs = LmmCoefficients::new(vec![-0.5, -0.5], vec![0.0, 1.5]);
        Scheme::new(coeffs, 1, h, steps, formats, bias).unwrap()
    }

    fn still_ivp() -> IvpSpec {
        IvpSpec {
            dimension: 1,
            deriv: Box::new(|_, x, _| vec![0.0; x.len()]),
            initial: Box::new(|_| vec![3.0]),
            t0: 0.0,
            tf: 1.0,
            deriv_upper: vec![0.0],
            deriv_lower: vec![0.0],
            x0_max: vec![3.0],
            x0_min: vec![3.0],
            time_independent: true,
        }
    }

    #[test]
    fn scheme_rejects_broken_invariants() {
        let formats = vec![fmt(8, 4, -2)];
        let good = LmmCoefficients::new(vec![-0.5, -0.5], vec![0.0, 1.5]);
        assert!(Scheme::new(good.clone(), 1, 0.1, 5, formats.clone(), vec![1.0]).is_ok());
        // alpha_0 not matching -2^-a0
        assert!(Scheme::new(good.clone(), 2, 0.1, 5, formats.clone(), vec![1.0]).is_err());
        // beta_0 nonzero
        let beta0 = LmmCoefficients::new(vec![-0.5, -0.5], vec![0.1, 1.4]);
        assert!(Scheme::new(beta0, 1, 0.1, 5, formats.clone(), vec![1.0]).is_err());
        // inconsistent coefficients
        let skewed = LmmCoefficients::new(vec![-0.5, -0.3], vec![0.0, 1.5]);
        assert!(Scheme::new(skewed, 1, 0.1, 5, formats, vec![1.0]).is_err());
    }

    #[test]
    fn bias_is_truncated_into_the_format() {
        let formats = vec![FloatFormat::new(8, 4, 2, 1).unwrap()];
        let scheme = eq30_scheme(0.1, 0, formats.clone(), vec![69.7]);
        let stored = formats[0].encode(69.7).unwrap().decode();
        assert_eq!(scheme.bias()[0], stored);
        assert_eq!(scheme.bias_requested()[0], 69.7);
        assert!(scheme.bias_shift(0) > 0.0 && scheme.bias_shift(0) < 0.5);
    }

    #[test]
    fn zero_derivative_prefix_is_constant() {
        let scheme = eq30_scheme(0.1, 0, vec![fmt(8, 4, -2)], vec![1.0]);
        let prefix = init_prefix(&scheme, &still_ivp(), &[]).unwrap();
        assert_eq!(prefix.len(), 2);
        assert_eq!(prefix[0], prefix[1]);
        assert_eq!(prefix[0][0].decode(), 4.0);
    }

    #[test]
    fn constant_solution_is_exact_on_dyadic_states() {
        let scheme = eq30_scheme(0.1, 8, vec![fmt(8, 4, -2)], vec![1.0]);
        let record = run(&scheme, &still_ivp(), &[], &CostModel::default()).unwrap();
        assert_eq!(record.trajectory.len(), 8 + 2);
        for y in &record.trajectory {
            assert_eq!(y[0].decode(), 4.0);
        }
        for x in &record.decoded {
            assert_eq!(x[0], 3.0);
        }
    }

    #[test]
    fn run_tallies_ancillas_and_depth() {
        let formats = vec![FloatFormat::new(8, 4, -2, 1).unwrap(), FloatFormat::new(6, 4, -2, 2).unwrap()];
        let ivp = IvpSpec {
            dimension: 2,
            deriv: Box::new(|_, x, _| vec![0.0; x.len()]),
            initial: Box::new(|_| vec![1.0, 2.0]),
            t0: 0.0,
            tf: 1.0,
            deriv_upper: vec![0.0, 0.0],
            deriv_lower: vec![0.0, 0.0],
            x0_max: vec![1.0, 2.0],
            x0_min: vec![1.0, 2.0],
            time_independent: true,
        };
        let scheme = eq30_scheme(0.05, 9, formats.clone(), vec![1.0, 1.0]);
        let model = CostModel::default();
        let record = run(&scheme, &ivp, &[], &model).unwrap();
        let per_step: u64 = (1 + 0 + 3) + (2 + 1 + 3);
        assert_eq!(record.ledger.consumed(), 9 * per_step);
        assert_eq!(record.ledger.reusable_peak(), model.reusable_workspace(2, &formats));
        assert_eq!(record.modeled_depth, 9 * model.step_depth(&formats));
    }

    #[test]
    fn zero_steps_yields_prefix_only() {
        let scheme = eq30_scheme(0.1, 0, vec![fmt(8, 4, -2)], vec![1.0]);
        let record = run(&scheme, &still_ivp(), &[], &CostModel::default()).unwrap();
        assert_eq!(record.trajectory.len(), 2);
        assert_eq!(record.modeled_depth, 0);
    }

    #[test]
    fn resource_estimate_arithmetic() {
        // k = 2, one dimension with M = 4, E = 2, N = 0 and no workspace.
        let formats = vec![FloatFormat::new(4, 2, 0, 1).unwrap()];
        let scheme = eq30_scheme(0.1, 0, formats, vec![1.0]);
        let model = CostModel {
            workspace_per_value_bit: 0.0,
            ..CostModel::default()
        };
        assert_eq!(resource_estimate(&scheme, &model), 12);
        // Doubling N doubles only the consumed-ancilla term.
        let base = eq30_scheme(0.1, 10, vec![fmt(8, 4, -2)], vec![1.0]);
        let double = eq30_scheme(0.1, 20, vec![fmt(8, 4, -2)], vec![1.0]);
        let m = CostModel::default();
        let rc = m.consumed_per_step(base.formats());
        assert_eq!(
            resource_estimate(&double, &m) - resource_estimate(&base, &m),
            10 * rc
        );
    }

    #[test]
    fn depth_estimate_arithmetic() {
        let formats = vec![FloatFormat::new(4, 2, 0, 1).unwrap()];
        let scheme = eq30_scheme(0.1, 7, formats, vec![1.0]);
        // All-ones coefficients with constant 10: per-step 4 + 2 + 4 + 10.
        assert_eq!(depth_estimate(&scheme, &CostModel::default()), 7 * 20);
        let zero_n = eq30_scheme(0.1, 0, vec![fmt(4, 2, 0)], vec![1.0]);
        assert_eq!(depth_estimate(&zero_n, &CostModel::default()), 0);
    }

    #[test]
    fn exact_real_reference_matches_dimensions() {
        let scheme = eq30_scheme(0.1, 5, vec![fmt(8, 4, -2)], vec![1.0]);
        let xs = run_exact_real(&scheme, &still_ivp(), &[]);
        assert_eq!(xs.len(), 7);
        for x in xs {
            assert_eq!(x, vec![3.0]);
        }
    }
}
