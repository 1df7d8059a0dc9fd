//! Classical emulation of the threshold-oracle searches run on trajectories.
//!
//! The quantum algorithm marks candidates through a comparator circuit on the
//! stored registers and finds the optimum by iterated thresholding with
//! amplitude amplification. Here the marking predicate is evaluated exactly on
//! the decoded register bits, amplification is replaced by uniform sampling
//! over the marked set, and the oracle-call count is reported as the standard
//! `sqrt(C / t)` estimate per threshold iteration. The winner is therefore
//! always the exact optimum; only the call count is a model.
//!
//! All comparisons run on decoded biased registers (`y`, never the un-biased
//! `x`), matching what a comparator sees. Callers must only use the all-steps
//! predicate on time-independent problems (the stepped superposition is not
//! meaningful otherwise); the front end checks the problem flag.

use alloc::vec::Vec;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::qlmm::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no candidate satisfies the oracle feasibility conditions")]
pub struct NoFeasibleCandidate;

/// The comparator wiring of the two supported oracle shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum OraclePredicate {
    /// Compare the objective register at the final time step against
    /// `bias + threshold`, feasible only if the register never fell below the
    /// bias along the way (steps `0..=N`).
    FinalTime { dim: usize, bias: f64, maximize: bool },
    /// Mark (candidate, step) pairs where the crossing dimension passes
    /// downward through its bias between consecutive steps; the objective
    /// register at the crossing competes against the threshold directly.
    AllSteps {
        objective_dim: usize,
        crossing_dim: usize,
        crossing_bias: f64,
        maximize: bool,
    },
}

impl OraclePredicate {
    pub fn maximize(&self) -> bool {
        match self {
            OraclePredicate::FinalTime { maximize, .. } => *maximize,
            OraclePredicate::AllSteps { maximize, .. } => *maximize,
        }
    }

    /// Number of stepper applications implied by a trajectory of `len` states.
    fn last_window_start(record: &RunRecord, k_guess: usize) -> usize {
        record.trajectory.len().saturating_sub(k_guess)
    }

    /// The candidate's objective value (decoded `y`), or `None` when the
    /// feasibility part of the predicate fails.
    pub fn candidate_value(&self, record: &RunRecord, k: usize) -> Option<f64> {
        match self {
            OraclePredicate::FinalTime { dim, bias, .. } => {
                let n_final = Self::last_window_start(record, k);
                for y in &record.trajectory[..=n_final] {
                    if y[*dim].decode() < *bias {
                        return None;
                    }
                }
                Some(record.trajectory[n_final][*dim].decode())
            }
            OraclePredicate::AllSteps {
                objective_dim,
                crossing_dim,
                crossing_bias,
                ..
            } => {
                let n_max = Self::last_window_start(record, k);
                for n in 0..n_max {
                    let here = record.trajectory[n][*crossing_dim].decode();
                    let next = record.trajectory[n + 1][*crossing_dim].decode();
                    if here > *crossing_bias && next < *crossing_bias {
                        return Some(record.trajectory[n][*objective_dim].decode());
                    }
                }
                None
            }
        }
    }
}

/// Candidates marked by the final-time oracle at a threshold: feasible (the
/// register never fell below the bias) and final value beyond `bias +
/// threshold` in the search direction.
pub fn eval_final_time_oracle(
    records: &[RunRecord],
    predicate: &OraclePredicate,
    k: usize,
    threshold: f64,
) -> Vec<usize> {
    let OraclePredicate::FinalTime { bias, maximize, .. } = predicate else {
        panic!("eval_final_time_oracle needs a final-time predicate");
    };
    records
        .iter()
        .enumerate()
        .filter_map(|(c, r)| {
            let v = predicate.candidate_value(r, k)?;
            let hit = if *maximize { v > bias + threshold } else { v < bias + threshold };
            hit.then_some(c)
        })
        .collect()
}

/// (candidate, step) pairs marked by the all-steps oracle at a threshold:
/// the crossing conjunction holds at the step and the objective register
/// beats `threshold` in the search direction.
pub fn eval_all_steps_oracle(
    records: &[RunRecord],
    predicate: &OraclePredicate,
    k: usize,
    threshold: f64,
) -> Vec<(usize, usize)> {
    let OraclePredicate::AllSteps {
        objective_dim,
        crossing_dim,
        crossing_bias,
        maximize,
    } = predicate
    else {
        panic!("eval_all_steps_oracle needs an all-steps predicate");
    };
    let mut marked = Vec::new();
    for (c, record) in records.iter().enumerate() {
        let n_max = record.trajectory.len().saturating_sub(k);
        for n in 0..n_max {
            let here = record.trajectory[n][*crossing_dim].decode();
            let next = record.trajectory[n + 1][*crossing_dim].decode();
            if here > *crossing_bias && next < *crossing_bias {
                let v = record.trajectory[n][*objective_dim].decode();
                let hit = if *maximize { v > threshold } else { v < threshold };
                if hit {
                    marked.push((c, n));
                }
            }
        }
    }
    marked
}

/// Result of a threshold-iteration search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub winner: usize,
    pub winner_value: f64,
    pub oracle_calls_estimate: f64,
    pub iterations: u32,
    pub seed: u64,
}

/// Threshold-iteration minimum (or maximum) finding.
///
/// The threshold starts at a uniformly random feasible candidate's value;
/// each iteration marks the strictly better candidates, accounts
/// `sqrt(C / t)` oracle calls for the amplified search over the `t` marked
/// ones, and jumps to a uniformly sampled marked candidate. Termination at an
/// empty marked set makes the winner the exact optimum for every seed.
pub fn durr_hoyer(
    records: &[RunRecord],
    predicate: &OraclePredicate,
    k: usize,
    seed: u64,
) -> Result<SearchResult, NoFeasibleCandidate> {
    let values: Vec<Option<f64>> = records.iter().map(|r| predicate.candidate_value(r, k)).collect();
    durr_hoyer_over_values(&values, predicate.maximize(), seed)
}

/// The same search over a precomputed value table (`None` = infeasible).
pub fn durr_hoyer_over_values(
    values: &[Option<f64>],
    maximize: bool,
    seed: u64,
) -> Result<SearchResult, NoFeasibleCandidate> {
    let feasible: Vec<usize> = (0..values.len()).filter(|&c| values[c].is_some()).collect();
    if feasible.is_empty() {
        return Err(NoFeasibleCandidate);
    }
    let total = values.len() as f64;
    let better = |v: f64, cur: f64| if maximize { v > cur } else { v < cur };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = feasible[rng.random_range(0..feasible.len())];
    let mut iterations = 0u32;
    let mut calls = 0.0f64;
    loop {
        let threshold = values[current].expect("current is feasible");
        let marked: Vec<usize> = feasible
            .iter()
            .copied()
            .filter(|&c| better(values[c].expect("feasible"), threshold))
            .collect();
        if marked.is_empty() {
            break;
        }
        calls += (total / marked.len() as f64).sqrt();
        current = marked[rng.random_range(0..marked.len())];
        iterations += 1;
    }
    Ok(SearchResult {
        winner: current,
        winner_value: values[current].expect("feasible"),
        oracle_calls_estimate: calls,
        iterations,
        seed,
    })
}
