//! Synthesis and bit-exact simulation of quantum linear multistep method
//! (QLMM) schemes for initial value problems.
//!
//! A QLMM is an explicit k-step linear multistep integrator restricted so
//! that every per-step update can run on a reversible circuit with a bounded
//! number of freshly consumed ancilla qubits: the oldest-state coefficient is
//! a negative power of two (a pure exponent shift), the oldest derivative is
//! unused, and all stored state is kept positive by a per-dimension bias so
//! an unsigned floating-point register suffices.
//!
//! The crate is split along those concerns:
//!
//! - [`bitfloat`]: the unsigned soft-float register format and the margined
//!   reversible addition, with exact truncation semantics and an ancilla
//!   ledger.
//! - [`lmm`]: classical reference numerics (Euler, RK4, k-step LMM) and
//!   scheme analysis (consistency order, zero- and absolute stability).
//! - [`poly`]: polynomial root solving used by the stability tests.
//! - [`qlmm`]: the biased stepper running in soft-float arithmetic, plus
//!   resource and depth estimates.
//! - [`optimizer`]: branch-and-bound search for the cheapest feasible scheme
//!   under overflow/underflow/error-budget/margin constraints.
//! - [`oraclesim`]: classical emulation of threshold-oracle minimum finding
//!   over a candidate sweep.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the CLI
//! live in the companion `qlmm-cli` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bitfloat;
pub mod lmm;
pub mod optimizer;
pub mod oraclesim;
pub mod poly;
pub mod qlmm;
