//! Synthesis of polynomial Craig interpolants for nonlinear real arithmetic.
//!
//! Candidates come from a support vector machine with a polynomial kernel
//! trained on sampled models of the two formulas; each candidate is rounded
//! to exact rationals and checked with an interval branch-and-prune prover.
//! Counterexamples found by the prover are fed back as new samples.

pub mod formula;
pub mod nil;
pub mod polynomial;
pub mod rounding;
pub mod svm;
pub mod verify;

pub use num_rational::BigRational as Rational;
