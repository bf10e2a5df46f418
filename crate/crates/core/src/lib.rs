//! Positivity certification workbench for matrix product operators.
//!
//! The crate compiles correspondence-problem instances into translation
//! invariant matrix product operators whose positivity at a given threshold
//! encodes solvability, and surrounds that compiler with the tooling needed
//! to interrogate such operators in practice:
//!
//! * exact rational linear algebra and word machinery ([`exact`], [`words`]),
//! * instance handling and a brute-force solver oracle ([`pcp`]),
//! * the gadget compiler itself ([`reduction`]),
//! * MPO evaluation, spectra, and threshold verdicts ([`mpo`]),
//! * hidden Markov model evaluation, Hankel matrices, and quasi-realization
//!   synthesis ([`hmm`]),
//! * variational negativity probes over matrix product states ([`mps_probe`]),
//! * completely positive maps and local purifications ([`purification`]),
//! * nonnegative and positive semidefinite factorization checkers
//!   ([`factor_checks`]),
//! * JSON file formats and the command-line driver ([`formats`], [`cli`]).

pub mod cli;
pub mod exact;
pub mod factor_checks;
pub mod formats;
pub mod hmm;
pub mod mpo;
pub mod mps_probe;
pub mod pcp;
pub mod purification;
pub mod reduction;
pub mod words;

pub use cli::run;
