//! Rademacher-complexity toolkit for parameterized quantum circuits whose
//! generators and observable are n-qubit Pauli strings.
//!
//! The crate provides:
//!
//! - a phase-exact Pauli state-vector simulator with dense-matrix oracles
//!   ([`pauli`], [`simulator`]),
//! - closed-form complexity and generalization-gap bound calculators
//!   ([`bounds`]),
//! - a random-search Monte Carlo estimator of the dataset-averaged
//!   empirical Rademacher complexity, with an exact sign-enumeration
//!   oracle for small sample counts ([`rademacher`]),
//! - SPSA training of student circuits against circuit-generated targets
//!   and the generalization-gap study built on it ([`training`]),
//! - log-log regression with slope significance testing ([`analysis`]),
//! - reproducible experiment drivers that emit CSV data and JSON run
//!   manifests ([`experiments`]).
//!
//! Everything downstream of a 64-bit seed is deterministic: random draws
//! come from per-index ChaCha8 substreams ([`rng`]), so results are
//! bit-identical at any thread count ([`parallel`]).

pub mod analysis;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod parallel;
pub mod pauli;
pub mod rademacher;
pub mod rng;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
pub use parallel::Parallelism;
