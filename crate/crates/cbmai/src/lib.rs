//! Constrained best mixed arm identification under a fixed sampling budget.
//!
//! A bandit instance has `K` arms with Gaussian rewards and `L` Gaussian
//! cost attributes; the object to identify is the support of the mixed arm
//! (a distribution over arms) that maximizes expected reward subject to
//! expected-cost bounds. Supports live in the extended index set `[0, K+L)`
//! where index `K + l` is the virtual arm of cost constraint `l`'s slack.
//!
//! The crate provides:
//!
//! - [`lp`]: exact small-LP machinery (standard form, basis enumeration,
//!   basic feasible solutions, dual certificates),
//! - [`model`]: instances, the sampling environment, empirical means, and
//!   the true-optimum/uniqueness check,
//! - [`algo`]: the successive-reject identification algorithm with two
//!   score functions, its pull schedule, and the uniform-sampling baseline,
//! - [`hardness`]: estimators for the instance-hardness gaps and the
//!   closed-form rate exponents built from them,
//! - [`catalog`]: built-in benchmark instances and generators,
//! - [`harness`]: a deterministic Monte Carlo experiment driver with CSV
//!   output.

pub mod algo;
pub mod catalog;
pub mod hardness;
pub mod harness;
pub mod linalg;
pub mod lp;
pub mod model;

pub use algo::{Identification, ScoreFlavor};
pub use harness::{Algorithm, CellResult, ExperimentSpec};
pub use model::Instance;
