//! Random walk on a tree (RWT) for online stochastic convex optimization on `[0, 1]`
//! under noisy first-order feedback.
//!
//! The walk moves over the dyadic interval tree, steered by sequential sign tests
//! of the gradient at each node's endpoints and midpoint. The crate also ships a
//! projected SGD baseline, closed-form regret bounds, and a seeded Monte Carlo
//! harness that writes regret curves as CSV plus a gnuplot script.

pub mod bounds;
pub mod dyadic_tree;
pub mod error;
pub mod harness;
pub mod policies;
pub mod problems;
pub mod sequential_tests;
pub mod verify;

pub use dyadic_tree::{DyadicPoint, Interval, NodeId};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, SummaryTable};
pub use policies::{MoveDecision, RegretTrace, SgdConfig, SgdInit, StepSchedule};
pub use problems::{FunctionClass, GradientOracle, NoiseModel, ObjectiveSpec, Term};
pub use sequential_tests::{
    ConfidenceParam, HeavyTailTestConfig, SubGaussianTestConfig, TestConfig, TestSession, Verdict,
};
