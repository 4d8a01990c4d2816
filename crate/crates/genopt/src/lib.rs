//! Global optimization of differentiable multimodal functions.
//!
//! The centerpiece is an evolutionary-search loop whose search distribution is
//! a generative neural network trained by backpropagating objective gradients
//! through its samples ([`gennes`]). Around it: classic first- and zero-order
//! baselines ([`baselines`]), a benchmark suite with analytic gradients
//! ([`objectives`]), a Gaussian-process surrogate with Expected Improvement
//! ([`gp`]), a Bayesian-optimization loop that can use either inner maximizer
//! ([`bo`]), and an experiment harness with a CSV contract ([`bench`]).
//!
//! See the `examples/` directory for one runnable program per capability, and
//! the `opt-bench` binary for the experiment CLI.

pub mod baselines;
pub mod bench;
pub mod bo;
pub mod generator;
pub mod gennes;
pub mod gp;
pub mod linalg;
pub mod objectives;
pub mod run;

pub use objectives::{BudgetMeter, Domain, Objective, ObjectiveKind};
pub use run::{CostFunction, RunRecord};
