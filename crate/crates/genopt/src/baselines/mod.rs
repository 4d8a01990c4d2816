//! First- and zero-order baselines: box-constrained multi-start L-BFGS,
//! a simple (mu/mu_w, lambda) CMA-ES, and a Gaussian score-function NES.

mod cmaes;
mod lbfgs;
mod nes;

pub use cmaes::{cmaes_run, CmaesState};
pub use lbfgs::{lbfgs_minimize, multistart_lbfgs, LbfgsConfig, LbfgsOutcome};
pub use nes::{nes_gradient, nes_run, NesConfig, NesState};
