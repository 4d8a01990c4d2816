//! Gaussian natural-evolution-strategy baseline: score-function gradient of
//! the expected objective under a diagonal Gaussian search distribution, with
//! a mean-fitness baseline, descended on the mean and log standard deviation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::generator::GeneratorError;
use crate::linalg::DenseMatrix;
use crate::objectives::BudgetMeter;
use crate::run::{CostFunction, Recorder, RunRecord};

/// Search-distribution state: mean and per-coordinate standard deviation.
#[derive(Debug, Clone)]
pub struct NesState {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub lr_mean: f64,
    pub lr_logstd: f64,
}

#[derive(Debug, Clone)]
pub struct NesConfig {
    pub population: usize,
    pub lr_mean: f64,
    pub lr_logstd: f64,
}

impl Default for NesConfig {
    fn default() -> Self {
        NesConfig {
            population: 20,
            lr_mean: 0.5,
            lr_logstd: 0.1,
        }
    }
}

/// Sample average of `(f(x_i) - b) * grad log p(x_i)` over the batch, with the
/// mean-fitness baseline `b`. Returns gradients of the expected objective with
/// respect to the mean and the log standard deviations.
pub fn nes_gradient(
    samples: &DenseMatrix,
    fvals: &[f64],
    state: &NesState,
) -> Result<(Vec<f64>, Vec<f64>), GeneratorError> {
    let n = samples.rows;
    let d = samples.cols;
    if fvals.len() != n || state.mean.len() != d || state.std.len() != d {
        return Err(GeneratorError::ShapeMismatch(format!(
            "samples {n}x{d}, fvals {}, state dim {}",
            fvals.len(),
            state.mean.len()
        )));
    }
    let mut grad_mean = vec![0.0; d];
    let mut grad_logstd = vec![0.0; d];
    // Constant fitness carries no signal; return exact zeros rather than
    // rounding noise from the baseline subtraction.
    if fvals.iter().all(|&f| f == fvals[0]) {
        return Ok((grad_mean, grad_logstd));
    }
    let baseline = fvals.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        let w = (fvals[i] - baseline) / n as f64;
        let row = samples.row(i);
        for j in 0..d {
            let z = (row[j] - state.mean[j]) / state.std[j];
            grad_mean[j] += w * z / state.std[j];
            grad_logstd[j] += w * (z * z - 1.0);
        }
    }
    Ok((grad_mean, grad_logstd))
}

/// Iteratively samples a population, estimates the score-function gradient,
/// and descends the mean and log-std. The mean update is preconditioned by
/// the per-coordinate variance and both updates are normalized by the batch
/// fitness spread, which makes the step sizes scale-free.
pub fn nes_run<F: CostFunction + ?Sized, R: Rng>(
    cost: &F,
    cfg: &NesConfig,
    meter: &mut BudgetMeter,
    init_mean: Vec<f64>,
    init_std: Vec<f64>,
    rng: &mut R,
    seed: u64,
) -> RunRecord {
    assert!(cfg.population >= 2);
    let d = cost.dim();
    assert_eq!(init_mean.len(), d);
    assert_eq!(init_std.len(), d);
    let domain = cost.domain().clone();
    let mut state = NesState {
        mean: init_mean,
        std: init_std,
        lr_mean: cfg.lr_mean,
        lr_logstd: cfg.lr_logstd,
    };
    let mut rec = Recorder::new(cost, meter);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let n = cfg.population;

    'outer: while rec.remaining() >= n as u64 {
        let mut samples = DenseMatrix::zeros(n, d);
        let mut fvals = vec![0.0; n];
        for i in 0..n {
            let mut x: Vec<f64> = (0..d)
                .map(|j| state.mean[j] + state.std[j] * std_normal.sample(rng))
                .collect();
            domain.clamp(&mut x);
            samples.row_mut(i).copy_from_slice(&x);
            match rec.eval(&x) {
                Ok(v) => fvals[i] = v,
                Err(_) => break 'outer,
            }
        }
        rec.checkpoint();

        let (g_mean, g_logstd) = nes_gradient(&samples, &fvals, &state).unwrap();
        let fbar = fvals.iter().sum::<f64>() / n as f64;
        let fstd = (fvals.iter().map(|f| (f - fbar).powi(2)).sum::<f64>() / n as f64).sqrt();
        if fstd < 1e-300 {
            continue;
        }
        for j in 0..d {
            state.mean[j] -= state.lr_mean * state.std[j] * state.std[j] * g_mean[j] / fstd;
            let logstd = state.std[j].ln() - state.lr_logstd * g_logstd[j] / fstd;
            state.std[j] = logstd.exp().clamp(1e-12, 1e12);
        }
        // Keep the distribution centered on the search box.
        domain.clamp(&mut state.mean);
    }
    rec.into_record("nes", "", seed)
}
