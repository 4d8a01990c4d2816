//! The full generative-search optimization loop: per iteration, sample
//! annealed noise, generate a population, query value and gradient at every
//! point, backpropagate the population objective, and apply one Adam update.

use rand::Rng;

use crate::generator::{adam_step, init_generator, sample_noise, AdamState, GeneratorConfig};
use crate::linalg::DenseMatrix;
use crate::objectives::BudgetMeter;
use crate::run::{CostFunction, Recorder, RunRecord};

#[derive(Debug, Clone)]
pub struct GennesConfig {
    /// Population size N.
    pub population: usize,
    /// Maximum number of iterations T.
    pub max_iterations: u64,
    /// Adam learning rate.
    pub learning_rate: f64,
    pub generator: GeneratorConfig,
    pub seed: u64,
}

impl GennesConfig {
    pub fn new(generator: GeneratorConfig, seed: u64) -> Self {
        GennesConfig {
            population: 20,
            max_iterations: u64::MAX,
            // Small enough that the output layer cannot saturate before the
            // population mean has crossed the domain.
            learning_rate: 3e-4,
            generator,
            seed,
        }
    }
}

/// Runs the loop until the iteration cap or the budget is exhausted,
/// whichever comes first. The incumbent is tracked over every queried point.
pub fn run_gennes<F: CostFunction + ?Sized, R: Rng>(
    cost: &F,
    cfg: &GennesConfig,
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> RunRecord {
    assert!(cfg.population >= 1);
    assert!(cfg.max_iterations >= 1);
    let n = cfg.population;
    let per_iter = n as u64 * cost.grad_cost();
    assert!(meter.remaining() >= per_iter, "budget smaller than one population");

    let mut net = init_generator(&cfg.generator, rng);
    let mut adam = AdamState::new(&net);
    let mut rec = Recorder::new(cost, meter);
    let d = cost.dim();

    for t in 0..cfg.max_iterations {
        if rec.remaining() < per_iter {
            break;
        }
        let u = sample_noise(&cfg.generator, rng, t, n);
        let x = net.forward(&u);
        let mut grad_f = DenseMatrix::zeros(n, d);
        let mut exhausted = false;
        for i in 0..n {
            match rec.eval_grad(x.row(i)) {
                Ok((_, g)) => grad_f.row_mut(i).copy_from_slice(&g),
                Err(_) => {
                    exhausted = true;
                    break;
                }
            }
        }
        rec.checkpoint();
        if exhausted {
            break;
        }
        let grad_theta = net.backward(&u, &grad_f).expect("shapes fixed per run");
        adam_step(&mut net, &mut adam, &grad_theta, cfg.learning_rate);
    }

    rec.into_record("gennes", "", cfg.seed)
}
