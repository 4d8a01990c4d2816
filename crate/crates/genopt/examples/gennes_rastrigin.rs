//! Generative search on shifted Rastrigin, printing per-iteration population
//! statistics. Optional args: dim, budget, learning rate, anneal alpha.

use genopt::generator::GeneratorConfig;
use genopt::gennes::{run_gennes, GennesConfig};
use genopt::objectives::{make_objective, sample_shift, BudgetMeter, ObjectiveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dim: usize = args.get(1).map_or(10, |s| s.parse().unwrap());
    let budget: u64 = args.get(2).map_or(10_000, |s| s.parse().unwrap());
    let lr: f64 = args.get(3).map_or(3e-4, |s| s.parse().unwrap());
    let alpha: f64 = args.get(4).map_or(0.99, |s| s.parse().unwrap());
    let seed: u64 = args.get(5).map_or(7, |s| s.parse().unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = sample_shift(&mut rng, ObjectiveKind::Rastrigin, dim, 0.0);
    let obj = make_objective(ObjectiveKind::Rastrigin, dim, shift).unwrap();

    let mut gen = GeneratorConfig::for_domain(&obj.domain);
    gen.anneal_alpha = alpha;
    let mut cfg = GennesConfig::new(gen, seed);
    cfg.learning_rate = lr;

    let mut meter = BudgetMeter::new(budget);
    let rec = run_gennes(&obj, &cfg, &mut meter, &mut rng);
    for (evals, best) in rec.trace.iter().step_by(25) {
        println!("evals {evals:>7}  best {best:.4}");
    }
    println!("final best {:.6} after {} evals", rec.best_value, meter.used());
}
