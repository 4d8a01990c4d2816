//! Bayesian optimization on shifted Alpine1, comparing both inner
//! acquisition maximizers at the same acquisition-query budget per step.

use genopt::bo::{run_bo, BoConfig, InnerMaximizer};
use genopt::objectives::{make_objective, sample_shift, ObjectiveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dim: usize = args.get(1).map_or(5, |s| s.parse().unwrap());
    let steps: usize = args.get(2).map_or(15, |s| s.parse().unwrap());
    let seed: u64 = args.get(3).map_or(7, |s| s.parse().unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = sample_shift(&mut rng, ObjectiveKind::Alpine1, dim, 0.0);
    let obj = make_objective(ObjectiveKind::Alpine1, dim, shift).unwrap();

    for inner in [InnerMaximizer::Gennes, InnerMaximizer::MultistartLbfgs] {
        let cfg = BoConfig {
            init_points: 30,
            outer_iterations: steps,
            inner_maximizer: inner,
            ..BoConfig::default()
        };
        // Distinct stream from the shift draw, shared by both inner methods.
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let rec = run_bo(&obj, &cfg, &mut rng);
        println!("inner = {}", inner.name());
        for s in &rec.steps {
            println!(
                "  evals {:>4}  acq queries {:>7}  incumbent {:.6}",
                s.objective_evals, s.acq_queries, s.incumbent
            );
        }
        println!("  best {:.6}", rec.best_value);
    }
}
