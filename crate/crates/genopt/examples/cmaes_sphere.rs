//! Simple CMA-ES on the sphere: rank-mu covariance update with step-size
//! control, started from the domain center.

use genopt::baselines::cmaes_run;
use genopt::objectives::{make_objective, BudgetMeter, ObjectiveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dim: usize = args.get(1).map_or(10, |s| s.parse().unwrap());
    let budget: u64 = args.get(2).map_or(10_000, |s| s.parse().unwrap());
    let seed: u64 = args.get(3).map_or(7, |s| s.parse().unwrap());

    let obj = make_objective(ObjectiveKind::Sphere, dim, vec![0.5; dim]).unwrap();
    let sigma = 0.25 * obj.domain.width(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meter = BudgetMeter::new(budget);
    let rec = cmaes_run(&obj, 20, &mut meter, vec![0.0; dim], sigma, &mut rng, seed);
    for (evals, best) in rec.trace.iter().step_by(rec.trace.len().div_ceil(20).max(1)) {
        println!("evals {evals:>7}  best {best:.3e}");
    }
    println!("final best {:.3e} after {} evals", rec.best_value, meter.used());
}
