//! Box-constrained multistart L-BFGS on shifted Rastrigin. Each descent
//! starts from a fresh uniform point until the evaluation budget runs out.

use genopt::baselines::{multistart_lbfgs, LbfgsConfig};
use genopt::objectives::{make_objective, sample_shift, BudgetMeter, ObjectiveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dim: usize = args.get(1).map_or(10, |s| s.parse().unwrap());
    let budget: u64 = args.get(2).map_or(10_000, |s| s.parse().unwrap());
    let seed: u64 = args.get(3).map_or(7, |s| s.parse().unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = sample_shift(&mut rng, ObjectiveKind::Rastrigin, dim, 0.0);
    let obj = make_objective(ObjectiveKind::Rastrigin, dim, shift).unwrap();

    let mut meter = BudgetMeter::new(budget);
    let rec = multistart_lbfgs(&obj, &mut meter, &LbfgsConfig::default(), &mut rng, seed);
    for (evals, best) in rec.trace.iter().step_by(rec.trace.len().div_ceil(20).max(1)) {
        println!("evals {evals:>7}  best {best:.6}");
    }
    println!("final best {:.6} after {} evals", rec.best_value, meter.used());
}
