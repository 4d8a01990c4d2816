//! Gaussian natural evolution strategy on the sphere: score-function gradient
//! descent on the mean and per-coordinate log-std.

use genopt::baselines::{nes_run, NesConfig};
use genopt::objectives::{make_objective, BudgetMeter, ObjectiveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let dim: usize = args.get(1).map_or(5, |s| s.parse().unwrap());
    let budget: u64 = args.get(2).map_or(20_000, |s| s.parse().unwrap());
    let seed: u64 = args.get(3).map_or(7, |s| s.parse().unwrap());

    let obj = make_objective(ObjectiveKind::Sphere, dim, vec![0.5; dim]).unwrap();
    let std0 = 0.25 * obj.domain.width(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meter = BudgetMeter::new(budget);
    let rec = nes_run(
        &obj,
        &NesConfig::default(),
        &mut meter,
        vec![0.0; dim],
        vec![std0; dim],
        &mut rng,
        seed,
    );
    for (evals, best) in rec.trace.iter().step_by(rec.trace.len().div_ceil(20).max(1)) {
        println!("evals {evals:>7}  best {best:.3e}");
    }
    println!("final best {:.3e} after {} evals", rec.best_value, meter.used());
}
