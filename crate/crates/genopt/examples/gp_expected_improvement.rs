//! Fits a Matérn-5/2 ARD Gaussian process to noiseless samples of a 2-D
//! function, then reports the posterior and Expected Improvement on a line
//! through the domain.

use genopt::gp::{expected_improvement, gp_fit, gp_posterior, FitConfig};
use genopt::linalg::DenseMatrix;
use genopt::objectives::{make_objective, ObjectiveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(40, |s| s.parse().unwrap());
    let seed: u64 = args.get(2).map_or(7, |s| s.parse().unwrap());

    let obj = make_objective(ObjectiveKind::Styblinski, 2, vec![0.0, 0.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| obj.domain.sample_uniform(&mut rng)).collect();
    let f: Vec<f64> = rows.iter().map(|x| obj.value(x)).collect();
    let x = DenseMatrix::from_rows(&rows);

    let model = gp_fit(&x, &f, &FitConfig::new(obj.domain.clone())).unwrap();
    let incumbent = model.incumbent();
    println!("incumbent {:.4} at {:?}", incumbent.f_tilde, incumbent.location);

    for i in 0..=10 {
        let t = obj.domain.lo[0] + i as f64 / 10.0 * obj.domain.width(0);
        let p = [t, 0.0];
        let (mean, var) = gp_posterior(&model, &p);
        let (ei, _) = expected_improvement(&model, &p, &incumbent);
        println!(
            "x ({t:>6.2}, 0.00)  true {:>9.4}  mean {mean:>9.4}  std {:>8.4}  ei {ei:>10.4e}",
            obj.value(&p),
            var.sqrt()
        );
    }
}
