//! Bayesian-optimization outer loop with a pluggable inner acquisition
//! maximizer: either the generative-search loop or multi-start L-BFGS, both
//! run on the negated Expected Improvement. Tracks objective evaluations and
//! acquisition queries separately.

use rand::Rng;

use crate::baselines::LbfgsConfig;
use crate::generator::GeneratorConfig;
use crate::gennes::{run_gennes, GennesConfig};
use crate::gp::{expected_improvement, gp_build, gp_fit, FitConfig, GpModel, Incumbent, KernelParams};
use crate::linalg::DenseMatrix;
use crate::objectives::{BudgetMeter, Domain};
use crate::run::CostFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerMaximizer {
    Gennes,
    MultistartLbfgs,
}

impl InnerMaximizer {
    pub fn name(&self) -> &'static str {
        match self {
            InnerMaximizer::Gennes => "gennes",
            InnerMaximizer::MultistartLbfgs => "lbfgs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gennes" => Some(InnerMaximizer::Gennes),
            "lbfgs" | "multistart_lbfgs" => Some(InnerMaximizer::MultistartLbfgs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoConfig {
    /// Uniform observations before the loop starts.
    pub init_points: usize,
    pub outer_iterations: usize,
    pub inner_maximizer: InnerMaximizer,
    /// Acquisition-query cap per outer step.
    pub inner_budget: u64,
    pub gennes_population: usize,
    pub gennes_iterations: u64,
    pub lbfgs_starts: usize,
    /// Refit hyperparameters every this many new observations; the kernel
    /// matrix itself is refactorized every observation.
    pub refit_every: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            init_points: 100,
            outer_iterations: 30,
            inner_maximizer: InnerMaximizer::Gennes,
            inner_budget: 10_000,
            gennes_population: 10,
            gennes_iterations: 30,
            lbfgs_starts: 100,
            refit_every: 5,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) {
        assert!(self.init_points >= 1);
        assert!(self.outer_iterations >= 1);
        assert!(self.inner_budget >= self.gennes_population as u64);
        assert!(self.refit_every >= 1);
        assert!(self.gennes_population >= 1 && self.lbfgs_starts >= 1);
    }
}

/// One row per outer step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoStep {
    pub objective_evals: u64,
    /// Cumulative acquisition queries across all steps so far.
    pub acq_queries: u64,
    pub incumbent: f64,
}

#[derive(Debug, Clone)]
pub struct BoRecord {
    /// Step 0 is the state right after initialization (zero acquisition
    /// queries); steps 1..=outer_iterations follow.
    pub steps: Vec<BoStep>,
    pub best_point: Vec<f64>,
    pub best_value: f64,
}

/// Minimizing this is maximizing Expected Improvement.
struct NegEi<'a> {
    model: &'a GpModel,
    incumbent: &'a Incumbent,
    domain: &'a Domain,
}

impl CostFunction for NegEi<'_> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }

    fn domain(&self) -> &Domain {
        self.domain
    }

    fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (ei, grad) = expected_improvement(self.model, x, self.incumbent);
        (-ei, grad.iter().map(|v| -v).collect())
    }
}

/// Runs the chosen inner method on the negated acquisition and returns the
/// best point over every query made, plus the exact query count.
pub fn maximize_acquisition<R: Rng>(
    model: &GpModel,
    incumbent: &Incumbent,
    cfg: &BoConfig,
    rng: &mut R,
) -> (Vec<f64>, u64) {
    let domain = model.domain().clone();
    let neg_ei = NegEi {
        model,
        incumbent,
        domain: &domain,
    };
    let mut meter = BudgetMeter::new(cfg.inner_budget);
    let rec = match cfg.inner_maximizer {
        InnerMaximizer::Gennes => {
            let mut gen = GeneratorConfig::for_domain(&domain);
            gen.anneal_alpha = 0.99;
            let mut gcfg = GennesConfig::new(gen, 0);
            gcfg.population = cfg.gennes_population;
            gcfg.max_iterations = cfg.gennes_iterations;
            run_gennes(&neg_ei, &gcfg, &mut meter, rng)
        }
        InnerMaximizer::MultistartLbfgs => {
            let mut lcfg = LbfgsConfig::default();
            // Per-start iterations bounded so the start count dominates.
            lcfg.max_iters = 100;
            run_capped_lbfgs(&neg_ei, &lcfg, cfg.lbfgs_starts, &mut meter, rng)
        }
    };
    let x_star = if rec.best_point.is_empty() {
        domain.sample_uniform(rng)
    } else {
        rec.best_point
    };
    (x_star, meter.used())
}

fn run_capped_lbfgs<F: CostFunction + ?Sized, R: Rng>(
    cost: &F,
    cfg: &LbfgsConfig,
    starts: usize,
    meter: &mut BudgetMeter,
    rng: &mut R,
) -> crate::run::RunRecord {
    use crate::baselines::lbfgs_minimize;
    use crate::run::Recorder;
    let mut rec = Recorder::new(cost, meter);
    let domain = cost.domain().clone();
    for _ in 0..starts {
        if rec.remaining() < cost.grad_cost() {
            break;
        }
        let x0 = domain.sample_uniform(rng);
        lbfgs_minimize(&mut rec, &x0, cfg);
    }
    rec.into_record("lbfgs", "", 0)
}

/// The full loop: uniform initialization, then fit -> maximize acquisition ->
/// evaluate -> append, for `outer_iterations` steps. Deterministic under the
/// caller's seeded generator.
pub fn run_bo<F: CostFunction + ?Sized, R: Rng>(cost: &F, cfg: &BoConfig, rng: &mut R) -> BoRecord {
    cfg.validate();
    let domain = cost.domain().clone();
    let d = domain.dim();
    let fit_cfg = FitConfig::new(domain.clone());

    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(cfg.init_points + cfg.outer_iterations);
    let mut fs: Vec<f64> = Vec::with_capacity(xs.capacity());
    for _ in 0..cfg.init_points {
        let draw = domain.sample_uniform(rng);
        let x = fresh_point(&domain, &xs, rng, draw);
        let f = cost.eval(&x);
        xs.push(x);
        fs.push(f);
    }

    let mut steps = Vec::with_capacity(cfg.outer_iterations + 1);
    let mut acq_total = 0u64;
    steps.push(BoStep {
        objective_evals: cfg.init_points as u64,
        acq_queries: 0,
        incumbent: min_of(&fs),
    });

    let mut cached: Option<KernelParams> = None;
    for step in 0..cfg.outer_iterations {
        let x_mat = DenseMatrix::from_rows(&xs);
        let model = if step % cfg.refit_every == 0 || cached.is_none() {
            let m = gp_fit(&x_mat, &fs, &fit_cfg).expect("distinct points by construction");
            cached = Some(m.params.clone());
            m
        } else {
            gp_build(&x_mat, &fs, cached.clone().unwrap(), &fit_cfg)
                .expect("distinct points by construction")
        };
        let incumbent = model.incumbent();
        let (x_star, queries) = maximize_acquisition(&model, &incumbent, cfg, rng);
        acq_total += queries;

        let x_star = fresh_point(&domain, &xs, rng, x_star);
        let f = cost.eval(&x_star);
        xs.push(x_star);
        fs.push(f);
        steps.push(BoStep {
            objective_evals: (cfg.init_points + step + 1) as u64,
            acq_queries: acq_total,
            incumbent: min_of(&fs),
        });
    }

    let (best_idx, best_value) = fs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &v)| (i, v))
        .expect("non-empty history");
    let _ = d;
    BoRecord {
        steps,
        best_point: xs[best_idx].clone(),
        best_value,
    }
}

fn min_of(fs: &[f64]) -> f64 {
    fs.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// A noiseless model cannot absorb duplicate rows; nudge repeats by 1e-6 of
/// the domain width until the point is distinct.
fn fresh_point<R: Rng>(
    domain: &Domain,
    existing: &[Vec<f64>],
    rng: &mut R,
    mut x: Vec<f64>,
) -> Vec<f64> {
    let is_dup = |x: &[f64], existing: &[Vec<f64>]| {
        existing.iter().any(|row| {
            row.iter()
                .zip(x)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
                < 1e-10
        })
    };
    while is_dup(&x, existing) {
        for j in 0..x.len() {
            x[j] += 1e-6 * domain.width(j) * rng.random_range(-1.0..1.0);
        }
        domain.clamp(&mut x);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_objective, ObjectiveKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::cell::RefCell;

    fn two_point_model() -> GpModel {
        let x = DenseMatrix::from_rows(&[vec![0.3], vec![0.7]]);
        let cfg = FitConfig::new(Domain::uniform(1, 0.0, 1.0));
        let params = KernelParams {
            signal_variance: 1.0,
            lengthscales: vec![0.2],
        };
        gp_build(&x, &[1.0, 0.5], params, &cfg).unwrap()
    }

    #[test]
    fn inner_methods_match_grid_argmax() {
        let model = two_point_model();
        let incumbent = model.incumbent();
        // Dense grid oracle over the unit interval.
        let mut grid_best = (f64::NEG_INFINITY, 0.0);
        for i in 0..10_000 {
            let x = i as f64 / 9_999.0;
            let (ei, _) = expected_improvement(&model, &[x], &incumbent);
            if ei > grid_best.0 {
                grid_best = (ei, x);
            }
        }
        for method in [InnerMaximizer::Gennes, InnerMaximizer::MultistartLbfgs] {
            let cfg = BoConfig {
                inner_maximizer: method,
                inner_budget: 10_000,
                gennes_population: 40,
                gennes_iterations: 150,
                ..BoConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let (x_star, used) = maximize_acquisition(&model, &incumbent, &cfg, &mut rng);
            assert!(used <= cfg.inner_budget);
            assert!(
                (x_star[0] - grid_best.1).abs() < 1e-2,
                "{:?}: {} vs grid {}",
                method,
                x_star[0],
                grid_best.1
            );
        }
    }

    struct Logged<F>(F, RefCell<Vec<f64>>);
    impl<F: CostFunction> CostFunction for Logged<F> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn domain(&self) -> &Domain {
            self.0.domain()
        }
        fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
            let out = self.0.eval_grad(x);
            self.1.borrow_mut().push(out.0);
            out
        }
    }

    fn small_cfg(method: InnerMaximizer) -> BoConfig {
        BoConfig {
            init_points: 10,
            outer_iterations: 5,
            inner_maximizer: method,
            inner_budget: 300,
            lbfgs_starts: 10,
            ..BoConfig::default()
        }
    }

    #[test]
    fn counters_and_incumbent_contracts() {
        let obj = make_objective(ObjectiveKind::Sphere, 2, vec![1.0, -1.0]).unwrap();
        for method in [InnerMaximizer::Gennes, InnerMaximizer::MultistartLbfgs] {
            let logged = Logged(obj.clone(), RefCell::new(Vec::new()));
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let rec = run_bo(&logged, &small_cfg(method), &mut rng);
            assert_eq!(rec.steps.len(), 6);
            for (i, w) in rec.steps.windows(2).enumerate() {
                assert_eq!(w[1].objective_evals, w[0].objective_evals + 1, "step {i}");
                assert!(w[1].acq_queries > w[0].acq_queries);
                assert!(w[1].incumbent <= w[0].incumbent);
            }
            // Incumbent is the exact min over every objective query made.
            let log = logged.1.borrow();
            let true_min = log.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(rec.steps.last().unwrap().incumbent, true_min);
            assert_eq!(rec.best_value, true_min);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let obj = make_objective(ObjectiveKind::Alpine1, 3, vec![0.5; 3]).unwrap();
        for method in [InnerMaximizer::Gennes, InnerMaximizer::MultistartLbfgs] {
            let run = || {
                let mut rng = ChaCha8Rng::seed_from_u64(11);
                run_bo(&obj, &small_cfg(method), &mut rng)
            };
            let a = run();
            let b = run();
            assert_eq!(a.steps, b.steps);
            assert_eq!(a.best_point, b.best_point);
        }
    }

    #[test]
    fn duplicate_queries_get_perturbed() {
        let domain = Domain::uniform(2, 0.0, 1.0);
        let existing = vec![vec![0.5, 0.5]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = fresh_point(&domain, &existing, &mut rng, vec![0.5, 0.5]);
        assert!(x != vec![0.5, 0.5]);
        let dist = x
            .iter()
            .zip(&existing[0])
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dist >= 1e-10 && dist < 1e-4);
        assert!(domain.contains(&x));
    }
}
