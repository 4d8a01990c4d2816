//! Box-constrained quasi-Newton descent (two-loop recursion, gradient
//! projection onto the box, backtracking Armijo line search) and its
//! multi-start wrapper.

use std::collections::VecDeque;

use rand::Rng;

use crate::objectives::BudgetMeter;
use crate::run::{CostFunction, Recorder, RunRecord};

#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    /// Number of curvature pairs kept.
    pub memory: usize,
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Stop when the max-magnitude coordinate of the projected gradient
    /// drops below this.
    pub tolerance: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 200,
            tolerance: 1e-5,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 30,
        }
    }
}

/// Why a single descent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsOutcome {
    Converged,
    IterationCap,
    LineSearchFailure,
    BudgetExhausted,
}

fn project(domain: &crate::objectives::Domain, x: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    domain.clamp(&mut p);
    p
}

/// Max-magnitude coordinate of `x - P(x - g)`, the projected gradient.
fn projected_grad_norm(domain: &crate::objectives::Domain, x: &[f64], g: &[f64]) -> f64 {
    let step: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    let p = project(domain, &step);
    x.iter()
        .zip(&p)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
}

/// One box-constrained descent from `x0`. Every line-search probe costs one
/// evaluation unit through the recorder.
pub fn lbfgs_minimize<F: CostFunction + ?Sized>(
    rec: &mut Recorder<'_, F>,
    x0: &[f64],
    cfg: &LbfgsConfig,
) -> (Vec<f64>, f64, LbfgsOutcome) {
    let domain = rec.cost().domain().clone();
    let mut x = project(&domain, x0);
    let (mut f, mut g) = match rec.eval_grad(&x) {
        Ok(v) => v,
        Err(_) => return (x, f64::INFINITY, LbfgsOutcome::BudgetExhausted),
    };
    rec.checkpoint();

    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();

    for _ in 0..cfg.max_iters {
        if projected_grad_norm(&domain, &x, &g) < cfg.tolerance {
            return (x, f, LbfgsOutcome::Converged);
        }

        let mut dir = two_loop(&g, &s_hist, &y_hist);
        let descent: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if descent >= 0.0 {
            // Not a descent direction; fall back to steepest descent.
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let trial: Vec<f64> = x
                .iter()
                .zip(&dir)
                .map(|(xi, di)| xi + alpha * di)
                .collect();
            let trial = project(&domain, &trial);
            let gstep: f64 = g
                .iter()
                .zip(trial.iter().zip(&x))
                .map(|(gi, (ti, xi))| gi * (ti - xi))
                .sum();
            if gstep >= 0.0 {
                // Projection removed all descent at this step length.
                alpha *= cfg.backtrack_factor;
                continue;
            }
            let (ft, gt) = match rec.eval_grad(&trial) {
                Ok(v) => v,
                Err(_) => {
                    rec.checkpoint();
                    return (x, f, LbfgsOutcome::BudgetExhausted);
                }
            };
            rec.checkpoint();
            if ft <= f + cfg.armijo_c1 * gstep {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha *= cfg.backtrack_factor;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            return (x, f, LbfgsOutcome::LineSearchFailure);
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-10 {
            if s_hist.len() == cfg.memory {
                s_hist.pop_front();
                y_hist.pop_front();
            }
            s_hist.push_back(s);
            y_hist.push_back(y);
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    (x, f, LbfgsOutcome::IterationCap)
}

fn two_loop(g: &[f64], s_hist: &VecDeque<Vec<f64>>, y_hist: &VecDeque<Vec<f64>>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let k = s_hist.len();
    let mut alphas = vec![0.0; k];
    let mut rhos = vec![0.0; k];
    for i in (0..k).rev() {
        let sy: f64 = s_hist[i].iter().zip(&y_hist[i]).map(|(a, b)| a * b).sum();
        rhos[i] = 1.0 / sy;
        let a = rhos[i]
            * s_hist[i]
                .iter()
                .zip(&q)
                .map(|(si, qi)| si * qi)
                .sum::<f64>();
        alphas[i] = a;
        for (qi, yi) in q.iter_mut().zip(&y_hist[i]) {
            *qi -= a * yi;
        }
    }
    if k > 0 {
        let last = k - 1;
        let sy: f64 = s_hist[last]
            .iter()
            .zip(&y_hist[last])
            .map(|(a, b)| a * b)
            .sum();
        let yy: f64 = y_hist[last].iter().map(|v| v * v).sum();
        let gamma = sy / yy;
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for i in 0..k {
        let b = rhos[i]
            * y_hist[i]
                .iter()
                .zip(&q)
                .map(|(yi, qi)| yi * qi)
                .sum::<f64>();
        for (qi, si) in q.iter_mut().zip(&s_hist[i]) {
            *qi += (alphas[i] - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Repeats descents from uniform random starts until the budget runs out.
pub fn multistart_lbfgs<F: CostFunction + ?Sized, R: Rng>(
    cost: &F,
    meter: &mut BudgetMeter,
    cfg: &LbfgsConfig,
    rng: &mut R,
    seed: u64,
) -> RunRecord {
    let mut rec = Recorder::new(cost, meter);
    let domain = cost.domain().clone();
    while rec.remaining() >= cost.grad_cost() {
        let x0 = domain.sample_uniform(rng);
        let (_, _, outcome) = lbfgs_minimize(&mut rec, &x0, cfg);
        if outcome == LbfgsOutcome::BudgetExhausted {
            break;
        }
    }
    rec.into_record("lbfgs", "", seed)
}
