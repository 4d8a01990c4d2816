//! Run bookkeeping shared by all optimizers: the cost-function abstraction,
//! budget-metered evaluation with best-so-far tracking, and the per-run trace.

use crate::objectives::{eval_value, eval_with_grad, BudgetExhausted, BudgetMeter, Domain, Objective};

/// A box-constrained differentiable cost to minimize. Implemented by the
/// benchmark objectives and by the negated acquisition function in the
/// Bayesian-optimization inner loop.
pub trait CostFunction {
    fn dim(&self) -> usize;
    fn domain(&self) -> &Domain;
    /// Value and gradient at one point.
    fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
    /// Value only. Defaults to discarding the gradient.
    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_grad(x).0
    }
    /// Budget units charged by one joint (value, gradient) query.
    fn grad_cost(&self) -> u64 {
        1
    }
}

impl CostFunction for Objective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.value_grad(x)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.value(x)
    }

    fn grad_cost(&self) -> u64 {
        self.grad_cost
    }
}

/// Per-run trace: (cumulative evaluation count, best value so far) pairs
/// plus the best point found.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub algorithm: String,
    pub objective: String,
    pub seed: u64,
    pub trace: Vec<(u64, f64)>,
    pub best_point: Vec<f64>,
    pub best_value: f64,
}

/// Wraps a cost function and a budget meter; every query goes through here so
/// accounting and incumbent tracking stay exact. Also keeps a log of every
/// value queried, which tests use to cross-check the incumbent.
pub struct Recorder<'a, F: CostFunction + ?Sized> {
    f: &'a F,
    meter: &'a mut BudgetMeter,
    best_value: f64,
    best_point: Vec<f64>,
    trace: Vec<(u64, f64)>,
    query_log: Vec<f64>,
}

impl<'a, F: CostFunction + ?Sized> Recorder<'a, F> {
    pub fn new(f: &'a F, meter: &'a mut BudgetMeter) -> Self {
        Recorder {
            f,
            meter,
            best_value: f64::INFINITY,
            best_point: Vec::new(),
            trace: Vec::new(),
            query_log: Vec::new(),
        }
    }

    pub fn cost(&self) -> &F {
        self.f
    }

    pub fn used(&self) -> u64 {
        self.meter.used()
    }

    pub fn remaining(&self) -> u64 {
        self.meter.remaining()
    }

    pub fn best_value(&self) -> f64 {
        self.best_value
    }

    pub fn best_point(&self) -> &[f64] {
        &self.best_point
    }

    pub fn query_log(&self) -> &[f64] {
        &self.query_log
    }

    fn observe(&mut self, x: &[f64], v: f64) {
        assert!(
            v.is_finite(),
            "non-finite objective value {v} at {x:?}"
        );
        self.query_log.push(v);
        if v < self.best_value {
            self.best_value = v;
            self.best_point = x.to_vec();
        }
    }

    /// Joint query, charging `grad_cost` units.
    pub fn eval_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), BudgetExhausted> {
        self.meter.try_charge(self.f.grad_cost())?;
        let (v, g) = self.f.eval_grad(x);
        self.observe(x, v);
        Ok((v, g))
    }

    /// Zero-order query, charging 1 unit.
    pub fn eval(&mut self, x: &[f64]) -> Result<f64, BudgetExhausted> {
        self.meter.try_charge(1)?;
        let v = self.f.eval(x);
        self.observe(x, v);
        Ok(v)
    }

    /// Appends (evaluations used, best so far) to the trace. Skips duplicate
    /// evaluation counts so the trace stays strictly increasing.
    pub fn checkpoint(&mut self) {
        let used = self.meter.used();
        if used == 0 {
            return;
        }
        match self.trace.last_mut() {
            Some(last) if last.0 == used => last.1 = self.best_value,
            _ => self.trace.push((used, self.best_value)),
        }
    }

    pub fn into_record(mut self, algorithm: &str, objective: &str, seed: u64) -> RunRecord {
        self.checkpoint();
        RunRecord {
            algorithm: algorithm.to_string(),
            objective: objective.to_string(),
            seed,
            trace: self.trace,
            best_point: self.best_point,
            best_value: self.best_value,
        }
    }
}

/// Convenience wrappers matching the budget-charging semantics of the
/// objectives module when no recording is needed.
pub fn metered_value(
    obj: &Objective,
    x: &[f64],
    meter: &mut BudgetMeter,
) -> Result<f64, BudgetExhausted> {
    eval_value(obj, x, meter)
}

pub fn metered_value_grad(
    obj: &Objective,
    x: &[f64],
    meter: &mut BudgetMeter,
) -> Result<(f64, Vec<f64>), BudgetExhausted> {
    eval_with_grad(obj, x, meter)
}
