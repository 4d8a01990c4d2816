//! Benchmark objectives with analytic gradients, box domains, random shifts
//! of the global minimum, and evaluation-budget accounting.
//!
//! Every objective is normalized so its global minimum value is exactly 0;
//! the Styblinski and Schwefel additive constants are computed once at
//! startup by 1-D golden-section search rather than hard-coded.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("shift coordinate {index} = {value} outside domain [{lo}, {hi}]")]
    ShiftOutOfDomain {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("point has length {got}, objective dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Evaluation budget exhausted; the run should terminate with its best-so-far.
#[derive(Debug, Clone, Copy, Error)]
#[error("evaluation budget exhausted ({used}/{limit})")]
pub struct BudgetExhausted {
    pub used: u64,
    pub limit: u64,
}

/// Per-coordinate box `[lo, hi]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        assert!(lo < hi);
        Domain {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (&lo, &hi)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| 0.5 * (lo + hi))
            .collect()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&lo, &hi)| rng.random_range(lo..hi))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    Rastrigin,
    Ackley,
    Styblinski,
    Schwefel,
    Alpine1,
    Sphere,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 6] = [
        ObjectiveKind::Rastrigin,
        ObjectiveKind::Ackley,
        ObjectiveKind::Styblinski,
        ObjectiveKind::Schwefel,
        ObjectiveKind::Alpine1,
        ObjectiveKind::Sphere,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Rastrigin => "rastrigin",
            ObjectiveKind::Ackley => "ackley",
            ObjectiveKind::Styblinski => "styblinski",
            ObjectiveKind::Schwefel => "schwefel",
            ObjectiveKind::Alpine1 => "alpine1",
            ObjectiveKind::Sphere => "sphere",
        }
    }

    pub fn parse(s: &str) -> Option<ObjectiveKind> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }

    pub fn domain(&self, dim: usize) -> Domain {
        let (lo, hi) = match self {
            ObjectiveKind::Rastrigin => (-3.0, 3.0),
            ObjectiveKind::Ackley => (-10.0, 10.0),
            ObjectiveKind::Styblinski => (-10.0, 10.0),
            ObjectiveKind::Schwefel => (-500.0, 500.0),
            ObjectiveKind::Alpine1 => (-10.0, 10.0),
            ObjectiveKind::Sphere => (-5.0, 5.0),
        };
        Domain::uniform(dim, lo, hi)
    }

    /// Per-coordinate location of the unshifted global minimum.
    pub fn unshifted_optimizer_coord(&self) -> f64 {
        match self {
            ObjectiveKind::Styblinski => styblinski_constants().0,
            ObjectiveKind::Schwefel => schwefel_constants().0,
            _ => 0.0,
        }
    }
}

/// Which Alpine1 to evaluate: the absolute value outside the sum, or the
/// more common sum-of-absolute-values form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alpine1Variant {
    #[default]
    AbsOutsideSum,
    SumOfAbs,
}

impl Alpine1Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "abs_outside_sum" => Some(Alpine1Variant::AbsOutsideSum),
            "sum_of_abs" => Some(Alpine1Variant::SumOfAbs),
            _ => None,
        }
    }
}

/// A benchmark function: evaluator, analytic gradient, box domain, shift of
/// the global minimum, and known minimum value (0 for all).
#[derive(Debug, Clone)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub dim: usize,
    pub domain: Domain,
    pub shift: Vec<f64>,
    pub f_star: f64,
    pub alpine1_variant: Alpine1Variant,
    /// Budget units charged per joint (f, grad) query. Default 1: a gradient
    /// evaluation counts the same as a function evaluation.
    pub grad_cost: u64,
}

pub fn make_objective(
    kind: ObjectiveKind,
    dim: usize,
    shift: Vec<f64>,
) -> Result<Objective, ObjectiveError> {
    assert!(dim >= 1);
    assert_eq!(shift.len(), dim);
    let domain = kind.domain(dim);
    for (i, &s) in shift.iter().enumerate() {
        if s < domain.lo[i] || s > domain.hi[i] {
            return Err(ObjectiveError::ShiftOutOfDomain {
                index: i,
                value: s,
                lo: domain.lo[i],
                hi: domain.hi[i],
            });
        }
    }
    Ok(Objective {
        kind,
        dim,
        domain,
        shift,
        f_star: 0.0,
        alpine1_variant: Alpine1Variant::default(),
        grad_cost: 1,
    })
}

impl Objective {
    pub fn with_alpine1_variant(mut self, v: Alpine1Variant) -> Self {
        self.alpine1_variant = v;
        self
    }

    pub fn with_grad_cost(mut self, cost: u64) -> Self {
        assert!(cost >= 1);
        self.grad_cost = cost;
        self
    }

    /// Location of the shifted global minimum. For Schwefel this may land
    /// outside the search box when the shift is large; the function itself is
    /// defined everywhere.
    pub fn optimizer_location(&self) -> Vec<f64> {
        let c = self.kind.unshifted_optimizer_coord();
        self.shift.iter().map(|&s| s + c).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ObjectiveError> {
        if x.len() != self.dim {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Objective value, budget-free. Prefer [`eval_value`] inside runs.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.check_dim(x).expect("dimension mismatch");
        let z: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        match self.kind {
            ObjectiveKind::Rastrigin => rastrigin(&z),
            ObjectiveKind::Ackley => ackley(&z),
            ObjectiveKind::Styblinski => styblinski(&z),
            ObjectiveKind::Schwefel => schwefel(&z),
            ObjectiveKind::Alpine1 => alpine1(&z, self.alpine1_variant),
            ObjectiveKind::Sphere => z.iter().map(|v| v * v).sum(),
        }
    }

    /// Objective value and analytic gradient, budget-free.
    pub fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.check_dim(x).expect("dimension mismatch");
        let z: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        match self.kind {
            ObjectiveKind::Rastrigin => (rastrigin(&z), rastrigin_grad(&z)),
            ObjectiveKind::Ackley => (ackley(&z), ackley_grad(&z)),
            ObjectiveKind::Styblinski => (styblinski(&z), styblinski_grad(&z)),
            ObjectiveKind::Schwefel => (schwefel(&z), schwefel_grad(&z)),
            ObjectiveKind::Alpine1 => alpine1_value_grad(&z, self.alpine1_variant),
            ObjectiveKind::Sphere => (
                z.iter().map(|v| v * v).sum(),
                z.iter().map(|v| 2.0 * v).collect(),
            ),
        }
    }
}

/// Counts evaluation units against a hard limit.
#[derive(Debug, Clone)]
pub struct BudgetMeter {
    used: u64,
    limit: u64,
}

impl BudgetMeter {
    pub fn new(limit: u64) -> Self {
        BudgetMeter { used: 0, limit }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.used
    }

    pub fn try_charge(&mut self, units: u64) -> Result<(), BudgetExhausted> {
        if self.used + units > self.limit {
            return Err(BudgetExhausted {
                used: self.used,
                limit: self.limit,
            });
        }
        self.used += units;
        Ok(())
    }
}

/// Joint (value, gradient) query at one point. Charges `grad_cost` units.
pub fn eval_with_grad(
    obj: &Objective,
    x: &[f64],
    meter: &mut BudgetMeter,
) -> Result<(f64, Vec<f64>), BudgetExhausted> {
    meter.try_charge(obj.grad_cost)?;
    Ok(obj.value_grad(x))
}

/// Zero-order query. Charges 1 unit.
pub fn eval_value(
    obj: &Objective,
    x: &[f64],
    meter: &mut BudgetMeter,
) -> Result<f64, BudgetExhausted> {
    meter.try_charge(1)?;
    Ok(obj.value(x))
}

/// Uniform shift over the domain shrunk by `margin` on each side.
pub fn sample_shift<R: Rng>(
    rng: &mut R,
    kind: ObjectiveKind,
    dim: usize,
    margin: f64,
) -> Vec<f64> {
    let domain = kind.domain(dim);
    assert!(margin >= 0.0);
    (0..dim)
        .map(|j| {
            let lo = domain.lo[j] + margin;
            let hi = domain.hi[j] - margin;
            assert!(lo <= hi, "margin exceeds half the domain width");
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        })
        .collect()
}

// --- formulas, applied to the already-shifted point z = x - shift ---

fn rastrigin(z: &[f64]) -> f64 {
    let d = z.len() as f64;
    10.0 * d
        + z.iter()
            .map(|&v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

fn rastrigin_grad(z: &[f64]) -> Vec<f64> {
    z.iter()
        .map(|&v| 2.0 * v + 20.0 * PI * (2.0 * PI * v).sin())
        .collect()
}

// BBOB form with cos(2 pi z); period-1 ripples give the dense local-minima
// field that makes restarted descent stall far from the optimum.
fn ackley(z: &[f64]) -> f64 {
    let d = z.len() as f64;
    let q = z.iter().map(|v| v * v).sum::<f64>() / d;
    let m = z.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    -20.0 * (-0.2 * q.sqrt()).exp() - m.exp() + 20.0 + E
}

fn ackley_grad(z: &[f64]) -> Vec<f64> {
    let d = z.len() as f64;
    let q = z.iter().map(|v| v * v).sum::<f64>() / d;
    let s = q.sqrt();
    let m = z.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    let em = m.exp();
    z.iter()
        .map(|&v| {
            // First term's gradient vanishes in the limit s -> 0.
            let t1 = if s > 1e-300 {
                4.0 * (-0.2 * s).exp() * v / (d * s)
            } else {
                0.0
            };
            t1 + em * 2.0 * PI * (2.0 * PI * v).sin() / d
        })
        .collect()
}

fn styblinski(z: &[f64]) -> f64 {
    let (_, offset) = *styblinski_constants();
    let d = z.len() as f64;
    0.5 * z
        .iter()
        .map(|&v| v.powi(4) - 16.0 * v * v + 5.0 * v)
        .sum::<f64>()
        + d * offset
}

fn styblinski_grad(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| 2.0 * v.powi(3) - 16.0 * v + 2.5).collect()
}

fn schwefel(z: &[f64]) -> f64 {
    let (_, per_dim) = *schwefel_constants();
    let d = z.len() as f64;
    per_dim * d
        - z.iter()
            .map(|&v| v * (v.abs().sqrt()).sin())
            .sum::<f64>()
}

fn schwefel_grad(z: &[f64]) -> Vec<f64> {
    // z sin(sqrt(|z|)) is odd, so its derivative depends only on |z|.
    z.iter()
        .map(|&v| {
            let t = v.abs();
            if t == 0.0 {
                0.0
            } else {
                let r = t.sqrt();
                -(r.sin() + 0.5 * r * r.cos())
            }
        })
        .collect()
}

fn alpine1(z: &[f64], variant: Alpine1Variant) -> f64 {
    match variant {
        Alpine1Variant::AbsOutsideSum => z
            .iter()
            .map(|&v| v * v.sin() + 0.1 * v)
            .sum::<f64>()
            .abs(),
        Alpine1Variant::SumOfAbs => z
            .iter()
            .map(|&v| (v * v.sin() + 0.1 * v).abs())
            .sum(),
    }
}

fn alpine1_value_grad(z: &[f64], variant: Alpine1Variant) -> (f64, Vec<f64>) {
    match variant {
        Alpine1Variant::AbsOutsideSum => {
            let s: f64 = z.iter().map(|&v| v * v.sin() + 0.1 * v).sum();
            // Subgradient 0 at the kink s = 0.
            let sg = if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            };
            let g = z
                .iter()
                .map(|&v| sg * (v.sin() + v * v.cos() + 0.1))
                .collect();
            (s.abs(), g)
        }
        Alpine1Variant::SumOfAbs => {
            let mut f = 0.0;
            let g = z
                .iter()
                .map(|&v| {
                    let t = v * v.sin() + 0.1 * v;
                    f += t.abs();
                    let sg = if t > 0.0 {
                        1.0
                    } else if t < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    sg * (v.sin() + v * v.cos() + 0.1)
                })
                .collect();
            (f, g)
        }
    }
}

// --- startup constants ---

/// Golden-section minimization of a unimodal 1-D function on [a, b].
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// (argmin, offset) for the per-dimension Styblinski term. The offset makes
/// the global minimum value exactly 0.
fn styblinski_constants() -> &'static (f64, f64) {
    static CACHE: OnceLock<(f64, f64)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let term = |t: f64| 0.5 * (t.powi(4) - 16.0 * t * t + 5.0 * t);
        let (x, fx) = golden_min(term, -5.0, 0.0, 1e-12);
        (x, -fx)
    })
}

/// (argmax, max) of t*sin(sqrt(|t|)) over the Schwefel domain. The printed
/// additive constant 418.9928 is off by ~1e-2 from this maximum; using the
/// computed value keeps the minimum at exactly 0.
fn schwefel_constants() -> &'static (f64, f64) {
    static CACHE: OnceLock<(f64, f64)> = OnceLock::new();
    CACHE.get_or_init(|| {
        let neg = |t: f64| -(t * (t.abs().sqrt()).sin());
        // Coarse scan for the bracketing interval, then golden-section.
        let mut best_t = 0.0;
        let mut best_v = f64::INFINITY;
        let steps = 10_000;
        for i in 0..=steps {
            let t = -500.0 + 1000.0 * (i as f64) / (steps as f64);
            let v = neg(t);
            if v < best_v {
                best_v = v;
                best_t = t;
            }
        }
        let (x, fx) = golden_min(neg, best_t - 0.5, best_t + 0.5, 1e-12);
        (x, -fx)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obj(kind: ObjectiveKind, dim: usize) -> Objective {
        make_objective(kind, dim, vec![0.0; dim]).unwrap()
    }

    #[test]
    fn rastrigin_zero_at_origin() {
        assert!(obj(ObjectiveKind::Rastrigin, 10).value(&[0.0; 10]).abs() < 1e-12);
    }

    #[test]
    fn ackley_zero_at_origin() {
        assert!(obj(ObjectiveKind::Ackley, 30).value(&[0.0; 30]).abs() < 1e-12);
    }

    #[test]
    fn schwefel_near_zero_at_known_optimizer() {
        let o = obj(ObjectiveKind::Schwefel, 10);
        let x = vec![420.9687; 10];
        assert!(o.value(&x) < 1e-3);
    }

    #[test]
    fn all_objectives_near_zero_at_shifted_optimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in ObjectiveKind::ALL {
            let dim = 6;
            let shift = sample_shift(&mut rng, kind, dim, 0.1 * kind.domain(dim).width(0));
            let o = make_objective(kind, dim, shift).unwrap();
            let v = o.value(&o.optimizer_location());
            let tol = if kind == ObjectiveKind::Schwefel { 1e-3 } else { 1e-6 };
            assert!(v.abs() <= tol, "{}: {v}", kind.name());
        }
    }

    #[test]
    fn sphere_value_and_grad() {
        let o = obj(ObjectiveKind::Sphere, 3);
        let (v, g) = o.value_grad(&[1.0, 2.0, 3.0]);
        assert_eq!(v, 14.0);
        assert_eq!(g, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn rastrigin_grad_odd_symmetry() {
        let o = obj(ObjectiveKind::Rastrigin, 2);
        let (_, g) = o.value_grad(&[0.5, 0.0]);
        assert_eq!(g[1], 0.0);
    }

    fn fd_grad(o: &Objective, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += h;
                xm[j] -= h;
                (o.value(&xp) - o.value(&xm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in ObjectiveKind::ALL {
            let o = obj(kind, 10);
            for _ in 0..20 {
                let x: Vec<f64> = (0..10)
                    .map(|j| {
                        rng.random_range(o.domain.lo[j] * 0.9..o.domain.hi[j] * 0.9)
                    })
                    .collect();
                let (_, g) = o.value_grad(&x);
                let fd = fd_grad(&o, &x, 1e-5);
                let scale = g
                    .iter()
                    .fold(1.0_f64, |m, &v| m.max(v.abs()));
                for (a, b) in g.iter().zip(&fd) {
                    assert!(
                        (a - b).abs() / scale < 1e-5,
                        "{}: {a} vs {b}",
                        kind.name()
                    );
                }
            }
        }
    }

    #[test]
    fn styblinski_grad_high_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let o = obj(ObjectiveKind::Styblinski, 10);
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-9.0..9.0)).collect();
        let (_, g) = o.value_grad(&x);
        let fd = fd_grad(&o, &x, 1e-5);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() / a.abs().max(1.0) < 1e-6);
        }
    }

    #[test]
    fn alpine1_variants_agree_on_sign_definite_region() {
        let z = vec![2.0, 2.1, 1.9];
        let o_outer = obj(ObjectiveKind::Alpine1, 3);
        let o_inner =
            obj(ObjectiveKind::Alpine1, 3).with_alpine1_variant(Alpine1Variant::SumOfAbs);
        // All per-coordinate terms positive here, so both forms coincide.
        assert!((o_outer.value(&z) - o_inner.value(&z)).abs() < 1e-12);
    }

    #[test]
    fn alpine1_kink_returns_zero_subgradient() {
        let o = obj(ObjectiveKind::Alpine1, 2);
        let (v, g) = o.value_grad(&[0.0, 0.0]);
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn shift_out_of_domain_rejected() {
        let r = make_objective(ObjectiveKind::Rastrigin, 2, vec![0.0, 4.0]);
        assert!(matches!(r, Err(ObjectiveError::ShiftOutOfDomain { .. })));
    }

    #[test]
    fn shift_degenerate_margin_gives_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_shift(&mut rng, ObjectiveKind::Rastrigin, 4, 3.0);
        assert_eq!(s, vec![0.0; 4]);
    }

    #[test]
    fn shift_respects_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s = sample_shift(&mut rng, ObjectiveKind::Rastrigin, 10, 0.5);
            assert!(s.iter().all(|&v| (-2.5..=2.5).contains(&v)));
        }
    }

    #[test]
    fn shift_deterministic_under_seed() {
        let a = sample_shift(
            &mut ChaCha8Rng::seed_from_u64(9),
            ObjectiveKind::Ackley,
            5,
            1.0,
        );
        let b = sample_shift(
            &mut ChaCha8Rng::seed_from_u64(9),
            ObjectiveKind::Ackley,
            5,
            1.0,
        );
        assert_eq!(a, b);
    }

    #[test]
    fn budget_meter_charges_and_exhausts() {
        let o = obj(ObjectiveKind::Sphere, 2);
        let mut meter = BudgetMeter::new(2);
        assert!(eval_with_grad(&o, &[1.0, 1.0], &mut meter).is_ok());
        assert!(eval_value(&o, &[1.0, 1.0], &mut meter).is_ok());
        assert!(eval_value(&o, &[1.0, 1.0], &mut meter).is_err());
        assert_eq!(meter.used(), 2);
    }

    #[test]
    fn grad_cost_is_configurable() {
        let o = obj(ObjectiveKind::Sphere, 2).with_grad_cost(2);
        let mut meter = BudgetMeter::new(3);
        assert!(eval_with_grad(&o, &[0.0, 0.0], &mut meter).is_ok());
        assert_eq!(meter.used(), 2);
        assert!(eval_with_grad(&o, &[0.0, 0.0], &mut meter).is_err());
    }
}
