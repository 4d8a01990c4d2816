//! Noiseless Gaussian-process regression with a Matern-5/2 ARD kernel,
//! log-marginal-likelihood hyperparameter fitting, and Expected Improvement
//! with an analytic gradient.
//!
//! Inputs are normalized to the unit box and targets to zero mean / unit
//! variance before fitting; all public queries are in original units.

use thiserror::Error;

use crate::linalg::{cholesky, solve_psd, CholeskyFactor, DenseMatrix, LinalgError};
use crate::objectives::Domain;

#[derive(Debug, Error)]
pub enum GpError {
    #[error("training rows {0} and {1} coincide within 1e-10")]
    DuplicatePoints(usize, usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("empty training set")]
    Empty,
}

/// Kernel hyperparameters: signal variance and one lengthscale per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
}

impl KernelParams {
    pub fn validate(&self) {
        assert!(self.signal_variance > 0.0 && self.signal_variance.is_finite());
        assert!(self
            .lengthscales
            .iter()
            .all(|&l| l > 0.0 && l.is_finite()));
    }
}

/// Matern-5/2 with automatic relevance determination:
/// `sf2 * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r)` with
/// `r^2 = sum_j (x_j - x2_j)^2 / l_j^2`.
pub fn matern52_ard(x: &[f64], x2: &[f64], params: &KernelParams) -> f64 {
    let r = scaled_distance(x, x2, &params.lengthscales);
    let sqrt5r = 5.0_f64.sqrt() * r;
    params.signal_variance * (1.0 + sqrt5r + sqrt5r * sqrt5r / 3.0) * (-sqrt5r).exp()
}

fn scaled_distance(x: &[f64], x2: &[f64], ls: &[f64]) -> f64 {
    x.iter()
        .zip(x2)
        .zip(ls)
        .map(|((a, b), l)| {
            let d = (a - b) / l;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// d k / d x_j. The apparent 1/r singularity cancels analytically:
/// `dk/dx_j = -(5 sf2 / 3) (1 + sqrt(5) r) exp(-sqrt(5) r) (x_j - x2_j) / l_j^2`.
fn matern52_ard_grad_x(x: &[f64], x2: &[f64], params: &KernelParams, out: &mut [f64]) {
    let r = scaled_distance(x, x2, &params.lengthscales);
    let sqrt5r = 5.0_f64.sqrt() * r;
    let coef = -(5.0 * params.signal_variance / 3.0) * (1.0 + sqrt5r) * (-sqrt5r).exp();
    for j in 0..x.len() {
        let l = params.lengthscales[j];
        out[j] = coef * (x[j] - x2[j]) / (l * l);
    }
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Box used to normalize inputs to the unit cube.
    pub domain: Domain,
    /// Multi-start count for the likelihood maximization.
    pub fit_restarts: usize,
    /// Nelder-Mead iterations per start.
    pub nm_iters: usize,
    /// Initial diagonal jitter for the factorization.
    pub jitter: f64,
}

impl FitConfig {
    pub fn new(domain: Domain) -> Self {
        FitConfig {
            domain,
            fit_restarts: 4,
            nm_iters: 200,
            jitter: 1e-10,
        }
    }
}

/// Fitted model: training data, hyperparameters, Cholesky factor of the
/// kernel matrix, and the precomputed solve for posterior queries.
#[derive(Debug, Clone)]
pub struct GpModel {
    x_orig: DenseMatrix,
    x_norm: DenseMatrix,
    f_orig: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    domain: Domain,
    /// Hyperparameters in normalized-input, normalized-target units.
    pub params: KernelParams,
    chol: CholeskyFactor,
    alpha: Vec<f64>,
}

/// Best observed target and its location.
#[derive(Debug, Clone)]
pub struct Incumbent {
    pub f_tilde: f64,
    pub location: Vec<f64>,
}

pub fn incumbent_of(x: &DenseMatrix, f: &[f64]) -> Incumbent {
    let (i, &v) = f
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty targets");
    Incumbent {
        f_tilde: v,
        location: x.row(i).to_vec(),
    }
}

fn normalize_inputs(x: &DenseMatrix, domain: &Domain) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows, x.cols);
    for i in 0..x.rows {
        for j in 0..x.cols {
            out[(i, j)] = (x[(i, j)] - domain.lo[j]) / domain.width(j);
        }
    }
    out
}

fn kernel_matrix(x: &DenseMatrix, params: &KernelParams) -> DenseMatrix {
    let t = x.rows;
    let mut k = DenseMatrix::zeros(t, t);
    for i in 0..t {
        for j in 0..=i {
            let v = matern52_ard(x.row(i), x.row(j), params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `-1/2 f^T K^{-1} f - sum_i log L_ii - (t/2) log 2 pi`, in the units of the
/// data it is handed.
pub fn log_marginal_likelihood(
    x: &DenseMatrix,
    f: &[f64],
    params: &KernelParams,
    jitter: f64,
) -> Result<f64, LinalgError> {
    params.validate();
    let k = kernel_matrix(x, params);
    let chol = cholesky(&k, jitter)?;
    let alpha = solve_psd(&chol, f)?;
    let quad: f64 = f.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let t = x.rows as f64;
    Ok(-0.5 * quad - chol.log_diag_sum() - 0.5 * t * (2.0 * std::f64::consts::PI).ln())
}

fn check_duplicates(x: &DenseMatrix) -> Result<(), GpError> {
    for i in 0..x.rows {
        for j in 0..i {
            let dist = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if dist < 1e-10 {
                return Err(GpError::DuplicatePoints(j, i));
            }
        }
    }
    Ok(())
}

/// Builds a model with the given (normalized-space) hyperparameters,
/// factorizing but not refitting. Used on the fast path of the BO loop.
pub fn gp_build(
    x: &DenseMatrix,
    f: &[f64],
    params: KernelParams,
    cfg: &FitConfig,
) -> Result<GpModel, GpError> {
    if x.rows == 0 {
        return Err(GpError::Empty);
    }
    check_duplicates(x)?;
    params.validate();
    let x_norm = normalize_inputs(x, &cfg.domain);
    let t = f.len();
    let target_mean = f.iter().sum::<f64>() / t as f64;
    let var = f.iter().map(|v| (v - target_mean).powi(2)).sum::<f64>() / t as f64;
    let target_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let f_norm: Vec<f64> = f.iter().map(|v| (v - target_mean) / target_std).collect();

    let k = kernel_matrix(&x_norm, &params);
    let chol = cholesky(&k, cfg.jitter)?;
    let alpha = solve_psd(&chol, &f_norm)?;
    Ok(GpModel {
        x_orig: x.clone(),
        x_norm,
        f_orig: f.to_vec(),
        target_mean,
        target_std,
        domain: cfg.domain.clone(),
        params,
        chol,
        alpha,
    })
}

/// Fits hyperparameters by multi-start Nelder-Mead on the log marginal
/// likelihood in log-parameter space, then builds the model.
pub fn gp_fit(x: &DenseMatrix, f: &[f64], cfg: &FitConfig) -> Result<GpModel, GpError> {
    if x.rows == 0 {
        return Err(GpError::Empty);
    }
    check_duplicates(x)?;
    let x_norm = normalize_inputs(x, &cfg.domain);
    let t = f.len();
    let target_mean = f.iter().sum::<f64>() / t as f64;
    let var = f.iter().map(|v| (v - target_mean).powi(2)).sum::<f64>() / t as f64;
    let target_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let f_norm: Vec<f64> = f.iter().map(|v| (v - target_mean) / target_std).collect();

    let d = x.cols;
    let objective = |logp: &[f64]| -> f64 {
        let params = KernelParams {
            signal_variance: logp[0].exp(),
            lengthscales: logp[1..].iter().map(|v| v.exp()).collect(),
        };
        if params.signal_variance < 1e-8
            || params.signal_variance > 1e8
            || params.lengthscales.iter().any(|&l| l < 1e-4 || l > 1e4)
        {
            return f64::INFINITY;
        }
        match log_marginal_likelihood(&x_norm, &f_norm, &params, cfg.jitter) {
            Ok(lml) if lml.is_finite() => -lml,
            _ => f64::INFINITY,
        }
    };

    // Deterministic starts spanning short to long lengthscales on the unit box.
    let start_ls = [0.1_f64, 0.3, 1.0, 0.5];
    let start_sf = [1.0_f64, 1.0, 1.0, 2.0];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..cfg.fit_restarts.min(start_ls.len()) {
        let mut x0 = vec![start_sf[s].ln()];
        x0.extend(std::iter::repeat(start_ls[s].ln()).take(d));
        let (xs, fs) = nelder_mead(&objective, &x0, cfg.nm_iters);
        if best.as_ref().map_or(true, |(bf, _)| fs < *bf) {
            best = Some((fs, xs));
        }
    }
    let (_, logp) = best.expect("at least one restart");
    let params = KernelParams {
        signal_variance: logp[0].exp(),
        lengthscales: logp[1..].iter().map(|v| v.exp()).collect(),
    };
    gp_build(x, f, params, cfg)
}

impl GpModel {
    pub fn len(&self) -> usize {
        self.f_orig.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_orig.is_empty()
    }

    pub fn training_inputs(&self) -> &DenseMatrix {
        &self.x_orig
    }

    pub fn training_targets(&self) -> &[f64] {
        &self.f_orig
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn incumbent(&self) -> Incumbent {
        incumbent_of(&self.x_orig, &self.f_orig)
    }

    fn normalize_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| (v - self.domain.lo[j]) / self.domain.width(j))
            .collect()
    }

    fn kvec(&self, xn: &[f64]) -> Vec<f64> {
        (0..self.x_norm.rows)
            .map(|i| matern52_ard(xn, self.x_norm.row(i), &self.params))
            .collect()
    }

    /// Posterior mean and variance (original units) plus their gradients with
    /// respect to the original input coordinates.
    fn posterior_full(&self, x: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let d = x.len();
        let xn = self.normalize_point(x);
        let kv = self.kvec(&xn);
        let mean_n: f64 = kv.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = self.chol.solve_lower(&kv).expect("dims fixed");
        let prior = matern52_ard(&xn, &xn, &self.params);
        // Remove the jitter's own contribution so the variance vanishes at
        // training points instead of flooring at the jitter level.
        let var_n = (prior - v.iter().map(|a| a * a).sum::<f64>() - self.chol.jitter).max(0.0);

        // w = K^{-1} k(x, X) for the variance gradient.
        let w = self.chol.solve_upper(&v).expect("dims fixed");
        let mut dmean_n = vec![0.0; d];
        let mut dvar_n = vec![0.0; d];
        let mut dk = vec![0.0; d];
        for i in 0..self.x_norm.rows {
            matern52_ard_grad_x(&xn, self.x_norm.row(i), &self.params, &mut dk);
            for j in 0..d {
                dmean_n[j] += self.alpha[i] * dk[j];
                dvar_n[j] -= 2.0 * w[i] * dk[j];
            }
        }
        // Chain rule through both normalizations.
        let ts = self.target_std;
        let mean = self.target_mean + ts * mean_n;
        let var = ts * ts * var_n;
        let mut dmean = vec![0.0; d];
        let mut dvar = vec![0.0; d];
        for j in 0..d {
            let inv_w = 1.0 / self.domain.width(j);
            dmean[j] = ts * dmean_n[j] * inv_w;
            dvar[j] = ts * ts * dvar_n[j] * inv_w;
        }
        (mean, var, dmean, dvar)
    }
}

/// Posterior mean and variance at a point, original units.
pub fn gp_posterior(model: &GpModel, x: &[f64]) -> (f64, f64) {
    let (m, v, _, _) = model.posterior_full(x);
    (m, v)
}

const SIGMA_FLOOR: f64 = 1e-10;

/// Closed-form Expected Improvement and its analytic gradient.
///
/// `ei = sigma * (z Phi(z) + phi(z))` with `z = (f_tilde - m) / sigma`; when
/// the posterior is degenerate (`sigma <= floor`) the improvement reduces to
/// `max(f_tilde - m, 0)` with the gradient from the mean term only.
pub fn expected_improvement(model: &GpModel, x: &[f64], incumbent: &Incumbent) -> (f64, Vec<f64>) {
    let (m, var, dmean, dvar) = model.posterior_full(x);
    let sigma = var.max(0.0).sqrt();
    let d = x.len();
    if sigma <= SIGMA_FLOOR {
        let imp = incumbent.f_tilde - m;
        if imp > 0.0 {
            return (imp, dmean.iter().map(|v| -v).collect());
        }
        return (0.0, vec![0.0; d]);
    }
    let z = (incumbent.f_tilde - m) / sigma;
    let phi = normal_pdf(z);
    let cdf = normal_cdf(z);
    let ei = sigma * (z * cdf + phi);
    // dEI = phi(z) dsigma - Phi(z) dmean, with dsigma = dvar / (2 sigma).
    let grad = (0..d)
        .map(|j| phi * dvar[j] / (2.0 * sigma) - cdf * dmean[j])
        .collect();
    (ei.max(0.0), grad)
}

/// Derivative-free simplex minimization; returns the best vertex.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], iters: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((f(x0), x0.to_vec()));
    for i in 0..n {
        let mut xi = x0.to_vec();
        xi[i] += 0.5;
        simplex.push((f(&xi), xi));
    }
    let cmp = |a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)| a.0.partial_cmp(&b.0).unwrap();
    simplex.sort_by(cmp);

    for _ in 0..iters {
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(_, x)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].1.clone();
        let reflect: Vec<f64> = (0..n)
            .map(|j| centroid[j] + (centroid[j] - worst[j]))
            .collect();
        let fr = f(&reflect);
        if fr < simplex[0].0 {
            let expand: Vec<f64> = (0..n)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - worst[j]))
                .collect();
            let fe = f(&expand);
            simplex[n] = if fe < fr { (fe, expand) } else { (fr, reflect) };
        } else if fr < simplex[n - 1].0 {
            simplex[n] = (fr, reflect);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|j| centroid[j] + 0.5 * (worst[j] - centroid[j]))
                .collect();
            let fc = f(&contract);
            if fc < simplex[n].0 {
                simplex[n] = (fc, contract);
            } else {
                let best = simplex[0].1.clone();
                for v in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|j| best[j] + 0.5 * (v.1[j] - best[j]))
                        .collect();
                    *v = (f(&shrunk), shrunk);
                }
            }
        }
        simplex.sort_by(cmp);
    }
    let (fv, xv) = simplex.swap_remove(0);
    (xv, fv)
}
