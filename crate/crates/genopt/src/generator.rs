//! The generative network mapping input noise to search points: variance-matched
//! initialization, annealed uniform noise, forward pass, reverse-mode gradient
//! of the population objective with respect to the weights, and Adam updates.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::linalg::DenseMatrix;
use crate::objectives::Domain;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Architecture and noise settings for the generator.
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    /// Input noise dimension p.
    pub noise_dim: usize,
    /// Width h of every hidden layer.
    pub hidden_width: usize,
    /// Number n of leaky-ReLU hidden layers (the tanh output layer is extra).
    pub hidden_layers: usize,
    pub leaky_slope: f64,
    /// Per-coordinate output bounds.
    pub out_lo: Vec<f64>,
    pub out_hi: Vec<f64>,
    /// Desired per-coordinate standard deviation of the initial output
    /// distribution, in domain units.
    pub target_out_std: f64,
    /// Initial half-width of the uniform input noise.
    pub noise_halfwidth: f64,
    /// Exponential decay factor of the noise support per iteration.
    pub anneal_alpha: f64,
}

impl GeneratorConfig {
    /// Defaults for a search box: p = d, h = 64, n = 5, slope 0.2, output std
    /// a quarter of the domain width, unit noise half-width, alpha 0.99.
    pub fn for_domain(domain: &Domain) -> Self {
        let d = domain.dim();
        let mean_width =
            (0..d).map(|j| domain.width(j)).sum::<f64>() / d as f64;
        GeneratorConfig {
            noise_dim: d,
            hidden_width: 64,
            hidden_layers: 5,
            leaky_slope: 0.2,
            out_lo: domain.lo.clone(),
            out_hi: domain.hi.clone(),
            target_out_std: mean_width / 4.0,
            noise_halfwidth: 1.0,
            anneal_alpha: 0.99,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.out_lo.len()
    }

    pub fn validate(&self) {
        assert!(self.noise_dim >= 1);
        assert!(self.hidden_width >= 1);
        assert!(self.hidden_layers >= 1);
        assert!(self.target_out_std > 0.0);
        assert!(self.noise_halfwidth > 0.0);
        assert!(self.anneal_alpha > 0.0 && self.anneal_alpha <= 1.0);
        assert_eq!(self.out_lo.len(), self.out_hi.len());
        assert!(self
            .out_lo
            .iter()
            .zip(&self.out_hi)
            .all(|(&lo, &hi)| lo < hi));
    }
}

#[derive(Debug, Clone)]
struct Layer {
    /// out x in, row-major.
    w: DenseMatrix,
    b: Vec<f64>,
}

impl Layer {
    fn out_dim(&self) -> usize {
        self.w.rows
    }

    fn in_dim(&self) -> usize {
        self.w.cols
    }
}

/// The generator: n leaky-ReLU layers, a tanh output layer, and an affine map
/// scaling the tanh range onto the output box.
#[derive(Debug, Clone)]
pub struct GeneratorNetwork {
    hidden: Vec<Layer>,
    output: Layer,
    out_center: Vec<f64>,
    out_scale: Vec<f64>,
    pub cfg: GeneratorConfig,
}

/// Gradient of the population objective with respect to every weight and bias,
/// flattened in the same order as [`GeneratorNetwork::params_flat`].
#[derive(Debug, Clone)]
pub struct GeneratorGrad(pub Vec<f64>);

/// Standard-deviation of the last-layer weights that yields output standard
/// deviation `beta` given hidden width `h`, depth `n`, and input-noise
/// standard deviation `nu`: `beta / (nu * sqrt(h * 0.3^n))`.
pub fn safe_last_layer_std(beta: f64, h: usize, n: usize, nu: f64) -> f64 {
    assert!(beta > 0.0 && h >= 1 && nu > 0.0);
    beta / (nu * ((h as f64) * 0.3_f64.powi(n as i32)).sqrt())
}

/// Fresh generator with Glorot hidden layers, variance-matched last layer,
/// and zero biases. Deterministic given the RNG state.
pub fn init_generator<R: Rng>(cfg: &GeneratorConfig, rng: &mut R) -> GeneratorNetwork {
    cfg.validate();
    let p = cfg.noise_dim;
    let h = cfg.hidden_width;
    let d = cfg.out_dim();
    let n = cfg.hidden_layers;
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut hidden = Vec::with_capacity(n);
    for l in 0..n {
        let fan_in = if l == 0 { p } else { h };
        let std = 1.0 / (fan_in as f64).sqrt();
        let mut w = DenseMatrix::zeros(h, fan_in);
        for i in 0..h {
            for j in 0..fan_in {
                w[(i, j)] = std * std_normal.sample(rng);
            }
        }
        hidden.push(Layer { w, b: vec![0.0; h] });
    }

    // Centered uniform noise on [-w0, w0] has standard deviation w0/sqrt(3).
    let nu = cfg.noise_halfwidth / 3.0_f64.sqrt();
    let out_center: Vec<f64> = cfg
        .out_lo
        .iter()
        .zip(&cfg.out_hi)
        .map(|(&lo, &hi)| 0.5 * (lo + hi))
        .collect();
    let out_scale: Vec<f64> = cfg
        .out_lo
        .iter()
        .zip(&cfg.out_hi)
        .map(|(&lo, &hi)| 0.5 * (hi - lo))
        .collect();

    // The target std is in domain units; the tanh pre-activation lives in
    // units of the affine scale, so normalize before applying the formula.
    let mut w = DenseMatrix::zeros(d, h);
    for i in 0..d {
        let beta_pre = cfg.target_out_std / out_scale[i];
        let lambda = safe_last_layer_std(beta_pre, h, n, nu);
        for j in 0..h {
            w[(i, j)] = lambda * std_normal.sample(rng);
        }
    }
    let output = Layer { w, b: vec![0.0; d] };

    let mut net = GeneratorNetwork {
        hidden,
        output,
        out_center,
        out_scale,
        cfg: cfg.clone(),
    };

    // The formula above matches the output std in expectation over the weight
    // draw, but the hidden activations are strongly correlated across units,
    // so the realized per-row std scatters by several-fold. Calibrate each
    // output row against a probe batch so every coordinate starts at its
    // target spread.
    let probe = sample_noise(cfg, rng, 0, 1 << 12);
    let cache = net.forward_cached(&probe);
    let act = cache.inputs.last().expect("hidden stack is non-empty");
    let mut mu = vec![0.0; h];
    for r in 0..act.rows {
        for (m, &a) in mu.iter_mut().zip(act.row(r)) {
            *m += a / act.rows as f64;
        }
    }
    let mu_sq: f64 = mu.iter().map(|m| m * m).sum();
    for i in 0..d {
        let beta_tanh = cfg.target_out_std / net.out_scale[i];
        // Leaky-ReLU activations have a large common mean component; a random
        // row picks up an offset that can dwarf the spread and push the tanh
        // one-sided. Project it out so the pre-activation is centered.
        if mu_sq > 1e-300 {
            let dot: f64 = net.output.w.row(i).iter().zip(&mu).map(|(a, b)| a * b).sum();
            for (v, &m) in net.output.w.row_mut(i).iter_mut().zip(&mu) {
                *v -= dot / mu_sq * m;
            }
        }
        let row = net.output.w.row(i);
        let z: Vec<f64> = (0..act.rows)
            .map(|r| row.iter().zip(act.row(r)).map(|(a, b)| a * b).sum())
            .collect();
        // Fixed point on the row gain: tanh is monotone in the gain, so a few
        // proportional corrections land on the target output std.
        let mut gain = 1.0;
        for _ in 0..12 {
            let mut mean = 0.0;
            let mut sq = 0.0;
            for &zi in &z {
                let t = (gain * zi).tanh();
                mean += t;
                sq += t * t;
            }
            mean /= z.len() as f64;
            let std = (sq / z.len() as f64 - mean * mean).max(1e-300).sqrt();
            gain *= beta_tanh / std;
        }
        for v in net.output.w.row_mut(i) {
            *v *= gain;
        }
    }
    net
}

/// Uniform noise batch at iteration `t`: support half-width
/// `anneal_alpha^t * noise_halfwidth`.
pub fn sample_noise<R: Rng>(
    cfg: &GeneratorConfig,
    rng: &mut R,
    t: u64,
    batch: usize,
) -> DenseMatrix {
    assert!(batch >= 1);
    let w = cfg.anneal_alpha.powi(t as i32) * cfg.noise_halfwidth;
    let mut u = DenseMatrix::zeros(batch, cfg.noise_dim);
    for i in 0..batch {
        for j in 0..cfg.noise_dim {
            u[(i, j)] = if w > 0.0 { rng.random_range(-w..w) } else { 0.0 };
        }
    }
    u
}

struct ForwardCache {
    /// Activations entering each hidden layer (the first is the noise batch),
    /// plus the activation entering the output layer.
    inputs: Vec<DenseMatrix>,
    /// Pre-activations of each hidden layer (for the leaky-ReLU derivative).
    hidden_pre: Vec<DenseMatrix>,
    /// tanh outputs of the final layer.
    tanh_out: DenseMatrix,
}

impl GeneratorNetwork {
    fn affine(layer: &Layer, input: &DenseMatrix) -> DenseMatrix {
        let n = input.rows;
        let mut out = DenseMatrix::zeros(n, layer.out_dim());
        for r in 0..n {
            let x = input.row(r);
            let o = out.row_mut(r);
            for i in 0..layer.out_dim() {
                let wrow = layer.w.row(i);
                let mut s = layer.b[i];
                for j in 0..layer.in_dim() {
                    s += wrow[j] * x[j];
                }
                o[i] = s;
            }
        }
        out
    }

    fn forward_cached(&self, u: &DenseMatrix) -> ForwardCache {
        assert_eq!(u.cols, self.cfg.noise_dim, "noise batch has wrong width");
        let slope = self.cfg.leaky_slope;
        let mut inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut hidden_pre = Vec::with_capacity(self.hidden.len());
        let mut a = u.clone();
        for layer in &self.hidden {
            inputs.push(a.clone());
            let z = Self::affine(layer, &a);
            hidden_pre.push(z.clone());
            let mut act = z;
            for r in 0..act.rows {
                for v in act.row_mut(r) {
                    if *v < 0.0 {
                        *v *= slope;
                    }
                }
            }
            a = act;
        }
        inputs.push(a.clone());
        let mut t = Self::affine(&self.output, &a);
        for r in 0..t.rows {
            for v in t.row_mut(r) {
                *v = v.tanh();
            }
        }
        ForwardCache {
            inputs,
            hidden_pre,
            tanh_out: t,
        }
    }

    /// Maps a noise batch to points inside the output box.
    pub fn forward(&self, u: &DenseMatrix) -> DenseMatrix {
        let cache = self.forward_cached(u);
        let mut x = cache.tanh_out;
        for r in 0..x.rows {
            let row = x.row_mut(r);
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.out_center[j] + self.out_scale[j] * *v;
            }
        }
        x
    }

    /// Gradient of `(1/N) sum_i f(x(theta, u_i))` with respect to all weights
    /// and biases, given the objective gradients at each generated point.
    pub fn backward(
        &self,
        u: &DenseMatrix,
        grad_f: &DenseMatrix,
    ) -> Result<GeneratorGrad, GeneratorError> {
        if u.cols != self.cfg.noise_dim {
            return Err(GeneratorError::ShapeMismatch(format!(
                "noise width {} != p {}",
                u.cols, self.cfg.noise_dim
            )));
        }
        if grad_f.rows != u.rows || grad_f.cols != self.cfg.out_dim() {
            return Err(GeneratorError::ShapeMismatch(format!(
                "grad_f is {}x{}, expected {}x{}",
                grad_f.rows,
                grad_f.cols,
                u.rows,
                self.cfg.out_dim()
            )));
        }
        let n = u.rows;
        let inv_n = 1.0 / n as f64;
        let slope = self.cfg.leaky_slope;
        let cache = self.forward_cached(u);

        let mut dw_out = DenseMatrix::zeros(self.output.out_dim(), self.output.in_dim());
        let mut db_out = vec![0.0; self.output.out_dim()];
        let mut dw_hidden: Vec<DenseMatrix> = self
            .hidden
            .iter()
            .map(|l| DenseMatrix::zeros(l.out_dim(), l.in_dim()))
            .collect();
        let mut db_hidden: Vec<Vec<f64>> =
            self.hidden.iter().map(|l| vec![0.0; l.out_dim()]).collect();

        for r in 0..n {
            // Output layer: x = c + s * tanh(z), so dz = s * (1 - tanh^2) * dx.
            let tanh_row = cache.tanh_out.row(r);
            let gf = grad_f.row(r);
            let mut dz: Vec<f64> = (0..self.output.out_dim())
                .map(|i| {
                    inv_n * gf[i] * self.out_scale[i] * (1.0 - tanh_row[i] * tanh_row[i])
                })
                .collect();
            let a_in = cache.inputs.last().unwrap().row(r);
            for i in 0..self.output.out_dim() {
                let wrow = dw_out.row_mut(i);
                for j in 0..self.output.in_dim() {
                    wrow[j] += dz[i] * a_in[j];
                }
                db_out[i] += dz[i];
            }
            // Back through the output weights into the last hidden activation.
            let mut da: Vec<f64> = (0..self.output.in_dim())
                .map(|j| {
                    (0..self.output.out_dim())
                        .map(|i| self.output.w[(i, j)] * dz[i])
                        .sum()
                })
                .collect();

            for l in (0..self.hidden.len()).rev() {
                let layer = &self.hidden[l];
                let pre = cache.hidden_pre[l].row(r);
                dz = (0..layer.out_dim())
                    .map(|i| da[i] * if pre[i] >= 0.0 { 1.0 } else { slope })
                    .collect();
                let a_prev = cache.inputs[l].row(r);
                for i in 0..layer.out_dim() {
                    let wrow = dw_hidden[l].row_mut(i);
                    for j in 0..layer.in_dim() {
                        wrow[j] += dz[i] * a_prev[j];
                    }
                    db_hidden[l][i] += dz[i];
                }
                if l > 0 {
                    da = (0..layer.in_dim())
                        .map(|j| {
                            (0..layer.out_dim())
                                .map(|i| layer.w[(i, j)] * dz[i])
                                .sum()
                        })
                        .collect();
                }
            }
        }

        let mut flat = Vec::with_capacity(self.num_params());
        for (dw, db) in dw_hidden.iter().zip(&db_hidden) {
            flat.extend_from_slice(dw.data());
            flat.extend_from_slice(db);
        }
        flat.extend_from_slice(dw_out.data());
        flat.extend_from_slice(&db_out);
        Ok(GeneratorGrad(flat))
    }

    pub fn num_params(&self) -> usize {
        self.hidden
            .iter()
            .map(|l| l.w.data().len() + l.b.len())
            .sum::<usize>()
            + self.output.w.data().len()
            + self.output.b.len()
    }

    /// All parameters in a fixed order (hidden layers first, weights then
    /// biases, then the output layer).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for l in &self.hidden {
            flat.extend_from_slice(l.w.data());
            flat.extend_from_slice(&l.b);
        }
        flat.extend_from_slice(self.output.w.data());
        flat.extend_from_slice(&self.output.b);
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut k = 0;
        for l in &mut self.hidden {
            let nw = l.w.data().len();
            let w = DenseMatrix::from_vec(l.w.rows, l.w.cols, flat[k..k + nw].to_vec());
            l.w = w;
            k += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        let nw = self.output.w.data().len();
        self.output.w = DenseMatrix::from_vec(
            self.output.w.rows,
            self.output.w.cols,
            flat[k..k + nw].to_vec(),
        );
        k += nw;
        self.output.b.copy_from_slice(&flat[k..]);
    }

    /// Zeros the output-layer weights; the forward pass then emits the domain
    /// center for any noise. Test hook.
    #[cfg(test)]
    fn zero_output_weights(&mut self) {
        let (r, c) = (self.output.w.rows, self.output.w.cols);
        self.output.w = DenseMatrix::zeros(r, c);
    }
}

/// Adam accumulators shaped like the flattened parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub t: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(net: &GeneratorNetwork) -> Self {
        let n = net.num_params();
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    net: &mut GeneratorNetwork,
    state: &mut AdamState,
    grad: &GeneratorGrad,
    eta: f64,
) {
    assert_eq!(grad.0.len(), state.m.len());
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - ADAM_BETA1.powf(t);
    let bc2 = 1.0 - ADAM_BETA2.powf(t);
    let mut params = net.params_flat();
    for i in 0..params.len() {
        let g = grad.0[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let mhat = state.m[i] / bc1;
        let vhat = state.v[i] / bc2;
        params[i] -= eta * mhat / (vhat.sqrt() + ADAM_EPS);
    }
    net.set_params_flat(&params);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Domain;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(p: usize, h: usize, n: usize, d: usize) -> GeneratorConfig {
        GeneratorConfig {
            noise_dim: p,
            hidden_width: h,
            hidden_layers: n,
            leaky_slope: 0.2,
            out_lo: vec![-3.0; d],
            out_hi: vec![3.0; d],
            target_out_std: 1.5,
            noise_halfwidth: 1.0,
            anneal_alpha: 0.99,
        }
    }

    #[test]
    fn safe_std_collapses_for_trivial_inputs() {
        assert!((safe_last_layer_std(1.0, 1, 0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn safe_std_matches_direct_arithmetic() {
        // 1 / sqrt(64 * 0.3^5)
        let expect = 1.0 / (64.0 * 0.3_f64.powi(5)).sqrt();
        assert!((safe_last_layer_std(1.0, 64, 5, 1.0) - expect).abs() < 1e-12);
        assert!((expect - 2.5357).abs() < 1e-3);
    }

    #[test]
    fn safe_std_linear_in_beta() {
        let a = safe_last_layer_std(1.0, 32, 3, 0.5);
        let b = safe_last_layer_std(2.0, 32, 3, 0.5);
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn init_biases_zero_and_deterministic() {
        let cfg = small_cfg(10, 64, 5, 10);
        let a = init_generator(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let b = init_generator(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.params_flat(), b.params_flat());
        for l in &a.hidden {
            assert!(l.b.iter().all(|&v| v == 0.0));
        }
        assert!(a.output.b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_output_std_within_band() {
        let domain = Domain::uniform(10, -3.0, 3.0);
        let cfg = GeneratorConfig::for_domain(&domain);
        let beta = cfg.target_out_std;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = init_generator(&cfg, &mut rng);
        let u = sample_noise(&cfg, &mut rng, 0, 10_000);
        let x = net.forward(&u);
        for j in 0..10 {
            let mean: f64 = (0..x.rows).map(|i| x[(i, j)]).sum::<f64>() / x.rows as f64;
            let var: f64 = (0..x.rows)
                .map(|i| (x[(i, j)] - mean).powi(2))
                .sum::<f64>()
                / x.rows as f64;
            let std = var.sqrt();
            assert!(
                std >= beta / 2.0 && std <= 2.0 * beta,
                "coord {j}: std {std} vs beta {beta}"
            );
        }
    }

    #[test]
    fn noise_support_and_annealing() {
        let cfg = small_cfg(4, 8, 2, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let u = sample_noise(&cfg, &mut rng, 100, 50);
        let w_t = 0.99_f64.powi(100) * cfg.noise_halfwidth;
        assert!((w_t - 0.3660 * cfg.noise_halfwidth).abs() < 1e-4);
        for i in 0..u.rows {
            assert!(u.row(i).iter().all(|&v| v.abs() <= w_t));
        }
        // alpha = 1 keeps the support constant
        let mut cfg1 = cfg.clone();
        cfg1.anneal_alpha = 1.0;
        let u1 = sample_noise(&cfg1, &mut rng, 1000, 50);
        let max = u1
            .data()
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v.abs()));
        assert!(max <= cfg1.noise_halfwidth && max > 0.5 * cfg1.noise_halfwidth);
    }

    #[test]
    fn zero_output_weights_give_domain_center() {
        let cfg = small_cfg(3, 8, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = init_generator(&cfg, &mut rng);
        net.zero_output_weights();
        let u = sample_noise(&cfg, &mut rng, 0, 7);
        let x = net.forward(&u);
        for i in 0..7 {
            assert_eq!(x.row(i), &[0.0, 0.0]);
        }
    }

    #[test]
    fn forward_rows_are_independent() {
        let cfg = small_cfg(3, 8, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = init_generator(&cfg, &mut rng);
        let u = sample_noise(&cfg, &mut rng, 0, 5);
        let batch = net.forward(&u);
        let single = DenseMatrix::from_vec(1, 3, u.row(2).to_vec());
        let x1 = net.forward(&single);
        assert_eq!(x1.row(0), batch.row(2));
    }

    #[test]
    fn backward_zero_gradients_and_linearity() {
        let cfg = small_cfg(2, 4, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = init_generator(&cfg, &mut rng);
        let u = sample_noise(&cfg, &mut rng, 0, 6);
        let zeros = DenseMatrix::zeros(6, 2);
        let g0 = net.backward(&u, &zeros).unwrap();
        assert!(g0.0.iter().all(|&v| v == 0.0));

        let mut gf = DenseMatrix::zeros(6, 2);
        for i in 0..6 {
            for j in 0..2 {
                gf[(i, j)] = (i + j) as f64 - 2.5;
            }
        }
        let g1 = net.backward(&u, &gf).unwrap();
        let mut gf3 = gf.clone();
        for i in 0..6 {
            for v in gf3.row_mut(i) {
                *v *= 3.0;
            }
        }
        let g3 = net.backward(&u, &gf3).unwrap();
        for (a, b) in g1.0.iter().zip(&g3.0) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    fn population_objective(net: &GeneratorNetwork, u: &DenseMatrix) -> f64 {
        // Mean of a fixed smooth function over the generated batch.
        let x = net.forward(u);
        let mut total = 0.0;
        for i in 0..x.rows {
            for (j, &v) in x.row(i).iter().enumerate() {
                total += (v - 0.3 * (j as f64 + 1.0)).powi(2);
            }
        }
        total / x.rows as f64
    }

    fn population_grad(net: &GeneratorNetwork, u: &DenseMatrix) -> DenseMatrix {
        let x = net.forward(u);
        let mut g = DenseMatrix::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            for j in 0..x.cols {
                g[(i, j)] = 2.0 * (x[(i, j)] - 0.3 * (j as f64 + 1.0));
            }
        }
        g
    }

    #[test]
    fn backward_matches_finite_differences_over_grid() {
        let mut seed = 100;
        for p in [1usize, 2, 4] {
            for h in [3usize, 8] {
                for n in [1usize, 2] {
                    seed += 1;
                    let cfg = small_cfg(p, h, n, 2);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let net = init_generator(&cfg, &mut rng);
                    let u = sample_noise(&cfg, &mut rng, 0, 4);
                    let analytic = net.backward(&u, &population_grad(&net, &u)).unwrap();
                    let params = net.params_flat();
                    let eps = 1e-6;
                    let gmax = analytic
                        .0
                        .iter()
                        .fold(0.0_f64, |m, &v| m.max(v.abs()))
                        .max(1e-8);
                    for k in 0..params.len() {
                        let mut np = net.clone();
                        let mut pp = params.clone();
                        pp[k] += eps;
                        np.set_params_flat(&pp);
                        let fp = population_objective(&np, &u);
                        pp[k] -= 2.0 * eps;
                        np.set_params_flat(&pp);
                        let fm = population_objective(&np, &u);
                        let fd = (fp - fm) / (2.0 * eps);
                        assert!(
                            (analytic.0[k] - fd).abs() / gmax < 1e-4,
                            "p={p} h={h} n={n} k={k}: {} vs {fd}",
                            analytic.0[k]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn backward_shape_mismatch_rejected() {
        let cfg = small_cfg(2, 4, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = init_generator(&cfg, &mut rng);
        let u = sample_noise(&cfg, &mut rng, 0, 3);
        let bad = DenseMatrix::zeros(3, 5);
        assert!(net.backward(&u, &bad).is_err());
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let cfg = small_cfg(2, 4, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = init_generator(&cfg, &mut rng);
        let before = net.params_flat();
        let mut state = AdamState::new(&net);
        let zero = GeneratorGrad(vec![0.0; net.num_params()]);
        adam_step(&mut net, &mut state, &zero, 0.01);
        assert_eq!(net.params_flat(), before);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_first_step_is_signed_eta() {
        let cfg = small_cfg(2, 4, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net = init_generator(&cfg, &mut rng);
        let before = net.params_flat();
        let mut state = AdamState::new(&net);
        let g: Vec<f64> = (0..net.num_params())
            .map(|i| if i % 2 == 0 { 0.5 } else { -1.5 })
            .collect();
        adam_step(&mut net, &mut state, &GeneratorGrad(g.clone()), 0.01);
        let after = net.params_flat();
        for i in 0..after.len() {
            let step = after[i] - before[i];
            assert!((step + 0.01 * g[i].signum()).abs() < 1e-6);
        }
    }

    #[test]
    fn adam_second_identical_step_not_larger() {
        let cfg = small_cfg(2, 4, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = init_generator(&cfg, &mut rng);
        let mut state = AdamState::new(&net);
        let g = GeneratorGrad(vec![0.7; net.num_params()]);
        let p0 = net.params_flat();
        adam_step(&mut net, &mut state, &g, 0.01);
        let p1 = net.params_flat();
        adam_step(&mut net, &mut state, &g, 0.01);
        let p2 = net.params_flat();
        let s1 = (p1[0] - p0[0]).abs();
        let s2 = (p2[0] - p1[0]).abs();
        assert!(s2 <= s1 + 1e-12);
    }

    proptest! {
        #[test]
        fn forward_output_confined_to_box(seed in 0u64..500, scale in 0.1f64..100.0) {
            let cfg = small_cfg(3, 8, 2, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = init_generator(&cfg, &mut rng);
            // Blow up the weights arbitrarily; tanh still confines the output.
            let params: Vec<f64> = net.params_flat().iter().map(|v| v * scale).collect();
            net.set_params_flat(&params);
            let u = sample_noise(&cfg, &mut rng, 0, 10);
            let x = net.forward(&u);
            for i in 0..x.rows {
                for (j, &v) in x.row(i).iter().enumerate() {
                    prop_assert!(v >= cfg.out_lo[j] && v <= cfg.out_hi[j]);
                }
            }
        }

        #[test]
        fn noise_within_annealed_support(t in 0u64..300, seed in 0u64..100) {
            let cfg = small_cfg(4, 8, 1, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = sample_noise(&cfg, &mut rng, t, 8);
            let w = cfg.anneal_alpha.powi(t as i32) * cfg.noise_halfwidth;
            for v in u.data() {
                prop_assert!(v.abs() <= w);
            }
        }
    }
}
