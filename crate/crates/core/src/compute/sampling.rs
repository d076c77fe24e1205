//! Differentiable samplers: Gaussian reparameterization and Gumbel-softmax.

use rand::Rng;
use rand_distr::StandardNormal;

use super::graph::{Graph, Tensor, Var};

/// Log-variances are clamped into this range before exponentiation.
pub const LOG_VAR_MIN: f64 = -15.0;
pub const LOG_VAR_MAX: f64 = 15.0;

pub fn standard_normal_tensor<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(rows, cols, data).expect("shape")
}

/// One standard Gumbel draw, `-ln(-ln u)` with `u` in `(0, 1)`.
pub fn standard_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    -(-u.ln()).ln()
}

pub fn gumbel_tensor<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| standard_gumbel(rng)).collect();
    Tensor::new(rows, cols, data).expect("shape")
}

/// `mu + exp(log_var / 2) * noise` with the log-variance clamped.
pub fn gaussian_reparam_with_noise(g: &mut Graph, mu: Var, log_var: Var, noise: Tensor) -> Var {
    assert_eq!(g.shape(mu), g.shape(log_var), "reparam: mu/log_var shapes differ");
    assert_eq!(g.shape(mu), noise.shape(), "reparam: noise shape");
    let lv = g.clamp(log_var, LOG_VAR_MIN, LOG_VAR_MAX);
    let half = g.scale(lv, 0.5);
    let std = g.exp(half);
    let eps = g.constant(noise);
    let scaled = g.mul(std, eps);
    g.add(mu, scaled)
}

pub fn gaussian_reparam<R: Rng + ?Sized>(g: &mut Graph, mu: Var, log_var: Var, rng: &mut R) -> Var {
    let (r, c) = g.shape(mu);
    let noise = standard_normal_tensor(r, c, rng);
    gaussian_reparam_with_noise(g, mu, log_var, noise)
}

/// `softmax((logits + gumbel) / tau)` row-wise.
pub fn gumbel_softmax_with_noise(g: &mut Graph, logits: Var, tau: f64, gumbel: Tensor) -> Var {
    assert!(tau > 0.0, "gumbel-softmax temperature must be positive");
    assert_eq!(g.shape(logits), gumbel.shape(), "gumbel noise shape");
    let noise = g.constant(gumbel);
    let perturbed = g.add(logits, noise);
    let scaled = g.scale(perturbed, 1.0 / tau);
    g.softmax_rows(scaled)
}

pub fn gumbel_softmax<R: Rng + ?Sized>(g: &mut Graph, logits: Var, tau: f64, rng: &mut R) -> Var {
    let (r, c) = g.shape(logits);
    let noise = gumbel_tensor(r, c, rng);
    gumbel_softmax_with_noise(g, logits, tau, noise)
}
