use rand::Rng;

use super::HiVae;
use crate::compute::{
    gaussian_reparam_with_noise, gumbel_softmax_with_noise, gumbel_tensor, log_softmax, softmax,
    standard_normal_tensor, ComputeError, Graph, Tensor, Var,
};
use crate::generative::column_log_lik;
use crate::tabular::{encode_inputs, HeterogeneousTable, MissingMask, NormalizationStats};

/// Nodes of one ELBO evaluation. Per-row terms are `n × 1`.
#[derive(Clone, Copy, Debug)]
pub struct ElboTerms {
    /// Sum over rows of `recon - kl_z - kl_s`, `1 × 1`.
    pub total: Var,
    pub per_row: Var,
    /// Observed-cell log-likelihood at the sampled latents.
    pub reconstruction: Var,
    pub kl_z: Var,
    pub kl_s: Var,
    /// Relaxed component sample, `n × L`.
    pub s: Var,
    pub s_logits: Var,
    pub z: Var,
    pub z_mu: Var,
    pub z_log_var: Var,
    /// `μ_p(s)` at the sampled `s`, `n × K`.
    pub prior_mu: Var,
}

/// The Gumbel (`n × L`) and standard normal (`n × K`) draws behind one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ElboNoise {
    pub gumbel: Tensor,
    pub normal: Tensor,
}

impl ElboNoise {
    pub fn draw<R: Rng + ?Sized>(model: &HiVae, rows: usize, rng: &mut R) -> Self {
        let l = if model.encoder.is_factorized() { 1 } else { model.config.dim_s };
        let gumbel = gumbel_tensor(rows, l, rng);
        let normal = standard_normal_tensor(rows, model.config.dim_z, rng);
        Self { gumbel, normal }
    }
}

/// A recorded ELBO graph, ready for reading values or differentiating.
pub struct ElboEvaluation {
    pub graph: Graph,
    pub terms: ElboTerms,
}

impl ElboEvaluation {
    pub fn value(&self) -> f64 {
        self.graph.value(self.terms.total).item()
    }

    /// Row-major values of any recorded node.
    pub fn values(&self, var: Var) -> Vec<f64> {
        self.graph.value(var).data().to_vec()
    }
}

/// `KL(N(μ, diag exp(lv)) ‖ N(μ_p, I))`.
pub fn gaussian_kl(mu: &[f64], log_var: &[f64], prior_mu: &[f64]) -> f64 {
    mu.iter().zip(log_var).zip(prior_mu).map(|((m, lv), p)| 0.5 * (lv.exp() + (p - m).powi(2) - 1.0 - lv)).sum()
}

/// `KL(softmax(logits) ‖ uniform) = ln L − H`.
pub fn categorical_kl_uniform(logits: &[f64]) -> f64 {
    let p = softmax(logits);
    let lp = log_softmax(logits);
    p.iter().zip(&lp).map(|(p, lp)| p * lp).sum::<f64>() + (logits.len() as f64).ln()
}

/// `½ Σ_k (exp(lv) + (μ_p − μ)² − 1 − lv)`, row-wise.
fn gaussian_kl_rows(g: &mut Graph, mu: Var, lv: Var, prior_mu: Var) -> Var {
    let var = g.exp(lv);
    let diff = g.sub(prior_mu, mu);
    let sq = g.square(diff);
    let a = g.add(var, sq);
    let b = g.sub(a, lv);
    let c = g.affine(b, 0.5, -0.5);
    g.sum_cols(c)
}

/// Single-sample estimate of the HI-VAE evidence lower bound over `rows`.
///
/// One Gumbel-softmax draw of `s` at temperature `tau` and one Gaussian draw
/// of `z` per row feed the reconstruction term, which sums only observed
/// cells. The z-KL is closed-form at the sampled `s` (or enumerated over all
/// components when `exact_kl_z` is set) and the s-KL against the uniform
/// prior is `ln L − H(q(s|x°))`.
pub fn elbo_batch<R: Rng + ?Sized>(
    model: &HiVae,
    table: &HeterogeneousTable,
    mask: &MissingMask,
    rows: &[usize],
    stats: &NormalizationStats,
    tau: f64,
    rng: &mut R,
) -> Result<ElboEvaluation, ComputeError> {
    let noise = ElboNoise::draw(model, rows.len(), rng);
    elbo_batch_with_noise(model, table, mask, rows, stats, tau, noise)
}

/// [`elbo_batch`] with the sampling noise supplied by the caller.
pub fn elbo_batch_with_noise(
    model: &HiVae,
    table: &HeterogeneousTable,
    mask: &MissingMask,
    rows: &[usize],
    stats: &NormalizationStats,
    tau: f64,
    noise: ElboNoise,
) -> Result<ElboEvaluation, ComputeError> {
    assert!(!rows.is_empty(), "elbo_batch needs at least one row");
    let store = &model.store;
    let schema = &model.schema;
    let n = rows.len();
    let l = if model.encoder.is_factorized() { 1 } else { model.config.dim_s };

    let encoded = encode_inputs(table, mask, stats, rows);
    let observed = encoded.observed_tensor();
    let mut g = Graph::new();
    let x = g.constant(encoded.values.clone());

    let logits = model.encoder.s_logits(&mut g, store, x)?;
    let s = gumbel_softmax_with_noise(&mut g, logits, tau, noise.gumbel);
    let (mu, lv) = model.encoder.z_params(&mut g, store, x, s, &observed)?;
    let z = gaussian_reparam_with_noise(&mut g, mu, lv, noise.normal);

    let heads = model.decoder.heads(&mut g, store, z, s)?;
    let mut reconstruction = g.constant(Tensor::zeros(n, 1));
    for (d, spec) in schema.columns().iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|&r| table.get(r, d)).collect();
        let obs: Vec<bool> = rows.iter().map(|&r| mask.is_observed(r, d)).collect();
        let ll = column_log_lik(&mut g, spec, stats.column(d), heads.location[d], heads.scale[d], &values, &obs);
        reconstruction = g.add(reconstruction, ll);
    }

    let prior_mu = model.decoder.prior_mean(&mut g, store, s);
    let kl_z = if model.config.exact_kl_z && l > 1 {
        let probs = g.softmax_rows(logits);
        let mut total = g.constant(Tensor::zeros(n, 1));
        for c in 0..l {
            let mut onehot = Tensor::zeros(n, l);
            (0..n).for_each(|r| onehot.set(r, c, 1.0));
            let sc = g.constant(onehot);
            let (mu_c, lv_c) = model.encoder.z_params(&mut g, store, x, sc, &observed)?;
            let prior_c = model.decoder.prior_mean(&mut g, store, sc);
            let kl_c = gaussian_kl_rows(&mut g, mu_c, lv_c, prior_c);
            let w = g.slice_cols(probs, c, c + 1);
            let weighted = g.mul(w, kl_c);
            total = g.add(total, weighted);
        }
        total
    } else {
        gaussian_kl_rows(&mut g, mu, lv, prior_mu)
    };

    let kl_s = {
        let p = g.softmax_rows(logits);
        let lp = g.log_softmax_rows(logits);
        let plp = g.mul(p, lp);
        let neg_entropy = g.sum_cols(plp);
        g.affine(neg_entropy, 1.0, (l as f64).ln())
    };

    let kl = g.add(kl_z, kl_s);
    let per_row = g.sub(reconstruction, kl);
    let total = g.sum(per_row);
    Ok(ElboEvaluation {
        graph: g,
        terms: ElboTerms {
            total,
            per_row,
            reconstruction,
            kl_z,
            kl_s,
            s,
            s_logits: logits,
            z,
            z_mu: mu,
            z_log_var: lv,
            prior_mu,
        },
    })
}
