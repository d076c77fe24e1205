//! Recognition model `q(s, z | x°)`: the input drop-out encoder, the
//! factorized product-of-experts alternative, and latent sampling.

use rand::Rng;

use crate::compute::{
    gaussian_reparam, gumbel_softmax, Activation, ComputeError, DenseLayer, Graph, Mlp, ParamStore, Tensor, Var,
    LOG_VAR_MAX, LOG_VAR_MIN,
};
use crate::tabular::{EncodedBatch, Schema};

/// Encoder outputs for one row.
#[derive(Clone, Debug, PartialEq)]
pub struct RecognitionParams {
    /// Unnormalized log-probabilities of the mixture component.
    pub s_logits: Vec<f64>,
    pub z_mu: Vec<f64>,
    /// Clamped into `[LOG_VAR_MIN, LOG_VAR_MAX]`.
    pub z_log_var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentSample {
    /// Point on the `L`-simplex (exactly one-hot for MAP latents).
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    /// Gumbel-softmax temperature, `None` for MAP latents.
    pub tau: Option<f64>,
}

/// Encoder fed with the zero-filled input `x̃`; the z networks also read `s`.
#[derive(Clone, Debug)]
pub struct DropoutEncoder {
    pub s_net: Mlp,
    pub z_mean: Mlp,
    pub z_log_var: Mlp,
}

/// Per-attribute Gaussian experts fused with the standard-normal prior.
#[derive(Clone, Debug)]
pub struct FactorizedEncoder {
    pub experts: Vec<(DenseLayer, DenseLayer)>,
    pub slots: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub enum EncoderNets {
    InputDropout(DropoutEncoder),
    Factorized(FactorizedEncoder),
}

impl EncoderNets {
    pub fn input_dropout<R: Rng + ?Sized>(
        store: &mut ParamStore,
        width: usize,
        dim_z: usize,
        dim_s: usize,
        hidden: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let dims = |i: usize, o: usize| match hidden {
            Some(h) => vec![i, h, o],
            None => vec![i, o],
        };
        let s_net = Mlp::new(store, "enc.s", &dims(width, dim_s), Activation::Identity, rng);
        let z_mean = Mlp::new(store, "enc.z_mean", &dims(width + dim_s, dim_z), Activation::Identity, rng);
        let z_log_var = Mlp::new(store, "enc.z_log_var", &dims(width + dim_s, dim_z), Activation::Identity, rng);
        Self::InputDropout(DropoutEncoder { s_net, z_mean, z_log_var })
    }

    pub fn factorized<R: Rng + ?Sized>(store: &mut ParamStore, schema: &Schema, dim_z: usize, rng: &mut R) -> Self {
        let layout = crate::tabular::EncodingLayout::new(schema);
        let slots: Vec<(usize, usize)> = (0..schema.len()).map(|d| layout.slots(d)).collect();
        let experts = slots
            .iter()
            .enumerate()
            .map(|(d, &(_, w))| {
                let mean = DenseLayer::new(store, &format!("enc.expert{d}.mean"), w, dim_z, Activation::Identity, rng);
                let lv = DenseLayer::new(store, &format!("enc.expert{d}.log_var"), w, dim_z, Activation::Identity, rng);
                (mean, lv)
            })
            .collect();
        Self::Factorized(FactorizedEncoder { experts, slots })
    }

    pub fn is_factorized(&self) -> bool {
        matches!(self, Self::Factorized(_))
    }

    /// Mixture logits, `n × L`. The factorized encoder has a single component.
    pub fn s_logits(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, ComputeError> {
        match self {
            Self::InputDropout(enc) => enc.s_net.forward(g, store, x),
            Self::Factorized(_) => {
                let n = g.shape(x).0;
                Ok(g.constant(Tensor::zeros(n, 1)))
            }
        }
    }

    /// Mean and clamped log-variance of `q(z | x°, s)`, each `n × K`.
    ///
    /// `observed` is the `n × D` 0/1 indicator matrix; only the factorized
    /// encoder reads it, since zero-filled slots already silence missing
    /// attributes in the drop-out encoder.
    pub fn z_params(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        s: Var,
        observed: &Tensor,
    ) -> Result<(Var, Var), ComputeError> {
        match self {
            Self::InputDropout(enc) => {
                let xs = g.concat_cols(&[x, s]);
                let mu = enc.z_mean.forward(g, store, xs)?;
                let raw = enc.z_log_var.forward(g, store, xs)?;
                let lv = g.clamp(raw, LOG_VAR_MIN, LOG_VAR_MAX);
                Ok((mu, lv))
            }
            Self::Factorized(enc) => enc.fuse(g, store, x, observed),
        }
    }
}

impl FactorizedEncoder {
    /// Precision-weighted fusion: `Σ_q⁻¹ = I + Σ_{d∈O} Σ_d⁻¹` and
    /// `μ_q = Σ_q Σ_{d∈O} Σ_d⁻¹ μ_d`, all diagonal.
    fn fuse(&self, g: &mut Graph, store: &ParamStore, x: Var, observed: &Tensor) -> Result<(Var, Var), ComputeError> {
        let n = g.shape(x).0;
        let k = self.experts[0].0.out_dim;
        let mut precision = g.constant(Tensor::filled(n, k, 1.0));
        let mut weighted = g.constant(Tensor::zeros(n, k));
        for (d, ((mean, log_var), &(off, w))) in self.experts.iter().zip(&self.slots).enumerate() {
            let xd = g.slice_cols(x, off, off + w);
            let mu_d = mean.forward(g, store, xd)?;
            let raw = log_var.forward(g, store, xd)?;
            let lv_d = g.clamp(raw, LOG_VAR_MIN, LOG_VAR_MAX);
            let neg = g.neg(lv_d);
            let prec_d = g.exp(neg);
            let m: Vec<f64> = (0..n).flat_map(|r| std::iter::repeat_n(observed.get(r, d), k)).collect();
            let mask = g.constant(Tensor::new(n, k, m).expect("mask shape"));
            let prec_d = g.mul(prec_d, mask);
            let contrib = g.mul(mu_d, prec_d);
            precision = g.add(precision, prec_d);
            weighted = g.add(weighted, contrib);
        }
        let mu = g.div(weighted, precision);
        let ln_prec = g.ln(precision);
        let lv = g.neg(ln_prec);
        Ok((mu, lv))
    }
}

/// Fuses diagonal Gaussian experts `(mean, variance)` with a standard-normal prior.
pub fn fuse_experts(experts: &[(Vec<f64>, Vec<f64>)], dim_z: usize) -> (Vec<f64>, Vec<f64>) {
    let mut precision = vec![1.0; dim_z];
    let mut weighted = vec![0.0; dim_z];
    for (mu, var) in experts {
        for k in 0..dim_z {
            precision[k] += 1.0 / var[k];
            weighted[k] += mu[k] / var[k];
        }
    }
    let var: Vec<f64> = precision.iter().map(|p| 1.0 / p).collect();
    let mu = weighted.iter().zip(&var).map(|(w, v)| w * v).collect();
    (mu, var)
}

fn one_hot_argmax(logits: &[f64]) -> Vec<f64> {
    let mut best = 0;
    for (i, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = i;
        }
    }
    let mut s = vec![0.0; logits.len()];
    s[best] = 1.0;
    s
}

/// Hard component assignments for every row of `logits`.
pub fn argmax_rows(logits: &Tensor) -> Tensor {
    let rows: Vec<Vec<f64>> = (0..logits.rows()).map(|r| one_hot_argmax(logits.row_slice(r))).collect();
    Tensor::from_rows(&rows).expect("rows")
}

/// Encodes a batch. The z parameters are conditioned on `s` when given, and on
/// the argmax component of `q(s | x°)` otherwise.
pub fn encode(
    nets: &EncoderNets,
    store: &ParamStore,
    x: &EncodedBatch,
    s: Option<&Tensor>,
) -> Result<Vec<RecognitionParams>, ComputeError> {
    let mut g = Graph::new();
    let xv = g.constant(x.values.clone());
    let logits = nets.s_logits(&mut g, store, xv)?;
    let s_tensor = match s {
        Some(s) => s.clone(),
        None => argmax_rows(g.value(logits)),
    };
    let sv = g.constant(s_tensor);
    let (mu, lv) = nets.z_params(&mut g, store, xv, sv, &x.observed_tensor())?;
    Ok((0..x.rows())
        .map(|r| RecognitionParams {
            s_logits: g.value(logits).row_slice(r).to_vec(),
            z_mu: g.value(mu).row_slice(r).to_vec(),
            z_log_var: g.value(lv).row_slice(r).to_vec(),
        })
        .collect())
}

/// MAP latent of one row: one-hot argmax `s` (ties to the lowest index) and
/// `z = μ_q`. `params` must come from [`encode`] without an explicit `s`.
pub fn map_latent(params: &RecognitionParams) -> LatentSample {
    LatentSample { s: one_hot_argmax(&params.s_logits), z: params.z_mu.clone(), tau: None }
}

/// Draws `s` by Gumbel-softmax at temperature `tau`, then `z` from
/// `q(z | x°, s)` conditioned on that relaxed sample.
pub fn sample_latent<R: Rng + ?Sized>(
    nets: &EncoderNets,
    store: &ParamStore,
    x: &EncodedBatch,
    tau: f64,
    rng: &mut R,
) -> Result<Vec<LatentSample>, ComputeError> {
    let mut g = Graph::new();
    let xv = g.constant(x.values.clone());
    let logits = nets.s_logits(&mut g, store, xv)?;
    let s = gumbel_softmax(&mut g, logits, tau, rng);
    let (mu, lv) = nets.z_params(&mut g, store, xv, s, &x.observed_tensor())?;
    let z = gaussian_reparam(&mut g, mu, lv, rng);
    Ok((0..x.rows())
        .map(|r| LatentSample {
            s: g.value(s).row_slice(r).to_vec(),
            z: g.value(z).row_slice(r).to_vec(),
            tau: Some(tau),
        })
        .collect())
}
