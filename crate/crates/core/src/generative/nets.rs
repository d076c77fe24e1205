use rand::Rng;
use statrs::function::gamma::ln_gamma;

use super::likelihood::{column_params, LikelihoodParams, GAP_FLOOR, PROB_FLOOR, RATE_FLOOR, VAR_FLOOR};
use crate::compute::{Activation, ComputeError, DenseLayer, Graph, Mlp, ParamId, ParamStore, Tensor, Var};
use crate::tabular::{ColumnKind, ColumnSpec, ColumnStats, NormalizationStats, Schema};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Output head of one attribute.
///
/// The location layer reads `(y_d, s)`; the scale layer, present for real,
/// positive and ordinal columns, reads `s` alone.
#[derive(Clone, Debug)]
pub struct ColumnHead {
    pub location: DenseLayer,
    pub scale: Option<DenseLayer>,
}

/// Mixture-prior means, the shared network `g(z) → Y` and one head per attribute.
#[derive(Clone, Debug)]
pub struct GenerativeNets {
    /// `L × K` table; row `l` is the mean of mixture component `l`.
    pub prior_mean: ParamId,
    pub shared: Mlp,
    pub heads: Vec<ColumnHead>,
    pub dim_z: usize,
    pub dim_s: usize,
    pub dim_y: usize,
}

/// Raw head outputs for a batch, one entry per attribute.
pub struct HeadOutputs {
    pub location: Vec<Var>,
    pub scale: Vec<Option<Var>>,
}

fn head_widths(spec: &ColumnSpec) -> (usize, usize) {
    match spec.kind {
        ColumnKind::Real | ColumnKind::PositiveReal => (1, 1),
        ColumnKind::Count => (1, 0),
        ColumnKind::Categorical => (spec.cardinality - 1, 0),
        ColumnKind::Ordinal => (1, spec.cardinality - 1),
    }
}

impl GenerativeNets {
    /// With a single mixture component the prior mean is frozen at zero, which
    /// makes the prior a standard normal.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        schema: &Schema,
        dim_z: usize,
        dim_s: usize,
        dim_y: usize,
        hidden: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let prior = if dim_s == 1 {
            store.add("dec.prior_mean", Tensor::zeros(1, dim_z), false)
        } else {
            let limit = (6.0 / (dim_s + dim_z) as f64).sqrt();
            let v = (0..dim_s * dim_z).map(|_| rng.random_range(-limit..limit)).collect();
            store.add("dec.prior_mean", Tensor::new(dim_s, dim_z, v).expect("shape"), true)
        };
        let d = schema.len();
        let dims: Vec<usize> = match hidden {
            Some(h) => vec![dim_z, h, d * dim_y],
            None => vec![dim_z, d * dim_y],
        };
        let shared = Mlp::new(store, "dec.shared", &dims, Activation::Identity, rng);
        let heads = schema
            .columns()
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let (loc_w, scale_w) = head_widths(spec);
                let location = DenseLayer::new(
                    store,
                    &format!("dec.head{i}.location"),
                    dim_y + dim_s,
                    loc_w,
                    Activation::Identity,
                    rng,
                );
                let scale = (scale_w > 0).then(|| {
                    DenseLayer::new(store, &format!("dec.head{i}.scale"), dim_s, scale_w, Activation::Identity, rng)
                });
                ColumnHead { location, scale }
            })
            .collect();
        Self { prior_mean: prior, shared, heads, dim_z, dim_s, dim_y }
    }

    /// `μ_p(s) = s · prior_mean` for every row of `s`.
    pub fn prior_mean(&self, g: &mut Graph, store: &ParamStore, s: Var) -> Var {
        let table = g.param(store, self.prior_mean);
        g.matmul(s, table)
    }

    /// Runs `g(z)` and every head for a batch of latents.
    pub fn heads(&self, g: &mut Graph, store: &ParamStore, z: Var, s: Var) -> Result<HeadOutputs, ComputeError> {
        let y = self.shared.forward(g, store, z)?;
        let mut location = Vec::with_capacity(self.heads.len());
        let mut scale = Vec::with_capacity(self.heads.len());
        for (d, head) in self.heads.iter().enumerate() {
            let yd = g.slice_cols(y, d * self.dim_y, (d + 1) * self.dim_y);
            let input = g.concat_cols(&[yd, s]);
            location.push(head.location.forward(g, store, input)?);
            scale.push(match &head.scale {
                Some(layer) => Some(layer.forward(g, store, s)?),
                None => None,
            });
        }
        Ok(HeadOutputs { location, scale })
    }

    /// Decoded likelihood parameters, `[row][attribute]`, for latent batches
    /// `z` (`n × K`) and `s` (`n × L`).
    pub fn decode(
        &self,
        store: &ParamStore,
        schema: &Schema,
        z: &Tensor,
        s: &Tensor,
        stats: &NormalizationStats,
    ) -> Result<Vec<Vec<LikelihoodParams>>, ComputeError> {
        let mut g = Graph::new();
        let zv = g.constant(z.clone());
        let sv = g.constant(s.clone());
        let out = self.heads(&mut g, store, zv, sv)?;
        let n = z.rows();
        let mut rows = vec![Vec::with_capacity(schema.len()); n];
        for (d, spec) in schema.columns().iter().enumerate() {
            let loc = g.value(out.location[d]).clone();
            let scale = out.scale[d].map(|v| g.value(v).clone());
            for (r, row) in rows.iter_mut().enumerate() {
                let sc: &[f64] = scale.as_ref().map_or(&[], |t| t.row_slice(r));
                row.push(column_params(spec, stats.column(d), loc.row_slice(r), sc));
            }
        }
        Ok(rows)
    }
}

/// Neutral stand-in for a missing cell; keeps every term finite before masking.
fn neutral_value(spec: &ColumnSpec, stats: Option<&ColumnStats>) -> f64 {
    match spec.kind {
        ColumnKind::Real => stats.map_or(0.0, |s| s.shift),
        ColumnKind::PositiveReal => 1.0,
        _ => 0.0,
    }
}

/// Per-row log-likelihood of one attribute, `n × 1`, zeroed on missing rows.
///
/// `values` and `observed` are aligned with the batch rows; values of
/// unobserved rows are never read.
pub fn column_log_lik(
    g: &mut Graph,
    spec: &ColumnSpec,
    stats: Option<&ColumnStats>,
    location: Var,
    scale: Option<Var>,
    values: &[f64],
    observed: &[bool],
) -> Var {
    let n = values.len();
    let neutral = neutral_value(spec, stats);
    let x: Vec<f64> = values.iter().zip(observed).map(|(v, o)| if *o { *v } else { neutral }).collect();
    let ll = match spec.kind {
        ColumnKind::Real | ColumnKind::PositiveReal => {
            let st = stats.expect("numeric column stats");
            let positive = spec.kind == ColumnKind::PositiveReal;
            let xn: Vec<f64> = x.iter().map(|v| ((if positive { v.ln() } else { *v }) - st.shift) / st.scale).collect();
            // constant part: -ln(2π)/2 - ln σ' (- ln x for the log-normal Jacobian)
            let offset: Vec<f64> =
                x.iter().map(|v| -HALF_LN_2PI - st.scale.ln() - if positive { v.ln() } else { 0.0 }).collect();
            let raw = g.softplus(scale.expect("scale head"));
            let var = g.clamp_min(raw, VAR_FLOOR);
            let xc = g.constant(Tensor::column(xn));
            let diff = g.sub(xc, location);
            let sq = g.square(diff);
            let quad = g.div(sq, var);
            let quad = g.scale(quad, -0.5);
            let lnv = g.ln(var);
            let lnv = g.scale(lnv, -0.5);
            let off = g.constant(Tensor::column(offset));
            let partial = g.add(quad, lnv);
            g.add(partial, off)
        }
        ColumnKind::Count => {
            let raw = g.softplus(location);
            let rate = g.clamp_min(raw, RATE_FLOOR);
            let ln_rate = g.ln(rate);
            let xc = g.constant(Tensor::column(x.clone()));
            let xl = g.mul(xc, ln_rate);
            let partial = g.sub(xl, rate);
            let lf = g.constant(Tensor::column(x.iter().map(|v| -ln_gamma(v + 1.0)).collect()));
            g.add(partial, lf)
        }
        ColumnKind::Categorical => {
            let zero = g.constant(Tensor::zeros(n, 1));
            let logits = g.concat_cols(&[zero, location]);
            let lp = g.log_softmax_rows(logits);
            let onehot = g.constant(one_hot(&x, spec.cardinality));
            let picked = g.mul(lp, onehot);
            g.sum_cols(picked)
        }
        ColumnKind::Ordinal => {
            let r = spec.cardinality;
            let raw = g.softplus(scale.expect("threshold head"));
            let gaps = g.clamp_min(raw, GAP_FLOOR);
            let thresholds = g.cumsum_cols(gaps);
            let loc = g.broadcast_cols(location, r - 1);
            let centered = g.sub(thresholds, loc);
            let cdf = g.sigmoid(centered);
            let ones = g.constant(Tensor::filled(n, 1, 1.0));
            let cdf = g.concat_cols(&[cdf, ones]);
            // p_r = F_r - F_{r-1}
            let mut diff = Tensor::zeros(r, r);
            for c in 0..r {
                diff.set(c, c, 1.0);
                if c > 0 {
                    diff.set(c - 1, c, -1.0);
                }
            }
            let diff = g.constant(diff);
            let probs = g.matmul(cdf, diff);
            let probs = g.clamp_min(probs, PROB_FLOOR);
            let lp = g.ln(probs);
            let onehot = g.constant(one_hot(&x, r));
            let picked = g.mul(lp, onehot);
            g.sum_cols(picked)
        }
    };
    let mask = g.constant(Tensor::column(observed.iter().map(|o| if *o { 1.0 } else { 0.0 }).collect()));
    g.mul(ll, mask)
}

fn one_hot(classes: &[f64], r: usize) -> Tensor {
    let mut t = Tensor::zeros(classes.len(), r);
    for (i, c) in classes.iter().enumerate() {
        t.set(i, *c as usize, 1.0);
    }
    t
}
