use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::compute::{sigmoid, softmax, softplus, Tensor};
use crate::tabular::{ColumnKind, ColumnSpec, ColumnStats};

/// Variances never drop below this.
pub const VAR_FLOOR: f64 = 1e-6;
/// Poisson rates never drop below this.
pub const RATE_FLOOR: f64 = 1e-6;
/// Minimum gap between consecutive ordinal thresholds.
pub const GAP_FLOOR: f64 = 1e-6;
/// Probabilities are floored here before taking logs inside the training objective.
pub const PROB_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("value {value} is outside the support of the {dist} distribution")]
    Domain { dist: &'static str, value: f64 },
}

/// Decoded, denormalized parameters of one attribute's likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum LikelihoodParams {
    Normal {
        mean: f64,
        var: f64,
    },
    /// Mean and variance of `ln x`.
    LogNormal {
        mu: f64,
        var: f64,
    },
    Poisson {
        rate: f64,
    },
    Categorical {
        probs: Vec<f64>,
    },
    Ordinal {
        location: f64,
        thresholds: Vec<f64>,
        probs: Vec<f64>,
    },
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn class_of(x: f64, probs: &[f64], dist: &'static str) -> Result<usize, LikelihoodError> {
    if x >= 0.0 && x.fract() == 0.0 && (x as usize) < probs.len() {
        Ok(x as usize)
    } else {
        Err(LikelihoodError::Domain { dist, value: x })
    }
}

fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean).powi(2) / var)
}

/// Exact log density (continuous kinds) or log mass (discrete kinds) at `x`.
pub fn log_likelihood(params: &LikelihoodParams, x: f64) -> Result<f64, LikelihoodError> {
    match params {
        LikelihoodParams::Normal { mean, var } => Ok(normal_log_density(x, *mean, *var)),
        LikelihoodParams::LogNormal { mu, var } => {
            if x <= 0.0 {
                return Err(LikelihoodError::Domain { dist: "log-normal", value: x });
            }
            Ok(normal_log_density(x.ln(), *mu, *var) - x.ln())
        }
        LikelihoodParams::Poisson { rate } => {
            if x < 0.0 || x.fract() != 0.0 {
                return Err(LikelihoodError::Domain { dist: "poisson", value: x });
            }
            Ok(x * rate.ln() - rate - ln_gamma(x + 1.0))
        }
        LikelihoodParams::Categorical { probs } => Ok(probs[class_of(x, probs, "categorical")?].ln()),
        LikelihoodParams::Ordinal { probs, .. } => Ok(probs[class_of(x, probs, "ordinal")?].ln()),
    }
}

/// Keeps log-normal values inside the open positive range after exp under/overflow.
fn positive(x: f64) -> f64 {
    x.clamp(f64::MIN_POSITIVE, f64::MAX)
}

/// Most probable value. Ties between classes resolve to the lowest index.
pub fn mode(params: &LikelihoodParams) -> f64 {
    match params {
        LikelihoodParams::Normal { mean, .. } => *mean,
        LikelihoodParams::LogNormal { mu, var } => positive((mu - var).exp()),
        LikelihoodParams::Poisson { rate } => rate.floor(),
        LikelihoodParams::Categorical { probs } | LikelihoodParams::Ordinal { probs, .. } => argmax(probs) as f64,
    }
}

/// One draw from the distribution.
pub fn sample<R: Rng + ?Sized>(params: &LikelihoodParams, rng: &mut R) -> f64 {
    match params {
        LikelihoodParams::Normal { mean, var } => mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal),
        LikelihoodParams::LogNormal { mu, var } => {
            positive((mu + var.sqrt() * rng.sample::<f64, _>(StandardNormal)).exp())
        }
        LikelihoodParams::Poisson { rate } => Poisson::new(*rate).expect("positive rate").sample(rng).floor(),
        LikelihoodParams::Categorical { probs } | LikelihoodParams::Ordinal { probs, .. } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i as f64;
                }
            }
            // u landed in the rounding slack above the last cumulative sum
            probs.iter().rposition(|p| *p > 0.0).unwrap_or(0) as f64
        }
    }
}

/// Ordinal category probabilities from a location and increasing thresholds.
pub(crate) fn ordinal_probs(location: f64, thresholds: &[f64]) -> Vec<f64> {
    let cdf: Vec<f64> = thresholds.iter().map(|t| sigmoid(t - location)).chain(std::iter::once(1.0)).collect();
    let mut probs = Vec::with_capacity(cdf.len());
    let mut prev = 0.0;
    for c in cdf {
        probs.push(c - prev);
        prev = c;
    }
    probs
}

/// Maps raw head outputs of one attribute to constrained, denormalized parameters.
///
/// `location` holds the outputs that read `(y_d, s)`, `scale` those that read
/// `s` alone: the variance pre-activation for real and positive columns, the
/// `R - 1` threshold gap pre-activations for ordinal columns, nothing otherwise.
pub fn column_params(
    spec: &ColumnSpec,
    stats: Option<&ColumnStats>,
    location: &[f64],
    scale: &[f64],
) -> LikelihoodParams {
    match spec.kind {
        ColumnKind::Real | ColumnKind::PositiveReal => {
            let st = stats.expect("numeric column stats");
            let var = softplus(scale[0]).max(VAR_FLOOR);
            let mean = st.scale * location[0] + st.shift;
            let var = st.scale * st.scale * var;
            if spec.kind == ColumnKind::Real {
                LikelihoodParams::Normal { mean, var }
            } else {
                LikelihoodParams::LogNormal { mu: mean, var }
            }
        }
        ColumnKind::Count => LikelihoodParams::Poisson { rate: softplus(location[0]).max(RATE_FLOOR) },
        ColumnKind::Categorical => {
            let logits: Vec<f64> = std::iter::once(0.0).chain(location.iter().copied()).collect();
            LikelihoodParams::Categorical { probs: softmax(&logits) }
        }
        ColumnKind::Ordinal => {
            let mut thresholds = Vec::with_capacity(scale.len());
            let mut acc = 0.0;
            for gap in scale {
                acc += softplus(*gap).max(GAP_FLOOR);
                thresholds.push(acc);
            }
            let probs = ordinal_probs(location[0], &thresholds);
            LikelihoodParams::Ordinal { location: location[0], thresholds, probs }
        }
    }
}

/// `ln N(z | s · prior_means, I)` where `prior_means` is the `L × K` table of
/// component means.
pub fn prior_log_density(z: &[f64], s: &[f64], prior_means: &Tensor) -> f64 {
    let k = z.len();
    assert_eq!(prior_means.cols(), k, "prior mean width");
    assert_eq!(prior_means.rows(), s.len(), "mixture weight length");
    let sq: f64 = (0..k)
        .map(|j| {
            let mu: f64 = s.iter().enumerate().map(|(l, w)| w * prior_means.get(l, j)).sum();
            (z[j] - mu).powi(2)
        })
        .sum();
    -0.5 * (k as f64 * LN_2PI + sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::StatsDomain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_at_mean() {
        let ll = log_likelihood(&LikelihoodParams::Normal { mean: 0.0, var: 1.0 }, 0.0).unwrap();
        assert!((ll + 0.9189385).abs() < 1e-6);
    }

    #[test]
    fn poisson_at_zero() {
        let ll = log_likelihood(&LikelihoodParams::Poisson { rate: 1.0 }, 0.0).unwrap();
        assert!((ll + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordinal_probabilities_from_sigmoids() {
        // thresholds (-1, 1) at location 0
        let probs = ordinal_probs(0.0, &[-1.0, 1.0]);
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let expected = [s(-1.0), s(1.0) - s(-1.0), 1.0 - s(1.0)];
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!((probs[0] - 0.2689).abs() < 1e-4 && (probs[1] - 0.4621).abs() < 1e-4);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(log_likelihood(&LikelihoodParams::LogNormal { mu: 0.0, var: 1.0 }, 0.0).is_err());
        assert!(log_likelihood(&LikelihoodParams::Poisson { rate: 1.0 }, 1.5).is_err());
        assert!(log_likelihood(&LikelihoodParams::Categorical { probs: vec![0.5, 0.5] }, 2.0).is_err());
    }

    #[test]
    fn modes() {
        let ln = mode(&LikelihoodParams::LogNormal { mu: 0.0, var: 1.0 });
        assert!((ln - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(mode(&LikelihoodParams::Poisson { rate: 2.7 }), 2.0);
        assert_eq!(mode(&LikelihoodParams::Poisson { rate: 3.0 }), 3.0);
        assert_eq!(mode(&LikelihoodParams::Categorical { probs: vec![0.2, 0.5, 0.3] }), 1.0);
        assert_eq!(mode(&LikelihoodParams::Categorical { probs: vec![0.4, 0.4, 0.2] }), 0.0);
    }

    #[test]
    fn categorical_zero_head_is_uniform() {
        let p = column_params(&ColumnSpec::categorical("c", 3), None, &[0.0, 0.0], &[]);
        match p {
            LikelihoodParams::Categorical { probs } => {
                assert!(probs.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ordinal_thresholds_are_cumulative() {
        // gap pre-activations whose softplus is exactly 1 and 2
        let inv = |y: f64| (y.exp() - 1.0).ln();
        let p = column_params(&ColumnSpec::ordinal("o", 3), None, &[0.0], &[inv(1.0), inv(2.0)]);
        match p {
            LikelihoodParams::Ordinal { thresholds, .. } => {
                assert!((thresholds[0] - 1.0).abs() < 1e-12 && (thresholds[1] - 3.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn normal_denormalization() {
        let st = ColumnStats { shift: 10.0, scale: 2.0, domain: StatsDomain::Raw };
        let inv_one = (1f64.exp() - 1.0).ln();
        let p = column_params(&ColumnSpec::real("r"), Some(&st), &[0.0], &[inv_one]);
        match p {
            LikelihoodParams::Normal { mean, var } => {
                assert!((mean - 10.0).abs() < 1e-12 && (var - 4.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prior_density_examples() {
        let table = Tensor::new(1, 1, vec![0.7]).unwrap();
        let at_peak = prior_log_density(&[0.7], &[1.0], &table);
        assert!((at_peak + 0.5 * LN_2PI).abs() < 1e-15);
        let two = Tensor::new(2, 1, vec![3.0, -3.0]).unwrap();
        // soft weights (1/2, 1/2) put the mean at 0
        let lp = prior_log_density(&[0.0], &[0.5, 0.5], &two);
        assert!((lp + 0.5 * LN_2PI).abs() < 1e-15);
        let zero = Tensor::zeros(1, 2);
        let std = prior_log_density(&[0.3, -1.2], &[1.0], &zero);
        let direct = -LN_2PI - 0.5 * (0.09 + 1.44);
        assert!((std - direct).abs() < 1e-14);
    }

    #[test]
    fn degenerate_and_point_mass_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = sample(&LikelihoodParams::Normal { mean: 2.5, var: VAR_FLOOR * 1e-6 }, &mut rng);
        assert!((x - 2.5).abs() < 1e-4);
        for _ in 0..100 {
            assert_eq!(sample(&LikelihoodParams::Categorical { probs: vec![1.0, 0.0, 0.0] }, &mut rng), 0.0);
        }
    }

    #[test]
    fn poisson_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let total: f64 = (0..n).map(|_| sample(&LikelihoodParams::Poisson { rate: 4.0 }, &mut rng)).sum();
        let mean = total / n as f64;
        assert!((mean - 4.0).abs() < 0.05, "mean {mean}");
    }
}
