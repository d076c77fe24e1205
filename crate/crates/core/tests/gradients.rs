//! Backpropagated gradients against central finite differences.

mod common;

use common::{
    max_gradient_error, mixed_schema, random_mask, random_table, relu_margin, tiny_config, FD_TOL, KINK_MARGIN,
};
use hivae::compute::{Activation, Graph, Mlp, ParamStore, Tensor};
use hivae::generative::column_log_lik;
use hivae::tabular::{fit_normalization, ColumnKind, ColumnSpec, NormalizationStats, Schema};
use hivae::training::{elbo_batch_with_noise, ElboNoise, EncoderMode, HiVae, TrainConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn elbo_error(schema: &Schema, config: &TrainConfig, seed: u64, missing: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (table, _) = random_table(schema, 4, seed);
    let mask = random_mask(4, schema.len(), missing, seed + 1);
    let model = HiVae::new(schema, config, &mut rng).unwrap();
    let rows = [0, 1, 2, 3];
    let stats = if config.normalization {
        fit_normalization(&table, &mask, &rows)
    } else {
        NormalizationStats::identity(schema)
    };
    let noise = ElboNoise::draw(&model, 4, &mut rng);
    let weights = random_tensor(4, 1, 1.0, &mut rng);
    max_gradient_error(&model.store, |store| {
        let m = HiVae { store: store.clone(), ..model.clone() };
        let mut e = elbo_batch_with_noise(&m, &table, &mask, &rows, &stats, 0.7, noise.clone()).unwrap();
        // weighting the rows checks each per-row gradient, not only their sum
        let w = e.graph.constant(weights.clone());
        let weighted = e.graph.mul(e.terms.per_row, w);
        let loss = e.graph.sum(weighted);
        (e.graph, loss)
    })
}

fn small_schema() -> Schema {
    Schema::new(vec![ColumnSpec::real("a"), ColumnSpec::categorical("b", 3), ColumnSpec::ordinal("c", 3)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn mlp_matches_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "net", &[3, 4, 2], Activation::Softplus, &mut rng);
        let x = loop {
            let x = random_tensor(5, 3, 2.0, &mut rng);
            if relu_margin(&store, &mlp, &x) > KINK_MARGIN {
                break x;
            }
        };
        let err = max_gradient_error(&store, |s| {
            let mut g = Graph::new();
            let xv = g.constant(x.clone());
            let y = mlp.forward(&mut g, s, xv).unwrap();
            let t = g.tanh(y);
            let loss = g.sum(t);
            (g, loss)
        });
        prop_assert!(err < FD_TOL, "relative error {err}");
    }

    #[test]
    fn likelihoods_match_finite_differences(seed in any::<u64>()) {
        let schema = mixed_schema();
        let (table, mask) = random_table(&schema, 5, seed);
        let stats = fit_normalization(&table, &mask, &[0, 1, 2, 3, 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (d, spec) in schema.columns().iter().enumerate() {
            let (loc_w, scale_w) = match spec.kind {
                ColumnKind::Real | ColumnKind::PositiveReal => (1, 1),
                ColumnKind::Count => (1, 0),
                ColumnKind::Categorical => (spec.cardinality - 1, 0),
                ColumnKind::Ordinal => (1, spec.cardinality - 1),
            };
            let mut store = ParamStore::new();
            let loc = store.add("loc", random_tensor(5, loc_w, 1.5, &mut rng), true);
            let scale = (scale_w > 0).then(|| store.add("scale", random_tensor(5, scale_w, 1.5, &mut rng), true));
            let values = table.column_values(d);
            let observed = vec![true, true, false, true, true];
            let err = max_gradient_error(&store, |s| {
                let mut g = Graph::new();
                let l = g.param(s, loc);
                let sc = scale.map(|id| g.param(s, id));
                let ll = column_log_lik(&mut g, spec, stats.column(d), l, sc, &values, &observed);
                let loss = g.sum(ll);
                (g, loss)
            });
            prop_assert!(err < FD_TOL, "{}: relative error {err}", spec.kind.as_str());
        }
    }

    #[test]
    fn kl_terms_match_finite_differences(seed in any::<u64>()) {
        let schema = small_schema();
        let config = tiny_config(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (table, mask) = random_table(&schema, 4, seed);
        let model = HiVae::new(&schema, &config, &mut rng).unwrap();
        let rows = [0, 1, 2, 3];
        let stats = fit_normalization(&table, &mask, &rows);
        let noise = ElboNoise::draw(&model, 4, &mut rng);
        for term in 0..2 {
            let err = max_gradient_error(&model.store, |store| {
                let m = HiVae { store: store.clone(), ..model.clone() };
                let mut e = elbo_batch_with_noise(&m, &table, &mask, &rows, &stats, 0.7, noise.clone()).unwrap();
                let v = if term == 0 { e.terms.kl_z } else { e.terms.kl_s };
                let loss = e.graph.sum(v);
                (e.graph, loss)
            });
            prop_assert!(err < FD_TOL, "term {term}: relative error {err}");
        }
    }

    #[test]
    fn per_row_elbo_matches_finite_differences(seed in any::<u64>()) {
        let err = elbo_error(&small_schema(), &tiny_config(seed), seed, 0.3);
        prop_assert!(err < FD_TOL, "relative error {err}");
    }
}

#[test]
fn elbo_variants_match_finite_differences() {
    let schema = mixed_schema();
    let variants = [
        tiny_config(1),
        TrainConfig { layers: 2, hidden: 3, ..tiny_config(2) },
        TrainConfig { dim_s: 1, ..tiny_config(3) },
        TrainConfig { dim_s: 1, encoder: EncoderMode::Factorized, ..tiny_config(4) },
        TrainConfig { exact_kl_z: true, dim_s: 3, ..tiny_config(5) },
        TrainConfig { normalization: false, ..tiny_config(6) },
    ];
    for (i, config) in variants.iter().enumerate() {
        let err = elbo_error(&schema, config, 100 + i as u64, 0.25);
        assert!(err < FD_TOL, "variant {i}: relative error {err}");
    }
}
