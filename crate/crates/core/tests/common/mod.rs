#![allow(dead_code)]

use hivae::compute::{Graph, ParamStore, Var};
use hivae::tabular::{ColumnSpec, HeterogeneousTable, MissingMask, Schema};
use hivae::training::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const FD_TOL: f64 = 1e-3;
/// Gradients smaller than this are compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-4;

pub fn mixed_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::real("r"),
        ColumnSpec::positive("p"),
        ColumnSpec::count("n"),
        ColumnSpec::categorical("c", 3),
        ColumnSpec::ordinal("o", 4),
        ColumnSpec::real("r2"),
    ])
    .unwrap()
}

/// Random valid cells for every column of `schema`, fully observed.
pub fn random_table(schema: &Schema, rows: usize, seed: u64) -> (HeterogeneousTable, MissingMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(rows * schema.len());
    for _ in 0..rows {
        for c in schema.columns() {
            cells.push(match c.kind {
                hivae::tabular::ColumnKind::Real => rng.random_range(-3.0..3.0),
                hivae::tabular::ColumnKind::PositiveReal => rng.random_range(0.1..5.0),
                hivae::tabular::ColumnKind::Count => rng.random_range(0..6) as f64,
                _ => rng.random_range(0..c.cardinality) as f64,
            });
        }
    }
    let mask = MissingMask::all_observed(rows, schema.len());
    (HeterogeneousTable::new(schema.clone(), rows, cells, &mask).unwrap(), mask)
}

/// Hides each cell with probability `p`.
pub fn random_mask(rows: usize, cols: usize, p: f64, seed: u64) -> MissingMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MissingMask::from_flags(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>() >= p).collect())
}

pub fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig { dim_z: 2, dim_s: 2, dim_y: 2, epochs: 1, batch_size: 4, seed, ..TrainConfig::default() }
}

/// Largest relative error between backpropagated and central-difference
/// gradients over every entry of every trainable parameter.
pub fn max_gradient_error<F>(store: &ParamStore, build: F) -> f64
where
    F: Fn(&ParamStore) -> (Graph, Var),
{
    let mut analytic = store.clone();
    analytic.zero_grads();
    let (g, loss) = build(store);
    g.backward(loss, &mut analytic).unwrap();
    let mut worst: f64 = 0.0;
    for id in store.ids() {
        if !store.get(id).trainable {
            continue;
        }
        for i in 0..store.value(id).len() {
            let eval = |delta: f64| {
                let mut s = store.clone();
                s.value_mut(id).data_mut()[i] += delta;
                let (g, l) = build(&s);
                g.value(l).item()
            };
            let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
            let a = analytic.grad(id)[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Smallest `|pre-activation|` over the ReLU hidden layers of `mlp` on `x`.
/// Central differences are meaningless when a perturbation can cross a kink.
pub fn relu_margin(store: &ParamStore, mlp: &hivae::compute::Mlp, x: &hivae::compute::Tensor) -> f64 {
    let mut g = Graph::new();
    let mut h = g.constant(x.clone());
    let mut margin = f64::INFINITY;
    for layer in &mlp.layers[..mlp.layers.len() - 1] {
        let w = g.param(store, layer.weight);
        let b = g.param(store, layer.bias);
        let xw = g.matmul(h, w);
        let pre = g.add_bias(xw, b);
        margin = g.value(pre).data().iter().fold(margin, |m, v| m.min(v.abs()));
        h = g.relu(pre);
    }
    margin
}

/// Input draws closer than this to a ReLU kink are rejected.
pub const KINK_MARGIN: f64 = 1e-2;
