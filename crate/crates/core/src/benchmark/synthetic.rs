//! Seeded mixed-type datasets with known structure.
//!
//! `correlated_dataset` draws a latent `u ∈ R⁴` from an equal-weight mixture
//! of `N(+m, I)` and `N(−m, I)` and maps it to seven columns:
//!
//! | column | kind | value |
//! |---|---|---|
//! | `real_a` | real | `a·u + 0.1 ε` |
//! | `real_b` | real | `2 tanh(b·u) + 0.1 ε` |
//! | `pos` | pos | `exp(0.5 c·u + 0.1 ε)` |
//! | `count` | count | `Poisson(softplus(d·u))` |
//! | `cat_a`, `cat_b` | cat, 3 classes | `argmax(W u)` |
//! | `ord` | ordinal, 4 classes | `e·u` binned at −1, 0, 1 |
//!
//! `m`, the row vectors `a … e` (scaled to unit norm) and the `3 × 4`
//! matrices `W` come from [`STRUCTURE_SEED`]; `m` has norm 2. Only the rows
//! depend on the caller's seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::compute::softplus;
use crate::tabular::{ColumnSpec, HeterogeneousTable, MissingMask, Schema};

pub const STRUCTURE_SEED: u64 = 0x4856_4145;
const LATENT: usize = 4;

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(v: &[f64]) -> usize {
    (1..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

struct Structure {
    mean: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    w: [Vec<Vec<f64>>; 2],
}

impl Structure {
    fn fixed() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(STRUCTURE_SEED);
        let mean = unit(gaussian_vec(&mut rng, LATENT)).into_iter().map(|x| 2.0 * x).collect();
        let a = unit(gaussian_vec(&mut rng, LATENT));
        let b = unit(gaussian_vec(&mut rng, LATENT));
        let c = unit(gaussian_vec(&mut rng, LATENT));
        let d = unit(gaussian_vec(&mut rng, LATENT));
        let e = unit(gaussian_vec(&mut rng, LATENT));
        let mut matrix = || (0..3).map(|_| gaussian_vec(&mut rng, LATENT)).collect::<Vec<_>>();
        let w = [matrix(), matrix()];
        Self { mean, a, b, c, d, e, w }
    }
}

pub fn correlated_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::real("real_a"),
        ColumnSpec::real("real_b"),
        ColumnSpec::positive("pos"),
        ColumnSpec::count("count"),
        ColumnSpec::categorical("cat_a", 3),
        ColumnSpec::categorical("cat_b", 3),
        ColumnSpec::ordinal("ord", 4),
    ])
    .expect("fixed schema")
}

/// The seven-column mixed-type dataset described in the module docs, fully observed.
pub fn correlated_dataset(rows: usize, seed: u64) -> (HeterogeneousTable, MissingMask) {
    let st = Structure::fixed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(rows * 7);
    for _ in 0..rows {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let u: Vec<f64> = st.mean.iter().map(|m| sign * m + rng.sample::<f64, _>(StandardNormal)).collect();
        let noise = |rng: &mut ChaCha8Rng| 0.1 * rng.sample::<f64, _>(StandardNormal);
        cells.push(dot(&st.a, &u) + noise(&mut rng));
        cells.push(2.0 * dot(&st.b, &u).tanh() + noise(&mut rng));
        cells.push((0.5 * dot(&st.c, &u) + noise(&mut rng)).exp());
        let rate = softplus(dot(&st.d, &u));
        cells.push(Poisson::new(rate).expect("positive rate").sample(&mut rng).floor());
        for w in &st.w {
            let scores: Vec<f64> = w.iter().map(|row| dot(row, &u)).collect();
            cells.push(argmax(&scores) as f64);
        }
        let score = dot(&st.e, &u);
        cells.push([-1.0, 0.0, 1.0].iter().filter(|t| score > **t).count() as f64);
    }
    let mask = MissingMask::all_observed(rows, 7);
    let table = HeterogeneousTable::new(correlated_schema(), rows, cells, &mask).expect("generated cells are valid");
    (table, mask)
}

pub fn separable_schema() -> Schema {
    Schema::new(vec![
        ColumnSpec::real("x1"),
        ColumnSpec::real("x2"),
        ColumnSpec::positive("scale"),
        ColumnSpec::categorical("label", 3),
    ])
    .expect("fixed schema")
}

/// Three well-separated clusters in the `(x1, x2)` plane, centred at radius 3
/// and angles 0°, 120°, 240° with noise 0.5. `label` is the index of the
/// nearest centre, a deterministic function of `(x1, x2)`; `scale` is
/// `exp(0.3 x1 + 0.1 ε)`.
pub fn separable_dataset(rows: usize, seed: u64) -> (HeterogeneousTable, MissingMask) {
    let centres: Vec<(f64, f64)> = (0..3)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            (3.0 * a.cos(), 3.0 * a.sin())
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(rows * 4);
    for _ in 0..rows {
        let k = rng.random_range(0..3);
        let x1 = centres[k].0 + 0.5 * rng.sample::<f64, _>(StandardNormal);
        let x2 = centres[k].1 + 0.5 * rng.sample::<f64, _>(StandardNormal);
        let dist: Vec<f64> = centres.iter().map(|c| -((x1 - c.0).powi(2) + (x2 - c.1).powi(2))).collect();
        let scale = (0.3 * x1 + 0.1 * rng.sample::<f64, _>(StandardNormal)).exp();
        cells.extend_from_slice(&[x1, x2, scale, argmax(&dist) as f64]);
    }
    let mask = MissingMask::all_observed(rows, 4);
    let table = HeterogeneousTable::new(separable_schema(), rows, cells, &mask).expect("generated cells are valid");
    (table, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlated_is_seeded_and_valid() {
        let (a, _) = correlated_dataset(200, 3);
        let (b, _) = correlated_dataset(200, 3);
        let (c, _) = correlated_dataset(200, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for d in [4, 5, 6] {
            let classes: std::collections::BTreeSet<usize> = (0..200).map(|n| a.class(n, d)).collect();
            assert!(classes.len() >= 2, "column {d} is degenerate");
        }
    }

    #[test]
    fn separable_label_is_nearest_centre() {
        let (t, _) = separable_dataset(300, 1);
        for n in 0..300 {
            let angle = t.get(n, 1).atan2(t.get(n, 0)).rem_euclid(2.0 * std::f64::consts::PI);
            let sector =
                ((angle + std::f64::consts::PI / 3.0) / (2.0 * std::f64::consts::PI / 3.0)).floor() as usize % 3;
            assert_eq!(t.class(n, 3), sector);
        }
    }
}
