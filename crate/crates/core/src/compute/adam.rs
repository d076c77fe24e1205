use serde::{Deserialize, Serialize};

use super::params::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers are shaped like the store's parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let shapes: Vec<Vec<f64>> = store.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self { config, step: 0, first: shapes.clone(), second: shapes }
    }

    /// Applies one update to every trainable parameter, then zeroes all gradients.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, p) in store.params_mut().iter_mut().enumerate() {
            if p.trainable {
                let (m, v) = (&mut self.first[i], &mut self.second[i]);
                for ((w, g), (mj, vj)) in p.value.data_mut().iter_mut().zip(&p.grad).zip(m.iter_mut().zip(v.iter_mut()))
                {
                    *mj = beta1 * *mj + (1.0 - beta1) * g;
                    *vj = beta2 * *vj + (1.0 - beta2) * g * g;
                    let mhat = *mj / c1;
                    let vhat = *vj / c2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}
