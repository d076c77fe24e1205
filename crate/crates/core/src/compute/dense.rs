use rand::Rng;

use super::graph::{Graph, Tensor, Var};
use super::params::{ParamId, ParamStore};
use super::ComputeError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Softplus,
    Sigmoid,
}

impl Activation {
    fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::Softplus => g.softplus(x),
            Activation::Sigmoid => g.sigmoid(x),
        }
    }
}

/// Fully connected layer `activation(x · W + b)` with `W: in × out`.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl DenseLayer {
    /// Registers a new layer with weights uniform in `±sqrt(6 / (in + out))`
    /// and zero biases.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w: Vec<f64> = (0..in_dim * out_dim).map(|_| rng.random_range(-limit..limit)).collect();
        let weight = store.add(format!("{name}.weight"), Tensor::new(in_dim, out_dim, w).expect("weight shape"), true);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, out_dim), true);
        Self { weight, bias, in_dim, out_dim, activation }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, input: Var) -> Result<Var, ComputeError> {
        let (_, cols) = g.shape(input);
        if cols != self.in_dim {
            return Err(ComputeError::ShapeMismatch {
                op: "dense",
                expected: format!("{} input columns", self.in_dim),
                found: format!("{cols} input columns"),
            });
        }
        let w = g.param(store, self.weight);
        let b = g.param(store, self.bias);
        let xw = g.matmul(input, w);
        let pre = g.add_bias(xw, b);
        Ok(self.activation.apply(g, pre))
    }
}

/// Stack of dense layers; hidden layers use ReLU.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// `dims = [in, hidden.., out]`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        output: Activation,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { Activation::Relu };
                DenseLayer::new(store, &format!("{name}.{i}"), w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, input: Var) -> Result<Var, ComputeError> {
        self.layers.iter().try_fold(input, |x, layer| layer.forward(g, store, x))
    }
}
