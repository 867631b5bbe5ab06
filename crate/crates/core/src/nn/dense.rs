use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Trainable;
use crate::error::{DotError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z`, given `a = apply(z)`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Sigmoid => 1,
            Activation::Relu => 2,
            Activation::Identity => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Activation::Tanh,
            1 => Activation::Sigmoid,
            2 => Activation::Relu,
            3 => Activation::Identity,
            _ => return None,
        })
    }
}

/// Fully connected layer `a = act(W x + b)` with `W` of shape `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero biases.
    pub fn xavier(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        Self {
            weights: DMatrix::from_fn(output, input, |_, _| rng.random_range(-limit..limit)),
            biases: DVector::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn pre_activation(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.biases;
        }
        z
    }
}

/// Inputs and pre-activations of every layer for one batch.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<DMatrix<f64>>,
    pub pre_activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("cache holds the input")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpNetwork {
    pub layers: Vec<DenseLayer>,
}

impl MlpNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(DotError::InvalidArgument(
                "network needs at least one layer".into(),
            ));
        }
        for (k, w) in layers.windows(2).enumerate() {
            if w[0].output_dim() != w[1].input_dim() {
                return Err(DotError::InvalidArgument(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    w[0].output_dim(),
                    k + 1,
                    w[1].input_dim()
                )));
            }
        }
        for l in &layers {
            if l.biases.len() != l.output_dim() {
                return Err(DotError::InvalidArgument(
                    "bias length does not match layer width".into(),
                ));
            }
            if l.weights
                .iter()
                .chain(l.biases.iter())
                .any(|v| !v.is_finite())
            {
                return Err(DotError::InvalidArgument("non-finite parameter".into()));
            }
        }
        Ok(Self { layers })
    }

    /// Xavier-initialized network with widths `dims` (input first).
    pub fn random(dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if dims.len() != activations.len() + 1 {
            return Err(DotError::InvalidArgument(format!(
                "{} widths need {} activations",
                dims.len(),
                dims.len().saturating_sub(1)
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &a)| DenseLayer::xavier(w[0], w[1], a, &mut rng))
            .collect();
        Self::new(layers)
    }

    /// Networks applied one after the other, as a single network.
    pub fn chain(parts: &[&MlpNetwork]) -> Result<Self> {
        Self::new(
            parts
                .iter()
                .flat_map(|p| p.layers.iter().cloned())
                .collect(),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.input_dim() {
            return Err(DotError::InvalidArgument(format!(
                "input has {rows} values, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x))?;
        Ok(out.as_slice().to_vec())
    }

    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x.nrows())?;
        let mut a = x.clone();
        for layer in &self.layers {
            let act = layer.activation;
            a = layer.pre_activation(&a);
            a.apply(|v| *v = act.apply(*v));
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> Result<ForwardCache> {
        self.check_input(x.nrows())?;
        let mut activations = vec![x.clone()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let z = layer.pre_activation(activations.last().expect("nonempty"));
            let act = layer.activation;
            activations.push(z.map(|v| act.apply(v)));
            pre_activations.push(z);
        }
        Ok(ForwardCache {
            activations,
            pre_activations,
        })
    }

    /// Gradients of `Σ_b ½‖f(x_b) − t_b‖²` over the cached batch.
    pub fn backward(&self, cache: &ForwardCache, targets: &DMatrix<f64>) -> Gradients {
        self.backward_from(cache, cache.output() - targets)
    }

    /// Back-propagates `∂loss/∂output` through the cached batch.
    pub fn backward_from(&self, cache: &ForwardCache, output_grad: DMatrix<f64>) -> Gradients {
        let n = self.layers.len();
        let mut weights = vec![DMatrix::zeros(0, 0); n];
        let mut biases = vec![DVector::zeros(0); n];
        let mut delta = output_grad;
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let act = layer.activation;
            let z = &cache.pre_activations[l];
            let a = &cache.activations[l + 1];
            delta.zip_zip_apply(z, a, |d, z, a| *d *= act.derivative(z, a));
            weights[l] = &delta * cache.activations[l].transpose();
            biases[l] = delta.column_sum();
            if l > 0 {
                delta = layer.weights.tr_mul(&delta);
            }
        }
        Gradients { weights, biases }
    }

    /// `θ ← θ − lr·g`.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) {
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            layer.weights.zip_apply(gw, |w, g| *w -= lr * g);
            layer.biases.axpy(-lr, gb, 1.0);
        }
    }
}

impl Trainable for MlpNetwork {
    fn input_dim(&self) -> usize {
        MlpNetwork::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        MlpNetwork::output_dim(self)
    }

    fn sgd_step(
        &mut self,
        inputs: &DMatrix<f64>,
        targets: &DMatrix<f64>,
        lr: f64,
    ) -> Result<Vec<f64>> {
        let cache = self.forward_cached(inputs)?;
        let residual = cache.output() - targets;
        let losses = residual.column_iter().map(|c| c.norm_squared()).collect();
        if lr != 0.0 {
            // Batch mean of the gradients of ½‖o − t‖².
            let scale = 1.0 / inputs.ncols() as f64;
            let grads = self.backward_from(&cache, residual * scale);
            self.apply_gradients(&grads, lr);
        }
        Ok(losses)
    }
}
