//! Feed-forward classifier used for both teachers and students.
//!
//! Hidden layers apply `tanh`, the output layer is affine. Weights are stored
//! row-major as `out x in` so that `z = W x + b`.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};
pub use optim::{OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};

use crate::error::{invalid, Result};
use crate::numerics::LogitVector;
use crate::rng::Rng64;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
}

/// Parameter gradients, shaped like the classifier's layers.
pub type Gradients = Vec<Dense>;

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(invalid(format!(
            "classifier needs at least input and output dims, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(invalid(format!("zero-width layer in {layer_dims:?}")));
    }
    Ok(())
}

impl Classifier {
    /// Glorot-uniform weights, zero biases. Weights are drawn layer by layer
    /// in row-major order from a single [`Rng64`] stream.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = Rng64::new(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Dense::zeros(fan_in, fan_out);
                layer
                    .weights
                    .iter_mut()
                    .for_each(|v| *v = rng.uniform(-bound, bound));
                layer
            })
            .collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    /// Builds a classifier from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| invalid("no layers"))?;
        let mut dims = vec![first.inputs];
        for (i, l) in layers.iter().enumerate() {
            if l.inputs != *dims.last().unwrap() {
                return Err(invalid(format!(
                    "layer {i} expects {} inputs, previous layer emits {}",
                    l.inputs,
                    dims.last().unwrap()
                )));
            }
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(invalid(format!("layer {i} parameter arrays have wrong length")));
            }
            dims.push(l.outputs);
        }
        check_dims(&dims)?;
        Ok(Self {
            layer_dims: dims,
            layers,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters flattened as `[W0, b0, W1, b1, ...]`.
    pub fn params_flat(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(invalid(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim() {
            return Err(invalid(format!(
                "feature length {} does not match input dim {}",
                features.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Logits for one feature vector.
    pub fn forward(&self, features: &[f64]) -> Result<LogitVector> {
        self.check_input(features)?;
        let mut h = features.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.affine(&h);
            if i < last {
                h.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        LogitVector::new(h)
    }

    /// Class with the largest logit.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(self.forward(features)?.argmax())
    }

    /// Gradients of a scalar loss with respect to every weight and bias,
    /// given the loss gradient at the logits.
    pub fn backward(&self, features: &[f64], dloss_dlogits: &[f64]) -> Result<Gradients> {
        self.check_input(features)?;
        if dloss_dlogits.len() != self.num_classes() {
            return Err(invalid(format!(
                "upstream gradient has length {}, model has {} classes",
                dloss_dlogits.len(),
                self.num_classes()
            )));
        }
        // activations[i] is the input to layer i.
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut h = features.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&h);
            activations.push(h);
            h = if i < last { z.into_iter().map(f64::tanh).collect() } else { z };
        }

        let mut grads: Gradients = self
            .layers
            .iter()
            .map(|l| Dense::zeros(l.inputs, l.outputs))
            .collect();
        let mut delta = dloss_dlogits.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &activations[i];
            let g = &mut grads[i];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] = d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(w, x)| *w = d * x);
            }
            if i > 0 {
                // input = tanh(z_prev), so d tanh = 1 - input^2.
                let mut upstream = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    upstream.iter_mut().zip(row).for_each(|(u, w)| *u += w * d);
                }
                delta = upstream
                    .iter()
                    .zip(input)
                    .map(|(u, a)| u * (1.0 - a * a))
                    .collect();
            }
        }
        Ok(grads)
    }

    /// Zero gradients with this model's shape.
    pub fn zero_grads(&self) -> Gradients {
        self.layers
            .iter()
            .map(|l| Dense::zeros(l.inputs, l.outputs))
            .collect()
    }
}

/// Flattens gradients in the same order as [`Classifier::params_flat`].
pub fn flatten(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.weights);
        out.extend_from_slice(&l.bias);
    }
    out
}

/// `acc += scale * g`, layer by layer.
pub fn accumulate(acc: &mut Gradients, g: &Gradients, scale: f64) {
    for (a, b) in acc.iter_mut().zip(g) {
        a.weights
            .iter_mut()
            .zip(&b.weights)
            .for_each(|(x, y)| *x += scale * y);
        a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += scale * y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cross_entropy, cross_entropy_grad, finite_difference_check};

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = Classifier::init(&[16, 32, 4], 7).unwrap();
        let b = Classifier::init(&[16, 32, 4], 7).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        for l in a.layers() {
            let bound = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
        let c = Classifier::init(&[16, 32, 4], 8).unwrap();
        assert_ne!(a.params_flat(), c.params_flat());
    }

    #[test]
    fn init_bias_zero_and_bad_dims() {
        let m = Classifier::init(&[4, 3], 1).unwrap();
        assert_eq!(m.layers()[0].bias, vec![0.0; 3]);
        assert!(Classifier::init(&[], 1).is_err());
        assert!(Classifier::init(&[4], 1).is_err());
        assert!(Classifier::init(&[4, 0, 3], 1).is_err());
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let mut m = Classifier::init(&[3, 5, 4], 1).unwrap();
        m.set_params_flat(&vec![0.0; m.num_params()]).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap().as_slice(), &[0.0; 4]);
    }

    #[test]
    fn identity_linear_layer() {
        let mut w = vec![0.0; 16];
        (0..4).for_each(|i| w[i * 4 + i] = 1.0);
        let m = Classifier::from_layers(vec![Dense {
            inputs: 4,
            outputs: 4,
            weights: w,
            bias: vec![0.0; 4],
        }])
        .unwrap();
        assert_eq!(
            m.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap().as_slice(),
            &[1.0, 2.0, 3.0, 4.0]
        );
        assert!(m.forward(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let m = Classifier::init(&[4, 8, 3], 11).unwrap();
        let x = [0.2, -0.3, 1.5, 0.0];
        assert_eq!(m.forward(&x).unwrap(), m.forward(&x).unwrap());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = Classifier::init(&[4, 8, 3], 2).unwrap();
        let g = m.backward(&[1.0, 2.0, 3.0, 4.0], &[0.0; 3]).unwrap();
        assert!(flatten(&g).iter().all(|&v| v == 0.0));
        assert!(m.backward(&[1.0, 2.0, 3.0, 4.0], &[0.0; 2]).is_err());
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let m = Classifier::init(&[3, 2], 5).unwrap();
        let x = [0.5, -1.0, 2.0];
        let up = [0.3, -0.7];
        let g = m.backward(&x, &up).unwrap();
        for (o, &u) in up.iter().enumerate() {
            for (i, &xi) in x.iter().enumerate() {
                assert_eq!(g[0].weights[o * 3 + i], u * xi);
            }
            assert_eq!(g[0].bias[o], u);
        }
    }

    #[test]
    fn network_gradient_matches_finite_differences() {
        let mut rng = Rng64::new(99);
        for point in 0..20 {
            let model = Classifier::init(&[4, 8, 4], 1000 + point).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let label = rng.below(4);
            let loss = |p: &[f64]| {
                let mut m = model.clone();
                m.set_params_flat(p).unwrap();
                cross_entropy(&m.forward(&x).unwrap(), label).unwrap()
            };
            let grad = |p: &[f64]| {
                let mut m = model.clone();
                m.set_params_flat(p).unwrap();
                let up = cross_entropy_grad(&m.forward(&x).unwrap(), label).unwrap();
                flatten(&m.backward(&x, up.as_slice()).unwrap())
            };
            let out = finite_difference_check(loss, grad, &model.params_flat(), 1e-5);
            assert!(out.passes(1e-5), "point {point}: {out:?}");
        }
    }
}
