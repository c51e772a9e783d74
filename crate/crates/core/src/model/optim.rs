use serde::{Deserialize, Serialize};

use super::{Classifier, Gradients};
use crate::error::{invalid, Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer hyperparameters plus the Adam moment buffers.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    /// Fresh state with zeroed moments shaped like `model`.
    pub fn new(kind: OptimizerKind, learning_rate: f64, model: &Classifier) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {learning_rate}")));
        }
        let shapes: Vec<Vec<f64>> = model
            .layers()
            .iter()
            .flat_map(|l| [vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]])
            .collect();
        Ok(Self {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: shapes.clone(),
            second_moment: shapes,
        })
    }

    /// Applies one update to `model` in place.
    ///
    /// Non-finite gradients reject the whole update before any parameter is
    /// touched; the error names the first offending layer.
    pub fn step(&mut self, model: &mut Classifier, grads: &Gradients) -> Result<()> {
        if grads.len() != model.layers().len() {
            return Err(invalid("gradient layer count does not match model"));
        }
        for (i, (g, l)) in grads.iter().zip(model.layers()).enumerate() {
            if g.weights.len() != l.weights.len() || g.bias.len() != l.bias.len() {
                return Err(invalid(format!("gradient shape mismatch in layer {i}")));
            }
            if g.weights.iter().chain(&g.bias).any(|v| !v.is_finite()) {
                return Err(Error::UpdateRejected { layer: i });
            }
        }

        self.step_count += 1;
        let lr = self.learning_rate;
        let t = self.step_count as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);

        let params = model
            .layers_mut()
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.bias]);
        let grads = grads.iter().flat_map(|g| [&g.weights, &g.bias]);
        let moments = self.first_moment.iter_mut().zip(self.second_moment.iter_mut());

        for ((theta, g), (m, v)) in params.zip(grads).zip(moments) {
            match self.kind {
                OptimizerKind::Sgd => {
                    theta.iter_mut().zip(g).for_each(|(p, gi)| *p -= lr * gi);
                }
                OptimizerKind::Adam => {
                    for (((p, &gi), mi), vi) in theta.iter_mut().zip(g).zip(m).zip(v) {
                        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
                        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}
