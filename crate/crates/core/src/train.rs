//! Mini-batch training of a student under one of the three losses.

use serde::{Deserialize, Serialize};

use crate::data::{make_batches, LabeledSample};
use crate::distill::{batch_loss_with_logits, DiagnosticRecord, DistillConfig, LossKind};
use crate::error::{invalid, Result};
use crate::model::{Classifier, OptimizerKind, OptimizerState};
use crate::numerics::LogitVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
}

impl TrainConfig {
    /// 20 epochs, lr 3e-5, batch 32 (Adam).
    pub fn reference() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            learning_rate: 3e-5,
        }
    }

    /// 50 epochs, lr 1e-2, batch 32, Adam.
    pub fn desk() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Which epochs emit per-sample diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticsMode {
    Off,
    #[default]
    LastEpoch,
    All,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Classifier,
    /// Mean batch loss over the final epoch.
    pub final_epoch_loss: f64,
    pub steps: u64,
    pub diagnostics: Vec<DiagnosticRecord>,
}

/// Everything a training run needs besides the starting parameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainJob<'a> {
    pub kind: LossKind,
    pub samples: &'a [LabeledSample],
    /// Indices into `samples` making up the training set.
    pub train_idx: &'a [usize],
    pub teachers: &'a [Classifier],
    pub distill: &'a DistillConfig,
    pub config: &'a TrainConfig,
    pub shuffle_seed: u64,
    pub diagnostics: DiagnosticsMode,
}

/// Trains `init` in place of a fresh copy and returns the result.
///
/// Teachers are frozen: their logits are computed once up front. Epoch `e`
/// visits the training set in the order `make_batches(n, batch, seed, e)`.
pub fn train(init: &Classifier, job: &TrainJob<'_>) -> Result<TrainOutcome> {
    job.config.validate()?;
    job.distill.validate()?;
    if job.train_idx.is_empty() {
        return Err(invalid("empty training set"));
    }
    match (job.kind, job.teachers.len()) {
        (LossKind::Ft, 0) | (LossKind::Kd, 1) => {}
        (LossKind::Mtkd, n) if n >= 1 => {}
        (k, n) => return Err(invalid(format!("{k:?} training cannot use {n} teachers"))),
    }
    for t in job.teachers {
        if t.num_classes() != init.num_classes() || t.input_dim() != init.input_dim() {
            return Err(invalid(format!(
                "teacher dims {:?} incompatible with student {:?}",
                t.layer_dims(),
                init.layer_dims()
            )));
        }
    }

    let teacher_logits: Vec<Vec<LogitVector>> = job
        .train_idx
        .iter()
        .map(|&i| {
            job.teachers
                .iter()
                .map(|t| t.forward(&job.samples[i].features))
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut model = init.clone();
    let mut opt = OptimizerState::new(job.config.optimizer, job.config.learning_rate, &model)?;
    let mut diagnostics = Vec::new();
    let mut final_epoch_loss = 0.0;
    let n = job.train_idx.len();

    for epoch in 0..job.config.epochs {
        let keep = match job.diagnostics {
            DiagnosticsMode::Off => false,
            DiagnosticsMode::LastEpoch => epoch + 1 == job.config.epochs,
            DiagnosticsMode::All => true,
        };
        let batches = make_batches(n, job.config.batch_size, job.shuffle_seed, epoch as u64);
        let mut epoch_loss = 0.0;
        for positions in &batches {
            let batch: Vec<&LabeledSample> =
                positions.iter().map(|&p| &job.samples[job.train_idx[p]]).collect();
            let logits: Vec<Vec<LogitVector>> = match job.kind {
                LossKind::Ft => Vec::new(),
                _ => positions.iter().map(|&p| teacher_logits[p].clone()).collect(),
            };
            let out = batch_loss_with_logits(job.kind, &model, &batch, &logits, job.distill)?;
            if keep {
                for (&p, d) in positions.iter().zip(&out.diagnostics) {
                    let id = job.train_idx[p];
                    diagnostics.push(DiagnosticRecord::new(
                        opt.step_count,
                        id,
                        &job.samples[id].language,
                        d,
                    ));
                }
            }
            epoch_loss += out.mean_loss;
            opt.step(&mut model, &out.grads)?;
        }
        final_epoch_loss = epoch_loss / batches.len() as f64;
    }

    Ok(TrainOutcome {
        model,
        final_epoch_loss,
        steps: opt.step_count,
        diagnostics,
    })
}

/// Predicted and true labels for the samples at `idx`.
pub fn predict_all(
    model: &Classifier,
    samples: &[LabeledSample],
    idx: &[usize],
) -> Result<(Vec<usize>, Vec<usize>)> {
    idx.iter()
        .map(|&i| Ok((model.predict(&samples[i].features)?, samples[i].label)))
        .collect::<Result<Vec<_>>>()
        .map(|pairs| pairs.into_iter().unzip())
}
