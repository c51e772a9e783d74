//! Per-sample training losses: plain fine-tuning (cross-entropy only),
//! single-teacher distillation, and language-aware multi-teacher distillation.
//!
//! The multi-teacher loss for one sample is
//!
//! ```text
//! cs_i  = cos(l_S, l_Ti)                      raw logits
//! w     = softmax(cs / tau)                   per sample, no gradient
//! P_x   = softmax(l_x / T)                    x in {S, T_i}
//! KL_i  = KL(P_S || P_Ti)                     or KL(P_Ti || P_S)
//! KL    = sum_i w_i KL_i
//! CE    = -ln softmax(l_S)[y]                 temperature 1
//! L     = (1 - lambda) CE + lambda s KL       s = T^2 if rescaled, else 1
//! ```
//!
//! Gradients are taken with respect to the student logits only. Teacher
//! logits and the weights `w` are constants.

use serde::{Deserialize, Serialize};

use crate::data::LabeledSample;
use crate::error::{invalid, Result};
use crate::model::{accumulate, Classifier, Gradients};
use crate::numerics::{
    cosine_similarity, cross_entropy, cross_entropy_grad, sharpen_weights, smoothed_kl_with_grad,
    softmax_with_temperature, KlDirection, LogitVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillConfig {
    /// Weight of the KL term; CE gets `1 - lambda`.
    pub lambda: f64,
    /// Smoothing temperature for the KL path.
    pub smooth_t: f64,
    /// Sharpening temperature for the teacher weights.
    pub sharpen_tau: f64,
    pub kl_direction: KlDirection,
    /// Multiply the KL term by `smooth_t^2`.
    pub t_squared_rescale: bool,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            lambda: 0.25,
            smooth_t: 5.0,
            sharpen_tau: 0.1,
            kl_direction: KlDirection::StudentToTeacher,
            t_squared_rescale: false,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(invalid(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.smooth_t > 0.0 && self.smooth_t.is_finite()) {
            return Err(invalid(format!("smooth_t must be positive, got {}", self.smooth_t)));
        }
        if !(self.sharpen_tau > 0.0 && self.sharpen_tau.is_finite()) {
            return Err(invalid(format!(
                "sharpen_tau must be positive, got {}",
                self.sharpen_tau
            )));
        }
        Ok(())
    }

    /// Factor applied to the KL term.
    pub fn kl_scale(&self) -> f64 {
        if self.t_squared_rescale {
            self.smooth_t * self.smooth_t
        } else {
            1.0
        }
    }
}

/// Everything computed on the way to one sample's loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MtkdDiagnostics {
    pub cosine_sims: Vec<f64>,
    /// True for teachers whose similarity hit the zero-norm fallback.
    pub degenerate_sims: Vec<bool>,
    pub teacher_weights: Vec<f64>,
    pub per_teacher_kl: Vec<f64>,
    pub ce_loss: f64,
    /// `sum_i teacher_weights[i] * per_teacher_kl[i]`.
    pub kl_loss: f64,
    pub kl_scale: f64,
    pub total_loss: f64,
    pub selected_teacher: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: LogitVector,
    pub diag: MtkdDiagnostics,
}

/// Language-aware multi-teacher loss for one sample.
pub fn mtkd_loss(
    student: &LogitVector,
    teachers: &[LogitVector],
    label: usize,
    cfg: &DistillConfig,
) -> Result<LossOutput> {
    cfg.validate()?;
    if teachers.is_empty() {
        return Err(invalid("multi-teacher loss needs at least one teacher"));
    }
    let k = student.len();
    if let Some(i) = teachers.iter().position(|t| t.len() != k) {
        return Err(invalid(format!(
            "teacher {i} has {} classes, student has {k}",
            teachers[i].len()
        )));
    }

    let sims = teachers
        .iter()
        .map(|t| cosine_similarity(student, t))
        .collect::<Result<Vec<_>>>()?;
    let cosine_sims: Vec<f64> = sims.iter().map(|s| s.value).collect();
    let weights = sharpen_weights(&cosine_sims, cfg.sharpen_tau)?;

    let p_student = softmax_with_temperature(student, cfg.smooth_t)?;
    let mut per_teacher_kl = Vec::with_capacity(teachers.len());
    let mut kl_grad = vec![0.0; k];
    let mut kl_loss = 0.0;
    for (t, &w) in teachers.iter().zip(weights.as_slice()) {
        let p_teacher = softmax_with_temperature(t, cfg.smooth_t)?;
        let (kl, g) = smoothed_kl_with_grad(&p_student, &p_teacher, cfg.smooth_t, cfg.kl_direction)?;
        per_teacher_kl.push(kl);
        kl_loss += w * kl;
        kl_grad.iter_mut().zip(&g).for_each(|(a, gi)| *a += w * gi);
    }

    let ce_loss = cross_entropy(student, label)?;
    let ce_grad = cross_entropy_grad(student, label)?;
    let kl_scale = cfg.kl_scale();
    let (a, b) = (1.0 - cfg.lambda, cfg.lambda * kl_scale);
    let total_loss = a * ce_loss + b * kl_loss;
    let grad = ce_grad
        .as_slice()
        .iter()
        .zip(&kl_grad)
        .map(|(c, kg)| a * c + b * kg)
        .collect();

    let diag = MtkdDiagnostics {
        degenerate_sims: sims.iter().map(|s| s.degenerate).collect(),
        cosine_sims,
        selected_teacher: weights.argmax(),
        teacher_weights: weights.as_slice().to_vec(),
        per_teacher_kl,
        ce_loss,
        kl_loss,
        kl_scale,
        total_loss,
    };
    Ok(LossOutput {
        loss: total_loss,
        grad: LogitVector::new(grad)?,
        diag,
    })
}

/// Single-teacher distillation; the multi-teacher loss with one teacher.
pub fn kd_loss(
    student: &LogitVector,
    teacher: &LogitVector,
    label: usize,
    cfg: &DistillConfig,
) -> Result<LossOutput> {
    mtkd_loss(student, std::slice::from_ref(teacher), label, cfg)
}

/// Plain cross-entropy fine-tuning loss and gradient.
pub fn ft_loss(student: &LogitVector, label: usize) -> Result<(f64, LogitVector)> {
    Ok((cross_entropy(student, label)?, cross_entropy_grad(student, label)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ft,
    Kd,
    Mtkd,
}

#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub mean_loss: f64,
    pub grads: Gradients,
    /// One record per sample for `Kd`/`Mtkd`; empty for `Ft`.
    pub diagnostics: Vec<MtkdDiagnostics>,
}

/// Mean loss and parameter gradients over `batch`, with teacher logits
/// already computed (`teacher_logits[b]` holds one vector per teacher for
/// sample `b`; ignored for `Ft`).
///
/// Per-sample gradients are reduced in batch order.
pub fn batch_loss_with_logits(
    kind: LossKind,
    student: &Classifier,
    batch: &[&LabeledSample],
    teacher_logits: &[Vec<LogitVector>],
    cfg: &DistillConfig,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(invalid("empty batch"));
    }
    if kind != LossKind::Ft && teacher_logits.len() != batch.len() {
        return Err(invalid("teacher logits missing for some samples"));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grads = student.zero_grads();
    let mut total = 0.0;
    let mut diagnostics = Vec::new();
    for (b, sample) in batch.iter().enumerate() {
        let logits = student.forward(&sample.features)?;
        let (loss, upstream) = match kind {
            LossKind::Ft => ft_loss(&logits, sample.label)?,
            LossKind::Kd | LossKind::Mtkd => {
                let teachers = &teacher_logits[b];
                let out = match kind {
                    LossKind::Kd => kd_loss(&logits, single(teachers)?, sample.label, cfg)?,
                    _ => mtkd_loss(&logits, teachers, sample.label, cfg)?,
                };
                diagnostics.push(out.diag);
                (out.loss, out.grad)
            }
        };
        total += loss;
        let g = student.backward(&sample.features, upstream.as_slice())?;
        accumulate(&mut grads, &g, scale);
    }
    Ok(BatchLoss {
        mean_loss: total * scale,
        grads,
        diagnostics,
    })
}

fn single(teachers: &[LogitVector]) -> Result<&LogitVector> {
    match teachers {
        [t] => Ok(t),
        _ => Err(invalid(format!(
            "single-teacher distillation got {} teachers",
            teachers.len()
        ))),
    }
}

/// [`batch_loss_with_logits`] with teacher logits computed by running each
/// frozen teacher forward. `Ft` takes no teachers, `Kd` exactly one, `Mtkd`
/// at least one.
pub fn batch_loss(
    kind: LossKind,
    student: &Classifier,
    teachers: &[Classifier],
    batch: &[&LabeledSample],
    cfg: &DistillConfig,
) -> Result<BatchLoss> {
    match (kind, teachers.len()) {
        (LossKind::Ft, 0) | (LossKind::Kd, 1) => {}
        (LossKind::Mtkd, n) if n >= 1 => {}
        (k, n) => return Err(invalid(format!("{k:?} loss cannot use {n} teachers"))),
    }
    let teacher_logits = batch
        .iter()
        .map(|s| teachers.iter().map(|t| t.forward(&s.features)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    batch_loss_with_logits(kind, student, batch, &teacher_logits, cfg)
}

/// One line of the per-sample diagnostics stream.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticRecord {
    pub step: u64,
    pub sample_id: usize,
    pub language: String,
    pub cs: Vec<f64>,
    pub weights: Vec<f64>,
    pub per_teacher_kl: Vec<f64>,
    pub ce: f64,
    pub total: f64,
}

impl DiagnosticRecord {
    pub fn new(step: u64, sample_id: usize, language: &str, diag: &MtkdDiagnostics) -> Self {
        Self {
            step,
            sample_id,
            language: language.to_string(),
            cs: diag.cosine_sims.clone(),
            weights: diag.teacher_weights.clone(),
            per_teacher_kl: diag.per_teacher_kl.clone(),
            ce: diag.ce_loss,
            total: diag.total_loss,
        }
    }
}
