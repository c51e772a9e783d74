//! Scalar and vector kernels behind the distillation losses.
//!
//! All arithmetic is `f64`. Probabilities coming out of
//! [`softmax_with_temperature`] are floored at [`PROB_FLOOR`] so that the
//! logarithms in [`kl_divergence`] stay finite on saturated logits. KL is
//! reported in nats.

mod gradcheck;

pub use gradcheck::{finite_difference_check, finite_difference_check_with, FdOutcome, Stencil};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Lower clamp applied to every softmax output before it is used in a log.
pub const PROB_FLOOR: f64 = 1e-300;

/// Raw class scores for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    /// Wraps `values`, rejecting fewer than two classes or non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite logit at index {j}")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry (first one on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = crate::Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<LogitVector> for Vec<f64> {
    fn from(v: LogitVector) -> Self {
        v.0
    }
}

/// A floored probability distribution over classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates a distribution: non-empty, entries in `[0, 1]`, sum 1 within `1e-9`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empty probability vector"));
        }
        if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("probability outside [0, 1]"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-teacher mixing weights, in teacher registry order. Sums to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeacherWeights(Vec<f64>);

impl TeacherWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Teacher with the largest weight (first one on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Cosine similarity together with a flag for the zero-norm fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    /// Set when either input had zero norm and `value` is the fallback 0.
    pub degenerate: bool,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

fn check_temperature(t: f64, name: &str) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {t}")))
    }
}

/// Max-shifted, floored softmax of `values / t`. Caller validates inputs.
fn softmax_raw(values: &[f64], t: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values.iter().map(|v| ((v - max) / t).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p = (*p / sum).max(PROB_FLOOR);
    }
    out
}

/// `P[j] = exp(l[j]/T) / sum_k exp(l[k]/T)`.
pub fn softmax_with_temperature(logits: &LogitVector, temperature: f64) -> Result<ProbVector> {
    check_temperature(temperature, "temperature")?;
    Ok(ProbVector(softmax_raw(logits.as_slice(), temperature)))
}

/// Cosine of the angle between two logit vectors.
///
/// Returns 0 with `degenerate = true` when either vector is all zeros.
pub fn cosine_similarity(a: &LogitVector, b: &LogitVector) -> Result<Similarity> {
    if a.len() != b.len() {
        return Err(invalid(format!(
            "cosine similarity of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (a, b) = (a.as_slice(), b.as_slice());
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Ok(Similarity {
            value: 0.0,
            degenerate: true,
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(Similarity {
        value: (dot / (norm_a * norm_b)).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Softmax of `similarities / tau`; a small `tau` concentrates the mass on
/// the most similar teacher.
pub fn sharpen_weights(similarities: &[f64], tau: f64) -> Result<TeacherWeights> {
    check_temperature(tau, "sharpening temperature")?;
    if similarities.is_empty() {
        return Err(invalid("no similarities to sharpen"));
    }
    if similarities.iter().any(|s| !s.is_finite()) {
        return Err(invalid("non-finite similarity"));
    }
    let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = similarities.iter().map(|s| ((s - max) / tau).exp()).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    Ok(TeacherWeights(w))
}

/// `KL(p || q) = sum_j p[j] ln(p[j] / q[j])`, in nats. Zero-probability terms of `p` contribute 0.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid(format!(
            "KL divergence between distributions of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_raw(p.as_slice(), q.as_slice()))
}

fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pj, _)| pj > 0.0)
        .map(|(&pj, &qj)| pj * (pj / qj.max(PROB_FLOOR)).ln())
        .sum();
    kl.max(0.0)
}

fn check_label(logits: &LogitVector, label: usize) -> Result<()> {
    if label < logits.len() {
        Ok(())
    } else {
        Err(invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )))
    }
}

/// `-ln softmax(logits)[label]` at temperature 1, via log-sum-exp.
pub fn cross_entropy(logits: &LogitVector, label: usize) -> Result<f64> {
    check_label(logits, label)?;
    let l = logits.as_slice();
    let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + l.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Ok((lse - l[label]).max(0.0))
}

/// Gradient of [`cross_entropy`] with respect to the logits: `softmax(l) - onehot(label)`.
pub fn cross_entropy_grad(logits: &LogitVector, label: usize) -> Result<LogitVector> {
    check_label(logits, label)?;
    let max = logits.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut g: Vec<f64> = logits.as_slice().iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= sum);
    g[label] -= 1.0;
    Ok(LogitVector(g))
}

/// Which way round the per-teacher KL term is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(P_student || P_teacher)`.
    #[default]
    StudentToTeacher,
    /// `KL(P_teacher || P_student)`, the classical distillation direction.
    TeacherToStudent,
}

/// KL divergence between temperature-smoothed student and teacher
/// distributions, and its gradient with respect to the student logits
/// (teacher held fixed).
///
/// With `p = softmax(s/T)` and fixed `q`:
/// * student-to-teacher: `dKL/ds_k = p_k (ln(p_k/q_k) - KL) / T`
/// * teacher-to-student: `dKL/ds_k = (p_k - q_k) / T`
pub fn smoothed_kl_with_grad(
    student: &ProbVector,
    teacher: &ProbVector,
    temperature: f64,
    direction: KlDirection,
) -> Result<(f64, Vec<f64>)> {
    check_temperature(temperature, "temperature")?;
    if student.len() != teacher.len() {
        return Err(invalid("student and teacher distributions differ in length"));
    }
    let (p, q) = (student.as_slice(), teacher.as_slice());
    Ok(match direction {
        KlDirection::StudentToTeacher => {
            let kl = kl_raw(p, q);
            let grad = p
                .iter()
                .zip(q)
                .map(|(&pk, &qk)| pk * ((pk / qk).ln() - kl) / temperature)
                .collect();
            (kl, grad)
        }
        KlDirection::TeacherToStudent => {
            let kl = kl_raw(q, p);
            let grad = p
                .iter()
                .zip(q)
                .map(|(&pk, &qk)| (pk - qk) / temperature)
                .collect();
            (kl, grad)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_with_temperature(&lv(&[1.0; 4]), 5.0).unwrap();
        assert_close(p.as_slice(), &[0.25; 4], 1e-15);
        let p = softmax_with_temperature(&lv(&[2.0, 0.0]), 1.0).unwrap();
        assert_close(p.as_slice(), &[0.880797, 0.119203], 1e-6);
        let p = softmax_with_temperature(&lv(&[2.0, 0.0]), 2.0).unwrap();
        assert_close(p.as_slice(), &[0.731059, 0.268941], 1e-6);
    }

    #[test]
    fn softmax_rejects_bad_inputs() {
        assert!(softmax_with_temperature(&lv(&[1.0, 2.0]), 0.0).is_err());
        assert!(softmax_with_temperature(&lv(&[1.0, 2.0]), -1.0).is_err());
        assert!(LogitVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(LogitVector::new(vec![f64::INFINITY, 0.0]).is_err());
        assert!(LogitVector::new(vec![1.0]).is_err());
    }

    #[test]
    fn softmax_floor_on_saturated_logits() {
        let p = softmax_with_temperature(&lv(&[1e4, -1e4]), 1.0).unwrap();
        assert_eq!(p.as_slice()[1], PROB_FLOOR);
        assert_eq!(p.as_slice()[0], 1.0);
    }

    #[test]
    fn cosine_examples() {
        let s = cosine_similarity(&lv(&[1.0, 0.0]), &lv(&[0.0, 1.0])).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(!s.degenerate);
        let v = lv(&[0.3, -2.0, 5.5]);
        assert!((cosine_similarity(&v, &v).unwrap().value - 1.0).abs() < 1e-15);
        let s = cosine_similarity(&lv(&[1.0, 1.0]), &lv(&[1.0, 0.0])).unwrap();
        assert!((s.value - 0.707107).abs() < 1e-6);
    }

    #[test]
    fn cosine_zero_norm_falls_back() {
        let s = cosine_similarity(&lv(&[0.0, 0.0]), &lv(&[1.0, 2.0])).unwrap();
        assert_eq!(s, Similarity { value: 0.0, degenerate: true });
        assert!(cosine_similarity(&lv(&[1.0, 0.0]), &lv(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn sharpen_examples() {
        let w = sharpen_weights(&[0.5, 0.5, 0.5], 0.1).unwrap();
        assert_close(w.as_slice(), &[1.0 / 3.0; 3], 1e-15);
        let sharp = sharpen_weights(&[0.9, 0.5, 0.1], 0.1).unwrap();
        assert_close(sharp.as_slice(), &[0.981691, 0.017980, 0.000329], 1e-5);
        // Frozen from a direct softmax of [0.9, 0.5, 0.1].
        let soft = sharpen_weights(&[0.9, 0.5, 0.1], 1.0).unwrap();
        assert_close(soft.as_slice(), &[0.471776, 0.316241, 0.211983], 1e-6);
        assert!(sharp.as_slice()[0] > soft.as_slice()[0]);
        assert!(sharpen_weights(&[0.1], 0.0).is_err());
        assert!(sharpen_weights(&[], 0.1).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = pv(&[0.2, 0.3, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let kl = kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.25, 0.75])).unwrap();
        assert!((kl - 0.143841).abs() < 1e-6);
        let kl = kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let ce = cross_entropy(&lv(&[0.0; 4]), 2).unwrap();
        assert!((ce - 4f64.ln()).abs() < 1e-12);
        assert!(cross_entropy(&lv(&[100.0, 0.0, 0.0, 0.0]), 0).unwrap() < 1e-6);
        let ce = cross_entropy(&lv(&[1.0, 2.0, 3.0]), 1).unwrap();
        assert!((ce - 1.407606).abs() < 1e-6);
        assert!(cross_entropy(&lv(&[1.0, 2.0]), 2).is_err());
    }

    #[test]
    fn cross_entropy_grad_examples() {
        let g = cross_entropy_grad(&lv(&[0.0; 4]), 0).unwrap();
        assert_close(g.as_slice(), &[-0.75, 0.25, 0.25, 0.25], 1e-9);
        let g = cross_entropy_grad(&lv(&[0.4, -1.3, 2.2, 0.0]), 3).unwrap();
        assert!(g.as_slice().iter().sum::<f64>().abs() < 1e-9);
        let g = cross_entropy_grad(&lv(&[100.0, 0.0, 0.0, 0.0]), 0).unwrap();
        assert!(g.as_slice().iter().all(|x| x.abs() < 1e-6));
        assert!(cross_entropy_grad(&lv(&[0.0; 4]), 4).is_err());
    }

    #[test]
    fn smoothed_kl_gradients_match_finite_differences() {
        let teacher = softmax_with_temperature(&lv(&[0.3, 1.7, -0.4, 0.9]), 5.0).unwrap();
        let point = [1.2, -0.7, 0.3, 2.1];
        for dir in [KlDirection::StudentToTeacher, KlDirection::TeacherToStudent] {
            let f = |s: &[f64]| {
                let p = softmax_with_temperature(&lv(s), 5.0).unwrap();
                smoothed_kl_with_grad(&p, &teacher, 5.0, dir).unwrap().0
            };
            let g = |s: &[f64]| {
                let p = softmax_with_temperature(&lv(s), 5.0).unwrap();
                smoothed_kl_with_grad(&p, &teacher, 5.0, dir).unwrap().1
            };
            let err = finite_difference_check(f, g, &point, 1e-5)
                .max_relative_error()
                .unwrap();
            assert!(err < 1e-5, "{dir:?}: {err}");
        }
    }
}
