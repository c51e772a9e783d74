//! Reference computations written without reuse of the production kernels.
//!
//! Sums are accumulated in double-double arithmetic (an unevaluated pair
//! `hi + lo`), which carries about 106 bits of mantissa, so the reference
//! values are more accurate than a plain `f64` fold.

/// Error-free transformation: `a + b = s + e` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = two_sum(s, e + self.lo);
        self.hi = hi;
        self.lo = lo;
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

pub fn dd_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = DoubleDouble::default();
    values.into_iter().for_each(|v| acc.add(v));
    acc.value()
}

/// `ln softmax(z / t)` computed with a max shift.
pub fn log_softmax(z: &[f64], t: f64) -> Vec<f64> {
    let scaled: Vec<f64> = z.iter().map(|v| v / t).collect();
    let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + dd_sum(scaled.iter().map(|v| (v - m).exp())).ln();
    scaled.iter().map(|v| v - lse).collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dd_sum(a.iter().map(|x| x * x)).sqrt();
    let nb = dd_sum(b.iter().map(|x| x * x)).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dd_sum(a.iter().zip(b).map(|(x, y)| x * y)) / (na * nb)
}

/// `KL(P || Q)` from log-probabilities.
fn kl_from_logs(lp: &[f64], lq: &[f64]) -> f64 {
    dd_sum(lp.iter().zip(lq).map(|(p, q)| p.exp() * (p - q)))
}

/// Settings of one reference evaluation.
#[derive(Debug, Clone, Copy)]
pub struct OracleParams {
    pub lambda: f64,
    pub smooth_t: f64,
    pub sharpen_tau: f64,
    /// Use `KL(P_T || P_S)` instead of `KL(P_S || P_T)`.
    pub teacher_first: bool,
    /// Multiply the KL term by `smooth_t^2`.
    pub t_squared: bool,
}

/// Multi-teacher loss of one sample, computed straight through:
/// cosine similarities of raw logits, sharpened into weights, weighted KL
/// between temperature-smoothed distributions, and cross-entropy at
/// temperature one.
pub fn mtkd_loss_reference(student: &[f64], teachers: &[Vec<f64>], label: usize, p: &OracleParams) -> f64 {
    let cs: Vec<f64> = teachers.iter().map(|t| cosine(student, t)).collect();
    let log_w = log_softmax(&cs, p.sharpen_tau);
    let ls = log_softmax(student, p.smooth_t);
    let kl = dd_sum(teachers.iter().zip(&log_w).map(|(t, lw)| {
        let lt = log_softmax(t, p.smooth_t);
        let kl_i = if p.teacher_first { kl_from_logs(&lt, &ls) } else { kl_from_logs(&ls, &lt) };
        lw.exp() * kl_i
    }));
    let ce = -log_softmax(student, 1.0)[label];
    let scale = if p.t_squared { p.smooth_t * p.smooth_t } else { 1.0 };
    dd_sum([(1.0 - p.lambda) * ce, p.lambda * scale * kl])
}
