use super::{compute_metrics, confusion, Metric, MetricReport};
use crate::error::{invalid, Result};
use crate::rng::Rng64;

pub const DEFAULT_RESAMPLES: usize = 1000;
const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOutcome {
    pub lower: f64,
    pub upper: f64,
    /// Resamples that still missed a class after the redraw budget, so that
    /// class was dropped from their average.
    pub dropped: usize,
}

/// 95% percentile bootstrap interval of `metric`.
pub fn bootstrap_ci(
    preds: &[usize],
    labels: &[usize],
    k: usize,
    metric: Metric,
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapOutcome> {
    bootstrap_ci_with_level(preds, labels, k, metric, n_resamples, seed, 0.95)
}

/// Percentile bootstrap over `(pred, label)` pairs.
///
/// Each resample draws `n` pairs with replacement. For UR and UA a resample
/// missing a class present in `labels` is redrawn, up to 10 times. Bounds are
/// nearest-rank percentiles at `(1 - level) / 2` and `(1 + level) / 2`.
pub fn bootstrap_ci_with_level(
    preds: &[usize],
    labels: &[usize],
    k: usize,
    metric: Metric,
    n_resamples: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapOutcome> {
    if n_resamples < 100 {
        return Err(invalid(format!("need at least 100 resamples, got {n_resamples}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("confidence level must lie in (0, 1), got {level}")));
    }
    // Validates lengths and ranges up front.
    let full = confusion(preds, labels, k)?;
    let n = preds.len();
    let present: Vec<bool> = full.counts.iter().map(|r| r.iter().sum::<u64>() > 0).collect();
    let needs_all = matches!(metric, Metric::UR | Metric::UA);

    let mut rng = Rng64::new(seed);
    let mut values = Vec::with_capacity(n_resamples);
    let mut dropped = 0;
    let mut idx = vec![0usize; n];
    for _ in 0..n_resamples {
        let mut attempt = 0;
        loop {
            idx.iter_mut().for_each(|i| *i = rng.below(n));
            if !needs_all {
                break;
            }
            let mut seen = vec![false; k];
            idx.iter().for_each(|&i| seen[labels[i]] = true);
            if present.iter().zip(&seen).all(|(&p, &s)| !p || s) {
                break;
            }
            attempt += 1;
            if attempt > MAX_REDRAWS {
                dropped += 1;
                break;
            }
        }
        let mut counts = vec![vec![0u64; k]; k];
        idx.iter().for_each(|&i| counts[labels[i]][preds[i]] += 1);
        let report = compute_metrics(&super::ConfusionMatrix { counts })?;
        values.push(metric.of(&report));
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapOutcome {
        lower: nearest_rank(&values, alpha),
        upper: nearest_rank(&values, 1.0 - alpha),
        dropped,
    })
}

/// Nearest-rank percentile of sorted `values`: element `ceil(p n)` (1-based).
fn nearest_rank(values: &[f64], p: f64) -> f64 {
    let rank = (p * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

impl MetricReport {
    /// Fills `ci` for all four metrics from the same data the report was
    /// computed on. Bounds are widened to include the point estimate when the
    /// percentile interval misses it.
    pub fn with_confidence_intervals(
        mut self,
        preds: &[usize],
        labels: &[usize],
        n_resamples: usize,
        seed: u64,
    ) -> Result<Self> {
        let k = self.per_class_recall.len();
        for m in Metric::ALL {
            let b = bootstrap_ci(preds, labels, k, m, n_resamples, seed)?;
            let point = m.of(&self);
            self.ci.insert(m, (b.lower.min(point), b.upper.max(point)));
        }
        Ok(self)
    }
}
