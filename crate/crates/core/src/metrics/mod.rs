//! Evaluation metrics.
//!
//! * UR: unweighted mean of per-class recall.
//! * WR: support-weighted mean of per-class recall, which equals overall
//!   accuracy.
//! * UA: unweighted mean of per-class one-vs-rest accuracy `(TP + TN) / N`.
//! * WA: support-weighted mean of the same one-vs-rest accuracies.
//!
//! All four are reported as percentages. Classes with no true samples are
//! left out of every average.

mod bootstrap;
mod report;

pub use bootstrap::{bootstrap_ci, bootstrap_ci_with_level, BootstrapOutcome, DEFAULT_RESAMPLES};
pub use report::{parse_report_csv, render_report, CsvRow, RenderedReport, ReportRow};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    UR,
    WR,
    UA,
    WA,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::UR, Metric::WR, Metric::UA, Metric::WA];

    pub fn of(self, r: &MetricReport) -> f64 {
        match self {
            Metric::UR => r.ur,
            Metric::WR => r.wr,
            Metric::UA => r.ua,
            Metric::WA => r.wa,
        }
    }
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

/// Tallies `(label, pred)` pairs into a `k x k` matrix.
pub fn confusion(preds: &[usize], labels: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(invalid(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(invalid("no predictions to evaluate"));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &t) in preds.iter().zip(labels) {
        if p >= k || t >= k {
            return Err(invalid(format!("class index out of range for {k} classes")));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Recall per class in percent; `None` for classes without true samples.
    pub per_class_recall: Vec<Option<f64>>,
    pub ur: f64,
    pub wr: f64,
    pub ua: f64,
    pub wa: f64,
    /// Confidence bounds `(lower, upper)` per metric, when computed.
    #[serde(default)]
    pub ci: BTreeMap<Metric, (f64, f64)>,
    pub n_samples: u64,
    /// Classes left out of the averages for lack of support.
    #[serde(default)]
    pub excluded_classes: Vec<usize>,
}

/// Point estimates of UR, WR, UA and WA (no confidence intervals).
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let n = cm.total();
    if n == 0 {
        return Err(invalid("confusion matrix is empty"));
    }
    let k = cm.num_classes();
    let mut per_class_recall = Vec::with_capacity(k);
    let mut excluded_classes = Vec::new();
    // Integer numerators keep exact fixtures exact.
    let mut recall_sum = 0.0;
    let mut ovr_sum: u128 = 0;
    let mut ovr_weighted: u128 = 0;
    let mut present = 0u128;
    for c in 0..k {
        let support = cm.support(c);
        if support == 0 {
            per_class_recall.push(None);
            excluded_classes.push(c);
            continue;
        }
        present += 1;
        let tp = cm.counts[c][c];
        let recall = tp as f64 / support as f64;
        let tn = n + tp - support - cm.predicted(c);
        per_class_recall.push(Some(100.0 * recall));
        recall_sum += recall;
        ovr_sum += (tp + tn) as u128;
        ovr_weighted += support as u128 * (tp + tn) as u128;
    }
    let (nf, p) = (n as f64, present as f64);
    let ur = 100.0 * recall_sum / p;
    let wr = 100.0 * cm.trace() as f64 / nf;
    let ua = 100.0 * ovr_sum as f64 / (nf * p);
    let wa = 100.0 * ovr_weighted as f64 / (nf * nf);
    Ok(MetricReport {
        per_class_recall,
        ur,
        wr,
        ua,
        wa,
        ci: BTreeMap::new(),
        n_samples: n,
        excluded_classes,
    })
}

/// Confusion matrix serialized with its class names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionExport {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}
