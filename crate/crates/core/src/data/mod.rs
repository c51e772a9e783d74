//! Multilingual emotion-embedding datasets.
//!
//! Samples are fixed-length feature vectors standing in for utterance
//! embeddings. The synthetic generator places one Gaussian blob per class and
//! moves each language's blobs through its own random orthogonal transform
//! plus shift, so the same emotion lives in a different region of feature
//! space for each language.

mod jsonl;
mod split;

pub use jsonl::{load_jsonl, manifest_path, write_jsonl};
pub use split::{make_batches, select, select_split, Role, SplitSelection};

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{derive_seed, Rng64};

pub const MANIFEST_VERSION: u32 = 1;

pub const DEFAULT_CLASS_NAMES: [&str; 4] = ["angry", "happy", "neutral", "sad"];

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub language: String,
    /// Stored split value. For multi-fold languages this is the fold id; for
    /// single-split languages 0 marks the train pool and 1 the test set.
    pub split: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub class_names: Vec<String>,
    pub languages: Vec<String>,
    pub splits_per_language: BTreeMap<String, usize>,
    /// Sample count per stored split value, per language.
    pub counts: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DatasetManifest {
    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn num_splits(&self, language: &str) -> Option<usize> {
        self.splits_per_language.get(language).copied()
    }

    /// Number of distinct stored split values for a language.
    pub fn stored_split_values(&self, language: &str) -> Option<usize> {
        self.num_splits(language).map(|n| if n == 1 { 2 } else { n })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    /// Recomputes the manifest counts from the samples and checks every
    /// sample against the manifest.
    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        let mut counts: BTreeMap<&str, Vec<usize>> = m
            .languages
            .iter()
            .map(|l| (l.as_str(), vec![0; m.stored_split_values(l).unwrap_or(0)]))
            .collect();
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != m.feature_dim {
                return Err(invalid(format!("sample {i}: feature length {}", s.features.len())));
            }
            if s.label >= m.num_classes {
                return Err(invalid(format!("sample {i}: label {} out of range", s.label)));
            }
            let slot = counts
                .get_mut(s.language.as_str())
                .ok_or_else(|| invalid(format!("sample {i}: undeclared language {}", s.language)))?;
            *slot
                .get_mut(s.split as usize)
                .ok_or_else(|| invalid(format!("sample {i}: split {} out of range", s.split)))? += 1;
        }
        for (lang, c) in counts {
            if m.counts.get(lang) != Some(&c) {
                return Err(invalid(format!("manifest counts for {lang} do not match samples")));
            }
        }
        Ok(())
    }
}

/// How a language's samples are partitioned.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitLayout {
    /// Rotating folds; `counts[fold][class]`. Needs at least two folds.
    Folds(Vec<Vec<usize>>),
    /// A single fixed train/test partition; per-class counts.
    Holdout { train: Vec<usize>, test: Vec<usize> },
}

impl SplitLayout {
    fn num_splits(&self) -> usize {
        match self {
            SplitLayout::Folds(f) => f.len(),
            SplitLayout::Holdout { .. } => 1,
        }
    }

    /// Per-class counts for each stored split value.
    fn stored(&self) -> Vec<&[usize]> {
        match self {
            SplitLayout::Folds(f) => f.iter().map(Vec::as_slice).collect(),
            SplitLayout::Holdout { train, test } => vec![train, test],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageSpec {
    pub tag: String,
    pub transform_seed: u64,
    pub shift: Vec<f64>,
    pub layout: SplitLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub class_names: Vec<String>,
    /// `K x D` base class means.
    pub class_means: Vec<Vec<f64>>,
    /// Within-class standard deviation.
    pub sigma: f64,
    pub languages: Vec<LanguageSpec>,
    pub seed: u64,
}

/// Knobs for the built-in generator presets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetParams {
    pub feature_dim: usize,
    pub sigma: f64,
    /// Offset of each class mean along its own axis.
    pub mean_spacing: f64,
    /// Standard deviation of each language's shift vector components.
    pub shift_scale: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            feature_dim: 16,
            sigma: 1.0,
            mean_spacing: 3.0,
            shift_scale: 1.0,
        }
    }
}

/// Reference corpus train/test counts per language: (tag, splits, train, test).
pub const TABLE1_COUNTS: [(&str, usize, usize, usize); 3] =
    [("en", 5, 4508, 1241), ("fi", 9, 2798, 461), ("fr", 1, 420, 84)];

impl GeneratorSpec {
    fn base(params: &PresetParams, seed: u64, layouts: Vec<(&str, SplitLayout)>) -> Self {
        let k = DEFAULT_CLASS_NAMES.len();
        let d = params.feature_dim;
        let class_means = (0..k)
            .map(|c| {
                let mut mu = vec![0.0; d];
                mu[c % d] += params.mean_spacing;
                if c >= d {
                    // More classes than axes: push later classes onto a second shell.
                    mu[(c + 1) % d] += params.mean_spacing;
                }
                mu
            })
            .collect();
        let languages = layouts
            .into_iter()
            .enumerate()
            .map(|(i, (tag, layout))| {
                let lang_seed = derive_seed(seed, 100 + i as u64);
                let mut rng = Rng64::new(derive_seed(lang_seed, 1));
                LanguageSpec {
                    tag: tag.to_string(),
                    transform_seed: derive_seed(lang_seed, 0),
                    shift: (0..d).map(|_| params.shift_scale * rng.normal()).collect(),
                    layout,
                }
            })
            .collect();
        Self {
            class_names: DEFAULT_CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            class_means,
            sigma: params.sigma,
            languages,
            seed,
        }
    }

    /// Three languages (en, fi, fr), four classes, each language with a
    /// fixed holdout of `train_per_class` / `test_per_class` samples per class.
    pub fn desk(params: &PresetParams, seed: u64, train_per_class: usize, test_per_class: usize) -> Self {
        let k = DEFAULT_CLASS_NAMES.len();
        let layouts = ["en", "fi", "fr"]
            .into_iter()
            .map(|tag| {
                (
                    tag,
                    SplitLayout::Holdout {
                        train: vec![train_per_class; k],
                        test: vec![test_per_class; k],
                    },
                )
            })
            .collect();
        Self::base(params, seed, layouts)
    }

    /// Split structure and sample volume of the three-corpus setup, scaled by
    /// `scale`. For multi-fold languages fold 0 holds the tabulated test
    /// count, so split 0 reproduces the table's train/test sizes; the rest
    /// of the language is spread evenly over the remaining folds. The
    /// single-split language keeps its train/test partition.
    pub fn table1_scaled(params: &PresetParams, seed: u64, scale: f64) -> Self {
        let k = DEFAULT_CLASS_NAMES.len();
        let scaled = |n: usize| (n as f64 * scale).round() as usize;
        let layouts = TABLE1_COUNTS
            .iter()
            .map(|&(tag, splits, train, test)| {
                let layout = if splits == 1 {
                    SplitLayout::Holdout {
                        train: spread(scaled(train), k),
                        test: spread(scaled(test), k),
                    }
                } else {
                    let total = scaled(train + test);
                    let first = scaled(test).min(total);
                    let folds = std::iter::once(first).chain(spread(total - first, splits - 1));
                    SplitLayout::Folds(folds.map(|n| spread(n, k)).collect())
                };
                (tag, layout)
            })
            .collect();
        Self::base(params, seed, layouts)
    }

    fn validate(&self) -> Result<()> {
        let k = self.class_means.len();
        if k < 2 {
            return Err(invalid("need at least two classes"));
        }
        if self.class_names.len() != k {
            return Err(invalid("class_names and class_means differ in length"));
        }
        let d = self.class_means[0].len();
        if d == 0 || self.class_means.iter().any(|m| m.len() != d) {
            return Err(invalid("class means must share a positive dimension"));
        }
        for a in 0..k {
            for b in a + 1..k {
                if self.class_means[a] == self.class_means[b] {
                    return Err(invalid(format!("class means {a} and {b} coincide")));
                }
            }
        }
        // sigma = 0 is allowed and yields noise-free samples.
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if self.languages.is_empty() {
            return Err(invalid("no languages"));
        }
        for l in &self.languages {
            if l.shift.len() != d {
                return Err(invalid(format!("{}: shift has wrong dimension", l.tag)));
            }
            if let SplitLayout::Folds(f) = &l.layout {
                if f.len() < 2 {
                    return Err(invalid(format!("{}: fold layout needs at least 2 folds", l.tag)));
                }
            }
            for (i, counts) in l.layout.stored().iter().enumerate() {
                if counts.len() != k {
                    return Err(invalid(format!("{} split {i}: need {k} class counts", l.tag)));
                }
                if counts.iter().sum::<usize>() == 0 {
                    return Err(invalid(format!("{} split {i}: zero samples", l.tag)));
                }
            }
        }
        let mut tags: Vec<&str> = self.languages.iter().map(|l| l.tag.as_str()).collect();
        tags.sort_unstable();
        tags.dedup();
        if tags.len() != self.languages.len() {
            return Err(invalid("duplicate language tag"));
        }
        Ok(())
    }
}

/// Splits `n` into `parts` near-equal counts, remainder to the first parts.
fn spread(n: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| n / parts + usize::from(i < n % parts))
        .collect()
}

/// Random orthogonal matrix: the Q factor of a seeded Gaussian matrix.
pub fn orthogonal_transform(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = Rng64::new(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.normal());
    g.qr().q()
}

/// Draws every sample described by `spec`.
///
/// Order: language, stored split value, class, sample. Noise comes from one
/// stream seeded by `spec.seed`; each sample is `R (mu + sigma z) + s`.
pub fn generate_dataset(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.class_means[0].len();
    let mut noise = Rng64::new(spec.seed);
    let mut samples = Vec::new();
    let mut counts = BTreeMap::new();
    let mut splits_per_language = BTreeMap::new();

    for lang in &spec.languages {
        let rot = orthogonal_transform(d, lang.transform_seed);
        let stored = lang.layout.stored();
        for (split, per_class) in stored.iter().enumerate() {
            for (class, &n) in per_class.iter().enumerate() {
                let mu = &spec.class_means[class];
                for _ in 0..n {
                    let latent: Vec<f64> = mu.iter().map(|m| m + spec.sigma * noise.normal()).collect();
                    let features = (0..d)
                        .map(|r| {
                            (0..d).map(|c| rot[(r, c)] * latent[c]).sum::<f64>() + lang.shift[r]
                        })
                        .collect();
                    samples.push(LabeledSample {
                        features,
                        label: class,
                        language: lang.tag.clone(),
                        split: split as u32,
                    });
                }
            }
        }
        counts.insert(
            lang.tag.clone(),
            stored.iter().map(|c| c.iter().sum()).collect(),
        );
        splits_per_language.insert(lang.tag.clone(), lang.layout.num_splits());
    }

    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        num_classes: spec.class_means.len(),
        feature_dim: d,
        class_names: spec.class_names.clone(),
        languages: spec.languages.iter().map(|l| l.tag.clone()).collect(),
        splits_per_language,
        counts,
        seed: Some(spec.seed),
    };
    Ok(Dataset { samples, manifest })
}
