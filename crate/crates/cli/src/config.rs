//! Declarative experiment configuration.
//!
//! A config is a TOML file. Every key has a default, so an empty file is a
//! valid desk-scale experiment. Command-line flags override keys after the
//! file is read.
//!
//! ```toml
//! seed = 7
//! out_dir = "runs/desk"
//! parallel = false
//!
//! [data]
//! preset = "desk"            # desk | table1-scaled
//! # path = "data.jsonl"      # load samples instead of generating them
//! train_per_class = 200      # desk preset
//! test_per_class = 50        # desk preset
//! scale = 0.1                # table1-scaled preset
//! feature_dim = 16
//! sigma = 1.0
//! mean_spacing = 3.0
//! shift_scale = 1.0
//!
//! [model]
//! hidden = [64, 64]
//!
//! [train]
//! preset = "desk"            # desk | reference | explicit
//! # epochs, batch_size, optimizer ("adam" | "sgd"), learning_rate override the preset
//!
//! [distill]
//! lambda = 0.25
//! smooth_t = 5.0
//! sharpen_tau = 0.1
//! kl_direction = "student_to_teacher"
//! t_squared_rescale = false
//!
//! [experiment]
//! paradigms = ["ft-mono", "ft-multi", "kd-mono", "mtkd-mono", "mtkd-multi"]
//! languages = []             # empty: every language in the dataset
//! # split = 0                # omit to run every split
//! bootstrap_resamples = 1000
//! diagnostics = "last-epoch" # off | last-epoch | all
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mtkd_core::data::{GeneratorSpec, PresetParams};
use mtkd_core::distill::{DistillConfig, LossKind};
use mtkd_core::model::OptimizerKind;
use mtkd_core::rng::derive_seed;
use mtkd_core::train::{DiagnosticsMode, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Run independent trainings on a thread pool. Results are identical.
    pub parallel: bool,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub distill: DistillConfig,
    pub experiment: ExperimentSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("mtkd-out"),
            parallel: false,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            distill: DistillConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DataPreset {
    #[default]
    Desk,
    Table1Scaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub preset: DataPreset,
    /// JSONL sample file; when set, nothing is generated.
    pub path: Option<PathBuf>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub scale: f64,
    pub feature_dim: usize,
    pub sigma: f64,
    pub mean_spacing: f64,
    pub shift_scale: f64,
}

impl DataConfig {
    pub fn params(&self) -> PresetParams {
        PresetParams {
            feature_dim: self.feature_dim,
            sigma: self.sigma,
            mean_spacing: self.mean_spacing,
            shift_scale: self.shift_scale,
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        let p = PresetParams::default();
        Self {
            preset: DataPreset::Desk,
            path: None,
            train_per_class: 200,
            test_per_class: 50,
            scale: 0.1,
            feature_dim: p.feature_dim,
            sigma: p.sigma,
            mean_spacing: p.mean_spacing,
            shift_scale: p.shift_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden layer widths; input and output sizes come from the dataset.
    pub hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 64] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainPreset {
    #[default]
    Desk,
    /// 20 epochs, lr 3e-5, batch 32 (the `paper-hparams` CLI preset).
    Reference,
    /// No preset: every field must be given.
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub preset: TrainPreset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
}

impl TrainSection {
    pub fn resolve(&self) -> Result<TrainConfig, CliError> {
        let base = match self.preset {
            TrainPreset::Desk => Some(TrainConfig::desk()),
            TrainPreset::Reference => Some(TrainConfig::reference()),
            TrainPreset::Explicit => None,
        };
        let missing = |key: &str| CliError::Config(format!("train.{key} is required with preset = \"explicit\""));
        let cfg = TrainConfig {
            epochs: self.epochs.or(base.map(|b| b.epochs)).ok_or_else(|| missing("epochs"))?,
            batch_size: self
                .batch_size
                .or(base.map(|b| b.batch_size))
                .ok_or_else(|| missing("batch_size"))?,
            optimizer: self
                .optimizer
                .or(base.map(|b| b.optimizer))
                .ok_or_else(|| missing("optimizer"))?,
            learning_rate: self
                .learning_rate
                .or(base.map(|b| b.learning_rate))
                .ok_or_else(|| missing("learning_rate"))?,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

/// The five training paradigms a run can compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Paradigm {
    /// Cross-entropy on one language.
    FtMono,
    /// Cross-entropy on all languages.
    FtMulti,
    /// One language, distilled from the multilingual fine-tuned model.
    KdMono,
    /// One language, distilled from every per-language teacher.
    MtkdMono,
    /// All languages, distilled from every per-language teacher.
    MtkdMulti,
}

impl Paradigm {
    pub const ALL: [Paradigm; 5] = [
        Paradigm::FtMono,
        Paradigm::FtMulti,
        Paradigm::KdMono,
        Paradigm::MtkdMono,
        Paradigm::MtkdMulti,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::FtMono => "ft-mono",
            Paradigm::FtMulti => "ft-multi",
            Paradigm::KdMono => "kd-mono",
            Paradigm::MtkdMono => "mtkd-mono",
            Paradigm::MtkdMulti => "mtkd-multi",
        }
    }

    pub fn is_multilingual(self) -> bool {
        matches!(self, Paradigm::FtMulti | Paradigm::MtkdMulti)
    }

    pub fn loss(self) -> LossKind {
        match self {
            Paradigm::FtMono | Paradigm::FtMulti => LossKind::Ft,
            Paradigm::KdMono => LossKind::Kd,
            Paradigm::MtkdMono | Paradigm::MtkdMulti => LossKind::Mtkd,
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Paradigm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Paradigm::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown paradigm {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub paradigms: Vec<Paradigm>,
    /// Languages to evaluate; empty means all.
    pub languages: Vec<String>,
    /// A single split id; `None` runs every split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
    pub bootstrap_resamples: usize,
    pub diagnostics: DiagnosticsMode,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            paradigms: Paradigm::ALL.to_vec(),
            languages: Vec::new(),
            split: None,
            bootstrap_resamples: mtkd_core::metrics::DEFAULT_RESAMPLES,
            diagnostics: DiagnosticsMode::LastEpoch,
        }
    }
}

/// `--preset` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Desk-scale synthetic data and training schedule.
    Desk,
    /// Three-corpus split structure, scaled by `data.scale`.
    Table1Scaled,
    /// The reference hyperparameters: 20 epochs, lr 3e-5, batch 32.
    PaperHparams,
}

/// Independent seeds for each stochastic component of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
    pub bootstrap: u64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        match preset {
            Preset::Desk => {
                self.data.preset = DataPreset::Desk;
                self.train.preset = TrainPreset::Desk;
            }
            Preset::Table1Scaled => self.data.preset = DataPreset::Table1Scaled,
            Preset::PaperHparams => self.train.preset = TrainPreset::Reference,
        }
    }

    /// Checks everything that can be checked without the dataset.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.train.resolve()?;
        self.distill.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.model.hidden.contains(&0) {
            return bad("model.hidden widths must be positive".into());
        }
        if self.experiment.bootstrap_resamples < 100 {
            return bad(format!(
                "experiment.bootstrap_resamples must be at least 100, got {}",
                self.experiment.bootstrap_resamples
            ));
        }
        if self.data.path.is_none() {
            let d = &self.data;
            if d.feature_dim == 0 {
                return bad("data.feature_dim must be positive".into());
            }
            match d.preset {
                DataPreset::Desk if d.train_per_class == 0 || d.test_per_class == 0 => {
                    return bad("data.train_per_class and data.test_per_class must be positive".into())
                }
                DataPreset::Table1Scaled if !(d.scale > 0.0 && d.scale.is_finite()) => {
                    return bad(format!("data.scale must be positive, got {}", d.scale))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> SeedLineage {
        SeedLineage {
            data: derive_seed(self.seed, 0),
            init: derive_seed(self.seed, 1),
            shuffle: derive_seed(self.seed, 2),
            bootstrap: derive_seed(self.seed, 3),
        }
    }

    /// Generator for the configured synthetic preset.
    pub fn generator_spec(&self) -> GeneratorSpec {
        let d = &self.data;
        let seed = self.seeds().data;
        match d.preset {
            DataPreset::Desk => GeneratorSpec::desk(&d.params(), seed, d.train_per_class, d.test_per_class),
            DataPreset::Table1Scaled => GeneratorSpec::table1_scaled(&d.params(), seed, d.scale),
        }
    }

    /// SHA-256 over the canonical JSON form, leaving out settings that do
    /// not affect results (output location, threading).
    pub fn digest(&self) -> [u8; 32] {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.parallel = false;
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&json).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}
