//! Command-line surface of the `mtkd` tool.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mtkd_core::data::{generate_dataset, manifest_path, write_jsonl};

use crate::config::{ExperimentConfig, Paradigm, Preset};
use crate::error::{CliError, Result};
use crate::pipeline::{
    ensure_parent, teacher_file, write_report, Experiment, RunRecord, Scope, TeacherSource, MULTI_TAG,
};

#[derive(Debug, Parser)]
#[command(name = "mtkd", version, about = "Language-aware multi-teacher distillation experiments")]
pub struct Cli {
    /// TOML experiment config; flags below override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (`seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (`out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Train independent models concurrently (`parallel`).
    #[arg(long, global = true)]
    pub parallel: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset into `<out>/data.jsonl`.
    GenData,
    /// Train a cross-entropy teacher on one language (or `multi`).
    TrainTeacher {
        #[arg(long)]
        language: String,
        #[arg(long, default_value_t = 0)]
        split: usize,
    },
    /// Train one paradigm's students from saved teacher checkpoints.
    Distill {
        #[arg(long)]
        paradigm: Paradigm,
        /// Directory of teacher checkpoints [default: <out>/teachers].
        #[arg(long)]
        teachers: Option<PathBuf>,
        /// Evaluate only this split id (`experiment.split`).
        #[arg(long)]
        split: Option<usize>,
        /// Comma-separated target languages (`experiment.languages`).
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
    },
    /// Train teachers and every selected paradigm, then tabulate them.
    Compare {
        /// Comma-separated paradigms (`experiment.paradigms`).
        #[arg(long, value_delimiter = ',')]
        paradigms: Vec<Paradigm>,
        #[arg(long)]
        split: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        languages: Vec<String>,
    },
    /// Re-render report.csv and report.txt from a run directory's run.json.
    Report {
        /// Run directory [default: <out>].
        #[arg(long)]
        run: Option<PathBuf>,
    },
}

impl Cli {
    /// Config file (or defaults) with every flag applied.
    pub fn resolve_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.preset {
            cfg.apply_preset(p);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.parallel |= self.parallel;
        match &self.command {
            Command::Distill { split, languages, .. } => {
                override_targets(&mut cfg, *split, languages);
            }
            Command::Compare { paradigms, split, languages } => {
                override_targets(&mut cfg, *split, languages);
                if !paradigms.is_empty() {
                    cfg.experiment.paradigms = paradigms.clone();
                }
            }
            _ => {}
        }
        Ok(cfg)
    }
}

fn override_targets(cfg: &mut ExperimentConfig, split: Option<usize>, languages: &[String]) {
    if split.is_some() {
        cfg.experiment.split = split;
    }
    if !languages.is_empty() {
        cfg.experiment.languages = languages.to_vec();
    }
}

/// Executes the parsed command line.
pub fn run_cli(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::GenData => gen_data(cfg),
        Command::TrainTeacher { language, split } => {
            train_teacher(&Experiment::prepare(cfg)?, language, *split).map(|_| ())
        }
        Command::Distill { paradigm, teachers, .. } => {
            let exp = Experiment::prepare(cfg)?;
            let dir = teachers.clone().unwrap_or_else(|| exp.config.out_dir.join("teachers"));
            let record = crate::pipeline::run(&exp, &[*paradigm], &TeacherSource::Load(dir), "distill")?;
            print!("{}", record.render()?.text);
            Ok(())
        }
        Command::Compare { .. } => compare(&Experiment::prepare(cfg)?).map(|r| {
            print!("{}", r.render().map(|t| t.text).unwrap_or_default());
        }),
        Command::Report { run } => {
            let dir = run.clone().unwrap_or(cfg.out_dir);
            let path = dir.join("run.json");
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let record: RunRecord = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            print!("{}", write_report(&dir, &record)?.text);
            Ok(())
        }
    }
}

fn gen_data(cfg: ExperimentConfig) -> Result<()> {
    if cfg.data.path.is_some() {
        return Err(CliError::Config("data.path is set; there is nothing to generate".into()));
    }
    cfg.validate()?;
    let dataset = generate_dataset(&cfg.generator_spec()).map_err(|e| CliError::Config(e.to_string()))?;
    let path = cfg.out_dir.join("data.jsonl");
    ensure_parent(&path)?;
    write_jsonl(&dataset, &path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let m = &dataset.manifest;
    println!("wrote {} samples to {}", dataset.samples.len(), path.display());
    println!("manifest: {}", manifest_path(&path).display());
    for lang in &m.languages {
        let counts = &m.counts[lang];
        if m.num_splits(lang) == Some(1) {
            println!("{lang}: train {} test {}", counts[0], counts[1]);
        } else {
            let total: usize = counts.iter().sum();
            for (s, n) in counts.iter().enumerate() {
                println!("{lang} split {s}: train {} test {n}", total - n);
            }
        }
    }
    Ok(())
}

/// Trains and saves one teacher; returns the checkpoint path.
pub fn train_teacher(exp: &Experiment, language: &str, split: usize) -> Result<PathBuf> {
    let scope = if language == MULTI_TAG {
        Scope::Multi(split)
    } else {
        Scope::Mono(language.to_string(), split)
    };
    let outcome = match &scope {
        Scope::Mono(l, s) => exp.train_language_model(l, *s)?,
        Scope::Multi(s) => exp.train_multilingual_model(*s)?,
    };
    let path = exp.config.out_dir.join("teachers").join(teacher_file(&scope));
    ensure_parent(&path)?;
    let ck = exp.checkpoint(&outcome.model, language, split);
    mtkd_core::model::save_checkpoint(&ck, &path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;

    let train_ur = exp.train_metrics(&outcome.model, &scope)?.ur;
    println!("{language} split {split}: final loss {:.6}, train UR {train_ur:.2}", outcome.final_epoch_loss);
    let test_langs: Vec<String> = match &scope {
        Scope::Mono(l, _) => vec![l.clone()],
        Scope::Multi(_) => exp.languages().to_vec(),
    };
    for l in test_langs {
        let s = exp.selection(split)[&l];
        let eval = exp.evaluate(&outcome.model, &l, if language == MULTI_TAG { s } else { split })?;
        println!("  test UR on {l}: {:.2}", eval.report.ur);
    }
    println!("checkpoint: {}", path.display());
    Ok(path)
}

/// Runs every configured paradigm with in-run teachers.
pub fn compare(exp: &Experiment) -> Result<RunRecord> {
    let paradigms = &exp.config.experiment.paradigms;
    let mut distinct = paradigms.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(CliError::Config("compare needs at least two distinct paradigms".into()));
    }
    crate::pipeline::run(exp, paradigms, &TeacherSource::Train, "compare")
}
