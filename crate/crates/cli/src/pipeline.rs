//! Training and evaluation of the paradigms in one experiment.
//!
//! All models of split index `s` start from the same initialization
//! (`derive_seed(init, s)`) and visit their data in the same shuffle stream
//! (`derive_seed(shuffle, s)`), so paradigms differ only in their loss and
//! training set. Multilingual models at index `s` train on split
//! `s mod n_l` of every language `l`; the per-language teachers used by the
//! multi-teacher paradigms are drawn from the same selection, so no test
//! sample of the evaluated split is seen by a teacher.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mtkd_core::data::{
    generate_dataset, load_jsonl, select, select_split, Dataset, Role, SplitSelection,
};
use mtkd_core::distill::{ft_loss, kd_loss, mtkd_loss, DiagnosticRecord, DistillConfig, LossKind};
use mtkd_core::metrics::{
    compute_metrics, confusion, render_report, ConfusionExport, MetricReport, RenderedReport,
    ReportRow,
};
use mtkd_core::model::{load_checkpoint, save_checkpoint, Checkpoint, Classifier};
use mtkd_core::numerics::LogitVector;
use mtkd_core::rng::derive_seed;
use mtkd_core::train::{predict_all, train, DiagnosticsMode, TrainConfig, TrainJob, TrainOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Paradigm, SeedLineage};
use crate::error::{CliError, Result};

/// Tag stored in checkpoints of models trained on every language.
pub const MULTI_TAG: &str = "multi";

/// A validated config together with its dataset.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub train: TrainConfig,
    pub seeds: SeedLineage,
    pub digest: [u8; 32],
    pub dataset: Dataset,
    /// Layer widths of every model, input to output.
    pub dims: Vec<usize>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let train = config.train.resolve()?;
        let dataset = match &config.data.path {
            Some(path) => load_jsonl(path).map_err(CliError::data)?,
            None => generate_dataset(&config.generator_spec())
                .map_err(|e| CliError::Config(e.to_string()))?,
        };
        dataset.validate().map_err(CliError::data)?;
        let m = &dataset.manifest;
        let mut dims = vec![m.feature_dim];
        dims.extend(&config.model.hidden);
        dims.push(m.num_classes);
        Ok(Self {
            seeds: config.seeds(),
            digest: config.digest(),
            train,
            dataset,
            dims,
            config,
        })
    }

    pub fn languages(&self) -> &[String] {
        &self.dataset.manifest.languages
    }

    fn num_splits(&self, language: &str) -> Result<usize> {
        self.dataset
            .manifest
            .num_splits(language)
            .ok_or_else(|| CliError::Data(format!("dataset has no language {language:?}")))
    }

    /// Languages to evaluate, in manifest order.
    pub fn targets(&self) -> Result<Vec<String>> {
        let wanted = &self.config.experiment.languages;
        for l in wanted {
            self.num_splits(l)?;
        }
        Ok(self
            .languages()
            .iter()
            .filter(|l| wanted.is_empty() || wanted.contains(l))
            .cloned()
            .collect())
    }

    /// Split ids evaluated for `language`.
    pub fn split_ids(&self, language: &str) -> Result<Vec<usize>> {
        let n = self.num_splits(language)?;
        match self.config.experiment.split {
            Some(s) if s < n => Ok(vec![s]),
            Some(s) => Err(CliError::Config(format!(
                "split {s} out of range for {language} ({n} splits)"
            ))),
            None => Ok((0..n).collect()),
        }
    }

    /// Split used from every language by multilingual models at index `s`.
    pub fn selection(&self, s: usize) -> SplitSelection {
        self.dataset
            .manifest
            .splits_per_language
            .iter()
            .map(|(l, &n)| (l.clone(), s % n))
            .collect()
    }

    fn train_indices(&self, scope: &Scope) -> Result<Vec<usize>> {
        let d = &self.dataset;
        let idx = match scope {
            Scope::Mono(lang, s) => select_split(&d.samples, &d.manifest, Some(lang), *s, Role::Train),
            Scope::Multi(s) => select(&d.samples, &d.manifest, &self.selection(*s), Role::Train),
        };
        idx.map_err(|e| CliError::Config(e.to_string()))
    }

    /// Trains a fresh model at split index `scope.index()`.
    pub fn fit(&self, kind: LossKind, scope: &Scope, teachers: &[Classifier]) -> Result<TrainOutcome> {
        let s = scope.index();
        let idx = self.train_indices(scope)?;
        if idx.is_empty() {
            return Err(CliError::Data(format!("no training samples for {scope}")));
        }
        let init = Classifier::init(&self.dims, derive_seed(self.seeds.init, s as u64))
            .map_err(CliError::training)?;
        let job = TrainJob {
            kind,
            samples: &self.dataset.samples,
            train_idx: &idx,
            teachers,
            distill: &self.config.distill,
            config: &self.train,
            shuffle_seed: derive_seed(self.seeds.shuffle, s as u64),
            diagnostics: match kind {
                LossKind::Ft => DiagnosticsMode::Off,
                _ => self.config.experiment.diagnostics,
            },
        };
        train(&init, &job).map_err(CliError::training)
    }

    /// Cross-entropy model for one language, as used for teachers and the
    /// monolingual fine-tuning baseline.
    pub fn train_language_model(&self, language: &str, split: usize) -> Result<TrainOutcome> {
        self.num_splits(language)?;
        self.fit(LossKind::Ft, &Scope::Mono(language.to_string(), split), &[])
    }

    /// Cross-entropy model over every language at index `split`.
    pub fn train_multilingual_model(&self, split: usize) -> Result<TrainOutcome> {
        self.fit(LossKind::Ft, &Scope::Multi(split), &[])
    }

    /// Test metrics of `model` on one language's split, with bootstrap bounds.
    pub fn evaluate(&self, model: &Classifier, language: &str, split: usize) -> Result<Evaluation> {
        let d = &self.dataset;
        let idx = select_split(&d.samples, &d.manifest, Some(language), split, Role::Test)
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.evaluate_indices(model, &idx, derive_seed(self.seeds.bootstrap, split as u64))
    }

    /// Metrics on the training samples of `scope`, without bounds.
    pub fn train_metrics(&self, model: &Classifier, scope: &Scope) -> Result<MetricReport> {
        let idx = self.train_indices(scope)?;
        let (preds, labels) = predict_all(model, &self.dataset.samples, &idx).map_err(CliError::training)?;
        let cm = confusion(&preds, &labels, self.dataset.manifest.num_classes).map_err(CliError::data)?;
        compute_metrics(&cm).map_err(CliError::data)
    }

    fn evaluate_indices(&self, model: &Classifier, idx: &[usize], seed: u64) -> Result<Evaluation> {
        let k = self.dataset.manifest.num_classes;
        let (preds, labels) = predict_all(model, &self.dataset.samples, idx).map_err(CliError::training)?;
        let cm = confusion(&preds, &labels, k).map_err(CliError::data)?;
        let report = compute_metrics(&cm)
            .and_then(|r| r.with_confidence_intervals(&preds, &labels, self.config.experiment.bootstrap_resamples, seed))
            .map_err(CliError::data)?;
        Ok(Evaluation {
            report,
            confusion: ConfusionExport {
                class_names: self.dataset.manifest.class_names.clone(),
                counts: cm.counts,
            },
        })
    }

    pub fn checkpoint(&self, model: &Classifier, tag: &str, split: usize) -> Checkpoint {
        Checkpoint {
            model: model.clone(),
            language_tag: tag.to_string(),
            seed: derive_seed(self.seeds.init, split as u64),
            config_digest: self.digest,
        }
    }

    /// Loads a teacher checkpoint and checks it fits this dataset.
    pub fn load_teacher(&self, path: &Path, tag: &str) -> Result<Classifier> {
        if !path.exists() {
            return Err(CliError::Data(format!("missing teacher checkpoint {}", path.display())));
        }
        let ck = load_checkpoint(path).map_err(CliError::data)?;
        let m = &self.dataset.manifest;
        if ck.model.num_classes() != m.num_classes {
            return Err(CliError::Data(format!(
                "teacher {} predicts {} classes, dataset has {}",
                path.display(),
                ck.model.num_classes(),
                m.num_classes
            )));
        }
        if ck.model.input_dim() != m.feature_dim {
            return Err(CliError::Data(format!(
                "teacher {} expects {} features, dataset has {}",
                path.display(),
                ck.model.input_dim(),
                m.feature_dim
            )));
        }
        if ck.language_tag != tag {
            return Err(CliError::Data(format!(
                "teacher {} is tagged {:?}, expected {tag:?}",
                path.display(),
                ck.language_tag
            )));
        }
        Ok(ck.model)
    }
}

/// Which samples a model trains on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Mono(String, usize),
    Multi(usize),
}

impl Scope {
    pub fn index(&self) -> usize {
        match self {
            Scope::Mono(_, s) | Scope::Multi(s) => *s,
        }
    }

    /// File-name stem: `en-0` or `0`.
    pub fn label(&self) -> String {
        match self {
            Scope::Mono(l, s) => format!("{l}-{s}"),
            Scope::Multi(s) => s.to_string(),
        }
    }

    fn tag(&self) -> &str {
        match self {
            Scope::Mono(l, _) => l,
            Scope::Multi(_) => MULTI_TAG,
        }
    }
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::Mono(l, s) => write!(f, "{l} split {s}"),
            Scope::Multi(s) => write!(f, "all languages, split index {s}"),
        }
    }
}

/// File name of a teacher checkpoint inside a teacher directory.
pub fn teacher_file(scope: &Scope) -> String {
    format!("{}.ckpt", match scope {
        Scope::Mono(..) => scope.label(),
        Scope::Multi(s) => format!("{MULTI_TAG}-{s}"),
    })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricReport,
    pub confusion: ConfusionExport,
}

/// Where teacher models come from.
#[derive(Debug, Clone)]
pub enum TeacherSource {
    /// Train them as part of the run.
    Train,
    /// Load `<lang>-<split>.ckpt` / `multi-<split>.ckpt` from a directory.
    Load(PathBuf),
}

/// Counts of per-sample reduction checks run on trained students.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionAudit {
    /// Multi-teacher loss with `lambda = 0` against plain cross-entropy.
    pub ft_checks: u64,
    /// Multi-teacher loss with one teacher against single-teacher loss.
    pub kd_checks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub paradigm: Paradigm,
    pub language: String,
    pub split: usize,
    /// Mean batch loss of the model's final epoch.
    pub train_loss: f64,
    pub report: MetricReport,
    /// Mean teacher weights per sample language, from the diagnostics of
    /// multi-teacher students. Teachers are in manifest language order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_weights: Option<BTreeMap<String, Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub command: String,
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub seeds: SeedLineage,
    pub results: Vec<UnitResult>,
    pub checkpoints: BTreeMap<String, PathBuf>,
    pub audit: ReductionAudit,
    pub wall_clock_secs: f64,
}

impl RunRecord {
    pub fn report_rows(&self) -> Vec<ReportRow> {
        self.results
            .iter()
            .map(|r| ReportRow {
                paradigm: r.paradigm.name().to_string(),
                language: r.language.clone(),
                split: r.split,
                report: r.report.clone(),
            })
            .collect()
    }

    pub fn render(&self) -> Result<RenderedReport> {
        render_report(&self.report_rows()).map_err(CliError::data)
    }

    pub fn result(&self, paradigm: Paradigm, language: &str, split: usize) -> Option<&UnitResult> {
        self.results
            .iter()
            .find(|r| r.paradigm == paradigm && r.language == language && r.split == split)
    }
}

struct Fitted {
    outcome: TrainOutcome,
    /// Scopes of the teachers the model learned from, in loss order.
    teachers: Vec<Scope>,
}

fn maybe_par<K, T, F>(items: &[K], parallel: bool, f: F) -> Result<Vec<T>>
where
    K: Sync,
    T: Send,
    F: Fn(&K) -> Result<T> + Sync + Send,
{
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

fn student_scope(p: Paradigm, language: &str, s: usize) -> Scope {
    if p.is_multilingual() {
        Scope::Multi(s)
    } else {
        Scope::Mono(language.to_string(), s)
    }
}

/// Runs `paradigms` over every target language and split, writes all
/// outputs under the configured output directory and returns the record.
pub fn run(exp: &Experiment, paradigms: &[Paradigm], source: &TeacherSource, command: &str) -> Result<RunRecord> {
    let start = Instant::now();
    let mut seen = BTreeSet::new();
    let paradigms: Vec<Paradigm> = paradigms.iter().copied().filter(|p| seen.insert(*p)).collect();
    let paradigms = paradigms.as_slice();
    if paradigms.is_empty() {
        return Err(CliError::Config("no paradigms selected".into()));
    }
    let parallel = exp.config.parallel;
    let mut units = Vec::new();
    for lang in exp.targets()? {
        for s in exp.split_ids(&lang)? {
            units.push((lang.clone(), s));
        }
    }
    if units.is_empty() {
        return Err(CliError::Config("no languages selected".into()));
    }

    // Teachers each student needs.
    let lang_teachers = |s: usize| -> Vec<Scope> {
        let sel = exp.selection(s);
        exp.languages()
            .iter()
            .map(|l| Scope::Mono(l.clone(), sel[l]))
            .collect()
    };
    let mut students: BTreeMap<(Paradigm, Scope), Vec<Scope>> = BTreeMap::new();
    for &p in paradigms {
        for (lang, s) in &units {
            let scope = student_scope(p, lang, *s);
            let teachers = match p {
                Paradigm::FtMono | Paradigm::FtMulti => Vec::new(),
                Paradigm::KdMono => vec![Scope::Multi(*s)],
                Paradigm::MtkdMono | Paradigm::MtkdMulti => lang_teachers(*s),
            };
            students.insert((p, scope), teachers);
        }
    }
    let mut teacher_scopes: BTreeSet<Scope> = students.values().flatten().cloned().collect();
    if matches!(source, TeacherSource::Train) {
        // Fine-tuning students are exactly the teachers of their scope.
        for (p, scope) in students.keys() {
            if matches!(p, Paradigm::FtMono | Paradigm::FtMulti) {
                teacher_scopes.insert(scope.clone());
            }
        }
    }

    // Phase 1: teachers.
    let teacher_list: Vec<Scope> = teacher_scopes.into_iter().collect();
    let mut models: BTreeMap<Scope, Fitted> = BTreeMap::new();
    let mut loaded: BTreeMap<Scope, Classifier> = BTreeMap::new();
    match source {
        TeacherSource::Train => {
            let fitted = maybe_par(&teacher_list, parallel, |scope| {
                exp.fit(LossKind::Ft, scope, &[])
            })?;
            for (scope, outcome) in teacher_list.into_iter().zip(fitted) {
                models.insert(scope, Fitted { outcome, teachers: Vec::new() });
            }
        }
        TeacherSource::Load(dir) => {
            for scope in teacher_list {
                let model = exp.load_teacher(&dir.join(teacher_file(&scope)), scope.tag())?;
                loaded.insert(scope, model);
            }
        }
    }
    let teacher_model = |scope: &Scope| -> &Classifier {
        match models.get(scope) {
            Some(f) => &f.outcome.model,
            None => &loaded[scope],
        }
    };

    // Phase 2: students.
    let jobs: Vec<(&(Paradigm, Scope), &Vec<Scope>)> = students
        .iter()
        .filter(|((p, scope), _)| {
            !(matches!(source, TeacherSource::Train)
                && matches!(p, Paradigm::FtMono | Paradigm::FtMulti)
                && models.contains_key(scope))
        })
        .collect();
    let fitted = maybe_par(&jobs, parallel, |((p, scope), teachers)| {
        let nets: Vec<Classifier> = teachers.iter().map(|t| teacher_model(t).clone()).collect();
        exp.fit(p.loss(), scope, &nets)
    })?;
    let mut student_models: BTreeMap<(Paradigm, Scope), Fitted> = BTreeMap::new();
    for (((p, scope), teachers), outcome) in jobs.into_iter().zip(fitted) {
        student_models.insert((*p, scope.clone()), Fitted { outcome, teachers: teachers.clone() });
    }
    let student = |p: Paradigm, scope: &Scope| -> &Fitted {
        student_models
            .get(&(p, scope.clone()))
            .unwrap_or_else(|| &models[scope])
    };

    // Reduction checks on every distilled student.
    let mut audit = ReductionAudit::default();
    for ((p, scope), fitted) in &student_models {
        if p.loss() == LossKind::Ft {
            continue;
        }
        let nets: Vec<&Classifier> = fitted.teachers.iter().map(teacher_model).collect();
        let counts = audit_reductions(exp, &fitted.outcome.model, scope, &nets, &fitted.teachers)?;
        audit.ft_checks += counts.ft_checks;
        audit.kd_checks += counts.kd_checks;
    }

    // Evaluation.
    let cells: Vec<(Paradigm, String, usize)> = paradigms
        .iter()
        .flat_map(|&p| units.iter().map(move |(l, s)| (p, l.clone(), *s)))
        .collect();
    let evaluations = maybe_par(&cells, parallel, |(p, lang, s)| {
        exp.evaluate(&student(*p, &student_scope(*p, lang, *s)).outcome.model, lang, *s)
    })?;

    // Outputs.
    let out = &exp.config.out_dir;
    let mut checkpoints = BTreeMap::new();
    let mut results = Vec::with_capacity(cells.len());
    for ((p, lang, s), eval) in cells.iter().zip(evaluations) {
        let scope = student_scope(*p, lang, *s);
        let fitted = student(*p, &scope);
        let teacher_weights = (p.loss() == LossKind::Mtkd && !fitted.outcome.diagnostics.is_empty())
            .then(|| mean_teacher_weights(&fitted.outcome.diagnostics));
        write_json(&out.join("confusion").join(format!("{p}-{lang}-{s}.json")), &eval.confusion)?;
        results.push(UnitResult {
            paradigm: *p,
            language: lang.clone(),
            split: *s,
            train_loss: fitted.outcome.final_epoch_loss,
            report: eval.report,
            teacher_weights,
        });
    }
    for (scope, fitted) in &models {
        let path = out.join("teachers").join(teacher_file(scope));
        save(exp, &path, &fitted.outcome.model, scope)?;
        checkpoints.insert(format!("teacher:{}", scope.label()), path);
    }
    for &p in paradigms {
        let scopes: BTreeSet<Scope> = units.iter().map(|(l, s)| student_scope(p, l, *s)).collect();
        for scope in scopes {
            let fitted = student(p, &scope);
            let path = out.join("checkpoints").join(format!("{p}-{}.ckpt", scope.label()));
            save(exp, &path, &fitted.outcome.model, &scope)?;
            checkpoints.insert(format!("{p}:{}", scope.label()), path);
            if !fitted.outcome.diagnostics.is_empty() {
                write_diagnostics(&out.join("diag").join(format!("{p}-{}.jsonl", scope.label())), &fitted.outcome.diagnostics)?;
            }
        }
    }

    let record = RunRecord {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_digest: hex::encode(exp.digest),
        config: exp.config.clone(),
        seeds: exp.seeds,
        results,
        checkpoints,
        audit,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    write_report(out, &record)?;
    write_json(&out.join("run.json"), &record)?;
    Ok(record)
}

/// Checks, on the real training samples of a distilled student, that the
/// multi-teacher loss collapses to cross-entropy at `lambda = 0` and to the
/// single-teacher loss with one teacher, bit for bit.
fn audit_reductions(
    exp: &Experiment,
    model: &Classifier,
    scope: &Scope,
    teachers: &[&Classifier],
    teacher_scopes: &[Scope],
) -> Result<ReductionAudit> {
    let cfg = exp.config.distill;
    let ft_cfg = DistillConfig { lambda: 0.0, ..cfg };
    let mut audit = ReductionAudit::default();
    let fail = |what: &str, id: usize| {
        CliError::Training(format!("reduction check failed ({what}) for sample {id} of {scope}"))
    };
    for id in exp.train_indices(scope)? {
        let sample = &exp.dataset.samples[id];
        let logits = model.forward(&sample.features).map_err(CliError::training)?;
        let tl: Vec<LogitVector> = teachers
            .iter()
            .map(|t| t.forward(&sample.features))
            .collect::<std::result::Result<_, _>>()
            .map_err(CliError::training)?;

        let (ce, ce_grad) = ft_loss(&logits, sample.label).map_err(CliError::training)?;
        let m = mtkd_loss(&logits, &tl, sample.label, &ft_cfg).map_err(CliError::training)?;
        if m.loss.to_bits() != ce.to_bits() || !same_bits(m.grad.as_slice(), ce_grad.as_slice()) {
            return Err(fail("lambda = 0", id));
        }
        audit.ft_checks += 1;

        // The teacher of the sample's own language when there is one.
        let j = teacher_scopes
            .iter()
            .position(|t| matches!(t, Scope::Mono(l, _) if *l == sample.language))
            .unwrap_or(0);
        let kd = kd_loss(&logits, &tl[j], sample.label, &cfg).map_err(CliError::training)?;
        let one = mtkd_loss(&logits, std::slice::from_ref(&tl[j]), sample.label, &cfg)
            .map_err(CliError::training)?;
        if kd.loss.to_bits() != one.loss.to_bits() || !same_bits(kd.grad.as_slice(), one.grad.as_slice()) {
            return Err(fail("single teacher", id));
        }
        audit.kd_checks += 1;
    }
    Ok(audit)
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Mean weight vector per sample language.
pub fn mean_teacher_weights(diagnostics: &[DiagnosticRecord]) -> BTreeMap<String, Vec<f64>> {
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for d in diagnostics {
        let (acc, n) = sums
            .entry(d.language.clone())
            .or_insert_with(|| (vec![0.0; d.weights.len()], 0));
        acc.iter_mut().zip(&d.weights).for_each(|(a, w)| *a += w);
        *n += 1;
    }
    sums.into_iter()
        .map(|(l, (acc, n))| (l, acc.into_iter().map(|a| a / n as f64).collect()))
        .collect()
}

fn save(exp: &Experiment, path: &Path, model: &Classifier, scope: &Scope) -> Result<()> {
    ensure_parent(path)?;
    save_checkpoint(&exp.checkpoint(model, scope.tag(), scope.index()), path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(CliError::output(dir))
        }
        _ => Ok(()),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::output(path))
}

fn write_diagnostics(path: &Path, records: &[DiagnosticRecord]) -> Result<()> {
    ensure_parent(path)?;
    let file = std::fs::File::create(path).map_err(CliError::output(path))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("diagnostics serialize");
        w.write_all(b"\n").map_err(CliError::output(path))?;
    }
    w.flush().map_err(CliError::output(path))
}

/// Writes `report.csv` and `report.txt` for `record` into `dir`.
pub fn write_report(dir: &Path, record: &RunRecord) -> Result<RenderedReport> {
    let rendered = record.render()?;
    std::fs::create_dir_all(dir).map_err(CliError::output(dir))?;
    let csv = dir.join("report.csv");
    std::fs::write(&csv, &rendered.csv).map_err(CliError::output(&csv))?;
    let txt = dir.join("report.txt");
    std::fs::write(&txt, &rendered.text).map_err(CliError::output(&txt))?;
    Ok(rendered)
}
