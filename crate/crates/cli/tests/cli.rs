//! Drives the `mtkd` binary end to end on a small desk configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtkd_core::metrics::parse_report_csv;
use mtkd_core::model::load_checkpoint;
use tempfile::TempDir;

const SMALL: &str = r#"
[data]
train_per_class = 30
test_per_class = 10

[train]
epochs = 4

[experiment]
bootstrap_resamples = 100
"#;

struct Workspace {
    dir: TempDir,
    config: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("small.toml");
        fs::write(&config, SMALL).unwrap();
        Self { dir, config }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    /// Runs `mtkd --config small.toml --out <rel> <args>`.
    fn mtkd(&self, out: &str, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_mtkd"))
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(self.path(out))
            .args(args)
            .output()
            .unwrap()
    }
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn params(path: &Path) -> Vec<u64> {
    load_checkpoint(path).unwrap().model.params_flat().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn gen_data_is_deterministic_in_the_seed() {
    let ws = Workspace::new();
    let stdout = ok(ws.mtkd("a", &["--seed", "3", "gen-data"]));
    assert!(stdout.contains("en: train 120 test 40"), "{stdout}");
    ok(ws.mtkd("b", &["--seed", "3", "gen-data"]));
    ok(ws.mtkd("c", &["--seed", "4", "gen-data"]));
    let a = read(&ws.path("a/data.jsonl"));
    assert_eq!(a, read(&ws.path("b/data.jsonl")));
    assert_ne!(a, read(&ws.path("c/data.jsonl")));
}

#[test]
fn teacher_checkpoints_reproduce_byte_for_byte() {
    let ws = Workspace::new();
    let stdout = ok(ws.mtkd("a", &["train-teacher", "--language", "fi"]));
    assert!(stdout.contains("test UR on fi"), "{stdout}");
    ok(ws.mtkd("b", &["train-teacher", "--language", "fi"]));
    let path = ws.path("a/teachers/fi-0.ckpt");
    assert_eq!(read(&path), read(&ws.path("b/teachers/fi-0.ckpt")));
    assert_eq!(load_checkpoint(&path).unwrap().language_tag, "fi");

    ok(ws.mtkd("a", &["train-teacher", "--language", "multi"]));
    assert_eq!(load_checkpoint(&ws.path("a/teachers/multi-0.ckpt")).unwrap().language_tag, "multi");
}

#[test]
fn ft_mono_student_is_the_standalone_teacher() {
    let ws = Workspace::new();
    ok(ws.mtkd("run", &["compare", "--paradigms", "ft-mono,ft-multi"]));
    ok(ws.mtkd("solo", &["train-teacher", "--language", "en"]));
    assert_eq!(params(&ws.path("run/checkpoints/ft-mono-en-0.ckpt")), params(&ws.path("solo/teachers/en-0.ckpt")));
}

#[test]
fn distill_from_saved_teachers_matches_compare() {
    let ws = Workspace::new();
    for lang in ["en", "fi", "fr"] {
        ok(ws.mtkd("saved", &["train-teacher", "--language", lang]));
    }
    ok(ws.mtkd("saved", &["distill", "--paradigm", "mtkd-mono"]));
    ok(ws.mtkd("inrun", &["compare", "--paradigms", "ft-mono,mtkd-mono"]));
    for lang in ["en", "fi", "fr"] {
        let rel = format!("checkpoints/mtkd-mono-{lang}-0.ckpt");
        assert_eq!(params(&ws.path(&format!("saved/{rel}"))), params(&ws.path(&format!("inrun/{rel}"))));
    }
    let rows = |dir: &str| {
        let text = String::from_utf8(read(&ws.path(&format!("{dir}/report.csv")))).unwrap();
        parse_report_csv(&text).unwrap().into_iter().filter(|r| r.paradigm == "mtkd-mono").collect::<Vec<_>>()
    };
    assert_eq!(rows("saved"), rows("inrun"));
}

#[test]
fn missing_teacher_exits_with_data_error() {
    let ws = Workspace::new();
    let out = ws.mtkd("run", &["distill", "--paradigm", "mtkd-mono"]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("en-0.ckpt"), "{stderr}");
}

#[test]
fn invalid_config_exits_with_config_error() {
    let ws = Workspace::new();
    let bad = ws.path("bad.toml");
    fs::write(&bad, "[train]\nepoch = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mtkd"))
        .arg("--config")
        .arg(&bad)
        .arg("gen-data")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));

    fs::write(&bad, "[distill]\nlambda = 1.5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mtkd")).arg("--config").arg(&bad).arg("gen-data").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_is_rerendered_from_the_run_record() {
    let ws = Workspace::new();
    let printed = ok(ws.mtkd("run", &["compare", "--paradigms", "ft-mono,kd-mono"]));
    let csv = read(&ws.path("run/report.csv"));
    let txt = read(&ws.path("run/report.txt"));
    fs::remove_file(ws.path("run/report.csv")).unwrap();
    fs::remove_file(ws.path("run/report.txt")).unwrap();
    let reprinted = ok(ws.mtkd("elsewhere", &["report", "--run", ws.path("run").to_str().unwrap()]));
    assert_eq!(read(&ws.path("run/report.csv")), csv);
    assert_eq!(read(&ws.path("run/report.txt")), txt);
    assert_eq!(printed, reprinted);
}

#[test]
fn parallel_run_matches_sequential() {
    let ws = Workspace::new();
    ok(ws.mtkd("seq", &["compare"]));
    ok(ws.mtkd("par", &["--parallel", "compare"]));
    assert_eq!(read(&ws.path("seq/report.csv")), read(&ws.path("par/report.csv")));
}
