//! Dataset generation, split partitioning and file round trips.

use std::collections::BTreeSet;

use mtkd_core::data::{
    generate_dataset, load_jsonl, make_batches, select_split, write_jsonl, GeneratorSpec,
    LanguageSpec, PresetParams, Role, SplitLayout, TABLE1_COUNTS,
};
use mtkd_core::model::{load_checkpoint, save_checkpoint, Checkpoint, Classifier};
use mtkd_core::rng::Rng64;
use mtkd_core::Error;

fn random_spec(rng: &mut Rng64, seed: u64) -> GeneratorSpec {
    let k = 2 + rng.below(3);
    let d = 3;
    let languages = (0..1 + rng.below(3))
        .map(|i| {
            let n = 1 + rng.below(7);
            let counts = |rng: &mut Rng64| (0..k).map(|_| 1 + rng.below(4)).collect::<Vec<_>>();
            let layout = if n == 1 {
                SplitLayout::Holdout { train: counts(rng), test: counts(rng) }
            } else {
                SplitLayout::Folds((0..n).map(|_| counts(rng)).collect())
            };
            LanguageSpec {
                tag: format!("l{i}"),
                transform_seed: seed + i as u64,
                shift: vec![0.5; d],
                layout,
            }
        })
        .collect();
    GeneratorSpec {
        class_names: (0..k).map(|c| format!("c{c}")).collect(),
        class_means: (0..k).map(|c| (0..d).map(|j| (c * d + j) as f64).collect()).collect(),
        sigma: 1.0,
        languages,
        seed,
    }
}

#[test]
fn splits_partition_every_language() {
    let mut rng = Rng64::new(2024);
    for case in 0..200u64 {
        let ds = generate_dataset(&random_spec(&mut rng, case)).unwrap();
        let m = &ds.manifest;
        for lang in &m.languages {
            let all: BTreeSet<usize> = ds
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| &s.language == lang)
                .map(|(i, _)| i)
                .collect();
            let n = m.num_splits(lang).unwrap();
            let mut covered = BTreeSet::new();
            for s in 0..n {
                let train: BTreeSet<usize> =
                    select_split(&ds.samples, m, Some(lang), s, Role::Train).unwrap().into_iter().collect();
                let test: BTreeSet<usize> =
                    select_split(&ds.samples, m, Some(lang), s, Role::Test).unwrap().into_iter().collect();
                assert!(train.is_disjoint(&test), "case {case} {lang} split {s}");
                assert!(!test.is_empty());
                if n > 1 {
                    assert_eq!(&(&train | &test), &all);
                    assert!(covered.is_disjoint(&test), "test sets overlap");
                }
                covered.extend(test);
            }
            if n > 1 {
                assert_eq!(covered, all);
            }
            assert!(select_split(&ds.samples, m, Some(lang), n, Role::Test).is_err());
        }
    }
}

#[test]
fn jsonl_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng64::new(5);
    for case in 0..20u64 {
        let ds = generate_dataset(&random_spec(&mut rng, case)).unwrap();
        let path = dir.path().join(format!("d{case}.jsonl"));
        write_jsonl(&ds, &path).unwrap();
        let back = load_jsonl(&path).unwrap();
        assert_eq!(back, ds);
        let bytes = std::fs::read(&path).unwrap();
        write_jsonl(&back, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }
}

#[test]
fn ragged_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_dataset(&GeneratorSpec::desk(&PresetParams::default(), 1, 2, 1)).unwrap();
    let path = dir.path().join("d.jsonl");
    write_jsonl(&ds, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    v["features"].as_array_mut().unwrap().pop();
    lines[2] = v.to_string();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    match load_jsonl(&path) {
        Err(Error::Parse { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("15 features"), "{message}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn table1_preset_keeps_totals() {
    let spec = GeneratorSpec::table1_scaled(&PresetParams::default(), 3, 1.0);
    let ds = generate_dataset(&spec).unwrap();
    for (tag, splits, train, test) in TABLE1_COUNTS {
        let total = ds.samples.iter().filter(|s| s.language == tag).count();
        assert_eq!(total, train + test, "{tag}");
        assert_eq!(ds.manifest.num_splits(tag), Some(splits));
    }
    let m = &ds.manifest;
    assert_eq!(select_split(&ds.samples, m, Some("fr"), 0, Role::Train).unwrap().len(), 420);
    assert_eq!(select_split(&ds.samples, m, Some("fr"), 0, Role::Test).unwrap().len(), 84);
    for (tag, _, train, test) in TABLE1_COUNTS {
        assert_eq!(select_split(&ds.samples, m, Some(tag), 0, Role::Train).unwrap().len(), train);
        assert_eq!(select_split(&ds.samples, m, Some(tag), 0, Role::Test).unwrap().len(), test);
    }
}

#[test]
fn batches_are_a_permutation() {
    for (len, bs) in [(100, 32), (7, 1), (5, 10), (64, 32)] {
        let batches = make_batches(len, bs, 3, 1);
        let mut ids: Vec<usize> = batches.concat();
        ids.sort_unstable();
        assert_eq!(ids, (0..len).collect::<Vec<_>>());
        assert!(batches.iter().all(|b| b.len() <= bs));
    }
    let sizes: Vec<usize> = make_batches(100, 32, 1, 0).iter().map(Vec::len).collect();
    assert_eq!(sizes, [32, 32, 32, 4]);
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ck = Checkpoint {
        model: Classifier::init(&[16, 64, 64, 4], 9).unwrap(),
        language_tag: "fi".into(),
        seed: 9,
        config_digest: [7; 32],
    };
    let path = dir.path().join("t.ckpt");
    save_checkpoint(&ck, &path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), ck);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.push(0);
    std::fs::write(&path, &bytes).unwrap();
    assert!(load_checkpoint(&path).is_err());
}
