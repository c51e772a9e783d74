use std::collections::BTreeMap;

use super::{DatasetManifest, LabeledSample};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, Rng64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

/// Split id chosen for each participating language.
pub type SplitSelection = BTreeMap<String, usize>;

/// Indices of the samples of `role` under `selection`.
///
/// For a language with `n >= 2` folds and split id `s`, the test set is fold
/// `s` and the train set is every other fold. A single-split language only
/// accepts id 0 and uses its stored train pool (0) and test set (1).
/// Languages absent from `selection` contribute nothing.
pub fn select(
    samples: &[LabeledSample],
    manifest: &DatasetManifest,
    selection: &SplitSelection,
    role: Role,
) -> Result<Vec<usize>> {
    let mut test_value = BTreeMap::new();
    for (lang, &split) in selection {
        let n = manifest
            .num_splits(lang)
            .ok_or_else(|| invalid(format!("unknown language {lang:?}")))?;
        if split >= n {
            return Err(invalid(format!(
                "split {split} out of range for {lang} ({n} split{})",
                if n == 1 { "" } else { "s" }
            )));
        }
        test_value.insert(lang.as_str(), if n == 1 { 1 } else { split as u32 });
    }
    Ok(samples
        .iter()
        .enumerate()
        .filter(|(_, s)| match test_value.get(s.language.as_str()) {
            Some(&t) => (s.split == t) == (role == Role::Test),
            None => false,
        })
        .map(|(i, _)| i)
        .collect())
}

/// Train or test indices for one split id, either for a single language or
/// for every language in the manifest.
pub fn select_split(
    samples: &[LabeledSample],
    manifest: &DatasetManifest,
    language: Option<&str>,
    split: usize,
    role: Role,
) -> Result<Vec<usize>> {
    let selection: SplitSelection = match language {
        Some(l) => [(l.to_string(), split)].into(),
        None => manifest.languages.iter().map(|l| (l.clone(), split)).collect(),
    };
    select(samples, manifest, &selection, role)
}

/// Shuffles `0..len` with a generator keyed by `(seed, epoch)` and cuts it
/// into batches of `batch_size`; the last batch may be short.
pub fn make_batches(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<usize> = (0..len).collect();
    Rng64::new(derive_seed(seed, epoch)).shuffle(&mut order);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, GeneratorSpec, PresetParams};

    #[test]
    fn five_fold_language() {
        let spec = GeneratorSpec::table1_scaled(&PresetParams::default(), 2, 0.02);
        let ds = generate_dataset(&spec).unwrap();
        let (s, m) = (&ds.samples, &ds.manifest);
        let test = select_split(s, m, Some("en"), 0, Role::Test).unwrap();
        let train = select_split(s, m, Some("en"), 0, Role::Train).unwrap();
        assert!(test.iter().all(|&i| s[i].split == 0 && s[i].language == "en"));
        assert!(train.iter().all(|&i| (1..5).contains(&s[i].split) && s[i].language == "en"));
        assert!(test.iter().all(|i| !train.contains(i)));
        assert_eq!(test.len() + train.len(), m.counts["en"].iter().sum::<usize>());
        assert!(select_split(s, m, Some("en"), 5, Role::Test).is_err());
    }

    #[test]
    fn single_split_language_uses_stored_partition() {
        let spec = GeneratorSpec::table1_scaled(&PresetParams::default(), 2, 0.1);
        let ds = generate_dataset(&spec).unwrap();
        let (s, m) = (&ds.samples, &ds.manifest);
        let test = select_split(s, m, Some("fr"), 0, Role::Test).unwrap();
        let train = select_split(s, m, Some("fr"), 0, Role::Train).unwrap();
        assert_eq!(test.len(), 8);
        assert_eq!(train.len(), 42);
        assert!(test.iter().all(|&i| s[i].split == 1));
        assert!(select_split(s, m, Some("fr"), 1, Role::Test).is_err());
        // Multilingual selection requires the id to exist for every language.
        assert!(select_split(s, m, None, 3, Role::Train).is_err());
        assert!(select_split(s, m, Some("de"), 0, Role::Train).is_err());
    }

    #[test]
    fn batches_cover_input() {
        let b = make_batches(100, 32, 9, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![32, 32, 32, 4]);
        assert_eq!(b, make_batches(100, 32, 9, 0));
        assert_ne!(b, make_batches(100, 32, 9, 1));
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(make_batches(0, 4, 1, 0).is_empty());
    }
}
