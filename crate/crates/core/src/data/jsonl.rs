use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetManifest, LabeledSample};
use crate::error::{io_err, Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine<'a> {
    features: Vec<f64>,
    label: std::borrow::Cow<'a, str>,
    language: std::borrow::Cow<'a, str>,
    split: u32,
}

/// `data.jsonl` -> `data.manifest.json`.
pub fn manifest_path(jsonl: &Path) -> PathBuf {
    jsonl.with_extension("manifest.json")
}

/// Writes one JSON object per sample plus the sibling manifest.
pub fn write_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let m = &dataset.manifest;
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for s in &dataset.samples {
        let line = SampleLine {
            features: s.features.clone(),
            label: m.class_names[s.label].as_str().into(),
            language: s.language.as_str().into(),
            split: s.split,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;

    let mpath = manifest_path(path);
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    std::fs::write(&mpath, text).map_err(io_err(&mpath))
}

/// Reads a JSONL sample file and its sibling manifest.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mpath = manifest_path(path);
    let mtext = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    let manifest: DatasetManifest = serde_json::from_str(&mtext).map_err(|e| Error::Parse {
        path: mpath.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if manifest.format_version != super::MANIFEST_VERSION {
        return Err(Error::Parse {
            path: mpath,
            line: 1,
            message: format!("unsupported manifest version {}", manifest.format_version),
        });
    }
    if manifest.class_names.len() != manifest.num_classes {
        return Err(Error::Parse {
            path: mpath,
            line: 1,
            message: "class_names length differs from num_classes".into(),
        });
    }

    let file = File::open(path).map_err(io_err(path))?;
    let mut samples = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let raw: SampleLine = serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?;
        if raw.features.len() != manifest.feature_dim {
            return Err(perr(format!(
                "{} features, expected {}",
                raw.features.len(),
                manifest.feature_dim
            )));
        }
        let label = manifest
            .class_index(&raw.label)
            .ok_or_else(|| perr(format!("unknown class name {:?}", raw.label)))?;
        let stored = manifest
            .stored_split_values(&raw.language)
            .ok_or_else(|| perr(format!("language {:?} not in manifest", raw.language)))?;
        if raw.split as usize >= stored {
            return Err(perr(format!(
                "split {} out of range for language {}",
                raw.split, raw.language
            )));
        }
        samples.push(LabeledSample {
            features: raw.features,
            label,
            language: raw.language.into_owned(),
            split: raw.split,
        });
    }
    if samples.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let dataset = Dataset { samples, manifest };
    dataset
        .validate()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(dataset)
}
