//! File plumbing shared by the subcommands: the paired-dataset manifest,
//! JSON-lines and CSV inputs, and output emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use modal_align::{
    pair_datasets, read_embedding_file, DatasetSplit, Error, Modality, PairedDataset,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const PAIR_FILE: &str = "pair.json";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceEntry {
    pub path: PathBuf,
    pub model_name: String,
    pub dim: usize,
    pub count: usize,
}

/// Written by `ingest`: the two embedding files, their overlap and the split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairManifest {
    pub graph: SourceEntry,
    pub text: SourceEntry,
    pub paired: usize,
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub split: PathBuf,
}

pub struct LoadedPair {
    pub paired: PairedDataset,
    pub split: DatasetSplit,
}

pub fn read_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()).into(),
        _ => CliError::runtime("IoFailure", format!("{}: {e}", path.display())),
    })
}

pub fn parse_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_string(path)?).map_err(|e| CliError::malformed(path, e))
}

pub fn load_pair(manifest_path: &Path) -> CliResult<LoadedPair> {
    let manifest: PairManifest = parse_json(manifest_path)?;
    let graph = read_embedding_file(&manifest.graph.path, Modality::Graph)?;
    let text = read_embedding_file(&manifest.text.path, Modality::Text)?;
    let paired = pair_datasets(graph, text)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let split: DatasetSplit = parse_json(&base.join(&manifest.split))?;
    for id in split.train.iter().chain(&split.validation).chain(&split.test) {
        if !paired.contains(id) {
            return Err(Error::IdSetMismatch(format!(
                "split lists {id}, which is not in both embedding files"
            ))
            .into());
        }
    }
    Ok(LoadedPair {
        paired,
        split,
    })
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    read_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::malformed(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let text = read_string(path)?;
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| CliError::malformed(path, e)))
        .collect()
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::write_failed(dir, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::write_failed(path, e))
}

/// Writes `text` to `out` when given, otherwise to standard output.
pub fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::runtime("IoFailure", format!("stdout: {e}")))
        }
    }
}

pub fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    fs::canonicalize(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()).into(),
        _ => CliError::runtime("IoFailure", format!("{}: {e}", path.display())),
    })
}
