//! Per-protein embedding sets, the EMB1 file format, pairing and splitting.
//!
//! EMB1 layout (little-endian):
//!
//! ```text
//! "EMB1" | u16 version (=1) | u32 dim | u64 count
//! count × ( u16 id_len | id_len bytes UTF-8 | dim × f32 )
//! ```
//!
//! An optional companion manifest `<file>.json` carries the model name and
//! modality, which the binary format does not store.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const EMB1_MAGIC: [u8; 4] = *b"EMB1";
pub const EMB1_VERSION: u16 = 1;
pub const EMB1_HEADER_LEN: usize = 4 + 2 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Graph,
    Text,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Graph => "graph",
            Modality::Text => "text",
        })
    }
}

/// One model's pooled embeddings, keyed by protein ID in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub model_name: String,
    pub modality: Modality,
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f32>>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    pub fn new(model_name: impl Into<String>, modality: Modality, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimMismatch {
                expected: 1,
                actual: 0,
            });
        }
        Ok(Self {
            model_name: model_name.into(),
            modality,
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
        })
    }

    /// Appends a record after checking every set invariant.
    pub fn push(&mut self, id: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyId);
        }
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if let Some(index) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { id, index });
        }
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.vectors[i].as_slice())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| (id.as_str(), v.as_slice()))
    }

    /// Serializes to EMB1 bytes.
    pub fn to_emb1_bytes(&self) -> Vec<u8> {
        let per_record: usize = self.ids.iter().map(|id| 2 + id.len()).sum::<usize>()
            + self.len() * self.dim * 4;
        let mut out = Vec::with_capacity(EMB1_HEADER_LEN + per_record);
        out.extend_from_slice(&EMB1_MAGIC);
        out.extend_from_slice(&EMB1_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (id, v) in self.iter() {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Parses EMB1 bytes into a validated set.
    pub fn from_emb1_bytes(
        bytes: &[u8],
        model_name: impl Into<String>,
        modality: Modality,
    ) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
        if magic != EMB1_MAGIC {
            return Err(Error::BadMagic {
                expected: EMB1_MAGIC,
                found: magic,
            });
        }
        let version = cur.u16("version")?;
        if version != EMB1_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let dim = cur.u32("dim")? as usize;
        let count = cur.u64("count")?;
        let mut set = EmbeddingSet::new(model_name, modality, dim)?;
        for r in 0..count {
            let id_len = cur.u16("id length")? as usize;
            let id_bytes = cur.take(id_len, "id")?;
            let id = std::str::from_utf8(id_bytes)
                .map_err(|_| Error::InvalidId(format!("record {r} id is not valid UTF-8")))?
                .to_owned();
            let needed = dim * 4;
            let remaining = cur.remaining();
            if remaining < needed {
                // A final record with a whole number of floats short of `dim`
                // is a dimension error; anything else is truncation.
                if r + 1 == count && remaining.is_multiple_of(4) {
                    return Err(Error::DimMismatch {
                        expected: dim,
                        actual: remaining / 4,
                    });
                }
                return Err(Error::TruncatedFile(format!(
                    "record {r} ({id:?}) needs {needed} vector bytes, {remaining} left"
                )));
            }
            let vector = cur
                .take(needed, "vector")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            set.push(id, vector)?;
        }
        if cur.remaining() > 0 {
            return Err(Error::TrailingBytes(cur.remaining()));
        }
        Ok(set)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::TruncatedFile(format!(
                "reading {what} at byte {}: need {n}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Companion metadata written next to an EMB1 file as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingManifest {
    pub model_name: String,
    pub modality: Modality,
    pub dim: usize,
    pub count: usize,
    pub source: String,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::io(path.display().to_string(), e),
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads an EMB1 file as the given modality.
///
/// When a companion manifest exists, its model name is used and its modality,
/// dim and count are checked against the file; otherwise the model name is the
/// file stem.
pub fn read_embedding_file(path: &Path, modality: Modality) -> Result<EmbeddingSet> {
    let bytes = read_bytes(path)?;
    let mpath = manifest_path(path);
    let manifest = if mpath.exists() {
        let text = read_bytes(&mpath)?;
        let m: EmbeddingManifest =
            serde_json::from_slice(&text).map_err(|e| Error::Manifest {
                path: mpath.display().to_string(),
                message: e.to_string(),
            })?;
        if m.modality != modality {
            return Err(Error::WrongModality {
                expected: modality.to_string(),
                actual: m.modality.to_string(),
            });
        }
        Some(m)
    } else {
        None
    };
    let model_name = match &manifest {
        Some(m) => m.model_name.clone(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let set = EmbeddingSet::from_emb1_bytes(&bytes, model_name, modality)?;
    if let Some(m) = manifest {
        if m.dim != set.dim() || m.count != set.len() {
            return Err(Error::Manifest {
                path: mpath.display().to_string(),
                message: format!(
                    "manifest says dim {} count {}, file has dim {} count {}",
                    m.dim,
                    m.count,
                    set.dim(),
                    set.len()
                ),
            });
        }
    }
    Ok(set)
}

pub fn write_embedding_file(set: &EmbeddingSet, path: &Path) -> Result<()> {
    write_bytes(path, &set.to_emb1_bytes())
}

/// Writes the EMB1 file and its companion manifest.
pub fn write_embedding_file_with_manifest(
    set: &EmbeddingSet,
    path: &Path,
    source: &str,
) -> Result<()> {
    write_embedding_file(set, path)?;
    let manifest = EmbeddingManifest {
        model_name: set.model_name.clone(),
        modality: set.modality,
        dim: set.dim(),
        count: set.len(),
        source: source.to_owned(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_bytes(&manifest_path(path), text.as_bytes())
}

/// Graph and text embeddings restricted to the proteins both sets cover.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    pub graph: EmbeddingSet,
    pub text: EmbeddingSet,
    ids: Vec<String>,
}

impl PairedDataset {
    /// Sorted intersection of the two ID sets.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ids.binary_search_by(|p| p.as_str().cmp(id)).is_ok()
    }

    pub fn graph_vector(&self, id: &str) -> Result<Vec<f64>> {
        self.lookup(&self.graph, id)
    }

    pub fn text_vector(&self, id: &str) -> Result<Vec<f64>> {
        self.lookup(&self.text, id)
    }

    fn lookup(&self, set: &EmbeddingSet, id: &str) -> Result<Vec<f64>> {
        if !self.contains(id) {
            return Err(Error::UnknownId(id.to_owned()));
        }
        let v = set.get(id).ok_or_else(|| Error::UnknownId(id.to_owned()))?;
        Ok(v.iter().map(|&x| x as f64).collect())
    }
}

pub fn pair_datasets(graph: EmbeddingSet, text: EmbeddingSet) -> Result<PairedDataset> {
    if graph.modality != Modality::Graph {
        return Err(Error::WrongModality {
            expected: Modality::Graph.to_string(),
            actual: graph.modality.to_string(),
        });
    }
    if text.modality != Modality::Text {
        return Err(Error::WrongModality {
            expected: Modality::Text.to_string(),
            actual: text.modality.to_string(),
        });
    }
    let ids: Vec<String> = graph
        .ids()
        .iter()
        .filter(|id| text.contains(id))
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < 2 {
        return Err(Error::EmptyIntersection(ids.len()));
    }
    Ok(PairedDataset { graph, text, ids })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DatasetSplit {
    pub fn part(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "validation" | "val" => Some(&self.validation),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

pub const MIN_SPLIT_IDS: usize = 10;

/// 80/10/10 split of the paired IDs under a seeded Fisher–Yates shuffle.
pub fn split_dataset(paired: &PairedDataset, seed: u64) -> Result<DatasetSplit> {
    split_ids(paired.ids(), seed)
}

/// Splits an ID list. The result depends only on the sorted ID set and the seed.
pub fn split_ids(ids: &[String], seed: u64) -> Result<DatasetSplit> {
    let n = ids.len();
    if n < MIN_SPLIT_IDS {
        return Err(Error::TooFewIds {
            required: MIN_SPLIT_IDS,
            actual: n,
        });
    }
    let mut order: Vec<String> = ids.to_vec();
    order.sort_unstable();
    SplitMix64::new(seed).shuffle(&mut order);
    let n_train = n * 8 / 10;
    let n_val = n / 10;
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok(DatasetSplit {
        seed,
        train: order,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(modality: Modality, dim: usize, ids: &[&str]) -> EmbeddingSet {
        let mut s = EmbeddingSet::new("m", modality, dim).unwrap();
        for (i, id) in ids.iter().enumerate() {
            s.push(*id, vec![i as f32; dim]).unwrap();
        }
        s
    }

    #[test]
    fn minimal_file_parses() {
        let mut s = EmbeddingSet::new("m", Modality::Graph, 3).unwrap();
        s.push("P1", vec![1.0, 0.0, 0.0]).unwrap();
        let back = EmbeddingSet::from_emb1_bytes(&s.to_emb1_bytes(), "m", Modality::Graph).unwrap();
        assert_eq!(back.dim(), 3);
        assert_eq!(back.len(), 1);
        assert_eq!(back.get("P1").unwrap(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn header_sizes() {
        let empty = EmbeddingSet::new("m", Modality::Text, 64).unwrap();
        assert_eq!(empty.to_emb1_bytes().len(), 18);
        let mut one = EmbeddingSet::new("m", Modality::Text, 2).unwrap();
        one.push("A", vec![0.5, -0.5]).unwrap();
        assert_eq!(one.to_emb1_bytes().len(), 29);
    }

    #[test]
    fn short_final_record_is_dim_mismatch() {
        let mut s = EmbeddingSet::new("m", Modality::Graph, 3).unwrap();
        s.push("P1", vec![1.0, 2.0, 3.0]).unwrap();
        let mut bytes = s.to_emb1_bytes();
        // Rewrite the header dim to 4 so the record is one float short.
        bytes[6..10].copy_from_slice(&4u32.to_le_bytes());
        let err = EmbeddingSet::from_emb1_bytes(&bytes, "m", Modality::Graph).unwrap_err();
        assert!(matches!(err, Error::DimMismatch { expected: 4, actual: 3 }), "{err:?}");
    }

    #[test]
    fn decode_errors() {
        let s = set(Modality::Graph, 2, &["A", "B"]);
        let good = s.to_emb1_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&bad, "m", Modality::Graph),
            Err(Error::BadMagic { .. })
        ));

        let mut bad = good.clone();
        bad[4..6].copy_from_slice(&2u16.to_le_bytes());
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&bad, "m", Modality::Graph),
            Err(Error::VersionUnsupported(2))
        ));

        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&good[..good.len() - 3], "m", Modality::Graph),
            Err(Error::TruncatedFile(_))
        ));
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&good[..10], "m", Modality::Graph),
            Err(Error::TruncatedFile(_))
        ));

        let mut dup = EmbeddingSet::new("m", Modality::Graph, 1).unwrap();
        dup.push("A", vec![1.0]).unwrap();
        let mut bytes = dup.to_emb1_bytes();
        bytes[10..18].copy_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.push(b'A');
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&bytes, "m", Modality::Graph),
            Err(Error::DuplicateId(_))
        ));

        let mut nan = good.clone();
        let last = nan.len() - 4;
        nan[last..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&nan, "m", Modality::Graph),
            Err(Error::NonFiniteValue { .. })
        ));

        let mut trailing = good;
        trailing.push(0);
        assert!(matches!(
            EmbeddingSet::from_emb1_bytes(&trailing, "m", Modality::Graph),
            Err(Error::TrailingBytes(1))
        ));
    }

    #[test]
    fn push_rejects_invalid_records() {
        let mut s = EmbeddingSet::new("m", Modality::Graph, 2).unwrap();
        assert!(matches!(s.push("", vec![0.0, 0.0]), Err(Error::EmptyId)));
        assert!(matches!(
            s.push("A", vec![f32::INFINITY, 0.0]),
            Err(Error::NonFiniteValue { index: 0, .. })
        ));
        assert!(matches!(
            s.push("A", vec![0.0]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(s.is_empty());
    }

    #[test]
    fn pairing() {
        let g = set(Modality::Graph, 2, &["C", "A", "B"]);
        let t = set(Modality::Text, 3, &["D", "C", "B"]);
        let p = pair_datasets(g, t).unwrap();
        assert_eq!(p.ids(), &["B".to_string(), "C".to_string()]);

        let g = set(Modality::Graph, 2, &["A", "B"]);
        let t = set(Modality::Text, 2, &["C", "D"]);
        assert!(matches!(pair_datasets(g, t), Err(Error::EmptyIntersection(0))));

        let g = set(Modality::Text, 2, &["A", "B"]);
        let t = set(Modality::Text, 2, &["A", "B"]);
        assert!(matches!(pair_datasets(g, t), Err(Error::WrongModality { .. })));
    }

    #[test]
    fn identical_id_sets_pair_fully() {
        let ids: Vec<String> = (0..100).map(|i| format!("P{i:03}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let p = pair_datasets(set(Modality::Graph, 4, &refs), set(Modality::Text, 8, &refs)).unwrap();
        assert_eq!(p.len(), 100);
    }

    #[test]
    fn split_sizes() {
        let ids: Vec<String> = (0..20_000).map(|i| format!("P{i:05}")).collect();
        let s = split_ids(&ids, 42).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (16_000, 2_000, 2_000));

        let ids: Vec<String> = (0..10).map(|i| format!("P{i}")).collect();
        let a = split_ids(&ids, 42).unwrap();
        let b = split_ids(&ids, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (8, 1, 1));

        assert!(matches!(
            split_ids(&ids[..9], 42),
            Err(Error::TooFewIds { actual: 9, .. })
        ));
    }
}
