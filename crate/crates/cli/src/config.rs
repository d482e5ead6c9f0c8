//! Optional JSON run configuration. Keys mirror the long flag names with
//! underscores; a flag given on the command line overrides the file. Relative
//! paths in the file are resolved against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    pub graph: Option<PathBuf>,
    pub text: Option<PathBuf>,
    pub pair: Option<PathBuf>,

    pub fasta: Option<PathBuf>,
    pub fasta_dir: Option<PathBuf>,
    pub top: Option<usize>,
    pub meta_out: Option<PathBuf>,

    pub layers: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub preset: Option<String>,
    pub reweight: Option<PathBuf>,
    pub factor: Option<f64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub tau: Option<f64>,

    pub gh: Option<PathBuf>,
    pub th: Option<PathBuf>,
    pub split: Option<String>,

    pub scores: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub rarity: Option<PathBuf>,

    pub index: Option<PathBuf>,
    pub query_id: Option<String>,
    pub k: Option<usize>,
    pub descriptions: Option<PathBuf>,
    pub input: Option<String>,

    pub candidates: Option<PathBuf>,
    pub references: Option<PathBuf>,

    pub n: Option<usize>,
    pub latent: Option<usize>,
    pub graph_dim: Option<usize>,
    pub text_dim: Option<usize>,
    pub noise: Option<f64>,
    pub mixing: Option<String>,

    pub instances: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                CliError::user("FileNotFound", format!("file not found: {}", path.display()))
            }
            _ => CliError::runtime("IoFailure", format!("{}: {e}", path.display())),
        })?;
        let mut cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::user("InvalidConfig", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fields = [
            &mut self.out,
            &mut self.graph,
            &mut self.text,
            &mut self.pair,
            &mut self.fasta,
            &mut self.fasta_dir,
            &mut self.meta_out,
            &mut self.reweight,
            &mut self.gh,
            &mut self.th,
            &mut self.scores,
            &mut self.meta,
            &mut self.rarity,
            &mut self.index,
            &mut self.descriptions,
            &mut self.candidates,
            &mut self.references,
        ];
        for p in fields.into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// The flag value if given, else the config value.
pub fn pick<T>(flag: Option<T>, config: &Option<T>) -> Option<T>
where
    T: Clone,
{
    flag.or_else(|| config.clone())
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::missing(flag))
}
