//! ingest, describe, rarity and gen-synthetic.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use modal_align::embedding::write_embedding_file_with_manifest;
use modal_align::protein::{rank_rarity, Summarizer, TemplateSummarizer, DEFAULT_RARITY_TOP_N};
use modal_align::synthetic::{gaussian_pair, gen_synthetic, Mixing, SyntheticSpec};
use modal_align::{
    pair_datasets, parse_fasta, read_embedding_file, split_dataset, EmbeddingSet, Error, Modality,
    ProteinRecord,
};
use serde::Serialize;

use crate::config::{pick, require, Config};
use crate::error::{CliError, CliResult};
use crate::io::{
    absolute, create_dir, emit, read_string, to_json_line, to_json_pretty, write_file,
    PairManifest, SourceEntry, PAIR_FILE, SPLIT_FILE,
};
use crate::summarizer::HttpSummarizer;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Structure-model embeddings (EMB1).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Language-model embeddings (EMB1).
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for pair.json and split.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn source_entry(path: PathBuf, set: &EmbeddingSet) -> SourceEntry {
    SourceEntry {
        path,
        model_name: set.model_name.clone(),
        dim: set.dim(),
        count: set.len(),
    }
}

pub fn ingest(args: IngestArgs, cfg: &Config) -> CliResult<()> {
    let graph_path = require(pick(args.graph, &cfg.graph), "graph")?;
    let text_path = require(pick(args.text, &cfg.text), "text")?;
    let out = require(pick(args.out, &cfg.out), "out")?;
    let seed = pick(args.seed, &cfg.seed).unwrap_or(DEFAULT_SEED);

    let graph = read_embedding_file(&graph_path, Modality::Graph)?;
    let text = read_embedding_file(&text_path, Modality::Text)?;
    let graph_entry = source_entry(absolute(&graph_path)?, &graph);
    let text_entry = source_entry(absolute(&text_path)?, &text);
    let paired = pair_datasets(graph, text)?;
    let split = split_dataset(&paired, seed)?;

    let manifest = PairManifest {
        graph: graph_entry,
        text: text_entry,
        paired: paired.len(),
        seed,
        split: PathBuf::from(SPLIT_FILE),
    };
    create_dir(&out)?;
    write_file(&out.join(SPLIT_FILE), to_json_pretty(&split))?;
    write_file(&out.join(PAIR_FILE), to_json_pretty(&manifest))?;
    emit(
        None,
        &to_json_line(&serde_json::json!({
            "paired": paired.len(),
            "train": split.train.len(),
            "validation": split.validation.len(),
            "test": split.test.len(),
        })),
    )
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[arg(long)]
    pub fasta: Option<PathBuf>,
    /// Also write per-protein metadata (id, chains, sequence_length, …) as CSV.
    #[arg(long)]
    pub meta_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DescriptionLine<'a> {
    id: &'a str,
    description: &'a str,
}

#[derive(Serialize)]
struct MetaRow<'a> {
    id: &'a str,
    chains: usize,
    sequence_length: usize,
    molecule_name: &'a str,
    organism: &'a str,
    category: String,
}

fn read_fasta(path: &Path) -> CliResult<Vec<ProteinRecord>> {
    Ok(parse_fasta(&read_string(path)?)?)
}

fn csv_string<T: Serialize>(rows: impl IntoIterator<Item = T>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::runtime("IoFailure", e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::runtime("IoFailure", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn describe(args: DescribeArgs, cfg: &Config) -> CliResult<()> {
    let fasta = require(pick(args.fasta, &cfg.fasta), "fasta")?;
    let meta_out = pick(args.meta_out, &cfg.meta_out);
    let records = read_fasta(&fasta)?;

    // The remote summarizer, when configured, only handles multi-chain entries;
    // single chains always use the template.
    let remote = HttpSummarizer::from_env();
    let mut out = String::new();
    for r in &records {
        let description = match &remote {
            Some(s) if r.is_multi_chain() => s.summarize(r)?,
            _ => TemplateSummarizer.summarize(r)?,
        };
        out.push_str(&to_json_line(&DescriptionLine {
            id: &r.protein_id,
            description: &description,
        }));
    }

    if let Some(path) = meta_out {
        let rows = records.iter().map(|r| MetaRow {
            id: &r.protein_id,
            chains: r.chains.len(),
            sequence_length: r.sequence_length,
            molecule_name: &r.molecule_name,
            organism: &r.organism,
            category: r.category(),
        });
        write_file(&path, csv_string(rows)?)?;
    }
    emit(None, &out)
}

#[derive(Debug, Args)]
pub struct RarityArgs {
    /// Directory of FASTA files (*.fasta, *.fa, *.faa).
    #[arg(long)]
    pub fasta_dir: Option<PathBuf>,
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn fasta_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::from(Error::FileNotFound(dir.to_path_buf())),
        _ => CliError::runtime("IoFailure", format!("{}: {e}", dir.display())),
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::runtime("IoFailure", format!("{}: {e}", dir.display())))?
            .path();
        let is_fasta = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "fasta" | "fa" | "faa"));
        if is_fasta && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Serialize)]
struct RarityCsvRow<'a> {
    id: &'a str,
    category: &'a str,
    count: usize,
    label: &'static str,
}

pub fn rarity(args: RarityArgs, cfg: &Config) -> CliResult<()> {
    let dir = require(pick(args.fasta_dir, &cfg.fasta_dir), "fasta-dir")?;
    let top = pick(args.top, &cfg.top).unwrap_or(DEFAULT_RARITY_TOP_N);
    let out = pick(args.out, &cfg.out);

    let mut records = Vec::new();
    for file in fasta_files(&dir)? {
        records.extend(read_fasta(&file)?);
    }
    let table = rank_rarity(&records, top)?;
    let rows = table.rows();
    let csv = csv_string(rows.iter().map(|r| RarityCsvRow {
        id: &r.protein_id,
        category: &r.category,
        count: r.count,
        label: r.label.as_str(),
    }))?;
    emit(out.as_deref(), &csv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MixingArg {
    /// Shared latent through random Gaussian maps.
    Random,
    /// Shared latent copied directly; dims must equal the latent dim.
    Identity,
    /// No shared latent: independent Gaussian graph and text vectors.
    None,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long)]
    pub graph_dim: Option<usize>,
    #[arg(long)]
    pub text_dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub mixing: Option<MixingArg>,
    /// Directory for graph.emb1 and text.emb1 (plus manifests).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn gen_synthetic_cmd(args: GenSyntheticArgs, cfg: &Config) -> CliResult<()> {
    let reference = SyntheticSpec::reference(DEFAULT_SEED);
    let mixing = match args.mixing {
        Some(m) => m,
        None => match cfg.mixing.as_deref() {
            None => MixingArg::Random,
            Some(s) => MixingArg::from_str(s, true)
                .map_err(|_| CliError::user("InvalidConfig", format!("unknown mixing {s:?}")))?,
        },
    };
    let spec = SyntheticSpec {
        n: pick(args.n, &cfg.n).unwrap_or(reference.n),
        latent_dim: pick(args.latent, &cfg.latent).unwrap_or(reference.latent_dim),
        graph_dim: pick(args.graph_dim, &cfg.graph_dim).unwrap_or(reference.graph_dim),
        text_dim: pick(args.text_dim, &cfg.text_dim).unwrap_or(reference.text_dim),
        noise: pick(args.noise, &cfg.noise).unwrap_or(reference.noise),
        seed: pick(args.seed, &cfg.seed).unwrap_or(DEFAULT_SEED),
        mixing: match mixing {
            MixingArg::Identity => Mixing::Identity,
            _ => Mixing::Random,
        },
    };
    let out = require(pick(args.out, &cfg.out), "out")?;

    let (graph, text) = match mixing {
        MixingArg::None => {
            if spec.graph_dim < 2 || spec.text_dim < 2 {
                return Err(Error::BadDims(format!(
                    "graph {}, text {}: both must be at least 2",
                    spec.graph_dim, spec.text_dim
                ))
                .into());
            }
            gaussian_pair(spec.n, spec.graph_dim, spec.text_dim, spec.seed)?
        }
        _ => gen_synthetic(&spec)?,
    };
    create_dir(&out)?;
    let source = format!(
        "gen-synthetic n={} latent={} noise={} seed={} mixing={:?}",
        spec.n, spec.latent_dim, spec.noise, spec.seed, mixing
    )
    .to_lowercase();
    write_embedding_file_with_manifest(&graph, &out.join("graph.emb1"), &source)?;
    write_embedding_file_with_manifest(&text, &out.join("text.emb1"), &source)?;
    Ok(())
}
