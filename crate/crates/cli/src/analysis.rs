//! correlate, analyze, retrieve and textscore.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use modal_align::protein::RarityLabel;
use modal_align::retrieval::{build_index, retrieve as retrieve_neighbors};
use modal_align::stats::{correlation_matrix, group_summary, ols_fit, ChainGroup};
use modal_align::text_metrics::score_corpus;
use modal_align::{load_head, Error, PerProteinScores};
use serde::Deserialize;

use crate::config::{pick, require, Config};
use crate::error::{CliError, CliResult};
use crate::io::{emit, load_pair, parse_json, read_csv, read_jsonl, to_json_line, to_json_pretty};
use crate::model::IndexManifest;

pub const DEFAULT_RETRIEVAL_INPUT: &str = "Describe the protein in detail.";
pub const DEFAULT_K: usize = 3;

#[derive(Deserialize)]
struct ScoreRow {
    id: String,
    score: f64,
}

fn read_scores(path: &Path) -> CliResult<PerProteinScores> {
    let rows: Vec<ScoreRow> = read_csv(path)?;
    Ok(PerProteinScores::from_entries(
        rows.into_iter().map(|r| (r.id, r.score)).collect(),
    )?)
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Per-protein score CSVs (id,score); each is labelled by its file stem.
    #[arg(required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn correlate(args: CorrelateArgs, cfg: &Config) -> CliResult<()> {
    let mut lists = Vec::with_capacity(args.scores.len());
    for path in &args.scores {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let label = if lists.iter().any(|(l, _)| *l == stem) {
            path.display().to_string()
        } else {
            stem
        };
        lists.push((label, read_scores(path)?));
    }
    let matrix = correlation_matrix(&lists)?;
    emit(pick(args.out, &cfg.out).as_deref(), &matrix.to_csv())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisKind {
    /// Linear fit of score against sequence length.
    Length,
    /// Score summaries for single- and multi-chain proteins.
    Chains,
    /// Score summaries for rare, popular and unlabeled proteins.
    Rarity,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalysisKind,
    /// Per-protein scores (id,score).
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Metadata CSV from `describe --meta-out`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Rarity CSV from `rarity`.
    #[arg(long)]
    pub rarity: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct MetaRow {
    id: String,
    chains: usize,
    sequence_length: usize,
}

#[derive(Deserialize)]
struct RarityRow {
    id: String,
    label: RarityLabel,
}

fn read_meta(path: &Path) -> CliResult<HashMap<String, MetaRow>> {
    let rows: Vec<MetaRow> = read_csv(path)?;
    let mut map = HashMap::with_capacity(rows.len());
    for r in rows {
        if map.contains_key(&r.id) {
            return Err(Error::DuplicateId(r.id).into());
        }
        map.insert(r.id.clone(), r);
    }
    Ok(map)
}

pub fn analyze(args: AnalyzeArgs, cfg: &Config) -> CliResult<()> {
    let scores = read_scores(&require(pick(args.scores, &cfg.scores), "scores")?)?;
    let out = pick(args.out, &cfg.out);
    let json = match args.kind {
        AnalysisKind::Length => {
            let meta = read_meta(&require(pick(args.meta, &cfg.meta), "meta")?)?;
            let mut x = Vec::with_capacity(scores.len());
            for id in scores.ids() {
                let m = meta.get(id).ok_or_else(|| Error::UnknownId(id.to_owned()))?;
                x.push(m.sequence_length as f64);
            }
            to_json_pretty(&ols_fit(&x, &scores.values())?)
        }
        AnalysisKind::Chains => {
            let meta = read_meta(&require(pick(args.meta, &cfg.meta), "meta")?)?;
            let groups = [ChainGroup::Single, ChainGroup::Multiple];
            let summary = group_summary(&scores, &groups, |id| {
                meta.get(id).map(|m| ChainGroup::from_chain_count(m.chains))
            })?;
            to_json_pretty(&summary)
        }
        AnalysisKind::Rarity => {
            let path = require(pick(args.rarity, &cfg.rarity), "rarity")?;
            let rows: Vec<RarityRow> = read_csv(&path)?;
            let labels: HashMap<String, RarityLabel> =
                rows.into_iter().map(|r| (r.id, r.label)).collect();
            let groups = [RarityLabel::Rare, RarityLabel::Popular, RarityLabel::Unlabeled];
            let summary = group_summary(&scores, &groups, |id| labels.get(id).copied())?;
            to_json_pretty(&summary)
        }
    };
    emit(out.as_deref(), &json)
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Training output directory (holds index.json and the graph head).
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub query_id: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    /// JSON lines {"id", "description"}, as printed by `describe`.
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
    /// Text the neighbor descriptions are prepended to.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct DescriptionLine {
    id: String,
    description: String,
}

pub fn retrieve(args: RetrieveArgs, cfg: &Config) -> CliResult<()> {
    let dir = require(pick(args.index, &cfg.index), "index")?;
    let query_id = require(pick(args.query_id, &cfg.query_id), "query-id")?;
    let k = pick(args.k, &cfg.k).unwrap_or(DEFAULT_K);
    if k == 0 {
        return Err(CliError::user("InvalidConfig", "--k must be at least 1"));
    }
    let desc_path = require(pick(args.descriptions, &cfg.descriptions), "descriptions")?;
    let input = pick(args.input, &cfg.input).unwrap_or_else(|| DEFAULT_RETRIEVAL_INPUT.to_owned());
    let out = pick(args.out, &cfg.out);

    let manifest: IndexManifest = parse_json(&dir.join(crate::model::INDEX_FILE))?;
    let loaded = load_pair(&manifest.pair)?;
    let g_head = load_head(&dir.join(&manifest.graph_head))?;
    let ids = loaded.split.part(&manifest.split).ok_or_else(|| {
        CliError::malformed(&dir, format!("unknown split {:?} in index manifest", manifest.split))
    })?;
    if !loaded.paired.contains(&query_id) {
        return Err(Error::UnknownId(query_id).into());
    }
    let index = build_index(ids, &g_head, &loaded.paired)?;

    let mut descriptions = HashMap::new();
    for line in read_jsonl::<DescriptionLine>(&desc_path)? {
        if descriptions.insert(line.id.clone(), line.description).is_some() {
            return Err(Error::DuplicateId(line.id).into());
        }
    }
    let result = retrieve_neighbors(&index, &query_id, &g_head, &loaded.paired, k, &descriptions, &input)?;
    emit(out.as_deref(), &to_json_pretty(&result))
}

#[derive(Debug, Args)]
pub struct TextscoreArgs {
    /// JSON lines {"id", "text"} of generated descriptions.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// JSON lines {"id", "text"} of reference descriptions.
    #[arg(long)]
    pub references: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct TextLine {
    id: String,
    text: String,
}

fn read_texts(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in read_jsonl::<TextLine>(path)? {
        if map.insert(line.id.clone(), line.text).is_some() {
            return Err(Error::DuplicateId(line.id).into());
        }
    }
    Ok(map)
}

pub fn textscore(args: TextscoreArgs, cfg: &Config) -> CliResult<()> {
    let candidates = read_texts(&require(pick(args.candidates, &cfg.candidates), "candidates")?)?;
    let references = read_texts(&require(pick(args.references, &cfg.references), "references")?)?;
    if let Some(id) = candidates
        .keys()
        .find(|id| !references.contains_key(*id))
        .or_else(|| references.keys().find(|id| !candidates.contains_key(*id)))
    {
        return Err(Error::IdSetMismatch(format!("{id} is not in both files")).into());
    }
    let score = score_corpus(
        candidates
            .iter()
            .map(|(id, c)| (c.as_str(), references[id].as_str())),
    );
    emit(pick(args.out, &cfg.out).as_deref(), &to_json_line(&score))
}
