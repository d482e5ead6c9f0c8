//! train, eval, per-protein and gradcheck.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::Args;
use modal_align::gradcheck::{check, Instance};
use modal_align::preset::{preset_configs, ModelPair};
use modal_align::train::{Reweight, DEFAULT_REWEIGHT_FACTOR};
use modal_align::{
    load_head, model_pair_score, per_protein_scores, save_head, train_pair, HeadConfig,
    ProjectionHead, TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::{pick, require, Config};
use crate::data::DEFAULT_SEED;
use crate::error::{CliError, CliResult};
use crate::io::{
    absolute, create_dir, emit, load_pair, read_string, to_json_line, write_file, LoadedPair,
};

pub const GRAPH_HEAD_FILE: &str = "graph_head.phd1";
pub const TEXT_HEAD_FILE: &str = "text_head.phd1";
pub const HISTORY_FILE: &str = "history.csv";
pub const INDEX_FILE: &str = "index.json";

/// Gradient checks fail above this relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// pair.json written by `ingest`.
    #[arg(long)]
    pub pair: Option<PathBuf>,
    /// Graph-head depth, 1 to 3.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Graph-head hidden dims, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Built-in dims for a model pair, e.g. `gearnet:llama3.1-70b`.
    #[arg(long)]
    pub preset: Option<String>,
    /// CSV with an `id` column (and optionally `label`; only `rare` rows count).
    #[arg(long)]
    pub reweight: Option<PathBuf>,
    #[arg(long)]
    pub factor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Written next to the trained heads so `retrieve` can rebuild the index.
#[derive(Debug, Serialize, Deserialize)]
pub struct IndexManifest {
    pub pair: PathBuf,
    pub graph_head: PathBuf,
    pub split: String,
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::user("InvalidConfig", message)
}

fn head_configs(
    loaded: &LoadedPair,
    layers: Option<usize>,
    hidden: Option<Vec<usize>>,
    preset: Option<String>,
    seed: u64,
) -> CliResult<(HeadConfig, HeadConfig)> {
    let graph_dim = loaded.paired.graph.dim();
    let text_dim = loaded.paired.text.dim();
    if let Some(l) = layers {
        if !(1..=3).contains(&l) {
            return Err(invalid(format!("--layers {l}; expected 1, 2 or 3")));
        }
    }
    let (g, t) = match preset {
        Some(name) => {
            if hidden.is_some() {
                return Err(invalid("--hidden and --preset are mutually exclusive"));
            }
            let pair: ModelPair = name.parse()?;
            let (g, t) = preset_configs(pair, layers.unwrap_or(1), seed)?;
            if g.input_dim != graph_dim || t.input_dim != text_dim {
                return Err(modal_align::Error::ConfigMismatch(format!(
                    "preset {pair} expects graph dim {} and text dim {}, data has {graph_dim} and {text_dim}",
                    g.input_dim, t.input_dim
                ))
                .into());
            }
            (g, t)
        }
        None => {
            let hidden = hidden.unwrap_or_default();
            let layers = layers.unwrap_or(hidden.len() + 1);
            if layers != hidden.len() + 1 {
                return Err(invalid(format!(
                    "--layers {layers} needs {} hidden dims, got {}",
                    layers - 1,
                    hidden.len()
                )));
            }
            (
                HeadConfig::new(graph_dim, text_dim, hidden, seed),
                HeadConfig::new(text_dim, text_dim, vec![], seed.wrapping_add(1)),
            )
        }
    };
    Ok((g, t))
}

fn read_rare_ids(path: &Path) -> CliResult<HashSet<String>> {
    let text = read_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CliError::malformed(path, e))?
        .clone();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| CliError::malformed(path, "no `id` column"))?;
    let label_col = headers.iter().position(|h| h == "label");
    let mut ids = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::malformed(path, e))?;
        let rare = label_col.is_none_or(|c| record.get(c) == Some("rare"));
        if rare {
            if let Some(id) = record.get(id_col) {
                ids.insert(id.to_owned());
            }
        }
    }
    Ok(ids)
}

#[derive(Serialize)]
struct TrainSummary {
    graph_dims: Vec<usize>,
    text_dims: Vec<usize>,
    epochs: usize,
    initial_val_loss: Option<f64>,
    best_val_loss: Option<f64>,
    rare_ids: usize,
}

pub fn train(args: TrainArgs, cfg: &Config) -> CliResult<()> {
    let pair_path = require(pick(args.pair, &cfg.pair), "pair")?;
    let out = require(pick(args.out, &cfg.out), "out")?;
    let defaults = TrainConfig::default();
    let seed = pick(args.seed, &cfg.seed).unwrap_or(defaults.seed);

    let reweight_path = pick(args.reweight, &cfg.reweight);
    let factor = pick(args.factor, &cfg.factor);
    if factor.is_some() && reweight_path.is_none() {
        return Err(invalid("--factor needs --reweight"));
    }
    let reweight = match reweight_path {
        Some(p) => Some(Reweight {
            rare_ids: read_rare_ids(&p)?,
            factor: factor.unwrap_or(DEFAULT_REWEIGHT_FACTOR),
        }),
        None => None,
    };
    let rare_count = reweight.as_ref().map_or(0, |r| r.rare_ids.len());
    let train_cfg = TrainConfig {
        learning_rate: pick(args.lr, &cfg.lr).unwrap_or(defaults.learning_rate),
        epochs: pick(args.epochs, &cfg.epochs).unwrap_or(defaults.epochs),
        batch_size: pick(args.batch, &cfg.batch).unwrap_or(defaults.batch_size),
        temperature: pick(args.tau, &cfg.tau).unwrap_or(defaults.temperature),
        seed,
        reweight,
    };
    train_cfg.validate()?;

    let loaded = load_pair(&pair_path)?;
    let (g_cfg, t_cfg) = head_configs(
        &loaded,
        pick(args.layers, &cfg.layers),
        pick(args.hidden, &cfg.hidden),
        pick(args.preset, &cfg.preset),
        seed,
    )?;
    let g_head = ProjectionHead::init(&g_cfg)?;
    let t_head = ProjectionHead::init(&t_cfg)?;
    let outcome = train_pair(&loaded.paired, &loaded.split, g_head, t_head, &train_cfg)?;

    create_dir(&out)?;
    save_head(&outcome.graph_head, &out.join(GRAPH_HEAD_FILE))?;
    save_head(&outcome.text_head, &out.join(TEXT_HEAD_FILE))?;
    write_file(&out.join(HISTORY_FILE), outcome.history.to_csv())?;
    let index = IndexManifest {
        pair: absolute(&pair_path)?,
        graph_head: PathBuf::from(GRAPH_HEAD_FILE),
        split: "train".into(),
    };
    write_file(&out.join(INDEX_FILE), crate::io::to_json_pretty(&index))?;

    emit(
        None,
        &to_json_line(&TrainSummary {
            graph_dims: outcome.graph_head.dim_chain(),
            text_dims: outcome.text_head.dim_chain(),
            epochs: outcome.history.epochs.len(),
            initial_val_loss: outcome.history.initial_val_loss,
            best_val_loss: outcome.history.best_val_loss(),
            rare_ids: rare_count,
        }),
    )
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pair: Option<PathBuf>,
    /// Graph head (PHD1).
    #[arg(long)]
    pub gh: Option<PathBuf>,
    /// Text head (PHD1).
    #[arg(long)]
    pub th: Option<PathBuf>,
    /// train, validation or test.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct EvalInputs {
    loaded: LoadedPair,
    graph_head: ProjectionHead,
    text_head: ProjectionHead,
    ids: Vec<String>,
    out: Option<PathBuf>,
}

fn eval_inputs(args: EvalArgs, cfg: &Config) -> CliResult<EvalInputs> {
    let pair_path = require(pick(args.pair, &cfg.pair), "pair")?;
    let gh = require(pick(args.gh, &cfg.gh), "gh")?;
    let th = require(pick(args.th, &cfg.th), "th")?;
    let split = pick(args.split, &cfg.split).unwrap_or_else(|| "test".into());
    let loaded = load_pair(&pair_path)?;
    let ids = loaded
        .split
        .part(&split)
        .ok_or_else(|| invalid(format!("unknown split {split:?}; expected train, validation or test")))?
        .to_vec();
    Ok(EvalInputs {
        graph_head: load_head(&gh)?,
        text_head: load_head(&th)?,
        loaded,
        ids,
        out: pick(args.out, &cfg.out),
    })
}

#[derive(Serialize)]
struct EvalReport {
    positive: f64,
    negative: f64,
    alignment: f64,
    #[serde(rename = "N")]
    n: usize,
}

pub fn eval(args: EvalArgs, cfg: &Config) -> CliResult<()> {
    let e = eval_inputs(args, cfg)?;
    let r = model_pair_score(&e.ids, &e.graph_head, &e.text_head, &e.loaded.paired)?;
    let report = EvalReport {
        positive: r.positive,
        negative: r.negative,
        alignment: r.alignment,
        n: r.n,
    };
    emit(e.out.as_deref(), &to_json_line(&report))
}

pub fn per_protein(args: EvalArgs, cfg: &Config) -> CliResult<()> {
    let e = eval_inputs(args, cfg)?;
    let scores = per_protein_scores(&e.ids, &e.graph_head, &e.text_head, &e.loaded.paired)?;
    emit(e.out.as_deref(), &scores.to_csv())
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct GradcheckReport {
    instances: usize,
    parameters: usize,
    max_rel_error: f64,
    max_abs_error: f64,
    tolerance: f64,
    passed: bool,
}

pub fn gradcheck(args: GradcheckArgs, cfg: &Config) -> CliResult<()> {
    let instances = pick(args.instances, &cfg.instances).unwrap_or(20);
    let seed = pick(args.seed, &cfg.seed).unwrap_or(DEFAULT_SEED);
    let mut report = GradcheckReport {
        instances,
        parameters: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        tolerance: GRADCHECK_TOLERANCE,
        passed: true,
    };
    for i in 0..instances as u64 {
        let r = check(&Instance::random(seed.wrapping_add(i))?)?;
        report.parameters += r.parameters;
        report.max_rel_error = report.max_rel_error.max(r.max_rel_error);
        report.max_abs_error = report.max_abs_error.max(r.max_abs_error);
    }
    report.passed = report.max_rel_error < GRADCHECK_TOLERANCE;
    emit(None, &to_json_line(&report))?;
    if !report.passed {
        return Err(CliError::runtime(
            "GradientMismatch",
            format!(
                "max relative error {} exceeds {GRADCHECK_TOLERANCE}",
                report.max_rel_error
            ),
        ));
    }
    Ok(())
}
