//! Cross-modal alignment of protein structure-model and language-model
//! embeddings through trainable projection heads.
//!
//! The pipeline: load two [`EmbeddingSet`]s, pair and split them, train a
//! graph-side and a text-side [`ProjectionHead`] with the contrastive loss in
//! [`loss`], then score the test split with [`metrics::model_pair_score`].

pub mod adam;
pub mod embedding;
pub mod error;
pub mod gradcheck;
pub mod head;
pub mod loss;
pub mod metrics;
pub mod preset;
pub mod protein;
pub mod retrieval;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod text_metrics;
pub mod train;

pub use embedding::{
    pair_datasets, read_embedding_file, split_dataset, write_embedding_file, DatasetSplit,
    EmbeddingSet, Modality, PairedDataset,
};
pub use error::{Error, Result};
pub use head::{load_head, save_head, HeadConfig, ProjectionHead};
pub use metrics::{model_pair_score, per_protein_scores, AlignmentReport, PerProteinScores};
pub use protein::{describe_protein, parse_fasta, rank_rarity, ProteinRecord, RarityTable};
pub use train::{train_pair, TrainConfig, TrainHistory, TrainOutcome};
