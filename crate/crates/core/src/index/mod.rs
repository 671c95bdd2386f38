//! Retrieval indices and the clustering used to prepare image-retrieval training pairs.
//!
//! Indices are immutable once built and are `Send + Sync`; any number of readers may
//! query them concurrently.

mod bm25;
mod cluster;
mod dense;
mod embed;
mod record;
mod store;
mod tokenize;

pub use bm25::{Bm25Index, Bm25Params};
pub use cluster::{cluster_count, kmeans_pp, sample_positive_pairs, ClusterModel, PositivePair};
pub use dense::{cosine, DenseIndex, Vector};
pub use embed::{combine_multimodal, HashingEmbedder};
pub use record::{
    sort_records, ImageEntry, MultimodalEntry, Payload, ScoredRecord, TextChunk,
};
pub use store::{
    build_index_file, embed_corpus, load_vector_table, IndexFile, IndexKind, StoreError, VectorRow,
};
pub use tokenize::tokenize;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum IndexError {
    #[error("query dimension {got} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vector for `{id}` contains a non-finite value")]
    NonFinite { id: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("chunk `{0}` has empty content")]
    EmptyContent(String),
    #[error("top_k must be at least 1")]
    ZeroTopK,
    #[error("k={k} is invalid for {n} vectors")]
    InvalidK { k: usize, n: usize },
    #[error("no vector supplied for `{0}`")]
    MissingVector(String),
    #[error("{0}")]
    Invalid(String),
}
