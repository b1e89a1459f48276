//! Embedding inputs, the on-disk embedding store, the embedding service
//! client, and features derived from stored vectors.

mod client;
mod input;
mod store;

use thiserror::Error;

pub use client::{
    endpoint_from_env, fetch_embeddings, EmbedInput, EmbedRequest, EmbedResponse, EmbeddingService,
    FetchOptions, FetchRequest, FetchSummary, HttpEmbeddingClient, KeyedVector, ServiceError,
    ENDPOINT_ENV,
};
pub use input::{
    build_embedding_input, cosine_similarity, distractor_similarity_features, embedding_inputs,
    embeddings_to_features, option_inputs, similarity_features, EmbeddingVariant, OptionTarget,
    CORRECT_TAG, WRONG_TAG,
};
pub use store::{known_model, EmbeddingRecord, EmbeddingStore, ModelSpec, Pooling, RecordKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("item `{item_id}` has no wrong option {index}")]
    NoSuchOption { item_id: String, index: usize },
    #[error("unknown embedding variant `{0}`")]
    UnknownVariant(String),
    #[error("cosine similarity of a zero vector")]
    ZeroVector,
    #[error("vectors have lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("model `{model}` declares dim {expected} but got {got}")]
    DimMismatch { model: String, expected: usize, got: usize },
    #[error("model `{0}` is not declared in the store manifest")]
    UndeclaredModel(String),
    #[error("model `{model}` is already declared with a different spec")]
    ManifestConflict { model: String },
    #[error("duplicate record for item `{item_id}`, variant `{variant}`, model `{model}`")]
    DuplicateKey { item_id: String, variant: String, model: String },
    #[error("vector for item `{item_id}` contains non-finite values")]
    NonFinite { item_id: String },
    #[error("store line {line}: {message}")]
    Store { line: usize, message: String },
    #[error("no `{variant}` embeddings from `{model}` for items: {}", item_ids.join(", "))]
    MissingRecords { model: String, variant: String, item_ids: Vec<String> },
    #[error("missing `{model}` embedding for item `{item_id}`, option `{option}`")]
    MissingOption { model: String, item_id: String, option: String },
    #[error("embedding service failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding service response: {0}")]
    Protocol(String),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, EmbedError>;
