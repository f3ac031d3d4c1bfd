//! Explainable semantic search over recommender-system dataset metadata.
//!
//! The offline side validates contributed metadata files ([`metadata`]),
//! embeds every searchable field ([`embedding`]) and assembles an immutable
//! [`SearchIndex`] ([`index`]). The online side embeds a query once, scores
//! every dataset as the maximum cosine similarity over its fields and returns
//! per-field explanations ([`search`]). [`api`] renders the JSON documents
//! shared by the HTTP service and the command line.
//!
//! Vector arithmetic is generic over the component type (see
//! [`embedding::Scalar`]); the index stores `f32` components, so most callers
//! use the [`Embedding`] alias.

pub mod api;
pub mod embedding;
pub mod index;
pub mod metadata;
pub mod search;

pub use embedding::{
    cosine, embed_reference, fnv1a64, tokenize, EmbedError, Embedder, EmbedderConfig,
    EmbedderKind, EmbedderSpec, EmbeddingVector, ExternalEmbedder, ReferenceEmbedder, Scalar,
};
pub use index::{
    build_index, field_text, load_index, serialize_index, BuildOutput, BuildWarning, FieldKind,
    IndexError, IndexedDataset, SearchIndex,
};
pub use metadata::{
    load_collection, parse_metadata, validate_collection, Collection, DatasetMetadata,
    DatasetSize, Diagnostic, DiagnosticCode, MetadataError, RecommendationTask, Severity,
    ValidationReport,
};
pub use search::{
    apply_filters, score_dataset, search, size_bucket, FieldScore, SearchError, SearchOutcome,
    SearchQuery, SearchResult, SizeBucket,
};

/// Single-precision embedding, the storage format of every index.
pub type Embedding = EmbeddingVector<f32>;

/// Double-precision embedding, used where exact reference arithmetic matters.
pub type Embedding64 = EmbeddingVector<f64>;
