//! Online retrieval: a dataset's relevance is the maximum cosine similarity
//! between the query and any of its embedded fields, and the per-field
//! scores are returned as the explanation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, EmbedError, Embedder};
use crate::index::{FieldKind, IndexedDataset, SearchIndex};
use crate::metadata::{DatasetMetadata, DatasetSize, RecommendationTask};
use crate::Embedding;

pub const MEDIUM_MIN_INTERACTIONS: u64 = 1_000_000;
pub const LARGE_MIN_INTERACTIONS: u64 = 100_000_000;

pub const DEFAULT_LIMIT: usize = 20;
pub const MAX_LIMIT: usize = 100;
pub const MAX_QUERY_CHARS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
    Unknown,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 4] = [
        SizeBucket::Small,
        SizeBucket::Medium,
        SizeBucket::Large,
        SizeBucket::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SizeBucket::Small => "small",
            SizeBucket::Medium => "medium",
            SizeBucket::Large => "large",
            SizeBucket::Unknown => "unknown",
        }
    }
}

impl fmt::Display for SizeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SizeBucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SizeBucket::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Buckets by interaction count: small < 1M <= medium < 100M <= large.
pub fn size_bucket(size: &DatasetSize) -> SizeBucket {
    match size.num_interactions {
        None => SizeBucket::Unknown,
        Some(n) if n < MEDIUM_MIN_INTERACTIONS => SizeBucket::Small,
        Some(n) if n < LARGE_MIN_INTERACTIONS => SizeBucket::Medium,
        Some(_) => SizeBucket::Large,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("EMPTY_QUERY: query text is empty")]
    EmptyQuery,
    #[error("QUERY_TOO_LONG: {0} characters exceeds the limit of {MAX_QUERY_CHARS}")]
    QueryTooLong(usize),
    #[error("INVALID_LIMIT: {0} is outside [1, {MAX_LIMIT}]")]
    InvalidLimit(usize),
    #[error("FINGERPRINT_MISMATCH: query embedder `{query}` vs index `{index}`")]
    FingerprintMismatch { query: String, index: String },
    #[error("DIMENSION_MISMATCH: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("EMBEDDER_FAILURE: {0}")]
    EmbedderFailure(EmbedError),
}

/// A validated query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchQuery {
    text: String,
    pub size_filter: Option<BTreeSet<SizeBucket>>,
    pub task_filter: Option<BTreeSet<RecommendationTask>>,
    /// Stored lowercased.
    pub domain_filter: Option<BTreeSet<String>>,
    limit: usize,
}

impl SearchQuery {
    pub fn new(text: impl Into<String>) -> Result<Self, SearchError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(SearchError::EmptyQuery);
        }
        let len = text.chars().count();
        if len > MAX_QUERY_CHARS {
            return Err(SearchError::QueryTooLong(len));
        }
        Ok(SearchQuery {
            text,
            size_filter: None,
            task_filter: None,
            domain_filter: None,
            limit: DEFAULT_LIMIT,
        })
    }

    pub fn with_limit(mut self, limit: usize) -> Result<Self, SearchError> {
        if !(1..=MAX_LIMIT).contains(&limit) {
            return Err(SearchError::InvalidLimit(limit));
        }
        self.limit = limit;
        Ok(self)
    }

    pub fn with_sizes(mut self, sizes: impl IntoIterator<Item = SizeBucket>) -> Self {
        self.size_filter = Some(sizes.into_iter().collect());
        self
    }

    pub fn with_tasks(mut self, tasks: impl IntoIterator<Item = RecommendationTask>) -> Self {
        self.task_filter = Some(tasks.into_iter().collect());
        self
    }

    pub fn with_domains<S: AsRef<str>>(mut self, domains: impl IntoIterator<Item = S>) -> Self {
        self.domain_filter = Some(
            domains
                .into_iter()
                .map(|d| d.as_ref().to_lowercase())
                .collect(),
        );
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    /// Whether `entry` passes every active filter. An entry of unknown size
    /// passes a size filter only when `unknown` is selected explicitly.
    pub fn admits(&self, entry: &IndexedDataset) -> bool {
        if let Some(sizes) = &self.size_filter {
            if !sizes.contains(&entry.size_bucket) {
                return false;
            }
        }
        if let Some(tasks) = &self.task_filter {
            if !entry.metadata.tasks.iter().any(|t| tasks.contains(t)) {
                return false;
            }
        }
        if let Some(domains) = &self.domain_filter {
            if !entry
                .metadata
                .domains
                .iter()
                .any(|d| domains.contains(&d.to_lowercase()))
            {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldScore {
    pub field: FieldKind,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<'a> {
    pub dataset: &'a DatasetMetadata,
    pub size_bucket: SizeBucket,
    pub relevance: f64,
    /// Sorted by score descending, ties in canonical field order.
    pub explanation: Vec<FieldScore>,
}

impl SearchResult<'_> {
    pub fn top_field(&self) -> FieldKind {
        self.explanation[0].field
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<'a> {
    /// Filter survivors before truncation to the limit.
    pub total_matched: usize,
    pub results: Vec<SearchResult<'a>>,
}

/// Scores one entry: cosine against every present field, relevance is the
/// maximum.
pub fn score_dataset(
    query_vec: &Embedding,
    entry: &IndexedDataset,
) -> Result<(f64, Vec<FieldScore>), SearchError> {
    let mut explanation = entry
        .field_vectors
        .iter()
        .map(|(field, v)| {
            cosine(query_vec, v)
                .map(|score| FieldScore {
                    field: *field,
                    score,
                })
                .map_err(|e| match e {
                    EmbedError::DimensionMismatch { expected, found } => {
                        SearchError::DimensionMismatch { expected, found }
                    }
                    other => SearchError::EmbedderFailure(other),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    // BTreeMap iteration is already canonical, so a stable sort keeps ties in field order
    explanation.sort_by(|a, b| b.score.total_cmp(&a.score));
    let relevance = explanation.first().map_or(f64::NEG_INFINITY, |s| s.score);
    Ok((relevance, explanation))
}

pub fn apply_filters<'a>(
    entries: &'a [IndexedDataset],
    query: &SearchQuery,
) -> Vec<&'a IndexedDataset> {
    entries.iter().filter(|e| query.admits(e)).collect()
}

/// Runs `query` against `index`: embed once, filter, score, rank by
/// relevance descending then id ascending, truncate.
pub fn search<'a>(
    index: &'a SearchIndex,
    query: &SearchQuery,
    embedder: &dyn Embedder,
) -> Result<SearchOutcome<'a>, SearchError> {
    let query_fp = &embedder.spec().fingerprint;
    if *query_fp != index.embedder().fingerprint {
        return Err(SearchError::FingerprintMismatch {
            query: query_fp.clone(),
            index: index.embedder().fingerprint.clone(),
        });
    }
    let query_vec = match embedder.embed(query.text()) {
        Ok(v) => v,
        Err(EmbedError::EmptyText) => return Err(SearchError::EmptyQuery),
        Err(e) => return Err(SearchError::EmbedderFailure(e)),
    };
    let survivors = apply_filters(index.entries(), query);
    let total_matched = survivors.len();

    let mut results = survivors
        .into_iter()
        .map(|entry| {
            let (relevance, explanation) = score_dataset(&query_vec, entry)?;
            Ok(SearchResult {
                dataset: &entry.metadata,
                size_bucket: entry.size_bucket,
                relevance,
                explanation,
            })
        })
        .collect::<Result<Vec<_>, SearchError>>()?;

    results.sort_by(|a, b| {
        b.relevance
            .total_cmp(&a.relevance)
            .then_with(|| a.dataset.id.cmp(&b.dataset.id))
    });
    results.truncate(query.limit());
    Ok(SearchOutcome {
        total_matched,
        results,
    })
}
