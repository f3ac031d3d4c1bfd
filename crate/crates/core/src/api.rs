//! JSON documents served by the HTTP API. The command line renders search
//! output through the same functions, so both produce identical bytes.

use indexmap::IndexMap;
use serde::{Serialize, Serializer};

use thiserror::Error;

use crate::index::{FieldKind, IndexedDataset};
use crate::metadata::{DatasetMetadata, RecommendationTask};
use crate::search::{SearchError, SearchOutcome, SearchQuery, SearchResult, SizeBucket};

/// Raw search parameters as they arrive from a query string or the command
/// line. Filters are comma-separated lists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchParams {
    pub q: Option<String>,
    pub size: Option<String>,
    pub task: Option<String>,
    pub domain: Option<String>,
    pub limit: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamError {
    #[error("query parameter `q` is required")]
    MissingQuery,
    #[error("query is {0} characters, the limit is {max}", max = crate::search::MAX_QUERY_CHARS)]
    QueryTooLong(usize),
    #[error("invalid filter value `{0}`")]
    InvalidFilter(String),
    #[error("limit `{0}` is not an integer in [1, {max}]", max = crate::search::MAX_LIMIT)]
    InvalidLimit(String),
}

impl ParamError {
    pub fn code(&self) -> &'static str {
        match self {
            ParamError::MissingQuery => "MISSING_QUERY",
            ParamError::QueryTooLong(_) => "QUERY_TOO_LONG",
            ParamError::InvalidFilter(_) => "INVALID_FILTER",
            ParamError::InvalidLimit(_) => "INVALID_LIMIT",
        }
    }
}

/// Splits a comma-separated list, dropping empty pieces. `None` when nothing
/// is left, so `size=` behaves like an absent parameter.
fn split_list(raw: Option<&str>) -> Option<Vec<&str>> {
    let items: Vec<&str> = raw?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    (!items.is_empty()).then_some(items)
}

impl SearchParams {
    pub fn into_query(self) -> Result<SearchQuery, ParamError> {
        let text = self.q.unwrap_or_default();
        let mut query = SearchQuery::new(text).map_err(|e| match e {
            SearchError::QueryTooLong(n) => ParamError::QueryTooLong(n),
            _ => ParamError::MissingQuery,
        })?;
        if let Some(items) = split_list(self.size.as_deref()) {
            let sizes = items
                .into_iter()
                .map(|s| s.parse::<SizeBucket>().map_err(ParamError::InvalidFilter))
                .collect::<Result<Vec<_>, _>>()?;
            query = query.with_sizes(sizes);
        }
        if let Some(items) = split_list(self.task.as_deref()) {
            let tasks = items
                .into_iter()
                .map(|s| s.parse::<RecommendationTask>().map_err(ParamError::InvalidFilter))
                .collect::<Result<Vec<_>, _>>()?;
            query = query.with_tasks(tasks);
        }
        if let Some(items) = split_list(self.domain.as_deref()) {
            query = query.with_domains(items);
        }
        if let Some(raw) = self.limit {
            let limit = raw
                .trim()
                .parse::<usize>()
                .map_err(|_| ParamError::InvalidLimit(raw.clone()))?;
            query = query
                .with_limit(limit)
                .map_err(|_| ParamError::InvalidLimit(raw))?;
        }
        Ok(query)
    }
}

/// A similarity score written as a JSON number with exactly six decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score(pub f64);

impl Score {
    pub fn formatted(self) -> String {
        let s = format!("{:.6}", self.0);
        if s == "-0.000000" {
            "0.000000".to_string()
        } else {
            s
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = serde_json::value::RawValue::from_string(self.formatted())
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

#[derive(Serialize)]
struct FieldScoreDoc {
    field: FieldKind,
    score: Score,
}

#[derive(Serialize)]
struct ResultDoc<'a> {
    id: &'a str,
    name: &'a str,
    relevance: Score,
    top_field: FieldKind,
    explanation: Vec<FieldScoreDoc>,
    tasks: &'a [RecommendationTask],
    domains: &'a [String],
    size_bucket: SizeBucket,
    download_url: &'a str,
    description: &'a str,
    record_examples: &'a [IndexMap<String, String>],
    #[serde(skip_serializing_if = "Option::is_none")]
    license: Option<&'a str>,
}

impl<'a> From<&SearchResult<'a>> for ResultDoc<'a> {
    fn from(r: &SearchResult<'a>) -> Self {
        let d = r.dataset;
        ResultDoc {
            id: &d.id,
            name: &d.name,
            relevance: Score(r.relevance),
            top_field: r.top_field(),
            explanation: r
                .explanation
                .iter()
                .map(|s| FieldScoreDoc {
                    field: s.field,
                    score: Score(s.score),
                })
                .collect(),
            tasks: &d.tasks,
            domains: &d.domains,
            size_bucket: r.size_bucket,
            download_url: &d.download_url,
            description: &d.description,
            record_examples: &d.record_examples,
            license: d.license.as_deref(),
        }
    }
}

#[derive(Serialize)]
struct SearchDoc<'a> {
    query: &'a str,
    total_matched: usize,
    results: Vec<ResultDoc<'a>>,
}

fn pretty<T: Serialize>(doc: &T) -> String {
    let mut out = serde_json::to_string_pretty(doc).expect("document serializes");
    out.push('\n');
    out
}

/// Body of `GET /api/search`.
pub fn search_response(query_text: &str, outcome: &SearchOutcome<'_>) -> String {
    pretty(&SearchDoc {
        query: query_text,
        total_matched: outcome.total_matched,
        results: outcome.results.iter().map(ResultDoc::from).collect(),
    })
}

#[derive(Serialize)]
struct DatasetDoc<'a> {
    #[serde(flatten)]
    metadata: &'a DatasetMetadata,
    size_bucket: SizeBucket,
}

/// Body of `GET /api/datasets/{id}`: canonical metadata plus `size_bucket`.
pub fn dataset_document(entry: &IndexedDataset) -> String {
    pretty(&DatasetDoc {
        metadata: &entry.metadata,
        size_bucket: entry.size_bucket,
    })
}

#[derive(Serialize)]
struct HealthDoc<'a> {
    status: &'static str,
    datasets: usize,
    embedder: &'a str,
}

pub fn health_document(datasets: usize, fingerprint: &str) -> String {
    pretty(&HealthDoc {
        status: "ok",
        datasets,
        embedder: fingerprint,
    })
}

#[derive(Serialize)]
struct ReloadDoc {
    reloaded: bool,
    datasets_before: usize,
    datasets_after: usize,
}

pub fn reload_document(datasets_before: usize, datasets_after: usize) -> String {
    pretty(&ReloadDoc {
        reloaded: true,
        datasets_before,
        datasets_after,
    })
}

#[derive(Serialize)]
struct ErrorInner<'a> {
    code: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    error: ErrorInner<'a>,
}

/// `{"error": {"code", "message"}}`.
pub fn error_document(code: &str, message: &str) -> String {
    pretty(&ErrorDoc {
        error: ErrorInner { code, message },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_decimal_scores() {
        assert_eq!(Score(0.5).formatted(), "0.500000");
        assert_eq!(Score(1.0).formatted(), "1.000000");
        assert_eq!(Score(-0.0000001).formatted(), "0.000000");
        assert_eq!(Score(-0.25).formatted(), "-0.250000");
        let json = serde_json::to_string(&vec![Score(0.1234567)]).unwrap();
        assert_eq!(json, "[0.123457]");
    }

    fn params(q: &str) -> SearchParams {
        SearchParams {
            q: Some(q.into()),
            ..Default::default()
        }
    }

    #[test]
    fn parses_filters() {
        let query = SearchParams {
            size: Some("small, unknown".into()),
            task: Some("ctr_prediction".into()),
            domain: Some("Movie,,".into()),
            limit: Some("5".into()),
            ..params("movie ratings")
        }
        .into_query()
        .unwrap();
        assert_eq!(
            query.size_filter.clone().unwrap().into_iter().collect::<Vec<_>>(),
            [SizeBucket::Small, SizeBucket::Unknown]
        );
        assert_eq!(query.domain_filter.clone().unwrap().into_iter().collect::<Vec<_>>(), ["movie"]);
        assert_eq!(query.limit(), 5);

        let query = SearchParams {
            size: Some(",".into()),
            ..params("x")
        }
        .into_query()
        .unwrap();
        assert!(query.size_filter.is_none());
    }

    #[test]
    fn parameter_errors() {
        assert_eq!(SearchParams::default().into_query(), Err(ParamError::MissingQuery));
        assert_eq!(params(" ").into_query(), Err(ParamError::MissingQuery));
        let bad_size = SearchParams {
            size: Some("tiny".into()),
            ..params("x")
        };
        assert_eq!(bad_size.into_query(), Err(ParamError::InvalidFilter("tiny".into())));
        let bad_task = SearchParams {
            task: Some("top_n,link_prediction".into()),
            ..params("x")
        };
        assert_eq!(
            bad_task.into_query(),
            Err(ParamError::InvalidFilter("link_prediction".into()))
        );
        for limit in ["0", "101", "ten", "-1"] {
            let p = SearchParams {
                limit: Some(limit.into()),
                ..params("x")
            };
            assert_eq!(p.into_query(), Err(ParamError::InvalidLimit(limit.into())));
        }
    }

    #[test]
    fn error_shape() {
        let v: serde_json::Value =
            serde_json::from_str(&error_document("MISSING_QUERY", "q is required")).unwrap();
        assert_eq!(v["error"]["code"], "MISSING_QUERY");
        assert_eq!(v["error"]["message"], "q is required");
    }
}
