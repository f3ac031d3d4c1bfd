//! Offline indexing: embed every searchable field of every dataset and
//! persist the result as a byte-deterministic document.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::embedding::{EmbedError, Embedder, EmbedderSpec};
use crate::metadata::{parse_metadata_value, Collection, DatasetMetadata, RecommendationTask};
use crate::search::{size_bucket, SizeBucket};
use crate::Embedding;

pub const FORMAT_VERSION: &str = "1";
pub const INDEX_FILE_EXTENSION: &str = ".ds4rs-index.json";

/// Embedded metadata fields. Declaration order is the canonical order used
/// for tie-breaking and serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Name,
    Description,
    Tasks,
    Domains,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] = [
        FieldKind::Name,
        FieldKind::Description,
        FieldKind::Tasks,
        FieldKind::Domains,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Name => "name",
            FieldKind::Description => "description",
            FieldKind::Tasks => "tasks",
            FieldKind::Domains => "domains",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The text that gets embedded for `field`.
pub fn field_text(metadata: &DatasetMetadata, field: FieldKind) -> String {
    match field {
        FieldKind::Name => metadata.name.clone(),
        FieldKind::Description => metadata.description.clone(),
        FieldKind::Tasks => RecommendationTask::ALL
            .into_iter()
            .filter(|t| metadata.has_task(*t))
            .map(RecommendationTask::label)
            .collect::<Vec<_>>()
            .join(", "),
        FieldKind::Domains => metadata.domains.join(", "),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedDataset {
    pub metadata: DatasetMetadata,
    /// Absent keys are fields whose text could not be embedded.
    pub field_vectors: BTreeMap<FieldKind, Embedding>,
    pub size_bucket: SizeBucket,
}

impl IndexedDataset {
    pub fn id(&self) -> &str {
        &self.metadata.id
    }
}

/// Immutable output of the offline pipeline. Entries are sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    embedder: EmbedderSpec,
    built_at: String,
    entries: Vec<IndexedDataset>,
}

impl SearchIndex {
    /// Sorts `entries` by id and checks every index invariant.
    pub fn new(
        embedder: EmbedderSpec,
        built_at: String,
        mut entries: Vec<IndexedDataset>,
    ) -> Result<Self, IndexError> {
        entries.sort_by(|a, b| a.metadata.id.cmp(&b.metadata.id));
        let index = SearchIndex {
            embedder,
            built_at,
            entries,
        };
        index.check()?;
        Ok(index)
    }

    fn check(&self) -> Result<(), IndexError> {
        if !self.embedder.is_consistent() {
            return Err(IndexError::Corrupt(format!(
                "embedder fingerprint `{}` does not match kind {} and dim {}",
                self.embedder.fingerprint, self.embedder.kind, self.embedder.dim
            )));
        }
        chrono::DateTime::parse_from_rfc3339(&self.built_at).map_err(|e| {
            IndexError::Corrupt(format!("built_at `{}` is not RFC 3339: {e}", self.built_at))
        })?;
        for pair in self.entries.windows(2) {
            if pair[0].metadata.id >= pair[1].metadata.id {
                return Err(IndexError::Corrupt(format!(
                    "entries not strictly sorted by id at `{}`",
                    pair[1].metadata.id
                )));
            }
        }
        for entry in &self.entries {
            if entry.field_vectors.is_empty() {
                return Err(IndexError::Corrupt(format!(
                    "entry `{}` has no field vectors",
                    entry.id()
                )));
            }
            for (field, v) in &entry.field_vectors {
                if v.dim() != self.embedder.dim {
                    return Err(IndexError::Corrupt(format!(
                        "entry `{}` field {field} has dim {}, expected {}",
                        entry.id(),
                        v.dim(),
                        self.embedder.dim
                    )));
                }
            }
            if entry.size_bucket != size_bucket(&entry.metadata.size) {
                return Err(IndexError::Corrupt(format!(
                    "entry `{}` size_bucket disagrees with its size counts",
                    entry.id()
                )));
            }
        }
        Ok(())
    }

    pub fn embedder(&self) -> &EmbedderSpec {
        &self.embedder
    }

    pub fn built_at(&self) -> &str {
        &self.built_at
    }

    pub fn entries(&self) -> &[IndexedDataset] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IndexedDataset> {
        self.entries
            .binary_search_by(|e| e.metadata.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.entries[i])
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("EMBEDDER_FAILURE: dataset `{dataset_id}` field {field}: {source}")]
    EmbedderFailure {
        dataset_id: String,
        field: FieldKind,
        #[source]
        source: EmbedError,
    },
    #[error("DUPLICATE_ID: `{0}` appears more than once")]
    DuplicateId(String),
    #[error("CORRUPT_INDEX: {0}")]
    Corrupt(String),
    #[error("UNSUPPORTED_VERSION: {0}")]
    UnsupportedVersion(String),
    #[error("NORM_VIOLATION: dataset `{dataset_id}` field {field}: L2 norm {norm}")]
    NormViolation {
        dataset_id: String,
        field: FieldKind,
        norm: f64,
    },
}

impl IndexError {
    pub fn code(&self) -> &'static str {
        match self {
            IndexError::EmbedderFailure { .. } => "EMBEDDER_FAILURE",
            IndexError::DuplicateId(_) => "DUPLICATE_ID",
            IndexError::Corrupt(_) => "CORRUPT_INDEX",
            IndexError::UnsupportedVersion(_) => "UNSUPPORTED_VERSION",
            IndexError::NormViolation { .. } => "NORM_VIOLATION",
        }
    }
}

/// A field left out of the index because its text could not be embedded.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildWarning {
    pub dataset_id: String,
    pub field: FieldKind,
    pub reason: EmbedError,
}

impl fmt::Display for BuildWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dataset `{}` field {} not indexed: {}",
            self.dataset_id, self.field, self.reason
        )
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub index: SearchIndex,
    pub warnings: Vec<BuildWarning>,
}

pub fn is_rfc3339(s: &str) -> bool {
    chrono::DateTime::parse_from_rfc3339(s).is_ok()
}

/// Current UTC time in the format used for `built_at`.
pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Embeds every field of every dataset in `collection`.
///
/// Fields that embed to nothing are dropped with a warning; a provider
/// failure aborts the build. A dataset with no embeddable field at all is
/// also an abort, since it could never be retrieved.
pub fn build_index(
    collection: &Collection,
    embedder: &dyn Embedder,
    built_at: Option<String>,
) -> Result<BuildOutput, IndexError> {
    let mut seen = HashSet::new();
    for d in &collection.datasets {
        if !seen.insert(d.id.as_str()) {
            return Err(IndexError::DuplicateId(d.id.clone()));
        }
    }

    let mut warnings = Vec::new();
    let mut entries = Vec::with_capacity(collection.datasets.len());
    for dataset in &collection.datasets {
        let texts: Vec<String> = FieldKind::ALL.iter().map(|f| field_text(dataset, *f)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = embedder
            .embed_batch(&refs)
            .map_err(|source| IndexError::EmbedderFailure {
                dataset_id: dataset.id.clone(),
                field: FieldKind::Name,
                source,
            })?;

        let mut field_vectors = BTreeMap::new();
        for (field, result) in FieldKind::ALL.into_iter().zip(vectors) {
            match result {
                Ok(v) if v.dim() == embedder.spec().dim => {
                    field_vectors.insert(field, v);
                }
                Ok(v) => {
                    return Err(IndexError::EmbedderFailure {
                        dataset_id: dataset.id.clone(),
                        field,
                        source: EmbedError::DimensionMismatch {
                            expected: embedder.spec().dim,
                            found: v.dim(),
                        },
                    })
                }
                Err(e) if e.is_field_level() => warnings.push(BuildWarning {
                    dataset_id: dataset.id.clone(),
                    field,
                    reason: e,
                }),
                Err(source) => {
                    return Err(IndexError::EmbedderFailure {
                        dataset_id: dataset.id.clone(),
                        field,
                        source,
                    })
                }
            }
        }
        if field_vectors.is_empty() {
            return Err(IndexError::EmbedderFailure {
                dataset_id: dataset.id.clone(),
                field: FieldKind::Name,
                source: EmbedError::EmptyText,
            });
        }
        entries.push(IndexedDataset {
            size_bucket: size_bucket(&dataset.size),
            metadata: dataset.clone(),
            field_vectors,
        });
    }

    let index = SearchIndex::new(
        embedder.spec().clone(),
        built_at.unwrap_or_else(now_rfc3339),
        entries,
    )?;
    Ok(BuildOutput { index, warnings })
}

#[derive(Serialize)]
struct IndexDocOut<'a> {
    format_version: &'static str,
    embedder: &'a EmbedderSpec,
    built_at: &'a str,
    entries: Vec<EntryOut<'a>>,
}

#[derive(Serialize)]
struct EntryOut<'a> {
    metadata: &'a DatasetMetadata,
    size_bucket: SizeBucket,
    vectors: BTreeMap<FieldKind, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexDocIn {
    format_version: String,
    embedder: EmbedderSpec,
    built_at: String,
    entries: Vec<EntryIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryIn {
    metadata: Value,
    size_bucket: SizeBucket,
    vectors: BTreeMap<FieldKind, String>,
}

fn encode_vector(v: &Embedding) -> String {
    encode_components(v.as_slice())
}

fn encode_components(values: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for x in values {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_vector(s: &str) -> Result<Vec<f32>, String> {
    let bytes = BASE64.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 4 != 0 {
        return Err(format!("{} bytes is not a whole number of float32s", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Canonical, byte-deterministic encoding.
pub fn serialize_index(index: &SearchIndex) -> Vec<u8> {
    let doc = IndexDocOut {
        format_version: FORMAT_VERSION,
        embedder: &index.embedder,
        built_at: &index.built_at,
        entries: index
            .entries
            .iter()
            .map(|e| EntryOut {
                metadata: &e.metadata,
                size_bucket: e.size_bucket,
                vectors: e
                    .field_vectors
                    .iter()
                    .map(|(f, v)| (*f, encode_vector(v)))
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("index serializes");
    out.push(b'\n');
    out
}

/// Decodes an index and re-checks every invariant, including each stored
/// metadata object against the schema.
pub fn load_index(bytes: &[u8]) -> Result<SearchIndex, IndexError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| IndexError::Corrupt(e.to_string()))?;
    match value.get("format_version") {
        Some(Value::String(v)) if v == FORMAT_VERSION => {}
        Some(Value::String(v)) => return Err(IndexError::UnsupportedVersion(v.clone())),
        Some(other) => return Err(IndexError::UnsupportedVersion(other.to_string())),
        None => return Err(IndexError::Corrupt("missing format_version".into())),
    }
    let doc: IndexDocIn =
        serde_json::from_value(value).map_err(|e| IndexError::Corrupt(e.to_string()))?;
    debug_assert_eq!(doc.format_version, FORMAT_VERSION);

    let mut entries = Vec::with_capacity(doc.entries.len());
    for (i, entry) in doc.entries.into_iter().enumerate() {
        let outcome = parse_metadata_value(&entry.metadata, format!("entries[{i}].metadata"));
        let metadata = outcome.into_result().map_err(|report| {
            let first = report
                .diagnostics
                .iter()
                .find(|d| d.severity == crate::metadata::Severity::Error)
                .map(|d| format!("{} at {}", d.code, d.json_path))
                .unwrap_or_default();
            IndexError::Corrupt(format!("entries[{i}] has invalid metadata: {first}"))
        })?;
        let mut field_vectors = BTreeMap::new();
        for (field, encoded) in entry.vectors {
            let values = decode_vector(&encoded).map_err(|e| {
                IndexError::Corrupt(format!("`{}` field {field}: {e}", metadata.id))
            })?;
            if values.len() != doc.embedder.dim {
                return Err(IndexError::Corrupt(format!(
                    "`{}` field {field} has {} components, expected {}",
                    metadata.id,
                    values.len(),
                    doc.embedder.dim
                )));
            }
            let v = Embedding::from_unit(values).map_err(|e| match e {
                EmbedError::NotUnitNorm { norm } => IndexError::NormViolation {
                    dataset_id: metadata.id.clone(),
                    field,
                    norm,
                },
                other => IndexError::Corrupt(format!("`{}` field {field}: {other}", metadata.id)),
            })?;
            field_vectors.insert(field, v);
        }
        entries.push(IndexedDataset {
            metadata,
            field_vectors,
            size_bucket: entry.size_bucket,
        });
    }

    let index = SearchIndex {
        embedder: doc.embedder,
        built_at: doc.built_at,
        entries,
    };
    index.check()?;
    Ok(index)
}
