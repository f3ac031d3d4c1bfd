//! Text-to-vector encoding and the cosine similarity primitive.
//!
//! Two embedders share the [`Embedder`] trait: a deterministic signed
//! feature-hashing encoder that needs no model, and a client for an external
//! sentence-embedding service. Every vector they return is unit-normalized.

use std::fmt;
use std::time::Duration;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Embedding;

/// Component type of an embedding vector.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + fmt::Debug + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Maximum deviation of a stored vector's L2 norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-5;

pub const REFERENCE_VERSION: &str = "v1";
pub const DEFAULT_REFERENCE_DIM: usize = 256;
pub const DEFAULT_EXTERNAL_DIM: usize = 768;
pub const DEFAULT_EXTERNAL_VERSION: &str = "v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("EMPTY_TEXT: text contains no tokens")]
    EmptyText,
    #[error("DEGENERATE_VECTOR: vector is zero and has no direction")]
    DegenerateVector,
    #[error("DIMENSION_MISMATCH: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("INVALID_DIMENSION: dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("NON_FINITE: vector has a NaN or infinite component")]
    NonFinite,
    #[error("NORM_VIOLATION: L2 norm {norm} is not 1")]
    NotUnitNorm { norm: f64 },
    #[error("PROVIDER_UNREACHABLE: {0}")]
    ProviderUnreachable(String),
    #[error("PROVIDER_BAD_RESPONSE: {0}")]
    ProviderBadResponse(String),
}

impl EmbedError {
    /// Errors that concern one text rather than the embedder as a whole.
    /// The indexer drops the affected field instead of aborting.
    pub fn is_field_level(&self) -> bool {
        matches!(self, EmbedError::EmptyText | EmbedError::DegenerateVector)
    }
}

/// A dense unit-norm vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// L2-normalizes `values`. Norms are accumulated in `f64`.
    pub fn normalize(values: Vec<T>) -> Result<Self, EmbedError> {
        let wide: Option<Vec<f64>> = values.iter().map(|v| v.to_f64()).collect();
        let wide = wide.ok_or(EmbedError::NonFinite)?;
        if wide.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Self::from_wide(&wide)
    }

    /// Wraps values that are already unit-normalized, checking the norm
    /// against [`UNIT_NORM_TOLERANCE`].
    pub fn from_unit(values: Vec<T>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        let v = EmbeddingVector { values };
        let norm = v.l2_norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(EmbedError::NotUnitNorm { norm });
        }
        Ok(v)
    }

    fn from_wide(wide: &[f64]) -> Result<Self, EmbedError> {
        let norm = wide.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbedError::DegenerateVector);
        }
        let values = wide
            .iter()
            .map(|v| T::from_f64(v / norm).ok_or(EmbedError::NonFinite))
            .collect::<Result<Vec<T>, _>>()?;
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| {
                let x = v.to_f64().unwrap_or(f64::NAN);
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Converts components to another scalar type without renormalizing.
    pub fn cast<U: Scalar>(&self) -> EmbeddingVector<U> {
        EmbeddingVector {
            values: self
                .values
                .iter()
                .map(|v| U::from(*v).unwrap_or_else(U::nan))
                .collect(),
        }
    }
}

/// Lowercases `text` and splits it on every character that is not a
/// Unicode letter or digit.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET_BASIS, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed feature hashing: each token adds ±1 at `hash mod dim`, the sign
/// taken from bit 32 of the hash; the sum is then L2-normalized.
pub fn embed_reference<T: Scalar>(text: &str, dim: usize) -> Result<EmbeddingVector<T>, EmbedError> {
    if dim < 2 {
        return Err(EmbedError::InvalidDimension(dim));
    }
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let mut counts = vec![0i64; dim];
    for token in &tokens {
        let h = fnv1a64(token.as_bytes());
        let index = (h % dim as u64) as usize;
        if (h >> 32) & 1 == 0 {
            counts[index] += 1;
        } else {
            counts[index] -= 1;
        }
    }
    // counts are exact, so cancellation is detected exactly
    if counts.iter().all(|&c| c == 0) {
        return Err(EmbedError::DegenerateVector);
    }
    let wide: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    EmbeddingVector::from_wide(&wide)
}

/// Cosine similarity, accumulated in `f64` in ascending index order and
/// clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &EmbeddingVector<T>, v: &EmbeddingVector<T>) -> Result<f64, EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let (mut dot, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.values.iter().zip(&v.values) {
        let a = a.to_f64().unwrap_or(f64::NAN);
        let b = b.to_f64().unwrap_or(f64::NAN);
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    let denom = uu.sqrt() * vv.sqrt();
    if denom == 0.0 || !denom.is_finite() {
        return Err(EmbedError::DegenerateVector);
    }
    Ok((dot / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Reference,
    External,
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedderKind::Reference => "reference",
            EmbedderKind::External => "external",
        })
    }
}

/// Identifies the vector space an index lives in. Queries must be embedded
/// under the same fingerprint as the index they search.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dim: usize,
    pub fingerprint: String,
}

impl EmbedderSpec {
    pub fn reference(dim: usize) -> Self {
        EmbedderSpec {
            kind: EmbedderKind::Reference,
            dim,
            fingerprint: format!("ref-{REFERENCE_VERSION}-{dim}"),
        }
    }

    /// `version` names the provider's model revision.
    pub fn external(dim: usize, version: &str) -> Self {
        EmbedderSpec {
            kind: EmbedderKind::External,
            dim,
            fingerprint: format!("ext-{version}-{dim}"),
        }
    }

    /// Model revision encoded in an external fingerprint.
    pub fn external_version(&self) -> Option<&str> {
        if self.kind != EmbedderKind::External {
            return None;
        }
        self.fingerprint
            .strip_prefix("ext-")?
            .strip_suffix(&format!("-{}", self.dim))
            .filter(|v| !v.is_empty())
    }

    /// Whether `fingerprint` could have been produced from `kind` and `dim`.
    pub fn is_consistent(&self) -> bool {
        if self.dim == 0 {
            return false;
        }
        match self.kind {
            EmbedderKind::Reference => {
                self.dim >= 2 && self.fingerprint == EmbedderSpec::reference(self.dim).fingerprint
            }
            EmbedderKind::External => self.external_version().is_some(),
        }
    }
}

pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbedderSpec;

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;

    /// Embeds several texts. The outer error aborts the whole batch; inner
    /// errors are per text and always field-level.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Result<Embedding, EmbedError>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed(t)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceEmbedder {
    spec: EmbedderSpec,
}

impl ReferenceEmbedder {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim < 2 {
            return Err(EmbedError::InvalidDimension(dim));
        }
        Ok(ReferenceEmbedder {
            spec: EmbedderSpec::reference(dim),
        })
    }
}

impl Default for ReferenceEmbedder {
    fn default() -> Self {
        ReferenceEmbedder {
            spec: EmbedderSpec::reference(DEFAULT_REFERENCE_DIM),
        }
    }
}

impl Embedder for ReferenceEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        embed_reference(text, self.spec.dim)
    }
}

#[derive(Serialize)]
struct ProviderRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct ProviderResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP sentence-embedding service.
///
/// Wire contract: `POST {"texts": [...]}` answered by
/// `{"dim": n, "vectors": [[...], ...]}` in request order.
pub struct ExternalEmbedder {
    spec: EmbedderSpec,
    url: String,
    agent: ureq::Agent,
}

impl fmt::Debug for ExternalEmbedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalEmbedder")
            .field("spec", &self.spec)
            .field("url", &self.url)
            .finish()
    }
}

impl ExternalEmbedder {
    /// Texts per provider request.
    pub const BATCH_SIZE: usize = 64;

    pub fn new(url: &str, dim: usize, timeout: Duration, version: &str) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::InvalidDimension(dim));
        }
        match url::Url::parse(url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") => {}
            _ => {
                return Err(EmbedError::ProviderUnreachable(format!(
                    "invalid provider URL `{url}`"
                )))
            }
        }
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Ok(ExternalEmbedder {
            spec: EmbedderSpec::external(dim, version),
            url: url.to_string(),
            agent,
        })
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Result<Embedding, EmbedError>>, EmbedError> {
        let response = match self
            .agent
            .post(&self.url)
            .send_json(ProviderRequest { texts })
        {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) => {
                return Err(EmbedError::ProviderBadResponse(format!("HTTP status {code}")))
            }
            Err(ureq::Error::Transport(t)) => {
                return Err(EmbedError::ProviderUnreachable(t.to_string()))
            }
        };
        let body: ProviderResponse = response.into_json().map_err(|e| {
            if e.kind() == std::io::ErrorKind::InvalidData {
                EmbedError::ProviderBadResponse(e.to_string())
            } else {
                EmbedError::ProviderUnreachable(e.to_string())
            }
        })?;
        if body.dim != self.spec.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.spec.dim,
                found: body.dim,
            });
        }
        if body.vectors.len() != texts.len() {
            return Err(EmbedError::ProviderBadResponse(format!(
                "expected {} vectors, got {}",
                texts.len(),
                body.vectors.len()
            )));
        }
        body.vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.spec.dim {
                    return Err(EmbedError::DimensionMismatch {
                        expected: self.spec.dim,
                        found: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::ProviderBadResponse(
                        "non-finite vector component".into(),
                    ));
                }
                Ok(EmbeddingVector::from_wide(&v))
            })
            .collect()
    }
}

impl Embedder for ExternalEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        self.embed_batch(&[text])?.remove(0)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Result<Embedding, EmbedError>>, EmbedError> {
        let mut out: Vec<Option<Result<Embedding, EmbedError>>> = vec![None; texts.len()];
        let mut pending = Vec::new();
        for (i, t) in texts.iter().enumerate() {
            if t.trim().is_empty() {
                out[i] = Some(Err(EmbedError::EmptyText));
            } else {
                pending.push(i);
            }
        }
        for chunk in pending.chunks(Self::BATCH_SIZE) {
            let batch: Vec<&str> = chunk.iter().map(|&i| texts[i]).collect();
            for (&i, v) in chunk.iter().zip(self.request(&batch)?) {
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("every slot filled")).collect())
    }
}

/// How to obtain query and index embeddings.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbedderConfig {
    Reference {
        dim: usize,
    },
    External {
        url: String,
        dim: usize,
        timeout: Duration,
        version: String,
    },
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig::Reference {
            dim: DEFAULT_REFERENCE_DIM,
        }
    }
}

impl EmbedderConfig {
    pub fn spec(&self) -> EmbedderSpec {
        match self {
            EmbedderConfig::Reference { dim } => EmbedderSpec::reference(*dim),
            EmbedderConfig::External { dim, version, .. } => EmbedderSpec::external(*dim, version),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        Ok(match self {
            EmbedderConfig::Reference { dim } => Box::new(ReferenceEmbedder::new(*dim)?),
            EmbedderConfig::External {
                url,
                dim,
                timeout,
                version,
            } => Box::new(ExternalEmbedder::new(url, *dim, *timeout, version)?),
        })
    }
}
