//! Independent brute-force reference for the search pipeline plus a seeded
//! generator of synthetic collections. Nothing here calls into the library's
//! tokenizer, hasher, embedder or ranking code; it only reads plain metadata
//! fields.

#![allow(dead_code)]

pub mod provider;

use std::collections::BTreeMap;

use ds4rs_core::metadata::parse_metadata_value;
use ds4rs_core::{DatasetMetadata, RecommendationTask};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const FIELDS: [&str; 4] = ["name", "description", "tasks", "domains"];

/// FNV-1a over 64 bits, computed with a 128-bit product and an explicit mask.
pub fn fnv(bytes: &[u8]) -> u64 {
    const MASK: u128 = (1u128 << 64) - 1;
    let mut h: u128 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u128;
        h = (h * 0x0000_0100_0000_01b3) & MASK;
    }
    h as u64
}

/// Lowercase, then cut at every character that is not a letter or digit.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Signed bucket counts, then L2 normalisation in f64. `None` for texts
/// without tokens or whose counts cancel out.
pub fn embed(text: &str, dim: usize) -> Option<BTreeMap<usize, f64>> {
    let mut counts: BTreeMap<usize, i64> = BTreeMap::new();
    for t in tokens(text) {
        let h = fnv(t.as_bytes());
        let sign = if (h >> 32) & 1 == 1 { -1 } else { 1 };
        *counts.entry((h % dim as u64) as usize).or_default() += sign;
    }
    counts.retain(|_, c| *c != 0);
    if counts.is_empty() {
        return None;
    }
    let norm = (counts.values().map(|c| (c * c) as f64).sum::<f64>()).sqrt();
    Some(counts.into_iter().map(|(i, c)| (i, c as f64 / norm)).collect())
}

pub fn dot(u: &BTreeMap<usize, f64>, v: &BTreeMap<usize, f64>) -> f64 {
    u.iter().filter_map(|(i, a)| v.get(i).map(|b| a * b)).sum()
}

pub fn task_label(task: RecommendationTask) -> &'static str {
    match task {
        RecommendationTask::CtrPrediction => "CTR prediction",
        RecommendationTask::RatingPrediction => "rating prediction",
        RecommendationTask::TopN => "Top-N recommendation",
    }
}

pub fn texts(m: &DatasetMetadata) -> [(&'static str, String); 4] {
    let order = [
        RecommendationTask::CtrPrediction,
        RecommendationTask::RatingPrediction,
        RecommendationTask::TopN,
    ];
    let tasks: Vec<&str> = order
        .iter()
        .filter(|t| m.tasks.contains(t))
        .map(|t| task_label(*t))
        .collect();
    [
        ("name", m.name.clone()),
        ("description", m.description.clone()),
        ("tasks", tasks.join(", ")),
        ("domains", m.domains.join(", ")),
    ]
}

pub fn bucket(m: &DatasetMetadata) -> &'static str {
    match m.size.num_interactions {
        None => "unknown",
        Some(n) if n < 1_000_000 => "small",
        Some(n) if n < 100_000_000 => "medium",
        Some(_) => "large",
    }
}

#[derive(Debug, Clone, Default)]
pub struct Filters {
    pub sizes: Option<Vec<&'static str>>,
    pub tasks: Option<Vec<RecommendationTask>>,
    pub domains: Option<Vec<String>>,
}

impl Filters {
    pub fn keeps(&self, m: &DatasetMetadata) -> bool {
        let size_ok = self.sizes.as_ref().is_none_or(|s| s.contains(&bucket(m)));
        let task_ok = self
            .tasks
            .as_ref()
            .is_none_or(|ts| m.tasks.iter().any(|t| ts.contains(t)));
        let domain_ok = self.domains.as_ref().is_none_or(|ds| {
            m.domains
                .iter()
                .any(|d| ds.iter().any(|q| q.to_lowercase() == d.to_lowercase()))
        });
        size_ok && task_ok && domain_ok
    }
}

#[derive(Debug, Clone)]
pub struct Hit {
    pub id: String,
    pub relevance: f64,
    /// Field name and score, highest first, ties in field order.
    pub explanation: Vec<(&'static str, f64)>,
}

pub struct Ranking {
    pub total_matched: usize,
    pub hits: Vec<Hit>,
}

/// Embeds every field, takes every cosine, keeps the maximum, sorts.
pub fn rank(
    datasets: &[DatasetMetadata],
    query: &str,
    dim: usize,
    filters: &Filters,
    limit: usize,
) -> Option<Ranking> {
    let q = embed(query, dim)?;
    let mut hits: Vec<Hit> = datasets
        .iter()
        .filter(|m| filters.keeps(m))
        .map(|m| {
            let mut explanation: Vec<(&'static str, f64)> = texts(m)
                .iter()
                .filter_map(|(f, t)| embed(t, dim).map(|v| (*f, dot(&q, &v))))
                .collect();
            explanation.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            Hit {
                id: m.id.clone(),
                relevance: explanation[0].1,
                explanation,
            }
        })
        .collect();
    let total_matched = hits.len();
    hits.sort_by(|a, b| {
        b.relevance
            .partial_cmp(&a.relevance)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    hits.truncate(limit);
    Some(Ranking {
        total_matched,
        hits,
    })
}

/// Compares an actual ranking with the oracle's at tolerance `tol`. Positions
/// may differ only between entries whose oracle scores lie within `tol`, and
/// the same holds for explanation order.
pub fn compare(
    expected: &Ranking,
    all: &BTreeMap<String, Hit>,
    actual_total: usize,
    actual: &[Hit],
    tol: f64,
) -> Result<(), String> {
    if expected.total_matched != actual_total {
        return Err(format!(
            "total_matched {actual_total} != oracle {}",
            expected.total_matched
        ));
    }
    if expected.hits.len() != actual.len() {
        return Err(format!(
            "{} results != oracle {}",
            actual.len(),
            expected.hits.len()
        ));
    }
    // the actual output must be ordered by its own scores, ties by id
    for (rank, w) in actual.windows(2).enumerate() {
        let ordered = w[0].relevance > w[1].relevance
            || (w[0].relevance == w[1].relevance && w[0].id < w[1].id);
        if !ordered {
            return Err(format!("ranks {rank} and {} out of order", rank + 1));
        }
    }
    for a in actual {
        let position = |f: &str| FIELDS.iter().position(|x| *x == f);
        let ordered = a.explanation.windows(2).all(|w| {
            w[0].1 > w[1].1 || (w[0].1 == w[1].1 && position(w[0].0) < position(w[1].0))
        });
        if !ordered {
            return Err(format!("{}: explanation out of order", a.id));
        }
    }
    for (rank, (e, a)) in expected.hits.iter().zip(actual).enumerate() {
        if (e.relevance - a.relevance).abs() > tol {
            return Err(format!(
                "rank {rank}: relevance {} != oracle {}",
                a.relevance, e.relevance
            ));
        }
        let oracle = all
            .get(&a.id)
            .ok_or_else(|| format!("rank {rank}: {} should have been filtered", a.id))?;
        if a.id != e.id && (oracle.relevance - e.relevance).abs() > tol {
            return Err(format!("rank {rank}: {} instead of {}", a.id, e.id));
        }
        if oracle.explanation.len() != a.explanation.len() {
            return Err(format!("{}: explanation has wrong field count", a.id));
        }
        for (i, (field, score)) in a.explanation.iter().enumerate() {
            let (ofield, oscore) = oracle.explanation[i];
            let own = oracle
                .explanation
                .iter()
                .find(|(f, _)| f == field)
                .ok_or_else(|| format!("{}: unexpected field {field}", a.id))?;
            if (own.1 - score).abs() > tol {
                return Err(format!(
                    "{}: {field} score {score} != oracle {}",
                    a.id, own.1
                ));
            }
            if ofield != *field && (oscore - own.1).abs() > tol {
                return Err(format!("{}: explanation order differs at {i}", a.id));
            }
        }
    }
    Ok(())
}

/// Oracle hits for every dataset, keyed by id, without filters or limit.
pub fn all_hits(datasets: &[DatasetMetadata], query: &str, dim: usize) -> BTreeMap<String, Hit> {
    rank(datasets, query, dim, &Filters::default(), usize::MAX)
        .map(|r| r.hits.into_iter().map(|h| (h.id.clone(), h)).collect())
        .unwrap_or_default()
}

pub const VOCAB: &[&str] = &[
    "movie", "movies", "rating", "ratings", "user", "users", "item", "items", "click", "clicks",
    "music", "song", "artist", "book", "books", "review", "reviews", "news", "article", "video",
    "game", "games", "shop", "purchase", "session", "sequential", "implicit", "explicit",
    "feedback", "graph", "social", "trust", "location", "poi", "checkin", "hotel", "travel",
    "food", "recipe", "job", "fashion", "ad", "ctr", "display", "search", "query", "tag",
    "tags", "anime", "podcast", "café", "Über", "2019", "1m", "25m", "top", "n", "prediction",
];

pub const DOMAINS: &[&str] = &[
    "movie", "music", "books", "e-commerce", "advertising", "news", "travel", "food", "Games",
    "Social",
];

pub fn words(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.gen_range(lo..=hi);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let w = *VOCAB.choose(rng).unwrap();
        let w = if rng.gen_bool(0.15) { w.to_uppercase() } else { w.to_string() };
        out.push(w);
    }
    let sep = [" ", " ", ", ", "-", " / "];
    let mut s = String::new();
    for (i, w) in out.iter().enumerate() {
        if i > 0 {
            s.push_str(sep.choose(rng).unwrap());
        }
        s.push_str(w);
    }
    s
}

fn interactions(rng: &mut ChaCha8Rng) -> Option<u64> {
    match rng.gen_range(0..8) {
        0 => None,
        1 => Some(999_999),
        2 => Some(1_000_000),
        3 => Some(100_000_000),
        4 => Some(rng.gen_range(1..1_000_000)),
        5 => Some(rng.gen_range(1_000_000..100_000_000)),
        _ => Some(rng.gen_range(100_000_000..10_000_000_000)),
    }
}

/// One synthetic metadata document. Names are occasionally pure punctuation
/// so that the field is dropped at index time.
pub fn dataset_json(rng: &mut ChaCha8Rng, id: &str) -> Value {
    let name = if rng.gen_bool(0.05) { "!!! ---".to_string() } else { words(rng, 1, 4) };
    let mut tasks: Vec<&str> = ["ctr_prediction", "rating_prediction", "top_n"]
        .into_iter()
        .filter(|_| rng.gen_bool(0.5))
        .collect();
    if tasks.is_empty() {
        tasks.push("top_n");
    }
    tasks.shuffle(rng);
    let ndomains = rng.gen_range(1..=3);
    let domains: Vec<&str> = DOMAINS.choose_multiple(rng, ndomains).copied().collect();
    let size = match interactions(rng) {
        Some(n) => json!({ "num_interactions": n }),
        None if rng.gen_bool(0.5) => json!({ "num_users": rng.gen_range(1..100_000u64) }),
        None => json!({}),
    };
    json!({
        "schema_version": "1",
        "id": id,
        "name": name,
        "description": words(rng, 3, 25),
        "tasks": tasks,
        "domains": domains,
        "size": size,
        "record_examples": [],
        "download_url": format!("https://example.org/{id}.zip"),
    })
}

pub fn collection(rng: &mut ChaCha8Rng, n: usize) -> Vec<DatasetMetadata> {
    let mut ids: Vec<usize> = (0..n * 3).collect();
    ids.shuffle(rng);
    ids.truncate(n);
    ids.into_iter()
        .map(|i| {
            let id = format!("ds-{i:03}");
            parse_metadata_value(&dataset_json(rng, &id), format!("{id}.json"))
                .into_result()
                .expect("generated metadata is valid")
        })
        .collect()
}

/// A random query: mostly vocabulary words, sometimes a verbatim field text
/// or an unseen word.
pub fn query(rng: &mut ChaCha8Rng, datasets: &[DatasetMetadata]) -> String {
    match rng.gen_range(0..10) {
        0 => {
            let m = datasets.choose(rng).unwrap();
            let t = texts(m);
            t[rng.gen_range(0..4)].1.clone()
        }
        1 => format!("{} zyzzyva", words(rng, 1, 3)),
        _ => words(rng, 1, 6),
    }
}

pub fn filters(rng: &mut ChaCha8Rng) -> Filters {
    let mut f = Filters::default();
    if rng.gen_bool(0.5) {
        let all = ["small", "medium", "large", "unknown"];
        let k = rng.gen_range(1..=3);
        f.sizes = Some(all.choose_multiple(rng, k).copied().collect());
    }
    if rng.gen_bool(0.4) {
        let all = [
            RecommendationTask::CtrPrediction,
            RecommendationTask::RatingPrediction,
            RecommendationTask::TopN,
        ];
        let k = rng.gen_range(1..=2);
        f.tasks = Some(all.choose_multiple(rng, k).copied().collect());
    }
    if rng.gen_bool(0.3) {
        let k = rng.gen_range(1..=2);
        f.domains = Some(
            DOMAINS
                .choose_multiple(rng, k)
                .map(|d| if rng.gen_bool(0.5) { d.to_uppercase() } else { d.to_string() })
                .collect(),
        );
    }
    f
}

/// Library results in the oracle's shape.
pub fn hits(outcome: &ds4rs_core::SearchOutcome<'_>) -> Vec<Hit> {
    outcome
        .results
        .iter()
        .map(|r| Hit {
            id: r.dataset.id.clone(),
            relevance: r.relevance,
            explanation: r
                .explanation
                .iter()
                .map(|s| (FIELDS[s.field as usize], s.score))
                .collect(),
        })
        .collect()
}

/// Library filters equivalent to `f`.
pub fn to_query(text: &str, f: &Filters, limit: usize) -> ds4rs_core::SearchQuery {
    let mut q = ds4rs_core::SearchQuery::new(text)
        .unwrap()
        .with_limit(limit)
        .unwrap();
    if let Some(s) = &f.sizes {
        q = q.with_sizes(s.iter().map(|b| b.parse().unwrap()));
    }
    if let Some(t) = &f.tasks {
        q = q.with_tasks(t.iter().copied());
    }
    if let Some(d) = &f.domains {
        q = q.with_domains(d);
    }
    q
}
