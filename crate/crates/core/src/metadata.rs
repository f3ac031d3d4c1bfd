//! Dataset metadata schema, per-file validation and directory loading.
//!
//! Each contributed dataset is one UTF-8 JSON file. Parsing never stops at
//! the first problem: every violation in a file is reported as a
//! [`Diagnostic`] so a contributor can fix a submission in one pass.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const SCHEMA_VERSION: &str = "1";

pub const MAX_ID_LEN: usize = 64;
pub const MAX_NAME_LEN: usize = 200;
pub const MAX_DESCRIPTION_LEN: usize = 5000;
pub const MAX_DOMAIN_LEN: usize = 50;
pub const MAX_RECORD_EXAMPLES: usize = 10;

/// Top-level keys of a metadata file, in canonical order.
pub const TOP_LEVEL_KEYS: [&str; 10] = [
    "schema_version",
    "id",
    "name",
    "description",
    "tasks",
    "domains",
    "size",
    "record_examples",
    "download_url",
    "license",
];

const SIZE_KEYS: [&str; 3] = ["num_interactions", "num_users", "num_items"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationTask {
    CtrPrediction,
    RatingPrediction,
    TopN,
}

impl RecommendationTask {
    /// All tasks in canonical order.
    pub const ALL: [RecommendationTask; 3] = [
        RecommendationTask::CtrPrediction,
        RecommendationTask::RatingPrediction,
        RecommendationTask::TopN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecommendationTask::CtrPrediction => "ctr_prediction",
            RecommendationTask::RatingPrediction => "rating_prediction",
            RecommendationTask::TopN => "top_n",
        }
    }

    /// Human-readable label, used as the embedded text of the task field.
    pub fn label(self) -> &'static str {
        match self {
            RecommendationTask::CtrPrediction => "CTR prediction",
            RecommendationTask::RatingPrediction => "rating prediction",
            RecommendationTask::TopN => "Top-N recommendation",
        }
    }
}

impl fmt::Display for RecommendationTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecommendationTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RecommendationTask::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Interaction, user and item counts. Any of them may be unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DatasetSize {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_interactions: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_users: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_items: Option<u64>,
}

impl DatasetSize {
    pub fn is_unknown(&self) -> bool {
        self.num_interactions.is_none() && self.num_users.is_none() && self.num_items.is_none()
    }
}

/// One contributed dataset description.
///
/// Values of this type are only produced by [`parse_metadata`], so every
/// schema invariant holds. Field order matches the canonical file layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetMetadata {
    pub schema_version: String,
    pub id: String,
    pub name: String,
    pub description: String,
    pub tasks: Vec<RecommendationTask>,
    pub domains: Vec<String>,
    pub size: DatasetSize,
    pub record_examples: Vec<IndexMap<String, String>>,
    pub download_url: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub license: Option<String>,
}

impl DatasetMetadata {
    /// Canonical file content: keys in schema order, 2-space indentation,
    /// trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("metadata serializes");
        out.push('\n');
        out
    }

    pub fn has_task(&self, task: RecommendationTask) -> bool {
        self.tasks.contains(&task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    MalformedSyntax,
    MissingField,
    InvalidType,
    InvalidValue,
    InvalidTask,
    InvalidUrl,
    InvalidSlug,
    FieldTooLong,
    EmptyField,
    NestedRecordExample,
    UnknownField,
    DuplicateTask,
    DuplicateId,
    MissingSize,
    IdFilenameMismatch,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::MalformedSyntax => "MALFORMED_SYNTAX",
            DiagnosticCode::MissingField => "MISSING_FIELD",
            DiagnosticCode::InvalidType => "INVALID_TYPE",
            DiagnosticCode::InvalidValue => "INVALID_VALUE",
            DiagnosticCode::InvalidTask => "INVALID_TASK",
            DiagnosticCode::InvalidUrl => "INVALID_URL",
            DiagnosticCode::InvalidSlug => "INVALID_SLUG",
            DiagnosticCode::FieldTooLong => "FIELD_TOO_LONG",
            DiagnosticCode::EmptyField => "EMPTY_FIELD",
            DiagnosticCode::NestedRecordExample => "NESTED_RECORD_EXAMPLE",
            DiagnosticCode::UnknownField => "UNKNOWN_FIELD",
            DiagnosticCode::DuplicateTask => "DUPLICATE_TASK",
            DiagnosticCode::DuplicateId => "DUPLICATE_ID",
            DiagnosticCode::MissingSize => "MISSING_SIZE",
            DiagnosticCode::IdFilenameMismatch => "ID_FILENAME_MISMATCH",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "ERROR",
            Severity::Warning => "WARNING",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub severity: Severity,
    pub message: String,
    pub json_path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub file: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn new(file: impl Into<String>) -> Self {
        ValidationReport {
            file: file.into(),
            diagnostics: Vec::new(),
        }
    }

    /// A file is valid iff it carries no error-severity diagnostic.
    pub fn is_valid(&self) -> bool {
        !self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn error_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .count()
    }

    pub fn has_code(&self, code: DiagnosticCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }

    pub fn error(&mut self, code: DiagnosticCode, path: impl Into<String>, message: impl Into<String>) {
        self.push(code, Severity::Error, path, message);
    }

    pub fn warning(&mut self, code: DiagnosticCode, path: impl Into<String>, message: impl Into<String>) {
        self.push(code, Severity::Warning, path, message);
    }

    fn push(
        &mut self,
        code: DiagnosticCode,
        severity: Severity,
        path: impl Into<String>,
        message: impl Into<String>,
    ) {
        self.diagnostics.push(Diagnostic {
            code,
            severity,
            message: message.into(),
            json_path: path.into(),
        });
    }
}

/// Result of parsing one file: the metadata when no error was found, plus
/// every diagnostic (warnings included) either way.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub metadata: Option<DatasetMetadata>,
    pub report: ValidationReport,
}

impl ParseOutcome {
    pub fn into_result(self) -> Result<DatasetMetadata, ValidationReport> {
        match self.metadata {
            Some(m) => Ok(m),
            None => Err(self.report),
        }
    }
}

/// Parses and validates raw file content. Total over all byte inputs.
pub fn parse_metadata(bytes: &[u8], file: impl Into<String>) -> ParseOutcome {
    let mut report = ValidationReport::new(file);
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t.strip_prefix('\u{feff}').unwrap_or(t),
        Err(e) => {
            report.error(
                DiagnosticCode::MalformedSyntax,
                "$",
                format!("file is not valid UTF-8: {e}"),
            );
            return ParseOutcome { metadata: None, report };
        }
    };
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => {
            report.error(
                DiagnosticCode::MalformedSyntax,
                "$",
                format!("invalid JSON: {e}"),
            );
            return ParseOutcome { metadata: None, report };
        }
    };
    let metadata = validate_value(&value, &mut report);
    ParseOutcome { metadata, report }
}

/// Validates an already-decoded JSON document against the schema.
pub fn parse_metadata_value(value: &Value, file: impl Into<String>) -> ParseOutcome {
    let mut report = ValidationReport::new(file);
    let metadata = validate_value(value, &mut report);
    ParseOutcome { metadata, report }
}

pub fn is_valid_slug(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= MAX_ID_LEN
        && s
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

fn validate_value(value: &Value, report: &mut ValidationReport) -> Option<DatasetMetadata> {
    let Some(obj) = value.as_object() else {
        report.error(
            DiagnosticCode::InvalidType,
            "$",
            format!("top level must be an object, found {}", type_name(value)),
        );
        return None;
    };

    for key in obj.keys() {
        if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            report.warning(
                DiagnosticCode::UnknownField,
                format!("$.{key}"),
                format!("unknown field `{key}` is ignored"),
            );
        }
    }

    let schema_version = required_string(obj, "schema_version", report).and_then(|v| {
        if v == SCHEMA_VERSION {
            Some(v.to_string())
        } else {
            report.error(
                DiagnosticCode::InvalidValue,
                "$.schema_version",
                format!("unsupported schema_version `{v}`, expected `{SCHEMA_VERSION}`"),
            );
            None
        }
    });

    let id = required_string(obj, "id", report).and_then(|v| {
        if is_valid_slug(v) {
            Some(v.to_string())
        } else {
            report.error(
                DiagnosticCode::InvalidSlug,
                "$.id",
                format!(
                    "`{v}` is not a slug (1-{MAX_ID_LEN} chars of lowercase letters, digits, hyphens)"
                ),
            );
            None
        }
    });

    let name = bounded_text(obj, "name", MAX_NAME_LEN, report);
    let description = bounded_text(obj, "description", MAX_DESCRIPTION_LEN, report);
    let tasks = parse_tasks(obj, report);
    let domains = parse_domains(obj, report);
    let size = parse_size(obj, report);
    let record_examples = parse_record_examples(obj, report);
    let download_url = parse_url(obj, report);

    let license = match obj.get("license") {
        None | Some(Value::Null) => Some(None),
        Some(Value::String(s)) => Some(Some(s.clone())),
        Some(other) => {
            type_error(report, "$.license", "string", other);
            None
        }
    };

    if !report.is_valid() {
        return None;
    }
    Some(DatasetMetadata {
        schema_version: schema_version?,
        id: id?,
        name: name?,
        description: description?,
        tasks: tasks?,
        domains: domains?,
        size: size?,
        record_examples: record_examples?,
        download_url: download_url?,
        license: license?,
    })
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn type_error(report: &mut ValidationReport, path: &str, expected: &str, found: &Value) {
    report.error(
        DiagnosticCode::InvalidType,
        path,
        format!("expected {expected}, found {}", type_name(found)),
    );
}

fn required<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    report: &mut ValidationReport,
) -> Option<&'a Value> {
    let v = obj.get(key);
    if v.is_none() {
        report.error(
            DiagnosticCode::MissingField,
            format!("$.{key}"),
            format!("required field `{key}` is missing"),
        );
    }
    v
}

fn required_string<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    report: &mut ValidationReport,
) -> Option<&'a str> {
    match required(obj, key, report)? {
        Value::String(s) => Some(s),
        other => {
            type_error(report, &format!("$.{key}"), "string", other);
            None
        }
    }
}

fn bounded_text(
    obj: &Map<String, Value>,
    key: &str,
    max_chars: usize,
    report: &mut ValidationReport,
) -> Option<String> {
    let s = required_string(obj, key, report)?;
    check_text(s, &format!("$.{key}"), max_chars, report).then(|| s.to_string())
}

fn check_text(s: &str, path: &str, max_chars: usize, report: &mut ValidationReport) -> bool {
    if s.trim().is_empty() {
        report.error(DiagnosticCode::EmptyField, path, "value is empty");
        return false;
    }
    let len = s.chars().count();
    if len > max_chars {
        report.error(
            DiagnosticCode::FieldTooLong,
            path,
            format!("{len} characters exceeds the limit of {max_chars}"),
        );
        return false;
    }
    true
}

fn required_array<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    report: &mut ValidationReport,
) -> Option<&'a Vec<Value>> {
    match required(obj, key, report)? {
        Value::Array(items) => Some(items),
        other => {
            type_error(report, &format!("$.{key}"), "array", other);
            None
        }
    }
}

fn parse_tasks(
    obj: &Map<String, Value>,
    report: &mut ValidationReport,
) -> Option<Vec<RecommendationTask>> {
    let items = required_array(obj, "tasks", report)?;
    if items.is_empty() {
        report.error(
            DiagnosticCode::EmptyField,
            "$.tasks",
            "at least one recommendation task is required",
        );
        return None;
    }
    let mut tasks = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        let path = format!("$.tasks[{i}]");
        let Value::String(s) = item else {
            type_error(report, &path, "string", item);
            ok = false;
            continue;
        };
        match s.parse::<RecommendationTask>() {
            Ok(task) if tasks.contains(&task) => {
                report.warning(
                    DiagnosticCode::DuplicateTask,
                    path,
                    format!("task `{task}` is listed more than once"),
                );
            }
            Ok(task) => tasks.push(task),
            Err(bad) => {
                report.error(
                    DiagnosticCode::InvalidTask,
                    path,
                    format!(
                        "unknown task `{bad}`, expected one of ctr_prediction, rating_prediction, top_n"
                    ),
                );
                ok = false;
            }
        }
    }
    ok.then_some(tasks)
}

fn parse_domains(obj: &Map<String, Value>, report: &mut ValidationReport) -> Option<Vec<String>> {
    let items = required_array(obj, "domains", report)?;
    if items.is_empty() {
        report.error(
            DiagnosticCode::EmptyField,
            "$.domains",
            "at least one domain is required",
        );
        return None;
    }
    let mut domains = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let path = format!("$.domains[{i}]");
        match item {
            Value::String(s) => {
                if check_text(s, &path, MAX_DOMAIN_LEN, report) {
                    domains.push(s.clone());
                }
            }
            other => type_error(report, &path, "string", other),
        }
    }
    (domains.len() == items.len()).then_some(domains)
}

fn parse_size(obj: &Map<String, Value>, report: &mut ValidationReport) -> Option<DatasetSize> {
    let size_obj = match required(obj, "size", report)? {
        Value::Object(m) => m,
        other => {
            type_error(report, "$.size", "object", other);
            return None;
        }
    };
    for key in size_obj.keys() {
        if !SIZE_KEYS.contains(&key.as_str()) {
            report.warning(
                DiagnosticCode::UnknownField,
                format!("$.size.{key}"),
                format!("unknown size field `{key}` is ignored"),
            );
        }
    }
    let mut ok = true;
    let mut count = |key: &str| -> Option<u64> {
        let path = format!("$.size.{key}");
        match size_obj.get(key) {
            None | Some(Value::Null) => None,
            Some(Value::Number(n)) => match n.as_u64() {
                Some(c) => Some(c),
                None => {
                    report.error(
                        DiagnosticCode::InvalidValue,
                        path,
                        format!("`{n}` is not a non-negative integer"),
                    );
                    ok = false;
                    None
                }
            },
            Some(other) => {
                type_error(report, &path, "integer", other);
                ok = false;
                None
            }
        }
    };
    let size = DatasetSize {
        num_interactions: count("num_interactions"),
        num_users: count("num_users"),
        num_items: count("num_items"),
    };
    ok.then_some(size)
}

fn parse_record_examples(
    obj: &Map<String, Value>,
    report: &mut ValidationReport,
) -> Option<Vec<IndexMap<String, String>>> {
    let items = required_array(obj, "record_examples", report)?;
    let mut ok = true;
    if items.len() > MAX_RECORD_EXAMPLES {
        report.error(
            DiagnosticCode::FieldTooLong,
            "$.record_examples",
            format!(
                "{} record examples exceeds the limit of {MAX_RECORD_EXAMPLES}",
                items.len()
            ),
        );
        ok = false;
    }
    let mut records = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let path = format!("$.record_examples[{i}]");
        let Value::Object(fields) = item else {
            type_error(report, &path, "object", item);
            ok = false;
            continue;
        };
        let mut record = IndexMap::with_capacity(fields.len());
        for (key, v) in fields {
            let field_path = format!("{path}.{key}");
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Bool(b) => b.to_string(),
                Value::Array(_) | Value::Object(_) => {
                    report.error(
                        DiagnosticCode::NestedRecordExample,
                        field_path,
                        "record example values must be scalars, found a nested structure",
                    );
                    ok = false;
                    continue;
                }
                Value::Null => {
                    type_error(report, &field_path, "string", v);
                    ok = false;
                    continue;
                }
            };
            record.insert(key.clone(), text);
        }
        records.push(record);
    }
    ok.then_some(records)
}

fn parse_url(obj: &Map<String, Value>, report: &mut ValidationReport) -> Option<String> {
    let raw = required_string(obj, "download_url", report)?;
    if raw.trim().is_empty() {
        report.error(DiagnosticCode::EmptyField, "$.download_url", "value is empty");
        return None;
    }
    match url::Url::parse(raw) {
        Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => Some(raw.to_string()),
        _ => {
            report.error(
                DiagnosticCode::InvalidUrl,
                "$.download_url",
                format!("`{raw}` is not an absolute http(s) URL"),
            );
            None
        }
    }
}

/// Cross-dataset checks: duplicate ids (error) and missing size counts
/// (warning). Reports are keyed by dataset id, in first-appearance order.
pub fn validate_collection(datasets: &[DatasetMetadata]) -> Vec<ValidationReport> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for d in datasets {
        *counts.entry(d.id.as_str()).or_default() += 1;
    }

    let mut reports: Vec<ValidationReport> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for d in datasets {
        let dup = counts[d.id.as_str()] > 1;
        let missing_size = d.size.is_unknown();
        if !dup && !missing_size {
            continue;
        }
        let first = !slot.contains_key(d.id.as_str());
        let idx = *slot.entry(d.id.as_str()).or_insert_with(|| {
            reports.push(ValidationReport::new(d.id.clone()));
            reports.len() - 1
        });
        let report = &mut reports[idx];
        if dup && first {
            push_duplicate(report, &d.id, counts[d.id.as_str()]);
        }
        if missing_size && !report.has_code(DiagnosticCode::MissingSize) {
            push_missing_size(report);
        }
    }
    reports
}

fn push_duplicate(report: &mut ValidationReport, id: &str, n: usize) {
    report.error(
        DiagnosticCode::DuplicateId,
        "$.id",
        format!("id `{id}` is used by {n} datasets"),
    );
}

fn push_missing_size(report: &mut ValidationReport) {
    report.warning(
        DiagnosticCode::MissingSize,
        "$.size",
        "no size count given; the dataset is excluded by any size filter",
    );
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("DIRECTORY_NOT_FOUND: {}", .0.display())]
    DirectoryNotFound(PathBuf),
    #[error("IO_ERROR: {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A validated set of datasets plus the reports of every rejected file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Collection {
    pub datasets: Vec<DatasetMetadata>,
    /// Reports of rejected files (at least one error each).
    pub reports: Vec<ValidationReport>,
    /// Warning-only reports of accepted files.
    pub warnings: Vec<ValidationReport>,
}

impl Collection {
    pub fn from_datasets(datasets: Vec<DatasetMetadata>) -> Self {
        Collection {
            datasets,
            ..Default::default()
        }
    }

    pub fn error_count(&self) -> usize {
        self.reports.iter().map(ValidationReport::error_count).sum()
    }

    /// Every report, rejected files first, each group in filename order.
    pub fn all_reports(&self) -> impl Iterator<Item = &ValidationReport> {
        self.reports.iter().chain(self.warnings.iter())
    }
}

/// Loads every `*.json` file directly inside `dir`, in lexicographic
/// filename order. Files sharing an id are all rejected.
pub fn load_collection(dir: &Path) -> Result<Collection, MetadataError> {
    if !dir.is_dir() {
        return Err(MetadataError::DirectoryNotFound(dir.to_path_buf()));
    }
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| MetadataError::Io { path, source }
    };

    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "json") && path.is_file() {
            files.push((entry.file_name(), path));
        }
    }
    files.sort();

    let mut parsed: Vec<(ValidationReport, Option<DatasetMetadata>)> = Vec::with_capacity(files.len());
    for (_, path) in &files {
        let bytes = fs::read(path).map_err(io_err(path))?;
        let outcome = parse_metadata(&bytes, path.display().to_string());
        let mut report = outcome.report;
        if let Some(m) = &outcome.metadata {
            let stem = path.file_stem().map(|s| s.to_string_lossy());
            if stem.as_deref() != Some(m.id.as_str()) {
                report.warning(
                    DiagnosticCode::IdFilenameMismatch,
                    "$.id",
                    format!("id `{}` does not match the file name", m.id),
                );
            }
            if m.size.is_unknown() {
                push_missing_size(&mut report);
            }
        }
        parsed.push((report, outcome.metadata));
    }

    let mut counts: HashMap<String, usize> = HashMap::new();
    for (_, m) in &parsed {
        if let Some(m) = m {
            *counts.entry(m.id.clone()).or_default() += 1;
        }
    }

    let mut collection = Collection::default();
    for (mut report, m) in parsed {
        match m {
            Some(m) if counts[&m.id] > 1 => {
                push_duplicate(&mut report, &m.id, counts[&m.id]);
                collection.reports.push(report);
            }
            Some(m) => {
                if !report.diagnostics.is_empty() {
                    collection.warnings.push(report);
                }
                collection.datasets.push(m);
            }
            None => collection.reports.push(report),
        }
    }
    Ok(collection)
}
