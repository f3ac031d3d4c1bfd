//! `ds4rs` command line: validate contributions, build an index, search it,
//! or serve it over HTTP.
//!
//! Exit codes: 0 success, 1 validation errors, 2 usage or configuration
//! error, 3 I/O or build failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ds4rs_core::api::{self, Score, SearchParams};
use ds4rs_core::embedding::{DEFAULT_EXTERNAL_DIM, DEFAULT_EXTERNAL_VERSION, DEFAULT_REFERENCE_DIM};
use ds4rs_core::index::is_rfc3339;
use ds4rs_core::{
    build_index, load_collection, load_index, serialize_index, EmbedderConfig, EmbedderKind,
    SearchError, SearchIndex, ValidationReport,
};
use ds4rs_service::{ServiceConfig, DEFAULT_LISTEN};

#[derive(Debug, Clone, Copy)]
enum Exit {
    Success = 0,
    ValidationErrors = 1,
    Usage = 2,
    Failure = 3,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

#[derive(Parser)]
#[command(name = "ds4rs", version, about = "Explainable dataset search for recommender-system research")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a directory of metadata files
    Validate {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Build a search index from a directory of metadata files
    Index {
        #[arg(long)]
        datasets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        embedder: EmbedderArgs,
        /// Fixed RFC 3339 build timestamp, for reproducible output
        #[arg(long)]
        built_at: Option<String>,
    },
    /// Search an index
    Search {
        #[arg(long, env = "DS4RS_INDEX")]
        index: PathBuf,
        query: String,
        /// Comma-separated size buckets: small, medium, large, unknown
        #[arg(long)]
        size: Option<String>,
        /// Comma-separated tasks: ctr_prediction, rating_prediction, top_n
        #[arg(long)]
        task: Option<String>,
        /// Comma-separated domains (case-insensitive)
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        limit: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Serve an index over HTTP
    Serve {
        #[arg(long, env = "DS4RS_INDEX")]
        index: PathBuf,
        #[arg(long, env = "DS4RS_LISTEN", default_value = DEFAULT_LISTEN)]
        listen: String,
        #[command(flatten)]
        embedder: EmbedderArgs,
        /// Comma-separated allowed CORS origins (`*` for any)
        #[arg(long, env = "DS4RS_CORS_ORIGINS", value_delimiter = ',')]
        cors_origins: Vec<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbedderChoice {
    Ref,
    External,
}

#[derive(Args)]
struct ProviderArgs {
    /// External embedding service endpoint
    #[arg(long, env = "DS4RS_EMBEDDER_URL")]
    provider_url: Option<String>,
    /// Provider request timeout in seconds
    #[arg(long, default_value_t = 30)]
    provider_timeout: u64,
}

#[derive(Args)]
struct EmbedderArgs {
    #[arg(long, value_enum, default_value_t = EmbedderChoice::Ref)]
    embedder: EmbedderChoice,
    /// Reference embedder dimension
    #[arg(long, default_value_t = DEFAULT_REFERENCE_DIM)]
    dim: usize,
    /// Vector dimension reported by the external provider
    #[arg(long, default_value_t = DEFAULT_EXTERNAL_DIM)]
    provider_dim: usize,
    /// Model revision recorded in the external fingerprint
    #[arg(long, default_value = DEFAULT_EXTERNAL_VERSION)]
    provider_version: String,
    #[command(flatten)]
    provider: ProviderArgs,
}

impl EmbedderArgs {
    fn config(&self) -> Result<EmbedderConfig, String> {
        match self.embedder {
            EmbedderChoice::Ref => Ok(EmbedderConfig::Reference { dim: self.dim }),
            EmbedderChoice::External => Ok(EmbedderConfig::External {
                url: self
                    .provider
                    .provider_url
                    .clone()
                    .ok_or("--embedder external requires --provider-url or DS4RS_EMBEDDER_URL")?,
                dim: self.provider_dim,
                timeout: Duration::from_secs(self.provider.provider_timeout),
                version: self.provider_version.clone(),
            }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exit = match cli.command {
        Command::Validate { dir, format } => validate(&dir, format),
        Command::Index {
            datasets,
            out,
            embedder,
            built_at,
        } => index(&datasets, &out, &embedder, built_at),
        Command::Search {
            index,
            query,
            size,
            task,
            domain,
            limit,
            format,
            provider,
        } => {
            let params = SearchParams {
                q: Some(query),
                size,
                task,
                domain,
                limit,
            };
            search(&index, params, format, &provider)
        }
        Command::Serve {
            index,
            listen,
            embedder,
            cors_origins,
        } => serve(index, listen, &embedder, cors_origins),
    };
    exit.into()
}

fn print_diagnostics(reports: &[&ValidationReport], to_stderr: bool) {
    for report in reports {
        for d in &report.diagnostics {
            let line = format!(
                "{} {} {} {} {}",
                d.severity, d.code, report.file, d.json_path, d.message
            );
            if to_stderr {
                eprintln!("{line}");
            } else {
                println!("{line}");
            }
        }
    }
}

fn sorted_reports(collection: &ds4rs_core::Collection) -> Vec<&ValidationReport> {
    let mut reports: Vec<&ValidationReport> = collection.all_reports().collect();
    reports.sort_by(|a, b| a.file.cmp(&b.file));
    reports
}

fn validate(dir: &Path, format: Format) -> Exit {
    let collection = match load_collection(dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    };
    let reports = sorted_reports(&collection);
    match format {
        Format::Text => {
            print_diagnostics(&reports, false);
            let n = collection.datasets.len();
            let noun = if n == 1 { "dataset" } else { "datasets" };
            match collection.reports.len() {
                0 => println!("{n} {noun} valid"),
                1 => println!("{n} {noun} valid, 1 file rejected"),
                r => println!("{n} {noun} valid, {r} files rejected"),
            }
        }
        Format::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(&reports).expect("reports serialize")
            );
        }
    }
    if collection.error_count() > 0 {
        Exit::ValidationErrors
    } else {
        Exit::Success
    }
}

fn index(datasets: &Path, out: &Path, args: &EmbedderArgs, built_at: Option<String>) -> Exit {
    if let Some(ts) = &built_at {
        if !is_rfc3339(ts) {
            eprintln!("error: --built-at `{ts}` is not an RFC 3339 timestamp");
            return Exit::Usage;
        }
    }
    let config = match args.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    let embedder = match config.build() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };

    let collection = match load_collection(datasets) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    };
    if collection.error_count() > 0 {
        print_diagnostics(&sorted_reports(&collection), true);
        eprintln!(
            "error: {} file(s) failed validation; no index written",
            collection.reports.len()
        );
        return Exit::ValidationErrors;
    }

    let output = match build_index(&collection, embedder.as_ref(), built_at) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    };
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    if let Err(e) = write_atomically(out, &serialize_index(&output.index)) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return Exit::Failure;
    }
    println!(
        "indexed {} datasets with {} -> {}",
        output.index.len(),
        output.index.embedder().fingerprint,
        out.display()
    );
    Exit::Success
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn read_index(path: &Path) -> Result<SearchIndex, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("IO_ERROR: {}: {e}", path.display()))?;
    load_index(&bytes).map_err(|e| e.to_string())
}

/// The embedder matching an index's fingerprint.
fn query_embedder(index: &SearchIndex, provider: &ProviderArgs) -> Result<EmbedderConfig, String> {
    let spec = index.embedder();
    match spec.kind {
        EmbedderKind::Reference => Ok(EmbedderConfig::Reference { dim: spec.dim }),
        EmbedderKind::External => Ok(EmbedderConfig::External {
            url: provider.provider_url.clone().ok_or(
                "index was built with an external embedder; pass --provider-url or DS4RS_EMBEDDER_URL",
            )?,
            dim: spec.dim,
            timeout: Duration::from_secs(provider.provider_timeout),
            version: spec.external_version().unwrap_or_default().to_string(),
        }),
    }
}

fn search(path: &Path, params: SearchParams, format: Format, provider: &ProviderArgs) -> Exit {
    let query = match params.into_query() {
        Ok(q) => q,
        Err(e) => {
            eprintln!("error: {}: {e}", e.code());
            return Exit::Usage;
        }
    };
    let index = match read_index(path) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    };
    let embedder = match query_embedder(&index, provider).and_then(|c| c.build().map_err(|e| e.to_string())) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    let outcome = match ds4rs_core::search(&index, &query, embedder.as_ref()) {
        Ok(o) => o,
        Err(e @ SearchError::EmptyQuery) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Failure;
        }
    };

    match format {
        Format::Json => print!("{}", api::search_response(query.text(), &outcome)),
        Format::Text => {
            let width = ds4rs_core::FieldKind::ALL
                .iter()
                .map(|f| f.as_str().len())
                .max()
                .unwrap_or(0);
            for (rank, r) in outcome.results.iter().enumerate() {
                println!(
                    "{}. {} {} {}",
                    rank + 1,
                    Score(r.relevance).formatted(),
                    r.dataset.id,
                    r.top_field()
                );
                for s in &r.explanation {
                    println!(
                        "     {:<width$} {}",
                        s.field.as_str(),
                        Score(s.score).formatted()
                    );
                }
            }
            eprintln!(
                "{} of {} matching datasets shown",
                outcome.results.len(),
                outcome.total_matched
            );
        }
    }
    Exit::Success
}

fn serve(index: PathBuf, listen: String, args: &EmbedderArgs, cors_origins: Vec<String>) -> Exit {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    let embedder = match args.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Exit::Usage;
        }
    };
    let config = ServiceConfig {
        listen_address: listen,
        index_path: index,
        embedder,
        cors_allowed_origins: cors_origins
            .into_iter()
            .map(|o| o.trim().to_string())
            .filter(|o| !o.is_empty())
            .collect(),
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return Exit::Failure;
        }
    };
    match runtime.block_on(ds4rs_service::serve(config)) {
        Ok(()) => Exit::Success,
        Err(e) if e.is_config_error() => {
            eprintln!("error: {e}");
            Exit::Usage
        }
        Err(e) => {
            eprintln!("error: {e}");
            Exit::Failure
        }
    }
}
