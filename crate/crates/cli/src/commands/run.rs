use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};

use fast_core::adapter::{
    AdapterBackend, FixtureBackend, OracleBackend, RemoteBackend, RemoteConfig, SceneSet,
};
use fast_core::dataset::{DEFAULT_THRESHOLD_H, DEFAULT_THRESHOLD_W};
use fast_core::model::Query;
use fast_core::pipeline::{
    read_batch_jsonl, run_batch, run_query_traced, BatchOptions, BatchQuery, PipelineConfig,
};

use super::{read_input, write_output, CmdError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Remote,
    Fixture,
    Oracle,
}

#[derive(Args)]
pub struct RunArgs {
    /// Which backend answers adapter calls
    #[arg(long, value_enum)]
    backend: BackendKind,
    /// Base URL of a remote adapter service (backend: remote)
    #[arg(long)]
    endpoint: Option<String>,
    /// Fixture file of canned responses (backend: fixture)
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Scene file backing the oracle (backend: oracle)
    #[arg(long)]
    scenes: Option<PathBuf>,
    /// Pipeline configuration JSON; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Image reference for a single query
    #[arg(long)]
    image: Option<String>,
    /// Question text for a single query
    #[arg(long)]
    question: Option<String>,
    /// Query id for a single query
    #[arg(long, default_value = "q0")]
    query_id: String,
    /// JSONL batch of queries; one of --queries or --image/--question
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Batch output path (JSONL); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-query trace files
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Oracle invisibility threshold, width
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_W)]
    threshold_w: u32,
    /// Oracle invisibility threshold, height
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_H)]
    threshold_h: u32,
    /// Zero out latencies and timestamps for reproducible output
    #[arg(long)]
    no_timestamps: bool,
}

pub(crate) fn build_backend(
    kind: BackendKind,
    endpoint: Option<&str>,
    fixtures: Option<&PathBuf>,
    scenes: Option<&PathBuf>,
    threshold_w: u32,
    threshold_h: u32,
) -> Result<Arc<dyn AdapterBackend>, CmdError> {
    match kind {
        BackendKind::Remote => {
            let endpoint = endpoint
                .ok_or_else(|| CmdError::Usage("--backend remote requires --endpoint".into()))?;
            Ok(Arc::new(RemoteBackend::new(RemoteConfig::new(endpoint))))
        }
        BackendKind::Fixture => {
            let path = fixtures
                .ok_or_else(|| CmdError::Usage("--backend fixture requires --fixtures".into()))?;
            let json = read_input(path)?;
            let backend =
                FixtureBackend::from_json(&json).map_err(|e| CmdError::Data(e.to_string()))?;
            Ok(Arc::new(backend))
        }
        BackendKind::Oracle => {
            let path = scenes
                .ok_or_else(|| CmdError::Usage("--backend oracle requires --scenes".into()))?;
            let json = read_input(path)?;
            let scenes =
                SceneSet::from_json(&json).map_err(|e| CmdError::Data(e.to_string()))?;
            Ok(Arc::new(OracleBackend::new(scenes, threshold_w, threshold_h)))
        }
    }
}

pub(crate) fn load_pipeline_config(path: Option<&PathBuf>) -> Result<PipelineConfig, CmdError> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let json = read_input(path)?;
    let cfg: PipelineConfig = serde_json::from_str(&json)
        .map_err(|e| CmdError::Data(format!("config {}: {e}", path.display())))?;
    cfg.validate()
        .map_err(|e| CmdError::Data(e.to_string()))?;
    Ok(cfg)
}

pub fn execute(args: RunArgs) -> Result<(), CmdError> {
    let backend = build_backend(
        args.backend,
        args.endpoint.as_deref(),
        args.fixtures.as_ref(),
        args.scenes.as_ref(),
        args.threshold_w,
        args.threshold_h,
    )?;
    let cfg = load_pipeline_config(args.config.as_ref())?;

    match (&args.queries, &args.image, &args.question) {
        (Some(path), None, None) => run_batch_file(path, &args, backend.as_ref(), &cfg),
        (None, Some(image), Some(question)) => {
            run_single(image, question, &args, backend.as_ref(), &cfg)
        }
        (None, _, _) => Err(CmdError::Usage(
            "provide --queries FILE, or both --image and --question".into(),
        )),
        (Some(_), _, _) => Err(CmdError::Usage(
            "--queries conflicts with --image/--question".into(),
        )),
    }
}

fn run_single(
    image: &str,
    question: &str,
    args: &RunArgs,
    backend: &dyn AdapterBackend,
    cfg: &PipelineConfig,
) -> Result<(), CmdError> {
    let query = Query::new(image, question, args.query_id.clone())
        .map_err(|e| CmdError::Usage(e.to_string()))?;
    let outcome = run_query_traced(&query, backend, cfg);
    let mut trace = outcome.trace;
    if args.no_timestamps {
        trace.strip_timestamps();
    }
    if let Some(dir) = &args.trace_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CmdError::Other(format!("trace dir {}: {e}", dir.display())))?;
        let path = trace
            .write_to_dir(dir)
            .map_err(|e| CmdError::Other(format!("writing trace: {e}")))?;
        tracing::info!("trace written to {}", path.display());
    }
    match outcome.answer {
        Ok(mut answer) => {
            if args.no_timestamps {
                answer.latency_ms = 0.0;
            }
            write_output(args.out.as_ref(), &super::to_pretty_json(&answer))
        }
        Err(err) => Err(CmdError::Adapter(err.to_string())),
    }
}

fn run_batch_file(
    path: &std::path::Path,
    args: &RunArgs,
    backend: &dyn AdapterBackend,
    cfg: &PipelineConfig,
) -> Result<(), CmdError> {
    let text = read_input(path)?;
    let queries: Vec<BatchQuery> =
        read_batch_jsonl(&text).map_err(|e| CmdError::Data(e.to_string()))?;
    let opts = BatchOptions {
        parallelism: args.parallelism,
        trace_dir: args.trace_dir.clone(),
        no_timestamps: args.no_timestamps,
    };
    let records = run_batch(&queries, backend, cfg, &opts)
        .map_err(|e| CmdError::Data(e.to_string()))?;
    write_output(
        args.out.as_ref(),
        &fast_core::metrics::records_to_jsonl(&records),
    )
}
