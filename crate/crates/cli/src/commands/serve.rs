use std::path::PathBuf;

use clap::Args;

use fast_core::adapter::MockServer;
use fast_core::dataset::{DEFAULT_THRESHOLD_H, DEFAULT_THRESHOLD_W};

use super::run::{build_backend, BackendKind};
use super::CmdError;

#[derive(Args)]
pub struct ServeMockArgs {
    /// Fixture file of canned responses
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Scene file backing the oracle
    #[arg(long)]
    scenes: Option<PathBuf>,
    /// Port to bind on 127.0.0.1; 0 picks an ephemeral port
    #[arg(long, default_value_t = 0)]
    port: u16,
    /// Worker threads answering requests
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_W)]
    threshold_w: u32,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_H)]
    threshold_h: u32,
}

pub fn execute(args: ServeMockArgs) -> Result<(), CmdError> {
    let kind = match (&args.fixtures, &args.scenes) {
        (Some(_), None) => BackendKind::Fixture,
        (None, Some(_)) => BackendKind::Oracle,
        _ => {
            return Err(CmdError::Usage(
                "serve-mock requires exactly one of --fixtures or --scenes".into(),
            ))
        }
    };
    let backend = build_backend(
        kind,
        None,
        args.fixtures.as_ref(),
        args.scenes.as_ref(),
        args.threshold_w,
        args.threshold_h,
    )?;
    let addr = format!("127.0.0.1:{}", args.port);
    let server = MockServer::start(backend, &addr, args.workers, true)
        .map_err(|e| CmdError::Adapter(e.to_string()))?;
    println!("listening on {}", server.url());
    // let shells and scripts see the address immediately
    use std::io::Write;
    let _ = std::io::stdout().flush();
    server.join();
    Ok(())
}
