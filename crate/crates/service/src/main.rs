use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Parser;
use devscreen_core::casebase::CaseBase;
use devscreen_core::engine::{BoneAgeProvider, BoneAgeTable, Screener, DEFAULT_K};
use devscreen_core::scale::{default_scale, ScaleDefinition};
use devscreen_core::similarity::WeightProfile;
use devscreen_service::{serve, AppState, ServiceConfig};
use tokio::net::TcpListener;

/// Screening workflow HTTP server.
#[derive(Debug, Parser)]
#[command(name = "devscreen-server", version)]
struct Args {
    #[arg(long, env = "DEVSCREEN_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    /// Case-base file; created empty if missing.
    #[arg(long, env = "DEVSCREEN_CASEBASE")]
    casebase: PathBuf,
    /// Scale definition file; the bundled scale when omitted.
    #[arg(long, env = "DEVSCREEN_SCALE")]
    scale: Option<PathBuf>,
    /// Weight profile file; the default weights when omitted.
    #[arg(long, env = "DEVSCREEN_WEIGHTS")]
    weights: Option<PathBuf>,
    #[arg(long, env = "DEVSCREEN_K", default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, env = "DEVSCREEN_SESSION_TTL_SECS", default_value_t = 3600)]
    session_ttl_secs: u64,
    /// Two-column bone-age table used when a sheet has no bone age.
    #[arg(long, env = "DEVSCREEN_BONE_AGE_TABLE")]
    bone_age_table: Option<PathBuf>,
    #[arg(long, env = "DEVSCREEN_SOURCE_TAG", default_value = "screening")]
    source_tag: String,
}

fn fail(msg: impl std::fmt::Display) -> ! {
    eprintln!("devscreen-server: {msg}");
    std::process::exit(1)
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    if args.k == 0 {
        fail("--k must be at least 1");
    }

    let scale = match &args.scale {
        Some(p) => ScaleDefinition::load(p).unwrap_or_else(|e| fail(e)),
        None => default_scale(),
    };
    let weights = match &args.weights {
        Some(p) => WeightProfile::load(p).unwrap_or_else(|e| fail(e)),
        None => WeightProfile::default(),
    };
    let base = if args.casebase.exists() {
        CaseBase::load(&args.casebase).unwrap_or_else(|e| fail(format!("{}: {e}", args.casebase.display())))
    } else {
        let base = CaseBase::new();
        base.save(&args.casebase).unwrap_or_else(|e| fail(e));
        base
    };
    let bone_age = args.bone_age_table.as_ref().map(|p| {
        Arc::new(BoneAgeTable::load(p).unwrap_or_else(|e| fail(e))) as Arc<dyn BoneAgeProvider>
    });

    let listener = TcpListener::bind(&args.bind)
        .await
        .unwrap_or_else(|e| fail(format!("bind {}: {e}", args.bind)));
    tracing::info!(
        addr = %listener.local_addr().expect("bound"),
        cases = base.len(),
        "serving"
    );

    let state = AppState::new(
        ServiceConfig {
            screener: Screener::new(scale, weights, args.k),
            casebase_path: Some(args.casebase),
            session_ttl: Duration::from_secs(args.session_ttl_secs),
            source_tag: args.source_tag,
            bone_age,
        },
        base,
    );
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = serve(listener, state, shutdown).await {
        fail(e);
    }
}
