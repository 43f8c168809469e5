mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "devscreen", version, about = "Developmental screening case-base tool")]
struct Cli {
    /// Output style for commands that print results.
    #[arg(long, value_enum, global = true, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

/// Scale and weight files shared by the commands that score sheets.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Scale definition; the built-in scale when omitted.
    #[arg(long, env = "DEVSCREEN_SCALE")]
    scale: Option<PathBuf>,
    /// Weight profile; the built-in weights when omitted.
    #[arg(long, env = "DEVSCREEN_WEIGHTS")]
    weights: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create an empty case-base file.
    Init {
        #[arg(long, env = "DEVSCREEN_CASEBASE")]
        casebase: PathBuf,
        /// Scale file to check, or to write with the built-in scale if missing.
        #[arg(long, env = "DEVSCREEN_SCALE")]
        scale: Option<PathBuf>,
        /// Replace an existing case base.
        #[arg(long)]
        force: bool,
    },
    /// Screen one response sheet against the case base.
    Screen {
        #[arg(long)]
        sheet: PathBuf,
        #[arg(long, env = "DEVSCREEN_CASEBASE")]
        casebase: PathBuf,
        #[arg(long, default_value_t = devscreen_core::engine::DEFAULT_K)]
        k: usize,
        #[command(flatten)]
        model: ModelArgs,
        /// Store the result as a verified case.
        #[arg(long)]
        retain: bool,
        /// Replace the proposed solution before retaining.
        #[arg(long, requires = "retain")]
        solution: Option<String>,
        #[arg(long, requires = "retain")]
        reviser: Option<String>,
        /// Timestamp for the retained record (RFC 3339); now when omitted.
        #[arg(long, requires = "retain")]
        created_at: Option<chrono::DateTime<chrono::Utc>>,
        #[arg(long, default_value = "cli", requires = "retain")]
        source_tag: String,
        /// CSV of `case_ref,bone_age_months`, consulted when the sheet has no bone age.
        #[arg(long, requires = "case_ref")]
        bone_age_table: Option<PathBuf>,
        #[arg(long, requires = "bone_age_table")]
        case_ref: Option<String>,
    },
    /// Run the retrieval evaluation over a query set.
    Eval {
        #[arg(long, env = "DEVSCREEN_CASEBASE")]
        casebase: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = devscreen_core::engine::DEFAULT_EVAL_K)]
        k: usize,
        #[command(flatten)]
        model: ModelArgs,
        /// Report path; JSON goes here and CSV next to it with a `.csv` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic case base and query set.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove cases by id.
    Purge {
        #[arg(long, env = "DEVSCREEN_CASEBASE")]
        casebase: PathBuf,
        /// Comma-separated case ids.
        #[arg(long)]
        ids: String,
    },
    /// List groups of cases with identical feature vectors.
    MergeReport {
        #[arg(long, env = "DEVSCREEN_CASEBASE")]
        casebase: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are validation failures; --help and --version are not
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let format = cli.format;
    let result = match cli.command {
        Command::Init { casebase, scale, force } => commands::init(&casebase, scale.as_deref(), force),
        Command::Screen {
            sheet,
            casebase,
            k,
            model,
            retain,
            solution,
            reviser,
            created_at,
            source_tag,
            bone_age_table,
            case_ref,
        } => commands::screen(
            commands::ScreenArgs {
                sheet,
                casebase,
                k,
                retain: retain.then_some(commands::RetainArgs {
                    solution,
                    reviser,
                    created_at,
                    source_tag,
                }),
                bone_age: bone_age_table.zip(case_ref),
            },
            &model,
            format,
        ),
        Command::Eval { casebase, queries, k, model, out } => {
            commands::eval(&casebase, &queries, k, &model, out.as_deref(), format)
        }
        Command::Synth { seed, cases, queries, model, out } => {
            commands::synth(seed, cases, queries, &model, &out, format)
        }
        Command::Purge { casebase, ids } => commands::purge(&casebase, &ids, format),
        Command::MergeReport { casebase } => commands::merge_report(&casebase, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("devscreen: {e}");
            e.exit_code()
        }
    }
}
