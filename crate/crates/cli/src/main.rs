//! `arabiq`: operator entry point for the quiz platform.

mod commands;
mod demo;

use std::path::PathBuf;
use std::process::ExitCode;

use arabiq_core::gateway::GatewayError;
use arabiq_core::PipelineError;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "arabiq",
    version,
    about = "Generate, check and evaluate Arabic vocabulary quizzes from images"
)]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, default_value = "store")]
    pub store: PathBuf,
    /// Directory reports are written to.
    #[arg(long, global = true, default_value = "reports")]
    pub reports: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Import a benchmark manifest (CSV or JSONL) into the store.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Generate descriptions and quiz sets for stored images.
    Gen(GenArgs),
    /// Lint quizzes from the store or from a file.
    Lint(LintArgs),
    /// Import annotations and build evaluation reports.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Write a synthetic offline benchmark: images, manifest, mock profiles and fixtures.
    Demo {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ConditionArg {
    Prompted,
    Bare,
    Both,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Image filter, `complexity=simple` or `image=ID`; give each key at most once.
    #[arg(long)]
    pub filter: Vec<String>,
    /// Captioning profiles; the first one supplies the default description for quizzes.
    #[arg(long, num_args = 1.., required = true)]
    pub vision: Vec<String>,
    /// Quiz-writing profiles.
    #[arg(long, num_args = 1..)]
    pub quiz: Vec<String>,
    #[arg(long, value_enum, default_value = "prompted")]
    pub condition: ConditionArg,
    /// Questions per quiz set.
    #[arg(long, default_value_t = 2)]
    pub n: u32,
    /// TOML or JSON file mapping profile ids to provider profiles.
    #[arg(long)]
    pub provider_config: PathBuf,
}

#[derive(Args, Debug)]
pub struct LintArgs {
    /// `store`, a JSONL file of quizzes, or a raw model reply.
    #[arg(long = "in", default_value = "store")]
    pub input: String,
    /// Word list for LEXICON_MISS checks.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Minimum diacritic coverage per option.
    #[arg(long)]
    pub diacritic_threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SubjectArg {
    Description,
    Quiz,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Load annotations (CSV or JSONL) into the store.
    Import {
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Deviation-filtered mean score per annotated subject.
    Aggregate,
    /// Correct-answer rates per complexity category.
    Rates,
    /// Compare two models' mean scores per category.
    Compare {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value = "quiz")]
        subject: SubjectArg,
    },
    /// Score distribution per model, category and condition.
    Dist {
        /// Bin edges on the 0-10 scale.
        #[arg(long, default_value = "0,2,4,6,8,10")]
        bins: String,
    },
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Listening port; defaults to ARABIQ_PORT, then 8080.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub provider_config: Option<PathBuf>,
    /// Hosts image URLs may come from. Repeatable; defaults to unsplash.com.
    #[arg(long)]
    pub allow: Vec<String>,
}

pub const EXIT_LINT: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PROVIDER: u8 = 3;

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<GatewayError>() {
            return EXIT_PROVIDER;
        }
        if let Some(PipelineError::Gateway(_)) = cause.downcast_ref::<PipelineError>() {
            return EXIT_PROVIDER;
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
