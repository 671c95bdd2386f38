use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod eval_cmd;
mod index_cmd;
mod run_cmd;
mod serve_cmd;

#[derive(Parser)]
#[command(name = "framesearch", version, about = "Offline multimodal game search: indices, tool services, agents and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build indices, embed corpora, cluster gallery images, sample positive pairs.
    Index {
        #[command(subcommand)]
        command: index_cmd::IndexCommand,
    },
    /// Serve the retrieval endpoints over HTTP.
    Serve(serve_cmd::ServeArgs),
    /// Run an agent over a dataset.
    Run(run_cmd::RunArgs),
    /// Rank core elements per instance with image-side backends (hit-rate input).
    Rank(eval_cmd::RankArgs),
    /// Score a predictions file.
    Eval(eval_cmd::EvalArgs),
    /// HitRate@K of ranked element lists.
    Hitrate(eval_cmd::HitrateArgs),
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Index { command } => index_cmd::run(command),
        Command::Serve(args) => serve_cmd::run(args),
        Command::Run(args) => run_cmd::run(args),
        Command::Rank(args) => eval_cmd::rank(args),
        Command::Eval(args) => eval_cmd::eval(args),
        Command::Hitrate(args) => eval_cmd::hitrate(args),
    }
}

/// `<dir>/<stem>.<suffix>` next to `path`.
pub(crate) fn sibling(path: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}
