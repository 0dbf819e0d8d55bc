//! `veil`: offline batch anonymisation and evaluation.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use veil_core::{ModeKind, PlaceholderStyle};

use commands::anonymize::AnonymizeArgs;
use commands::corpus::CorpusPrepArgs;
use commands::eval::EvalCommand;
use commands::restore::RestoreArgs;
use config::{Overrides, Settings};
use error::{CliResult, Kind};

#[derive(Debug, Parser)]
#[command(name = "veil", version, about = "Offline text anonymisation and evaluation")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// tagging, suppression or random-substitution.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<ModeKind>,
    /// bracketed (`[firstname1]`) or uppercase (`PERSON_FIRSTNAME_1`).
    #[arg(long, global = true, value_parser = parse_style)]
    style: Option<PlaceholderStyle>,
    /// Seed for random substitution and corpus splits.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Ignore any configured tagger and use the rule layers only.
    #[arg(long, global = true)]
    rules_only: bool,
    /// Continue with the rule layers when the tagger fails.
    #[arg(long, global = true)]
    fallback: bool,
    /// Tagger sidecar command, run through `sh -c`.
    #[arg(long, global = true)]
    tagger_cmd: Option<String>,
    /// Similarity threshold for counting an item as identified.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect sensitive spans and replace them.
    Anonymize(AnonymizeArgs),
    /// Evaluation reports.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Filter, truncate and split an annotated corpus.
    CorpusPrep(CorpusPrepArgs),
    /// Rebuild original texts from a map file.
    Restore(RestoreArgs),
}

fn parse_mode(s: &str) -> Result<ModeKind, String> {
    [ModeKind::Tagging, ModeKind::Suppression, ModeKind::RandomSubstitution]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| format!("unknown mode `{s}`; expected tagging, suppression or random-substitution"))
}

fn parse_style(s: &str) -> Result<PlaceholderStyle, String> {
    match s {
        "bracketed" => Ok(PlaceholderStyle::Bracketed),
        "uppercase" => Ok(PlaceholderStyle::Uppercase),
        _ => Err(format!("unknown style `{s}`; expected bracketed or uppercase")),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let overrides = Overrides {
        mode: cli.mode,
        style: cli.style,
        seed: cli.seed,
        jobs: cli.jobs,
        rules_only: cli.rules_only,
        fallback: cli.fallback,
        tagger_cmd: cli.tagger_cmd,
        threshold: cli.threshold,
    };
    let settings = Settings::load(cli.config.as_deref(), &overrides).map_err(|source| error::CliError {
        kind: Kind::Config,
        source,
    })?;
    match &cli.command {
        Command::Anonymize(args) => commands::anonymize::run(args, &settings),
        Command::Eval(cmd) => commands::eval::run(cmd, &settings),
        Command::CorpusPrep(args) => commands::corpus::run(args, &settings),
        Command::Restore(args) => commands::restore::run(args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(Kind::Config.exit_code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn mode_and_style_names() {
        assert_eq!(parse_mode("random-substitution"), Ok(ModeKind::RandomSubstitution));
        assert!(parse_mode("redact").is_err());
        assert_eq!(parse_style("uppercase"), Ok(PlaceholderStyle::Uppercase));
    }
}
