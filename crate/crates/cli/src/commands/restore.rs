use std::path::PathBuf;

use clap::{Args, ValueEnum};
use veil_core::text_model::to_json_line;
use veil_core::{restore, AnonymizedDocument};

use crate::error::{Classify, CliResult};
use crate::io::{lines_to_bytes, read_records, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct RestoreArgs {
    /// Map file written by `anonymize`.
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Output format; `.jsonl` outputs default to records, others to text.
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

pub fn run(args: &RestoreArgs) -> CliResult<()> {
    let records: Vec<AnonymizedDocument> = read_records(&args.input).input()?;
    let restored = records
        .iter()
        .map(|r| restore(r).map_err(|e| anyhow::Error::new(e).context(format!("document `{}`", r.id))))
        .collect::<Result<Vec<_>, _>>()
        .input()?;
    let format = args.format.unwrap_or(match args.output.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => OutputFormat::Jsonl,
        _ => OutputFormat::Text,
    });
    let body = match format {
        OutputFormat::Text => lines_to_bytes(restored.into_iter().map(|d| d.text)),
        OutputFormat::Jsonl => lines_to_bytes(restored.iter().map(to_json_line)),
    };
    write_atomic(&args.output, &body).input()?;
    eprintln!("restored {} documents", records.len());
    Ok(())
}
