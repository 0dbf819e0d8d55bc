use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use veil_core::eval::split_corpus;
use veil_core::recognition::{filter_and_truncate_corpus, CorpusRules};
use veil_core::text_model::{to_json_line, AnnotatedDocument};

use crate::config::Settings;
use crate::error::{Classify, CliResult};
use crate::io::{lines_to_bytes, read_records, write_atomic};

#[derive(Debug, Args)]
pub struct CorpusPrepArgs {
    /// Standoff records.
    pub input: PathBuf,
    /// Filtered records.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Drop documents with fewer words.
    #[arg(long, default_value_t = 20)]
    pub min_words: usize,
    /// Drop documents with more words.
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Cut documents after this many words.
    #[arg(long)]
    pub truncate: Option<usize>,
    /// Keep documents whose span-per-word ratio is below this bound.
    #[arg(long)]
    pub max_ne_ratio: Option<f64>,
    /// Train, validation and test fractions, e.g. `0.8,0.1,0.1`. Writes
    /// `<output stem>.train.jsonl` and siblings next to the output.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
}

fn sibling(output: &Path, part: &str) -> PathBuf {
    let stem = output.file_stem().unwrap_or_default().to_string_lossy();
    output.with_file_name(format!("{stem}.{part}.jsonl"))
}

fn records(docs: &[AnnotatedDocument]) -> Vec<u8> {
    lines_to_bytes(docs.iter().map(to_json_line))
}

pub fn run(args: &CorpusPrepArgs, settings: &Settings) -> CliResult<()> {
    if let Some(r) = args.max_ne_ratio {
        if r.is_nan() || r <= 0.0 {
            return Err(anyhow!("--max-ne-ratio must be positive")).config();
        }
    }
    if let Some(f) = &args.split {
        if f.len() != 3 {
            return Err(anyhow!("--split takes three fractions, got {}", f.len())).config();
        }
        split_corpus(Vec::<()>::new(), (f[0], f[1], f[2]), 0).config()?;
    }
    let corpus: Vec<AnnotatedDocument> = read_records(&args.input).input()?;
    let total = corpus.len();
    let rules = CorpusRules {
        min_words: args.min_words,
        max_words: args.max_words,
        truncate_to: args.truncate,
        max_ne_ratio: args.max_ne_ratio,
    };
    let prepared = filter_and_truncate_corpus(corpus, &rules);
    write_atomic(&args.output, &records(&prepared.documents)).input()?;
    eprintln!(
        "kept {} of {} documents (short {}, long {}, ratio {}, truncated {})",
        prepared.documents.len(),
        total,
        prepared.dropped_short,
        prepared.dropped_long,
        prepared.dropped_ratio,
        prepared.truncated
    );
    if let Some(f) = &args.split {
        let split = split_corpus(prepared.documents, (f[0], f[1], f[2]), settings.seed).config()?;
        for (part, docs) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
            write_atomic(&sibling(&args.output, part), &records(docs)).input()?;
        }
        eprintln!(
            "split {}/{}/{} with seed {}",
            split.train.len(),
            split.validation.len(),
            split.test.len(),
            settings.seed
        );
    }
    Ok(())
}
