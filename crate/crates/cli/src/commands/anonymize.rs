use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use veil_core::recognition::{RecognitionError, Recognizer};
use veil_core::text_model::{to_json_line, AnnotatedDocument, Document, EntityLabel};
use veil_core::{anonymize, AnonymizedDocument, ModeKind};

use crate::config::Settings;
use crate::error::{Classify, CliError, CliResult, Kind};
use crate::io::{lines_to_bytes, read_corpus, write_atomic, InputFormat};

#[derive(Debug, Args)]
pub struct AnonymizeArgs {
    /// Input corpus.
    pub input: PathBuf,
    /// Anonymised output. Plain-text input gives plain-text output, one
    /// document per line; record input gives `{"id","text","mode"}` lines.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
    /// Where to write full records including the replacement map.
    /// Defaults to `<output>.map.jsonl`.
    #[arg(long, conflicts_with = "no_map")]
    pub map: Option<PathBuf>,
    /// Do not write the replacement map.
    #[arg(long)]
    pub no_map: bool,
}

#[derive(Serialize)]
struct OutputRecord<'a> {
    id: &'a str,
    text: &'a str,
    mode: ModeKind,
}

fn default_map_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".map.jsonl");
    output.with_file_name(name)
}

fn recognition_error(e: RecognitionError) -> CliError {
    let kind = if e.is_sidecar() { Kind::Sidecar } else { Kind::Config };
    CliError {
        kind,
        source: e.into(),
    }
}

pub fn run(args: &AnonymizeArgs, settings: &Settings) -> CliResult<()> {
    let started = Instant::now();
    let format = args.format.unwrap_or_else(|| InputFormat::infer(&args.input));
    let lexicons = settings.lexicons().config()?;
    let corpus = read_corpus(&args.input, format).input()?;
    let recognizer = match format {
        InputFormat::Annotated => None,
        _ => Some(Recognizer::new(settings.recognizer.clone()).map_err(recognition_error)?),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .config()?;
    let chunk = settings.recognizer.tagger.as_ref().map_or(32, |t| t.batch_size);

    let chunks: Vec<CliResult<(Vec<AnonymizedDocument>, bool)>> = pool.install(|| {
        corpus
            .par_chunks(chunk)
            .enumerate()
            .map(|(c, docs)| {
                let (annotated, degraded) = match &recognizer {
                    Some(r) => {
                        let plain: Vec<Document> = docs.iter().map(|d| d.document.clone()).collect();
                        let batch = r.recognize_batch(&plain).map_err(recognition_error)?;
                        (batch.documents, batch.degraded)
                    }
                    None => (docs.to_vec(), false),
                };
                let out = annotated
                    .iter()
                    .enumerate()
                    .map(|(i, doc)| anonymize_one(doc, settings, &lexicons, c * chunk + i))
                    .collect::<CliResult<Vec<_>>>()?;
                Ok((out, degraded))
            })
            .collect()
    });

    let mut results = Vec::with_capacity(corpus.len());
    let mut degraded = false;
    for c in chunks {
        let (docs, d) = c?;
        results.extend(docs);
        degraded |= d;
    }
    if degraded {
        warn!("tagger unavailable for part of the corpus; those documents used rule layers only");
    }

    let body = match format {
        InputFormat::Text => lines_to_bytes(results.iter().map(|d| d.text.clone())),
        _ => lines_to_bytes(results.iter().map(|d| {
            to_json_line(&OutputRecord {
                id: &d.id,
                text: &d.text,
                mode: d.mode,
            })
        })),
    };
    write_atomic(&args.output, &body).input()?;
    if !args.no_map {
        let path = args.map.clone().unwrap_or_else(|| default_map_path(&args.output));
        write_atomic(&path, &lines_to_bytes(results.iter().map(to_json_line))).input()?;
    }
    eprintln!("{}", summary(&results, started.elapsed().as_secs_f64(), degraded));
    Ok(())
}

fn anonymize_one(
    doc: &AnnotatedDocument,
    settings: &Settings,
    lexicons: &BTreeMap<EntityLabel, Vec<String>>,
    position: usize,
) -> CliResult<AnonymizedDocument> {
    let mode = settings.mode_for(lexicons, position);
    anonymize(doc, &mode).map_err(|e| {
        let kind = match e {
            veil_core::AnonymizeError::MissingLexicon(_) => Kind::Config,
            _ => Kind::Input,
        };
        CliError {
            kind,
            source: anyhow::Error::new(e).context(format!("document `{}`", doc.id())),
        }
    })
}

/// `anonymized N documents, M spans (LABEL=count ...) in T s`
pub fn summary(results: &[AnonymizedDocument], seconds: f64, degraded: bool) -> String {
    let mut counts: BTreeMap<EntityLabel, usize> = BTreeMap::new();
    for doc in results {
        for entry in &doc.map.entries {
            *counts.entry(entry.label).or_default() += entry.occurrences.len();
        }
    }
    let total: usize = counts.values().sum();
    let per_label: Vec<String> = EntityLabel::REPORT_ORDER
        .into_iter()
        .filter_map(|l| counts.get(&l).map(|c| format!("{l}={c}")))
        .collect();
    format!(
        "anonymized {} documents, {} spans ({}) in {:.3} s{}",
        results.len(),
        total,
        per_label.join(" "),
        seconds,
        if degraded { " [rules only]" } else { "" }
    )
}
