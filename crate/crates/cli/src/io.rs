//! Corpus input and atomic output.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use tempfile::NamedTempFile;
use veil_core::text_model::{read_jsonl, AnnotatedDocument, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// One document per line; ids are `line-N`.
    Text,
    /// `{"id", "text"}` records; any `spans` are ignored.
    Jsonl,
    /// `{"id", "text", "spans"}` records used as-is.
    Annotated,
}

impl InputFormat {
    /// `.jsonl` and `.json` files are records, anything else is text.
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "json") => InputFormat::Jsonl,
            _ => InputFormat::Text,
        }
    }
}

pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_jsonl(BufReader::new(file)).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Loads documents. Only the annotated format carries spans.
pub fn read_corpus(path: &Path, format: InputFormat) -> Result<Vec<AnnotatedDocument>> {
    Ok(match format {
        InputFormat::Text => read_text(path)?
            .lines()
            .enumerate()
            .map(|(i, line)| AnnotatedDocument::unannotated(Document::new(format!("line-{}", i + 1), line)))
            .collect(),
        InputFormat::Jsonl => read_records::<Document>(path)?
            .into_iter()
            .map(AnnotatedDocument::unannotated)
            .collect(),
        InputFormat::Annotated => read_records(path)?,
    })
}

/// Writes `contents` to a temporary file beside `path`, then renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot replace {}", path.display()))?;
    Ok(())
}

/// Joins lines with a trailing newline after each; empty input gives an
/// empty file.
pub fn lines_to_bytes<I: IntoIterator<Item = String>>(lines: I) -> Vec<u8> {
    let mut out = String::new();
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out.into_bytes()
}
