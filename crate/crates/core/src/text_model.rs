//! Documents, entity labels and character-offset spans.
//!
//! All offsets in this crate count Unicode scalar values, not bytes, so that
//! annotations exchanged with other processes mean the same thing regardless
//! of the language on the other side.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Category of potentially sensitive information.
///
/// The first twelve variants form the annotation scheme used by gold corpora
/// and by the tagger sidecar. `Pronoun` and `Numeric` are only ever produced
/// by the engine's closed-class rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityLabel {
    #[serde(rename = "PERSON_FIRSTNAME")]
    PersonFirstname,
    #[serde(rename = "PERSON_LASTNAME")]
    PersonLastname,
    #[serde(rename = "OCCUPATION")]
    Occupation,
    #[serde(rename = "LOCATION")]
    Location,
    #[serde(rename = "TIME")]
    Time,
    #[serde(rename = "ORGANIZATION")]
    Organization,
    #[serde(rename = "DATE")]
    Date,
    #[serde(rename = "ADDRESS")]
    Address,
    #[serde(rename = "PHONE_NUMBER")]
    PhoneNumber,
    #[serde(rename = "EMAIL_ADDRESS")]
    EmailAddress,
    #[serde(rename = "OTHER_IDENTIFYING_ATTRIBUTE")]
    OtherIdentifyingAttribute,
    /// Not sensitive. Never emitted as a span.
    #[serde(rename = "NONE")]
    Outside,
    #[serde(rename = "PRONOUN")]
    Pronoun,
    #[serde(rename = "NUMERIC")]
    Numeric,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 14] = [
        EntityLabel::PersonFirstname,
        EntityLabel::PersonLastname,
        EntityLabel::Occupation,
        EntityLabel::Location,
        EntityLabel::Time,
        EntityLabel::Organization,
        EntityLabel::Date,
        EntityLabel::Address,
        EntityLabel::PhoneNumber,
        EntityLabel::EmailAddress,
        EntityLabel::OtherIdentifyingAttribute,
        EntityLabel::Outside,
        EntityLabel::Pronoun,
        EntityLabel::Numeric,
    ];

    /// Row order of the per-category evaluation table. Engine-derived labels
    /// sit just before `NONE`.
    pub const REPORT_ORDER: [EntityLabel; 14] = [
        EntityLabel::Address,
        EntityLabel::Date,
        EntityLabel::EmailAddress,
        EntityLabel::Location,
        EntityLabel::Occupation,
        EntityLabel::Organization,
        EntityLabel::PersonFirstname,
        EntityLabel::PersonLastname,
        EntityLabel::PhoneNumber,
        EntityLabel::Time,
        EntityLabel::OtherIdentifyingAttribute,
        EntityLabel::Pronoun,
        EntityLabel::Numeric,
        EntityLabel::Outside,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityLabel::PersonFirstname => "PERSON_FIRSTNAME",
            EntityLabel::PersonLastname => "PERSON_LASTNAME",
            EntityLabel::Occupation => "OCCUPATION",
            EntityLabel::Location => "LOCATION",
            EntityLabel::Time => "TIME",
            EntityLabel::Organization => "ORGANIZATION",
            EntityLabel::Date => "DATE",
            EntityLabel::Address => "ADDRESS",
            EntityLabel::PhoneNumber => "PHONE_NUMBER",
            EntityLabel::EmailAddress => "EMAIL_ADDRESS",
            EntityLabel::OtherIdentifyingAttribute => "OTHER_IDENTIFYING_ATTRIBUTE",
            EntityLabel::Outside => "NONE",
            EntityLabel::Pronoun => "PRONOUN",
            EntityLabel::Numeric => "NUMERIC",
        }
    }

    /// True for the two labels that only closed-class rules produce.
    pub fn is_engine_derived(self) -> bool {
        matches!(self, EntityLabel::Pronoun | EntityLabel::Numeric)
    }

    /// True for the twelve labels of the annotation scheme (including `NONE`).
    pub fn in_annotation_scheme(self) -> bool {
        !self.is_engine_derived()
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown entity label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for EntityLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Which recogniser layer produced a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "regex")]
    Regex,
    #[serde(rename = "tagger")]
    Tagger,
    #[serde(rename = "gazetteer")]
    Gazetteer,
    #[serde(rename = "closed-class")]
    ClosedClass,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::Regex,
        Source::Tagger,
        Source::Gazetteer,
        Source::ClosedClass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Regex => "regex",
            Source::Tagger => "tagger",
            Source::Gazetteer => "gazetteer",
            Source::ClosedClass => "closed-class",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| format!("unknown span source `{s}`"))
    }
}

/// A labelled half-open character range `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: EntityLabel,
    pub score: f64,
    pub source: Source,
}

impl Span {
    pub fn new(start: usize, end: usize, label: EntityLabel, source: Source) -> Self {
        Self {
            start,
            end,
            label,
            score: 1.0,
            source,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// A document together with its sensitive-information spans. Serialises as
/// one standoff record: `{"id", "text", "spans": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    #[serde(flatten)]
    pub document: Document,
    #[serde(default)]
    pub spans: Vec<Span>,
}

impl AnnotatedDocument {
    pub fn new(document: Document, spans: Vec<Span>) -> Self {
        Self { document, spans }
    }

    pub fn unannotated(document: Document) -> Self {
        Self {
            document,
            spans: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.document.id
    }

    pub fn text(&self) -> &str {
        &self.document.text
    }

    pub fn is_valid(&self) -> bool {
        validate_annotations(self).is_empty()
    }

    /// Surface string of a span in this document's text.
    pub fn surface(&self, span: &Span) -> &str {
        CharIndex::new(&self.document.text).slice(span.start, span.end)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("span [{start}, {end}) is empty or inverted")]
    EmptySpan { start: usize, end: usize },
    #[error("span [{start}, {end}) exceeds text length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },
    #[error("span [{start}, {end}) carries label NONE")]
    OutsideLabel { start: usize, end: usize },
    #[error("span [{start}, {end}) has score {score} outside [0, 1]")]
    BadScore { start: usize, end: usize, score: f64 },
    #[error("span at index {index} starts before its predecessor")]
    Unsorted { index: usize },
    #[error("spans [{first_start}, {first_end}) and [{second_start}, {second_end}) overlap at {at}")]
    Overlap {
        first_start: usize,
        first_end: usize,
        second_start: usize,
        second_end: usize,
        at: usize,
    },
}

/// Every invariant violation of an annotated document. Empty means valid.
pub fn validate_annotations(doc: &AnnotatedDocument) -> Vec<Violation> {
    let len = doc.document.char_len();
    let mut violations = Vec::new();
    // span with the furthest end seen so far
    let mut reach: Option<&Span> = None;

    for (index, span) in doc.spans.iter().enumerate() {
        if span.end <= span.start {
            violations.push(Violation::EmptySpan {
                start: span.start,
                end: span.end,
            });
        }
        if span.end > len {
            violations.push(Violation::OutOfRange {
                start: span.start,
                end: span.end,
                len,
            });
        }
        if span.label == EntityLabel::Outside {
            violations.push(Violation::OutsideLabel {
                start: span.start,
                end: span.end,
            });
        }
        if !(0.0..=1.0).contains(&span.score) {
            violations.push(Violation::BadScore {
                start: span.start,
                end: span.end,
                score: span.score,
            });
        }
        if index > 0 && span.start < doc.spans[index - 1].start {
            violations.push(Violation::Unsorted { index });
        }
        if let Some(prev) = reach {
            if span.start < prev.end && prev.start < span.end {
                violations.push(Violation::Overlap {
                    first_start: prev.start,
                    first_end: prev.end,
                    second_start: span.start,
                    second_end: span.end,
                    at: span.start.max(prev.start),
                });
            }
        }
        if reach.is_none_or(|r| span.end > r.end) {
            reach = Some(span);
        }
    }
    violations
}

/// Byte positions of every character of a string, for converting between
/// character offsets and byte offsets.
#[derive(Debug, Clone)]
pub struct CharIndex<'a> {
    text: &'a str,
    // offsets[i] = byte offset of char i; last element = text.len()
    offsets: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        offsets.push(text.len());
        Self { text, offsets }
    }

    pub fn char_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Byte offset of character `index`. Panics past the end.
    pub fn byte(&self, index: usize) -> usize {
        self.offsets[index]
    }

    /// Character offset of a byte position that lies on a char boundary.
    pub fn char_at_byte(&self, byte: usize) -> Option<usize> {
        self.offsets.binary_search(&byte).ok()
    }

    pub fn slice(&self, start: usize, end: usize) -> &'a str {
        &self.text[self.offsets[start]..self.offsets[end]]
    }
}

/// Key used for consistency matching: internal whitespace collapsed, and
/// lowercased unless `case_sensitive`.
pub fn canonical_surface(surface: &str, case_sensitive: bool) -> String {
    let collapsed = surface.split_whitespace().collect::<Vec<_>>().join(" ");
    if case_sensitive {
        collapsed
    } else {
        collapsed.to_lowercase()
    }
}

/// One replaced occurrence: original character range and original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapEntry {
    pub label: EntityLabel,
    pub index: u32,
    /// Canonical surface shared by every occurrence of this entry.
    pub surface: String,
    pub occurrences: Vec<Occurrence>,
}

#[derive(Serialize, Deserialize)]
struct MapEntryRecord {
    label: EntityLabel,
    index: u32,
    surface: String,
    spans: Vec<[usize; 2]>,
    forms: Vec<String>,
}

impl Serialize for MapEntry {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MapEntryRecord {
            label: self.label,
            index: self.index,
            surface: self.surface.clone(),
            spans: self.occurrences.iter().map(|o| [o.start, o.end]).collect(),
            forms: self.occurrences.iter().map(|o| o.surface.clone()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MapEntry {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let record = MapEntryRecord::deserialize(deserializer)?;
        if record.spans.len() != record.forms.len() {
            return Err(serde::de::Error::custom(
                "map entry `spans` and `forms` differ in length",
            ));
        }
        let occurrences = record
            .spans
            .into_iter()
            .zip(record.forms)
            .map(|([start, end], surface)| Occurrence {
                start,
                end,
                surface,
            })
            .collect();
        Ok(MapEntry {
            label: record.label,
            index: record.index,
            surface: record.surface,
            occurrences,
        })
    }
}

/// Placeholder bookkeeping for one document: which original surfaces hide
/// behind which `(label, index)` pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplacementMap {
    pub entries: Vec<MapEntry>,
}

impl ReplacementMap {
    pub fn get(&self, label: EntityLabel, index: u32) -> Option<&MapEntry> {
        self.entries
            .iter()
            .find(|e| e.label == label && e.index == index)
    }

    pub fn has_label(&self, label: EntityLabel) -> bool {
        self.entries.iter().any(|e| e.label == label)
    }

    pub fn occurrence_count(&self) -> usize {
        self.entries.iter().map(|e| e.occurrences.len()).sum()
    }

    /// Checks key uniqueness, 1..k index compactness per label, canonical
    /// surface uniqueness per label and the absence of `NONE`.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut keys = HashSet::new();
        let mut surfaces = HashSet::new();
        for entry in &self.entries {
            if entry.label == EntityLabel::Outside {
                return Err("NONE label in replacement map".into());
            }
            if !keys.insert((entry.label, entry.index)) {
                return Err(format!("duplicate key {}#{}", entry.label, entry.index));
            }
            if !surfaces.insert((entry.label, entry.surface.as_str())) {
                return Err(format!(
                    "surface `{}` indexed twice under {}",
                    entry.surface, entry.label
                ));
            }
        }
        for label in EntityLabel::ALL {
            let mut indices: Vec<u32> = self
                .entries
                .iter()
                .filter(|e| e.label == label)
                .map(|e| e.index)
                .collect();
            indices.sort_unstable();
            if indices.iter().zip(1u32..).any(|(&i, expected)| i != expected) {
                return Err(format!("indices for {label} are not 1..k: {indices:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses line-delimited JSON records, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(&line).map_err(|source| RecordError::Json { line: i + 1, source })?;
        out.push(record);
    }
    Ok(out)
}

/// Serialises one record as a single JSON line without the trailing newline.
pub fn to_json_line<T: Serialize>(record: &T) -> String {
    serde_json::to_string(record).expect("record types always serialise")
}
