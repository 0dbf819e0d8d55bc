//! Replacement of sensitive spans with category placeholders, a generic
//! suppression token, or seeded same-category surrogates.
//!
//! Within one document, every occurrence of the same `(label, canonical
//! surface)` pair receives the same replacement. In tagging mode the index of
//! a pair is its rank in order of first appearance among pairs of that label.

use std::collections::{BTreeMap, HashMap};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::placeholder::{find_placeholders, render, PlaceholderStyle};
use crate::text_model::{
    canonical_surface, validate_annotations, AnnotatedDocument, CharIndex, Document, EntityLabel,
    MapEntry, Occurrence, ReplacementMap, Violation,
};

pub const SUPPRESSION_TOKEN: &str = "XXX";

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Tagging,
    Suppression,
    RandomSubstitution {
        seed: u64,
        lexicons: BTreeMap<EntityLabel, Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Tagging,
    Suppression,
    RandomSubstitution,
}

impl ModeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeKind::Tagging => "tagging",
            ModeKind::Suppression => "suppression",
            ModeKind::RandomSubstitution => "random-substitution",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnonymizationMode {
    pub strategy: Strategy,
    pub style: PlaceholderStyle,
    /// Render NUMERIC placeholders with an index (`[numeric3]`) or bare.
    pub numeric_indexed: bool,
    /// Match surfaces case-sensitively when deciding whether two mentions
    /// are the same entity.
    pub case_sensitive: bool,
}

impl AnonymizationMode {
    pub fn tagging() -> Self {
        Self::with_strategy(Strategy::Tagging)
    }

    pub fn suppression() -> Self {
        Self::with_strategy(Strategy::Suppression)
    }

    pub fn random_substitution(seed: u64, lexicons: BTreeMap<EntityLabel, Vec<String>>) -> Self {
        Self::with_strategy(Strategy::RandomSubstitution { seed, lexicons })
    }

    fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            style: PlaceholderStyle::Bracketed,
            numeric_indexed: true,
            case_sensitive: false,
        }
    }

    pub fn style(mut self, style: PlaceholderStyle) -> Self {
        self.style = style;
        self
    }

    pub fn kind(&self) -> ModeKind {
        match self.strategy {
            Strategy::Tagging => ModeKind::Tagging,
            Strategy::Suppression => ModeKind::Suppression,
            Strategy::RandomSubstitution { .. } => ModeKind::RandomSubstitution,
        }
    }

    fn indexed(&self, label: EntityLabel) -> bool {
        match label {
            EntityLabel::Pronoun => false,
            EntityLabel::Numeric => self.numeric_indexed,
            _ => true,
        }
    }
}

/// Output record: `{"id", "text", "mode", "map"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizedDocument {
    pub id: String,
    pub text: String,
    pub mode: ModeKind,
    pub map: ReplacementMap,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnonymizeError {
    #[error("document has invalid annotations: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidAnnotations(Vec<Violation>),
    #[error("no substitution lexicon for label {0}")]
    MissingLexicon(EntityLabel),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RestoreError {
    #[error("{} output cannot be restored", .0.as_str())]
    UnrestorableMode(ModeKind),
    #[error("placeholder {label}{} at byte {offset} has no map entry", .index.map(|i| format!("#{i}")).unwrap_or_default())]
    DanglingPlaceholder {
        label: EntityLabel,
        index: Option<u32>,
        offset: usize,
    },
    #[error("replacement map does not line up with the text at byte {offset}")]
    MapMismatch { offset: usize },
}

pub fn anonymize(
    doc: &AnnotatedDocument,
    mode: &AnonymizationMode,
) -> Result<AnonymizedDocument, AnonymizeError> {
    let violations = validate_annotations(doc);
    if !violations.is_empty() {
        return Err(AnonymizeError::InvalidAnnotations(violations));
    }
    if let Strategy::RandomSubstitution { lexicons, .. } = &mode.strategy {
        if let Some(span) = doc
            .spans
            .iter()
            .find(|s| lexicons.get(&s.label).is_none_or(|l| l.is_empty()))
        {
            return Err(AnonymizeError::MissingLexicon(span.label));
        }
    }
    let mut rng = match &mode.strategy {
        Strategy::RandomSubstitution { seed, .. } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };

    let text = doc.text();
    let index = CharIndex::new(text);
    let mut entries: Vec<MapEntry> = Vec::new();
    let mut replacements: Vec<String> = Vec::new();
    let mut by_key: HashMap<(EntityLabel, String), usize> = HashMap::new();
    let mut per_label: HashMap<EntityLabel, u32> = HashMap::new();

    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in &doc.spans {
        out.push_str(index.slice(cursor, span.start));
        let surface = index.slice(span.start, span.end);
        let canonical = canonical_surface(surface, mode.case_sensitive);
        let key = (span.label, canonical);
        let slot = match by_key.get(&key) {
            Some(&slot) => slot,
            None => {
                let counter = per_label.entry(span.label).or_insert(0);
                *counter += 1;
                let replacement = match &mode.strategy {
                    Strategy::Tagging => {
                        let shown = mode.indexed(span.label).then_some(*counter);
                        render(span.label, shown, mode.style)
                    }
                    Strategy::Suppression => SUPPRESSION_TOKEN.to_string(),
                    Strategy::RandomSubstitution { lexicons, .. } => draw_substitute(
                        &lexicons[&span.label],
                        &key.1,
                        mode.case_sensitive,
                        rng.as_mut().expect("seeded for random substitution"),
                    ),
                };
                entries.push(MapEntry {
                    label: span.label,
                    index: *counter,
                    surface: key.1.clone(),
                    occurrences: Vec::new(),
                });
                replacements.push(replacement);
                by_key.insert(key, entries.len() - 1);
                entries.len() - 1
            }
        };
        entries[slot].occurrences.push(Occurrence {
            start: span.start,
            end: span.end,
            surface: surface.to_string(),
        });
        out.push_str(&replacements[slot]);
        cursor = span.end;
    }
    out.push_str(index.slice(cursor, index.char_len()));

    Ok(AnonymizedDocument {
        id: doc.id().to_string(),
        text: out,
        mode: mode.kind(),
        map: ReplacementMap { entries },
    })
}

/// Uniform draw from the lexicon, avoiding the original surface when the
/// lexicon offers any alternative.
fn draw_substitute(lexicon: &[String], canonical: &str, case_sensitive: bool, rng: &mut ChaCha8Rng) -> String {
    let others: Vec<&String> = lexicon
        .iter()
        .filter(|w| canonical_surface(w, case_sensitive) != canonical)
        .collect();
    if others.is_empty() {
        lexicon[rng.random_range(0..lexicon.len())].clone()
    } else {
        others[rng.random_range(0..others.len())].clone()
    }
}

fn check_dangling(segment: &str, base: usize, map: &ReplacementMap) -> Result<(), RestoreError> {
    for p in find_placeholders(segment) {
        let known = match p.index {
            Some(i) => map.get(p.label, i).is_some(),
            None => map.has_label(p.label),
        };
        if !known {
            return Err(RestoreError::DanglingPlaceholder {
                label: p.label,
                index: p.index,
                offset: base + p.start,
            });
        }
    }
    Ok(())
}

/// Byte length of the placeholder for `entry` at the start of `rest`, in
/// whichever style and index form the output used.
fn rendered_width(rest: &str, entry: &MapEntry) -> Option<usize> {
    let forms = [Some(entry.index), None];
    [PlaceholderStyle::Bracketed, PlaceholderStyle::Uppercase]
        .into_iter()
        .flat_map(|style| forms.iter().map(move |&i| render(entry.label, i, style)))
        .filter(|p| p.contains(char::is_numeric) || entry.label.is_engine_derived())
        .find(|p| rest.starts_with(p.as_str()))
        .map(|p| p.len())
}

/// Reverses tagging-mode output using the occurrence offsets recorded in the
/// map. Placeholder-shaped text in the original that has no map entry is
/// indistinguishable from a dangling placeholder and is reported as one.
pub fn restore(anon: &AnonymizedDocument) -> Result<Document, RestoreError> {
    if anon.mode != ModeKind::Tagging {
        return Err(RestoreError::UnrestorableMode(anon.mode));
    }
    let mut occurrences: Vec<(&MapEntry, &Occurrence)> = anon
        .map
        .entries
        .iter()
        .flat_map(|e| e.occurrences.iter().map(move |o| (e, o)))
        .collect();
    occurrences.sort_by_key(|(_, o)| o.start);

    let text = anon.text.as_str();
    let mut out = String::with_capacity(text.len());
    let mut byte = 0;
    let mut original_cursor = 0;
    for (entry, occ) in occurrences {
        let gap = occ
            .start
            .checked_sub(original_cursor)
            .ok_or(RestoreError::MapMismatch { offset: byte })?;
        let gap_end = text[byte..]
            .char_indices()
            .nth(gap)
            .map(|(b, _)| byte + b)
            .ok_or(RestoreError::MapMismatch { offset: byte })?;
        check_dangling(&text[byte..gap_end], byte, &anon.map)?;
        out.push_str(&text[byte..gap_end]);

        let width = rendered_width(&text[gap_end..], entry)
            .ok_or(RestoreError::MapMismatch { offset: gap_end })?;
        out.push_str(&occ.surface);
        byte = gap_end + width;
        original_cursor = occ.end;
    }
    check_dangling(&text[byte..], byte, &anon.map)?;
    out.push_str(&text[byte..]);
    Ok(Document::new(anon.id.clone(), out))
}

pub use crate::placeholder::strip_placeholders;
