//! Case-insensitive, longest-match dictionary lookup over token sequences.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::config::TermSource;
use crate::text_model::{EntityLabel, Source, Span};
use crate::tokenizer::{tokenize, Token, TokenKind};

pub const GAZETTEER_SCORE: f64 = 0.8;

/// Labels for which the crate ships a small default list.
pub const BUNDLED_LABELS: [EntityLabel; 5] = [
    EntityLabel::PersonFirstname,
    EntityLabel::PersonLastname,
    EntityLabel::Location,
    EntityLabel::Occupation,
    EntityLabel::Organization,
];

pub(crate) fn bundled_terms(label: EntityLabel) -> Option<&'static str> {
    Some(match label {
        EntityLabel::PersonFirstname => include_str!("../../data/firstnames.txt"),
        EntityLabel::PersonLastname => include_str!("../../data/lastnames.txt"),
        EntityLabel::Location => include_str!("../../data/locations.txt"),
        EntityLabel::Occupation => include_str!("../../data/occupations.txt"),
        EntityLabel::Organization => include_str!("../../data/organizations.txt"),
        EntityLabel::Pronoun => include_str!("../../data/pronouns.txt"),
        _ => return None,
    })
}

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("cannot read gazetteer {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gazetteer {origin}, line {line}: {reason}")]
    Format {
        origin: String,
        line: usize,
        reason: String,
    },
}

/// Reads the terms of a lexicon: one per line, `#` comments and blank lines
/// ignored. A term without any letter or digit is a format error.
pub fn load_terms(source: &TermSource, label: EntityLabel) -> Result<Vec<String>, GazetteerError> {
    let (origin, contents) = match source {
        TermSource::Terms(terms) => return check_terms("inline list", terms.iter().map(String::as_str)),
        TermSource::Bundled => (
            format!("bundled {label} list"),
            bundled_terms(label)
                .ok_or_else(|| GazetteerError::Format {
                    origin: "bundled".into(),
                    line: 0,
                    reason: format!("no bundled list for {label}"),
                })?
                .to_string(),
        ),
        TermSource::File(path) => (path.display().to_string(), read_utf8(path)?),
    };
    check_terms(&origin, contents.lines())
}

fn read_utf8(path: &Path) -> Result<String, GazetteerError> {
    let bytes = fs::read(path).map_err(|source| GazetteerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| {
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        GazetteerError::Format {
            origin: path.display().to_string(),
            line: valid.iter().filter(|&&b| b == b'\n').count() + 1,
            reason: "not valid UTF-8".into(),
        }
    })
}

fn check_terms<'a>(
    origin: &str,
    lines: impl Iterator<Item = &'a str>,
) -> Result<Vec<String>, GazetteerError> {
    let mut terms = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !tokenize(line).iter().any(Token::is_countable) {
            return Err(GazetteerError::Format {
                origin: origin.to_string(),
                line: i + 1,
                reason: format!("empty term {raw:?}"),
            });
        }
        terms.push(line.to_string());
    }
    Ok(terms)
}

fn lowered(text: &str, tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.text(text).to_lowercase()).collect()
}

#[derive(Debug, Default, Clone)]
pub struct Gazetteer {
    terms: HashMap<Vec<String>, Vec<EntityLabel>>,
    max_tokens: usize,
}

impl Gazetteer {
    pub fn load(sources: &BTreeMap<EntityLabel, Vec<TermSource>>) -> Result<Self, GazetteerError> {
        let mut gazetteer = Self::default();
        for (&label, list) in sources {
            for source in list {
                for term in load_terms(source, label)? {
                    gazetteer.insert(label, &term);
                }
            }
        }
        Ok(gazetteer)
    }

    pub fn insert(&mut self, label: EntityLabel, term: &str) {
        let key = lowered(term, &tokenize(term));
        if key.is_empty() {
            return;
        }
        self.max_tokens = self.max_tokens.max(key.len());
        let labels = self.terms.entry(key).or_default();
        if !labels.contains(&label) {
            labels.push(label);
            labels.sort();
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn lookup(&self, key: &[String]) -> Option<&[EntityLabel]> {
        self.terms.get(key).map(Vec::as_slice)
    }

    /// Longest match starting at each token. A trailing possessive `'s` is
    /// left outside the span. A term listed as both first and last name is
    /// read as a last name right after a first name, otherwise as a first
    /// name.
    pub fn find(&self, text: &str, tokens: &[Token]) -> Vec<Span> {
        let mut spans = Vec::new();
        if self.terms.is_empty() {
            return spans;
        }
        let words = lowered(text, tokens);
        // (end of previous match, whether it was read as a first name)
        let mut previous: Option<(usize, bool)> = None;

        for i in 0..tokens.len() {
            if tokens[i].kind == TokenKind::Punctuation || tokens[i].kind == TokenKind::Symbol {
                continue;
            }
            let longest = self.max_tokens.min(tokens.len() - i);
            let mut found = None;
            for n in (1..=longest).rev() {
                let key = &words[i..i + n];
                if let Some(labels) = self.lookup(key) {
                    found = Some((tokens[i + n - 1].end, labels));
                    break;
                }
                let last = &tokens[i + n - 1];
                if let Some(stem) = possessive_stem(&key[n - 1], last) {
                    let mut stemmed = key.to_vec();
                    stemmed[n - 1] = stem;
                    if let Some(labels) = self.lookup(&stemmed) {
                        found = Some((last.end - 2, labels));
                        break;
                    }
                }
            }
            let Some((end, labels)) = found else {
                continue;
            };
            let start = tokens[i].start;
            let follows_first = previous.is_some_and(|(prev_end, was_first)| {
                was_first && i > 0 && tokens[i - 1].end == prev_end
            });
            let chosen: Vec<EntityLabel> = if labels.contains(&EntityLabel::PersonFirstname)
                && labels.contains(&EntityLabel::PersonLastname)
            {
                let drop = if follows_first {
                    EntityLabel::PersonFirstname
                } else {
                    EntityLabel::PersonLastname
                };
                labels.iter().copied().filter(|&l| l != drop).collect()
            } else {
                labels.to_vec()
            };
            let is_first = chosen.first() == Some(&EntityLabel::PersonFirstname);
            for label in chosen {
                spans.push(Span::new(start, end, label, Source::Gazetteer).with_score(GAZETTEER_SCORE));
            }
            previous = Some((end, is_first));
        }
        spans
    }
}

fn possessive_stem(lowered: &str, token: &Token) -> Option<String> {
    if token.kind != TokenKind::Word {
        return None;
    }
    let stem = lowered
        .strip_suffix("'s")
        .or_else(|| lowered.strip_suffix("\u{2019}s"))?;
    (!stem.is_empty()).then(|| stem.to_string())
}
