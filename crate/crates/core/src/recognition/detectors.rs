//! Pattern detectors for e-mail addresses, phone numbers, dates, times and
//! street addresses.

use regex::Regex;

use super::config::DetectorSet;
use crate::text_model::{CharIndex, EntityLabel, Source, Span};

const MONTH: &str = r"(?:jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\.?";
const WEEKDAY: &str = r"(?:monday|tuesday|wednesday|thursday|friday|saturday|sunday)";
const STREET_TYPE: &str = r"(?:Road|Rd|Street|St|Avenue|Ave|Lane|Ln|Drive|Dr|Boulevard|Blvd|Way|Close|Court|Ct|Place|Pl|Square|Sq|Terrace|Crescent|Grove|Gardens|Row|Parade|Walk|Mews|Highway|Hwy)";

struct Pattern {
    regex: Regex,
    label: EntityLabel,
    score: f64,
    /// Minimum and maximum number of digits in a match, when checked.
    digits: Option<(usize, usize)>,
}

pub struct RegexDetectors {
    patterns: Vec<Pattern>,
}

impl RegexDetectors {
    pub fn new(enabled: &DetectorSet) -> Self {
        let mut patterns = Vec::new();
        let mut add = |on: bool, label, score, digits, source: &str| {
            if on {
                patterns.push(Pattern {
                    regex: Regex::new(source).expect("detector pattern compiles"),
                    label,
                    score,
                    digits,
                });
            }
        };

        add(
            enabled.email,
            EntityLabel::EmailAddress,
            1.0,
            None,
            r"(?i)\b[a-z0-9][a-z0-9._%+-]*@[a-z0-9-]+(?:\.[a-z0-9-]+)*\.[a-z]{2,}\b",
        );
        add(
            enabled.phone,
            EntityLabel::PhoneNumber,
            0.95,
            Some((9, 15)),
            r"(?:\+\d{1,3}[ .-]?)?(?:\(\d{1,5}\)[ .-]?)?\d{2,5}(?:[ .-]?\d{2,5}){1,4}",
        );

        let date_patterns = [
            r"\b\d{4}-\d{1,2}-\d{1,2}\b".to_string(),
            r"\b\d{1,2}[/.-]\d{1,2}[/.-](?:\d{4}|\d{2})\b".to_string(),
            format!(r"(?i)\b\d{{1,2}}(?:st|nd|rd|th)?\s+(?:of\s+)?{MONTH}(?:,?\s+\d{{4}})?\b"),
            format!(r"(?i)\b{MONTH}\s+\d{{1,2}}(?:st|nd|rd|th)?(?:,?\s+\d{{4}})?\b"),
            format!(r"(?i)\b{MONTH}\s+\d{{4}}\b"),
            format!(r"(?i)\b{WEEKDAY}\b"),
            r"(?i)\b(?:yesterday|today|tomorrow)\b".to_string(),
            r"\b(?:1[5-9]|20)\d0s\b".to_string(),
        ];
        for p in &date_patterns {
            add(enabled.date, EntityLabel::Date, 0.9, None, p);
        }
        // bare years are weaker evidence than full dates
        add(enabled.date, EntityLabel::Date, 0.6, None, r"\b(?:1[5-9]\d{2}|20\d{2})\b");

        add(
            enabled.time,
            EntityLabel::Time,
            0.9,
            None,
            r"(?i)\b\d{1,2}(?::\d{2}){1,2}(?:\s*(?:a\.m\.|p\.m\.|am|pm))?",
        );
        add(
            enabled.time,
            EntityLabel::Time,
            0.9,
            None,
            r"(?i)\b\d{1,2}\s*(?:a\.m\.|p\.m\.|am|pm)",
        );
        add(
            enabled.time,
            EntityLabel::Time,
            0.7,
            None,
            r"(?i)\b(?:noon|midnight|morning|afternoon|evening)\b",
        );

        add(
            enabled.address,
            EntityLabel::Address,
            0.75,
            None,
            &format!(r"\b\d{{1,5}}[A-Za-z]?\s+(?:[A-Z][\p{{L}}'-]*\s+){{1,3}}{STREET_TYPE}\b"),
        );

        Self { patterns }
    }

    /// All pattern matches as candidate spans, possibly overlapping.
    pub fn find(&self, text: &str, index: &CharIndex<'_>) -> Vec<Span> {
        let mut spans = Vec::new();
        for pattern in &self.patterns {
            for m in pattern.regex.find_iter(text) {
                if !standalone(text, m.start(), m.end()) {
                    continue;
                }
                if let Some((lo, hi)) = pattern.digits {
                    let digits = m.as_str().chars().filter(|c| c.is_ascii_digit()).count();
                    if digits < lo || digits > hi {
                        continue;
                    }
                }
                let (Some(start), Some(end)) = (index.char_at_byte(m.start()), index.char_at_byte(m.end()))
                else {
                    continue;
                };
                spans.push(
                    Span::new(start, end, pattern.label, Source::Regex).with_score(pattern.score),
                );
            }
        }
        spans
    }
}

/// Rejects matches glued to a neighbouring letter or digit.
fn standalone(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    let glued = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric());
    !glued(before) && !glued(after)
}
