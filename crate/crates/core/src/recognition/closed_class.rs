//! Closed-class rules: gendered pronouns and stand-alone numbers.

use std::collections::HashSet;

use crate::text_model::{EntityLabel, Source, Span};
use crate::tokenizer::{Token, TokenKind};

pub const PRONOUN_SCORE: f64 = 1.0;
pub const NUMERIC_SCORE: f64 = 0.5;

#[derive(Debug, Clone, Default)]
pub struct ClosedClassRules {
    pronouns: HashSet<String>,
    numeric: bool,
}

impl ClosedClassRules {
    pub fn new<I, S>(pronouns: I, numeric: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            pronouns: pronouns.into_iter().map(|p| p.as_ref().to_lowercase()).collect(),
            numeric,
        }
    }

    pub fn find(&self, text: &str, tokens: &[Token]) -> Vec<Span> {
        tokens
            .iter()
            .filter_map(|t| match t.kind {
                TokenKind::Word if self.pronouns.contains(&t.text(text).to_lowercase()) => Some(
                    Span::new(t.start, t.end, EntityLabel::Pronoun, Source::ClosedClass)
                        .with_score(PRONOUN_SCORE),
                ),
                TokenKind::Number if self.numeric => Some(
                    Span::new(t.start, t.end, EntityLabel::Numeric, Source::ClosedClass)
                        .with_score(NUMERIC_SCORE),
                ),
                _ => None,
            })
            .collect()
    }
}
