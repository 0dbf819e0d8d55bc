//! Offset-preserving word tokenisation.
//!
//! Words are runs of letters with internal apostrophes (`Watson's` is one
//! token). Numbers are digit runs with internal `.` or `,` separators
//! (`1,000.5`). Every other non-whitespace character becomes its own
//! punctuation or symbol token. Whitespace is never emitted.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Number,
    Punctuation,
    Symbol,
}

/// A token with character offsets (`start`, `end`) and the matching byte
/// range into the source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    pub kind: TokenKind,
}

impl Token {
    /// Words and numbers count towards document length; punctuation and
    /// symbols do not.
    pub fn is_countable(&self) -> bool {
        matches!(self.kind, TokenKind::Word | TokenKind::Number)
    }

    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.byte_start..self.byte_end]
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32,
        0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF | 0xFE20..=0xFE2F)
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() || is_combining_mark(c)
}

fn is_number_separator(c: char) -> bool {
    matches!(c, '.' | ',')
}

fn classify_single(c: char) -> TokenKind {
    if c.is_ascii() {
        if matches!(c, '$' | '+' | '<' | '=' | '>' | '^' | '`' | '|' | '~') {
            TokenKind::Symbol
        } else if c.is_ascii_punctuation() {
            TokenKind::Punctuation
        } else {
            TokenKind::Symbol
        }
    } else if matches!(c as u32, 0x2010..=0x205E | 0x3000..=0x303F)
        || matches!(c, '«' | '»' | '¡' | '¿' | '§' | '¶' | '·')
    {
        TokenKind::Punctuation
    } else {
        TokenKind::Symbol
    }
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_alphabetic() {
            i += 1;
            while i < chars.len() {
                let c = chars[i].1;
                if is_word_char(c) {
                    i += 1;
                } else if is_apostrophe(c) && chars.get(i + 1).is_some_and(|&(_, n)| n.is_alphabetic()) {
                    i += 2;
                } else {
                    break;
                }
            }
            TokenKind::Word
        } else if c.is_numeric() {
            i += 1;
            while i < chars.len() {
                let c = chars[i].1;
                if c.is_numeric() {
                    i += 1;
                } else if is_number_separator(c)
                    && chars.get(i + 1).is_some_and(|&(_, n)| n.is_numeric())
                {
                    i += 2;
                } else {
                    break;
                }
            }
            TokenKind::Number
        } else {
            i += 1;
            classify_single(c)
        };
        tokens.push(Token {
            start,
            end: i,
            byte_start: byte_at(start),
            byte_end: byte_at(i),
            kind,
        });
    }
    tokens
}

/// Number of word and number tokens; punctuation is not counted.
pub fn count_word_tokens(text: &str) -> usize {
    tokenize(text).iter().filter(|t| t.is_countable()).count()
}
