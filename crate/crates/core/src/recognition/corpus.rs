//! Corpus preparation: named-entity ratio and length filtering.

use thiserror::Error;

use crate::text_model::{AnnotatedDocument, CharIndex};
use crate::tokenizer::{count_word_tokens, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("document `{0}` has no word tokens")]
pub struct EmptyDocument(pub String);

/// Number of annotated spans divided by the number of word tokens,
/// irrespective of span category.
pub fn compute_ne_ratio(doc: &AnnotatedDocument) -> Result<f64, EmptyDocument> {
    let words = count_word_tokens(doc.text());
    if words == 0 {
        return Err(EmptyDocument(doc.id().to_string()));
    }
    Ok(doc.spans.len() as f64 / words as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRules {
    /// Documents with fewer words are dropped.
    pub min_words: usize,
    /// Documents with more words are dropped (applied before truncation).
    pub max_words: Option<usize>,
    /// Documents are cut after this many words.
    pub truncate_to: Option<usize>,
    /// Documents are kept only if their ratio is strictly below this bound.
    pub max_ne_ratio: Option<f64>,
}

impl Default for CorpusRules {
    fn default() -> Self {
        Self {
            min_words: 20,
            max_words: None,
            truncate_to: None,
            max_ne_ratio: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreparedCorpus {
    pub documents: Vec<AnnotatedDocument>,
    pub dropped_short: usize,
    pub dropped_long: usize,
    pub dropped_ratio: usize,
    pub truncated: usize,
}

/// Cuts the text right after its `limit`-th word token. Spans that reach past
/// the cut are dropped.
pub fn truncate_words(doc: &AnnotatedDocument, limit: usize) -> Option<AnnotatedDocument> {
    let tokens = tokenize(doc.text());
    let last = tokens.iter().filter(|t| t.is_countable()).nth(limit.checked_sub(1)?)?;
    let cut = last.end;
    if cut >= doc.document.char_len() {
        return None;
    }
    let index = CharIndex::new(doc.text());
    let mut out = doc.clone();
    out.document.text = index.slice(0, cut).to_string();
    out.spans.retain(|s| s.end <= cut);
    Some(out)
}

pub fn filter_and_truncate_corpus(
    corpus: impl IntoIterator<Item = AnnotatedDocument>,
    rules: &CorpusRules,
) -> PreparedCorpus {
    let mut prepared = PreparedCorpus::default();
    for doc in corpus {
        let words = count_word_tokens(doc.text());
        if words < rules.min_words {
            prepared.dropped_short += 1;
            continue;
        }
        if rules.max_words.is_some_and(|max| words > max) {
            prepared.dropped_long += 1;
            continue;
        }
        let doc = match rules.truncate_to.and_then(|limit| truncate_words(&doc, limit)) {
            Some(cut) => {
                prepared.truncated += 1;
                cut
            }
            None => doc,
        };
        if let Some(bound) = rules.max_ne_ratio {
            // min_words > 0 guarantees a word; an empty document has ratio 0
            let ratio = compute_ne_ratio(&doc).unwrap_or(0.0);
            if ratio >= bound {
                prepared.dropped_ratio += 1;
                continue;
            }
        }
        prepared.documents.push(doc);
    }
    prepared
}
