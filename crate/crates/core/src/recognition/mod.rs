//! Layered recognition of sensitive spans: pattern detectors, gazetteers,
//! closed-class rules and an optional tagger sidecar, merged into one
//! non-overlapping annotation set.

mod closed_class;
mod config;
mod corpus;
mod detectors;
mod gazetteer;
mod resolve;

use log::warn;
use thiserror::Error;

pub use closed_class::ClosedClassRules;
pub use config::{DetectorSet, RecognizerConfig, TaggerConfig, TermSource};
pub use corpus::{
    compute_ne_ratio, filter_and_truncate_corpus, truncate_words, CorpusRules, EmptyDocument,
    PreparedCorpus,
};
pub use detectors::RegexDetectors;
pub use gazetteer::{load_terms, Gazetteer, GazetteerError, BUNDLED_LABELS};
pub use resolve::{compare_candidates, resolve_spans};

use crate::sidecar::{SidecarError, SidecarPool, TaggerResponse, TextRequest};
use crate::text_model::{AnnotatedDocument, CharIndex, Document, EntityLabel, Source, Span};
use crate::tokenizer::tokenize;

#[derive(Debug, Error)]
pub enum RecognitionError {
    #[error("tagger sidecar unavailable: {0}")]
    SidecarUnavailable(#[from] SidecarError),
    #[error("tagger returned an invalid entity for `{id}`: {reason}")]
    InvalidTaggerEntity { id: String, reason: String },
    #[error(transparent)]
    Gazetteer(#[from] GazetteerError),
    #[error("invalid recognizer configuration: {0}")]
    Config(String),
}

impl RecognitionError {
    /// Whether the error comes from the tagger layer.
    pub fn is_sidecar(&self) -> bool {
        matches!(
            self,
            RecognitionError::SidecarUnavailable(_) | RecognitionError::InvalidTaggerEntity { .. }
        )
    }
}

/// Result of recognising a batch of documents.
#[derive(Debug)]
pub struct RecognizedBatch {
    pub documents: Vec<AnnotatedDocument>,
    /// Set when the tagger failed and the batch fell back to rule layers.
    pub degraded: bool,
}

/// A loaded recogniser stack. Lexicons are read once at construction and
/// never change afterwards. A sidecar process is spawned only when the
/// configuration names a tagger.
pub struct Recognizer {
    cfg: RecognizerConfig,
    detectors: RegexDetectors,
    gazetteer: Gazetteer,
    closed_class: ClosedClassRules,
    tagger: Option<SidecarPool>,
}

impl Recognizer {
    pub fn new(cfg: RecognizerConfig) -> Result<Self, RecognitionError> {
        cfg.validate().map_err(RecognitionError::Config)?;
        let detectors = RegexDetectors::new(&cfg.detectors);
        let gazetteer = Gazetteer::load(&cfg.gazetteers)?;
        let pronouns = load_terms(&cfg.pronouns, EntityLabel::Pronoun)?;
        let closed_class = ClosedClassRules::new(pronouns, cfg.detectors.numeric);
        let tagger = match &cfg.tagger {
            Some(t) => match SidecarPool::spawn(&t.command, t.timeout, t.processes) {
                Ok(pool) => Some(pool),
                Err(e) if cfg.rules_only_fallback => {
                    warn!("tagger failed to start, continuing with rule layers only: {e}");
                    None
                }
                Err(e) => return Err(e.into()),
            },
            None => None,
        };
        Ok(Self {
            cfg,
            detectors,
            gazetteer,
            closed_class,
            tagger,
        })
    }

    pub fn config(&self) -> &RecognizerConfig {
        &self.cfg
    }

    /// True when a tagger sidecar process is running.
    pub fn has_tagger(&self) -> bool {
        self.tagger.is_some()
    }

    /// Candidates from the pattern, gazetteer and closed-class layers.
    pub fn rule_candidates(&self, text: &str) -> Vec<Span> {
        let index = CharIndex::new(text);
        let tokens = tokenize(text);
        let mut spans = self.detectors.find(text, &index);
        spans.extend(self.gazetteer.find(text, &tokens));
        spans.extend(self.closed_class.find(text, &tokens));
        spans
    }

    /// Tagger predictions for each document, in order. Empty lists when no
    /// tagger is configured.
    pub fn tag_batch(&self, docs: &[Document]) -> Result<Vec<Vec<Span>>, RecognitionError> {
        let Some(pool) = &self.tagger else {
            return Ok(vec![Vec::new(); docs.len()]);
        };
        let batch_size = self.cfg.tagger.as_ref().map_or(32, |t| t.batch_size);
        let mut out = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(batch_size) {
            let requests: Vec<TextRequest> = chunk
                .iter()
                .map(|d| TextRequest {
                    id: d.id.clone(),
                    text: d.text.clone(),
                })
                .collect();
            let responses: Vec<TaggerResponse> = pool.exchange(&requests)?;
            for (doc, response) in chunk.iter().zip(responses) {
                out.push(tagger_spans(doc, response)?);
            }
        }
        Ok(out)
    }

    /// Merges rule candidates with already obtained tagger spans.
    pub fn recognize_with(&self, doc: &Document, tagged: Vec<Span>) -> AnnotatedDocument {
        let mut candidates = self.rule_candidates(&doc.text);
        candidates.extend(tagged);
        candidates.retain(|s| s.score >= self.cfg.floor(s.source) && s.label != EntityLabel::Outside);
        let spans = resolve_spans(&candidates, |s| self.cfg.rank(s));
        AnnotatedDocument::new(doc.clone(), spans)
    }

    pub fn recognize(&self, doc: &Document) -> Result<AnnotatedDocument, RecognitionError> {
        let mut batch = self.recognize_batch(std::slice::from_ref(doc))?;
        Ok(batch.documents.remove(0))
    }

    /// Recognises a batch. If the tagger fails and the configuration allows
    /// rules-only fallback, the batch is marked degraded instead of failing.
    pub fn recognize_batch(&self, docs: &[Document]) -> Result<RecognizedBatch, RecognitionError> {
        let (tagged, degraded) = match self.tag_batch(docs) {
            Ok(tagged) => (tagged, self.cfg.tagger.is_some() && self.tagger.is_none()),
            Err(e) if e.is_sidecar() && self.cfg.rules_only_fallback => {
                warn!("tagger failed, batch recognised with rule layers only: {e}");
                (vec![Vec::new(); docs.len()], true)
            }
            Err(e) => return Err(e),
        };
        let documents = docs
            .iter()
            .zip(tagged)
            .map(|(doc, spans)| self.recognize_with(doc, spans))
            .collect();
        Ok(RecognizedBatch {
            documents,
            degraded,
        })
    }
}

/// Converts a tagger response into spans. `NONE` entities are dropped;
/// labels outside the annotation scheme and bad offsets are errors.
fn tagger_spans(doc: &Document, response: TaggerResponse) -> Result<Vec<Span>, RecognitionError> {
    let len = doc.char_len();
    let invalid = |reason: String| RecognitionError::InvalidTaggerEntity {
        id: doc.id.clone(),
        reason,
    };
    let mut spans = Vec::new();
    for e in response.entities {
        let label: EntityLabel = e.label.parse().map_err(|err| invalid(format!("{err}")))?;
        if label.is_engine_derived() {
            return Err(invalid(format!("label {label} is reserved for the engine")));
        }
        if !(e.start < e.end && e.end <= len) {
            return Err(invalid(format!(
                "offsets [{}, {}) outside text of length {len}",
                e.start, e.end
            )));
        }
        if !(0.0..=1.0).contains(&e.score) {
            return Err(invalid(format!("score {} outside [0, 1]", e.score)));
        }
        if label == EntityLabel::Outside {
            continue;
        }
        spans.push(Span::new(e.start, e.end, label, Source::Tagger).with_score(e.score));
    }
    Ok(spans)
}

/// One-shot recognition of a single document.
pub fn recognize(doc: &Document, cfg: &RecognizerConfig) -> Result<AnnotatedDocument, RecognitionError> {
    Recognizer::new(cfg.clone())?.recognize(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(doc: &AnnotatedDocument) -> Vec<(String, EntityLabel)> {
        doc.spans
            .iter()
            .map(|s| (doc.surface(s).to_string(), s.label))
            .collect()
    }

    #[test]
    fn email_only() {
        let doc = Document::new("1", "Contact jane@doe.org");
        let got = recognize(&doc, &RecognizerConfig::default()).unwrap();
        assert_eq!(
            surfaces(&got),
            vec![("jane@doe.org".to_string(), EntityLabel::EmailAddress)]
        );
        assert_eq!(got.spans[0].source, Source::Regex);
    }

    #[test]
    fn names_from_gazetteers() {
        let mut cfg = RecognizerConfig::default();
        cfg.add_gazetteer(
            EntityLabel::PersonFirstname,
            TermSource::Terms(vec!["Victoria".into(), "David".into()]),
        )
        .add_gazetteer(EntityLabel::PersonLastname, TermSource::Terms(vec!["Beckham".into()]));
        let doc = Document::new("fig", "Victoria Beckham is married to David Beckham");
        let got = recognize(&doc, &cfg).unwrap();
        use EntityLabel::*;
        assert_eq!(
            surfaces(&got),
            vec![
                ("Victoria".into(), PersonFirstname),
                ("Beckham".into(), PersonLastname),
                ("David".into(), PersonFirstname),
                ("Beckham".into(), PersonLastname),
            ]
        );
    }

    #[test]
    fn bundled_gazetteers_cover_the_president_sentence() {
        let doc = Document::new("intro", "Joe Biden is the current president of the United States.");
        let got = recognize(&doc, &RecognizerConfig::with_bundled_gazetteers()).unwrap();
        use EntityLabel::*;
        assert_eq!(
            surfaces(&got),
            vec![
                ("Joe".into(), PersonFirstname),
                ("Biden".into(), PersonLastname),
                ("president".into(), Occupation),
                ("United States".into(), Location),
            ]
        );
    }

    #[test]
    fn score_floor_drops_weak_sources() {
        let mut cfg = RecognizerConfig::default();
        cfg.score_floor.insert(Source::ClosedClass, 0.9);
        let doc = Document::new("n", "He bought 3 apples");
        let got = recognize(&doc, &cfg).unwrap();
        // pronoun (score 1.0) kept, number (0.5) dropped
        assert_eq!(surfaces(&got), vec![("He".to_string(), EntityLabel::Pronoun)]);
    }

    #[test]
    fn no_tagger_means_no_process() {
        let r = Recognizer::new(RecognizerConfig::default()).unwrap();
        assert!(!r.has_tagger());
    }

    #[test]
    fn tagger_entities_are_checked() {
        let doc = Document::new("a", "Ada Lovelace");
        let ok = TaggerResponse {
            id: "a".into(),
            entities: vec![
                crate::sidecar::TaggerEntity {
                    start: 0,
                    end: 3,
                    label: "PERSON_FIRSTNAME".into(),
                    score: 0.9,
                },
                crate::sidecar::TaggerEntity {
                    start: 4,
                    end: 12,
                    label: "NONE".into(),
                    score: 0.9,
                },
            ],
        };
        assert_eq!(tagger_spans(&doc, ok).unwrap().len(), 1);
        let reserved = TaggerResponse {
            id: "a".into(),
            entities: vec![crate::sidecar::TaggerEntity {
                start: 0,
                end: 3,
                label: "PRONOUN".into(),
                score: 0.9,
            }],
        };
        assert!(tagger_spans(&doc, reserved).is_err());
        let out_of_range = TaggerResponse {
            id: "a".into(),
            entities: vec![crate::sidecar::TaggerEntity {
                start: 4,
                end: 40,
                label: "PERSON_LASTNAME".into(),
                score: 0.9,
            }],
        };
        assert!(tagger_spans(&doc, out_of_range).is_err());
    }
}
