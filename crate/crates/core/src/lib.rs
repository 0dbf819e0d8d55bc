//! Offline text anonymisation: span recognition, placeholder replacement and
//! restore, plus the scoring utilities used to evaluate anonymised corpora.

pub mod anonymizer;
pub mod eval;
pub mod placeholder;
pub mod recognition;
pub mod sidecar;
pub mod text_model;
pub mod tokenizer;

pub use anonymizer::{
    anonymize, restore, strip_placeholders, AnonymizationMode, AnonymizeError, AnonymizedDocument,
    ModeKind, RestoreError, Strategy,
};
pub use placeholder::PlaceholderStyle;
pub use recognition::{recognize, RecognitionError, Recognizer, RecognizerConfig};
pub use text_model::{AnnotatedDocument, Document, EntityLabel, ReplacementMap, Source, Span};
