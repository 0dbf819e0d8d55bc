//! Token-level precision, recall and F1 per category, with macro and
//! support-weighted averages, plus a seeded train/validation/test split.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::text_model::{AnnotatedDocument, EntityLabel, Span};
use crate::tokenizer::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("gold and predicted text differ for document `{0}`")]
pub struct TextMismatch(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no token pairs to score")]
pub struct EmptyInput;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("split fractions ({0}, {1}, {2}) must be non-negative and sum to 1")]
pub struct BadFractions(pub f64, pub f64, pub f64);

/// Label of the span covering each character offset in `starts`, or NONE.
/// With overlapping spans the one starting last wins.
fn labels_at(spans: &[Span], starts: &[usize]) -> Vec<EntityLabel> {
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    starts
        .iter()
        .map(|&at| {
            let before = sorted.partition_point(|s| s.start <= at);
            sorted[..before]
                .iter()
                .rev()
                .find(|s| s.end > at)
                .map_or(EntityLabel::Outside, |s| s.label)
        })
        .collect()
}

/// One `(gold, predicted)` label pair per word or number token.
pub fn align_tokens(
    gold: &AnnotatedDocument,
    pred: &AnnotatedDocument,
) -> Result<Vec<(EntityLabel, EntityLabel)>, TextMismatch> {
    if gold.text() != pred.text() {
        return Err(TextMismatch(gold.id().to_string()));
    }
    let starts: Vec<usize> = tokenize(gold.text())
        .iter()
        .filter(|t| t.is_countable())
        .map(|t| t.start)
        .collect();
    let g = labels_at(&gold.spans, &starts);
    let p = labels_at(&pred.spans, &starts);
    Ok(g.into_iter().zip(p).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// Additive confusion counts; merging two sets equals counting their union.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub labels: BTreeMap<EntityLabel, LabelCounts>,
    pub total: u64,
    pub correct: u64,
}

impl ConfusionCounts {
    pub fn from_pairs(pairs: &[(EntityLabel, EntityLabel)]) -> Self {
        let mut counts = Self::default();
        for &pair in pairs {
            counts.add(pair);
        }
        counts
    }

    pub fn add(&mut self, (gold, pred): (EntityLabel, EntityLabel)) {
        self.total += 1;
        if gold == pred {
            self.correct += 1;
            self.labels.entry(gold).or_default().tp += 1;
        } else {
            self.labels.entry(gold).or_default().fn_ += 1;
            self.labels.entry(pred).or_default().fp += 1;
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.total += other.total;
        self.correct += other.correct;
        for (&label, c) in &other.labels {
            let mine = self.labels.entry(label).or_default();
            mine.tp += c.tp;
            mine.fp += c.fp;
            mine.fn_ += c.fn_;
        }
    }

    pub fn report(&self) -> Result<ConfusionReport, EmptyInput> {
        if self.total == 0 {
            return Err(EmptyInput);
        }
        let rows: Vec<LabelScore> = EntityLabel::REPORT_ORDER
            .into_iter()
            .filter_map(|label| self.labels.get(&label).map(|c| LabelScore::new(label, *c)))
            .collect();
        let n = rows.len() as f64;
        let macro_avg = Averages {
            precision: rows.iter().map(|r| r.precision).sum::<f64>() / n,
            recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
            f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
        };
        let total = self.total as f64;
        let weighted = |f: fn(&LabelScore) -> f64| {
            rows.iter().map(|r| f(r) * r.support as f64).sum::<f64>() / total
        };
        let weighted_avg = Averages {
            precision: weighted(|r| r.precision),
            recall: weighted(|r| r.recall),
            f1: weighted(|r| r.f1),
        };
        Ok(ConfusionReport {
            accuracy: self.correct as f64 / total,
            total: self.total,
            macro_avg,
            weighted_avg,
            rows,
        })
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabelScore {
    pub label: EntityLabel,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LabelScore {
    pub fn new(label: EntityLabel, c: LabelCounts) -> Self {
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            label,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            support: c.tp + c.fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-label scores for every label seen in gold or predictions, in report
/// order with NONE last. Averages run over those rows, NONE included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionReport {
    pub rows: Vec<LabelScore>,
    pub accuracy: f64,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    #[serde(rename = "weighted")]
    pub weighted_avg: Averages,
    pub total: u64,
}

pub const ZERO_DIVISION_NOTE: &str = "0/0 precision, recall or F1 is reported as 0";

impl ConfusionReport {
    pub fn row(&self, label: EntityLabel) -> Option<&LabelScore> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Fixed-width table with the usual classification-report layout.
    pub fn render_table(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.label.as_str().len())
            .chain([12])
            .max()
            .unwrap_or(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "Entity tag", "Precision", "Recall", "F1-score", "Support"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>9}",
                r.label.as_str(),
                r.precision,
                r.recall,
                r.f1,
                r.support
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9.2}  {:>9}",
            "accuracy", "", "", self.accuracy, self.total
        );
        for (name, avg) in [("macro avg", self.macro_avg), ("weighted avg", self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>9}",
                name, avg.precision, avg.recall, avg.f1, self.total
            );
        }
        let _ = writeln!(out, "\n{ZERO_DIVISION_NOTE}.");
        out
    }

    /// CSV with header `label,precision,recall,f1,support`, followed by the
    /// accuracy and average rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,precision,recall,f1,support\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.label, r.precision, r.recall, r.f1, r.support);
        }
        let _ = writeln!(out, "accuracy,,,{},{}", self.accuracy, self.total);
        for (name, avg) in [("macro avg", self.macro_avg), ("weighted avg", self.weighted_avg)] {
            let _ = writeln!(out, "{name},{},{},{},{}", avg.precision, avg.recall, avg.f1, self.total);
        }
        out
    }
}

pub fn score(pairs: &[(EntityLabel, EntityLabel)]) -> Result<ConfusionReport, EmptyInput> {
    ConfusionCounts::from_pairs(pairs).report()
}

/// Exact-match span scores: a predicted span counts only if a gold span has
/// the same offsets and label. Supplementary to the token-level report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanReport {
    pub rows: Vec<LabelScore>,
    pub micro: Averages,
}

pub fn span_report(
    pairs: &[(&AnnotatedDocument, &AnnotatedDocument)],
) -> Result<SpanReport, TextMismatch> {
    let mut counts: BTreeMap<EntityLabel, LabelCounts> = BTreeMap::new();
    for (gold, pred) in pairs {
        if gold.text() != pred.text() {
            return Err(TextMismatch(gold.id().to_string()));
        }
        let key = |s: &Span| (s.start, s.end, s.label);
        let gold_keys: std::collections::BTreeSet<_> = gold.spans.iter().map(key).collect();
        let pred_keys: std::collections::BTreeSet<_> = pred.spans.iter().map(key).collect();
        for k in &pred_keys {
            let c = counts.entry(k.2).or_default();
            if gold_keys.contains(k) {
                c.tp += 1;
            } else {
                c.fp += 1;
            }
        }
        for k in gold_keys.difference(&pred_keys) {
            counts.entry(k.2).or_default().fn_ += 1;
        }
    }
    let total = counts.values().fold(LabelCounts::default(), |acc, c| LabelCounts {
        tp: acc.tp + c.tp,
        fp: acc.fp + c.fp,
        fn_: acc.fn_ + c.fn_,
    });
    let all = LabelScore::new(EntityLabel::Outside, total);
    Ok(SpanReport {
        rows: EntityLabel::REPORT_ORDER
            .into_iter()
            .filter_map(|l| counts.get(&l).map(|c| LabelScore::new(l, *c)))
            .collect(),
        micro: Averages {
            precision: all.precision,
            recall: all.recall,
            f1: all.f1,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle, then `floor(f·n)` items each for validation and test and
/// the remainder for training.
pub fn split_corpus<T>(
    corpus: Vec<T>,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit<T>, BadFractions> {
    let (train_f, val_f, test_f) = fractions;
    let ok = [train_f, val_f, test_f].iter().all(|f| f.is_finite() && *f >= 0.0)
        && (train_f + val_f + test_f - 1.0).abs() <= 1e-9;
    if !ok {
        return Err(BadFractions(train_f, val_f, test_f));
    }
    let n = corpus.len();
    // the epsilon keeps 0.1·3710 from flooring to 370
    let size = |f: f64| ((f * n as f64 + 1e-9).floor() as usize).min(n);
    let n_val = size(val_f);
    let n_test = size(test_f).min(n - n_val);

    let mut items: Vec<T> = corpus;
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = items.split_off(n - n_test);
    let validation = items.split_off(n - n_test - n_val);
    Ok(CorpusSplit {
        train: items,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_model::{Document, Source};
    use EntityLabel::*;

    fn loc(start: usize, end: usize) -> Span {
        Span::new(start, end, Location, Source::Gazetteer)
    }

    #[test]
    fn coverage_rule() {
        let text = "in United States today";
        let gold = AnnotatedDocument::new(Document::new("a", text), vec![loc(3, 16)]);
        let pred = AnnotatedDocument::new(Document::new("a", text), vec![loc(3, 9)]);
        assert_eq!(
            align_tokens(&gold, &pred).unwrap(),
            vec![(Outside, Outside), (Location, Location), (Location, Outside), (Outside, Outside)]
        );
        let other = AnnotatedDocument::unannotated(Document::new("a", "different"));
        assert_eq!(align_tokens(&gold, &other), Err(TextMismatch("a".into())));
    }

    #[test]
    fn perfect_prediction() {
        let pairs = [(Location, Location), (Date, Date), (Outside, Outside), (Outside, Outside)];
        let r = score(&pairs).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for row in &r.rows {
            assert_eq!((row.precision, row.recall, row.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.macro_avg.f1, 1.0);
        assert_eq!(r.weighted_avg.f1, 1.0);
        assert_eq!(score(&[]), Err(EmptyInput));
    }

    #[test]
    fn constructed_occupation_counts() {
        let mut pairs = vec![(Occupation, Occupation); 43];
        pairs.extend(vec![(Outside, Occupation); 57]);
        pairs.extend(vec![(Occupation, Outside); 23]);
        let r = score(&pairs).unwrap();
        let occ = r.row(Occupation).unwrap();
        assert_eq!(occ.precision, 43.0 / 100.0);
        assert_eq!(occ.recall, 43.0 / 66.0);
        assert_eq!(occ.support, 66);
        let none = r.row(Outside).unwrap();
        assert_eq!((none.tp, none.fp, none.fn_), (0, 23, 57));
        assert_eq!(none.f1, 0.0);
        assert_eq!(r.rows.iter().map(|r| r.support).sum::<u64>(), r.total);
    }

    #[test]
    fn rows_follow_report_order() {
        let pairs = [(Outside, Outside), (Time, Time), (Address, Address), (Numeric, Numeric)];
        let r = score(&pairs).unwrap();
        let order: Vec<_> = r.rows.iter().map(|r| r.label).collect();
        assert_eq!(order, vec![Address, Time, Numeric, Outside]);
        let table = r.render_table();
        assert!(table.starts_with("Entity tag"));
        assert!(table.contains("macro avg"));
        assert!(r.to_csv().starts_with("label,precision,recall,f1,support\nADDRESS,1,1,1,1\n"));
    }

    #[test]
    fn split_sizes() {
        let s = split_corpus((0..10).collect(), (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (8, 1, 1));
        let s = split_corpus((0..3717).collect(), (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (2975, 371, 371));
        let mut all: Vec<i32> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..3717).collect::<Vec<_>>());
        let again = split_corpus((0..3717).collect(), (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!(s, again);
        assert!(split_corpus(vec![1], (0.8, 0.1, 0.2), 1).is_err());
    }

    #[test]
    fn span_level_is_strict() {
        let text = "in United States today";
        let gold = AnnotatedDocument::new(Document::new("a", text), vec![loc(3, 16)]);
        let pred = AnnotatedDocument::new(Document::new("a", text), vec![loc(3, 9)]);
        let r = span_report(&[(&gold, &pred)]).unwrap();
        assert_eq!((r.micro.precision, r.micro.recall), (0.0, 0.0));
        let r = span_report(&[(&gold, &gold)]).unwrap();
        assert_eq!(r.micro.f1, 1.0);
    }
}
