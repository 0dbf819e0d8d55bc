//! Independent reference implementations and generators shared by the
//! integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use veil_core::eval::deanon::Judgment;
use veil_core::eval::infoloss::FeatureTable;
use veil_core::text_model::{AnnotatedDocument, Document, EntityLabel, Source, Span};
use veil_core::tokenizer::tokenize;

/// JZS BF10 by composite Simpson's rule with `panels` (even) panels on
/// x in [0, 1], where g = x / (1 − x). The integrand tends to the constant
/// r / sqrt(2πN) at x = 1 and to 0 at x = 0.
pub fn simpson_bf10(t: f64, n: f64, df: f64, r: f64, panels: usize) -> f64 {
    assert!(panels.is_multiple_of(2));
    let p = (df + 1.0) / 2.0;
    let log_null = -p * (1.0 + t * t / df).ln();
    let c = r / (2.0 * std::f64::consts::PI).sqrt();
    let f = |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return c / n.sqrt() * (-log_null).exp();
        }
        let g = x / (1.0 - x);
        let log = -0.5 * (1.0 + n * g).ln() - p * (1.0 + t * t / ((1.0 + n * g) * df)).ln()
            + c.ln()
            - 1.5 * g.ln()
            - r * r / (2.0 * g)
            - 2.0 * (1.0 - x).ln();
        (log - log_null).exp()
    };
    let h = 1.0 / panels as f64;
    let mut sum = f(0.0) + f(1.0);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0
}

/// Cosine similarity by explicit vectors over the sorted union alphabet.
pub fn cosine_oracle(a: &str, b: &str) -> f64 {
    let norm = |s: &str| -> Vec<char> {
        s.to_lowercase().chars().filter(|c| c.is_alphanumeric()).collect()
    };
    let (a, b) = (norm(a), norm(b));
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut alphabet: Vec<char> = a.iter().chain(b.iter()).copied().collect();
    alphabet.sort();
    alphabet.dedup();
    let va: Vec<f64> = alphabet.iter().map(|c| a.iter().filter(|x| *x == c).count() as f64).collect();
    let vb: Vec<f64> = alphabet.iter().map(|c| b.iter().filter(|x| *x == c).count() as f64).collect();
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub rows: BTreeMap<EntityLabel, OracleRow>,
    pub accuracy: f64,
    pub macro_avg: (f64, f64, f64),
    pub weighted_avg: (f64, f64, f64),
}

/// Per-label scores by scanning all pairs once per label.
pub fn brute_force_scores(pairs: &[(EntityLabel, EntityLabel)]) -> OracleReport {
    let mut labels: Vec<EntityLabel> = pairs.iter().flat_map(|&(g, p)| [g, p]).collect();
    labels.sort();
    labels.dedup();
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut rows = BTreeMap::new();
    for &label in &labels {
        let tp = pairs.iter().filter(|&&(g, p)| g == label && p == label).count() as f64;
        let predicted = pairs.iter().filter(|&&(_, p)| p == label).count() as f64;
        let actual = pairs.iter().filter(|&&(g, _)| g == label).count() as f64;
        let precision = div(tp, predicted);
        let recall = div(tp, actual);
        let f1 = div(2.0 * precision * recall, precision + recall);
        rows.insert(label, OracleRow { precision, recall, f1, support: actual as u64 });
    }
    let k = rows.len() as f64;
    let total = pairs.len() as f64;
    let avg = |f: fn(&OracleRow) -> f64| rows.values().map(f).sum::<f64>() / k;
    let wavg = |f: fn(&OracleRow) -> f64| {
        rows.values().map(|r| f(r) * r.support as f64).sum::<f64>() / total
    };
    OracleReport {
        accuracy: pairs.iter().filter(|(g, p)| g == p).count() as f64 / total,
        macro_avg: (avg(|r| r.precision), avg(|r| r.recall), avg(|r| r.f1)),
        weighted_avg: (wavg(|r| r.precision), wavg(|r| r.recall), wavg(|r| r.f1)),
        rows,
    }
}

/// Label of the first span covering each countable token's start, by linear
/// scan.
pub fn brute_align(gold: &AnnotatedDocument, pred: &AnnotatedDocument) -> Vec<(EntityLabel, EntityLabel)> {
    let label = |spans: &[Span], at: usize| {
        spans
            .iter()
            .find(|s| s.start <= at && at < s.end)
            .map_or(EntityLabel::Outside, |s| s.label)
    };
    tokenize(gold.text())
        .iter()
        .filter(|t| t.is_countable())
        .map(|t| (label(&gold.spans, t.start), label(&pred.spans, t.start)))
        .collect()
}

pub const SCHEME: [EntityLabel; 11] = [
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
];

fn pool(label: EntityLabel) -> &'static [&'static str] {
    use EntityLabel::*;
    match label {
        PersonFirstname => &["Anna", "anna", "ANNA", "Zoë", "Jean-Luc", "Siobhán", "Olu"],
        PersonLastname => &["Beckham", "beckham", "O'Neil", "Nguyễn", "Smith"],
        Occupation => &["nurse", "Nurse", "train driver", "president"],
        Location => &["London", "london", "New York", "New  York", "São Paulo", "東京"],
        Time => &["12 pm", "10:45am", "noon"],
        Organization => &["Acme Ltd", "ACME LTD", "Red Cross"],
        Date => &["12/10/2021", "March 3rd", "yesterday"],
        Address => &["42 London Road", "7 Rue de Rivoli"],
        PhoneNumber => &["+44 20 7946 0958", "020-7946-0958"],
        EmailAddress => &["jane@doe.org", "Jane@Doe.org", "x.y@z.co.uk"],
        OtherIdentifyingAttribute => &["Nobel laureate", "twin brother"],
        Pronoun => &["he", "She", "him", "her"],
        Numeric => &["3", "seventeen", "2.5"],
        Outside => &[],
    }
}

const FILLER: &[&str] = &[
    "the", "a", "went", "to", "and", "with", "café", "naïve", "über", "straße", "😀", "—",
    "...", ",", ".", "!", "(", ")", "'s", "don't", "42", "3.5", "x", "[", "]", "_", "#",
];

const SEPARATORS: &[&str] = &[" ", " ", " ", "  ", "\n", "", "\t", " — "];

/// Random text mixing filler and entity mentions, with one span per
/// mention. Mentions may be glued to their neighbours.
pub fn random_document<R: Rng>(rng: &mut R, id: String) -> AnnotatedDocument {
    let mut labels: Vec<EntityLabel> = SCHEME.to_vec();
    labels.extend([EntityLabel::Pronoun, EntityLabel::Numeric]);
    let segments = rng.random_range(0..40);
    let mut text = String::new();
    let mut chars = 0;
    let mut spans = Vec::new();
    for i in 0..segments {
        if i > 0 {
            let sep = *SEPARATORS.choose(rng).unwrap();
            text.push_str(sep);
            chars += sep.chars().count();
        }
        if rng.random_bool(0.35) {
            let label = *labels.choose(rng).unwrap();
            let surface = *pool(label).choose(rng).unwrap();
            let len = surface.chars().count();
            spans.push(Span::new(chars, chars + len, label, Source::Gazetteer));
            text.push_str(surface);
            chars += len;
        } else {
            let word = *FILLER.choose(rng).unwrap();
            text.push_str(word);
            chars += word.chars().count();
        }
    }
    AnnotatedDocument::new(Document::new(id, text), spans)
}

fn oracle_slug(label: EntityLabel) -> &'static str {
    use EntityLabel::*;
    match label {
        PersonFirstname => "firstname",
        PersonLastname => "lastname",
        Occupation => "occupation",
        Location => "location",
        Time => "time",
        Organization => "organization",
        Date => "date",
        Address => "address",
        PhoneNumber => "phonenumber",
        EmailAddress => "emailaddress",
        OtherIdentifyingAttribute => "otheridentifyingattribute",
        Pronoun => "pronoun",
        Numeric => "numeric",
        Outside => unreachable!(),
    }
}

/// Expected bracketed tagging output: per label, surfaces are numbered by
/// first appearance after case folding and whitespace collapsing; pronouns
/// are never numbered.
pub fn expected_tagging(doc: &AnnotatedDocument) -> String {
    let chars: Vec<char> = doc.text().chars().collect();
    let mut numbering: HashMap<(EntityLabel, String), usize> = HashMap::new();
    let mut next: HashMap<EntityLabel, usize> = HashMap::new();
    let mut out = String::new();
    let mut cursor = 0;
    for s in &doc.spans {
        out.extend(&chars[cursor..s.start]);
        let surface: String = chars[s.start..s.end].iter().collect();
        let key = surface.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let n = *numbering.entry((s.label, key)).or_insert_with(|| {
            let c = next.entry(s.label).or_insert(0);
            *c += 1;
            *c
        });
        if s.label == EntityLabel::Pronoun {
            out.push_str("[pronoun]");
        } else {
            out.push_str(&format!("[{}{}]", oracle_slug(s.label), n));
        }
        cursor = s.end;
    }
    out.extend(&chars[cursor..]);
    out
}

/// `n` documents whose anonymised values differ from the original by
/// antisymmetric jitter pairs plus `shift`.
#[allow(clippy::needless_range_loop)]
pub fn fixture_table(n: usize, shift: f64, seed: u64, features: &[&str]) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = FeatureTable {
        features: features.iter().map(|f| f.to_string()).collect(),
        ..FeatureTable::default()
    };
    let jitters: Vec<Vec<f64>> = features
        .iter()
        .map(|_| {
            let mut j: Vec<f64> = (0..n / 2)
                .flat_map(|_| {
                    let e = rng.random_range(0.01..0.5);
                    [e, -e]
                })
                .collect();
            j.shuffle(&mut rng);
            j
        })
        .collect();
    for i in 0..n {
        let id = format!("d{i:04}");
        let orig: Vec<f64> = features.iter().map(|_| rng.random_range(50.0..100.0)).collect();
        let anon: Vec<f64> = orig
            .iter()
            .enumerate()
            .map(|(f, v)| v - shift + jitters[f][i])
            .collect();
        table.original.insert(id.clone(), orig);
        table.anonymised.insert(id, anon);
    }
    table
}

/// Non-overlapping random spans over the document's character range.
pub fn random_spans<R: Rng>(rng: &mut R, len: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut at = 0;
    while at < len {
        at += rng.random_range(0..6);
        let end = (at + rng.random_range(1..12)).min(len);
        if at < end {
            let label = *EntityLabel::REPORT_ORDER[..13].choose(rng).unwrap();
            spans.push(Span::new(at, end, label, Source::Tagger));
        }
        at = end;
    }
    spans
}

pub fn random_name<R: Rng>(rng: &mut R) -> String {
    const ALPHABET: &[char] = &['a', 'b', 'e', 'é', 'L', 'o', 'Ö', 'n', ' ', '-', '.', '7', 'ß', 'j', 'J'];
    (0..rng.random_range(0..14)).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

pub fn judgment(item: &str, guess: &str, claimed: bool) -> Judgment {
    Judgment {
        item_id: item.to_string(),
        guess: guess.to_string(),
        claimed_identified: claimed,
        leakage_note: String::new(),
    }
}

/// `items` items of which the first `hits` receive exact guesses and the
/// rest receive unrelated guesses, three judgments each.
pub fn synthetic_set(items: usize, hits: usize) -> (Vec<Judgment>, BTreeMap<String, String>) {
    let mut judgments = Vec::new();
    let mut truths = BTreeMap::new();
    for i in 0..items {
        let id = format!("item{i:04}");
        truths.insert(id.clone(), "Victoria Beckham".to_string());
        let guess = if i < hits { "victoria beckham" } else { "xyz" };
        for _ in 0..3 {
            judgments.push(judgment(&id, guess, i < hits));
        }
    }
    (judgments, truths)
}
