//! Scoring of intruder guesses against true names: bag-of-characters cosine
//! similarity, per-item identification, group rates and leakage n-grams.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::sync::LazyLock;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::tokenizer::tokenize;

pub const DEFAULT_THRESHOLD: f64 = 0.75;

/// Version tag of the bundled English stopword list.
pub const STOPWORDS_VERSION: &str = "en-1";

static STOPWORDS: LazyLock<HashSet<String>> = LazyLock::new(|| {
    include_str!("../../data/stopwords.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
});

pub fn bundled_stopwords() -> &'static HashSet<String> {
    &STOPWORDS
}

fn char_counts(s: &str) -> BTreeMap<char, u64> {
    let mut counts = BTreeMap::new();
    for c in s.chars().flat_map(char::to_lowercase).filter(|c| c.is_alphanumeric()) {
        *counts.entry(c).or_insert(0) += 1;
    }
    counts
}

/// Cosine similarity of lowercase alphanumeric character-count vectors.
/// Returns 0 when either side has no alphanumeric character.
pub fn char_cosine(a: &str, b: &str) -> f64 {
    let (ca, cb) = (char_counts(a), char_counts(b));
    if ca.is_empty() || cb.is_empty() {
        return 0.0;
    }
    let dot: u64 = ca.iter().map(|(c, n)| n * cb.get(c).copied().unwrap_or(0)).sum();
    let na: u64 = ca.values().map(|n| n * n).sum();
    let nb: u64 = cb.values().map(|n| n * n).sum();
    (dot as f64 / (na as f64 * nb as f64).sqrt()).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub item_id: String,
    #[serde(default)]
    pub guess: String,
    #[serde(deserialize_with = "yes_no")]
    pub claimed_identified: bool,
    #[serde(default)]
    pub leakage_note: String,
}

fn yes_no<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    let raw = String::deserialize(d)?;
    match raw.trim().to_ascii_lowercase().as_str() {
        "yes" | "y" | "true" | "1" => Ok(true),
        "no" | "n" | "false" | "0" | "" => Ok(false),
        other => Err(serde::de::Error::custom(format!("expected yes/no, got {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemDeanonResult {
    pub item_id: String,
    pub true_name: String,
    pub mean_similarity: f64,
    /// Similarities of the item's judgments, in input order.
    pub similarities: Vec<f64>,
    pub identified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeanonSummary {
    pub items: usize,
    /// Mean and sample SD of the per-item mean similarities.
    pub mean: f64,
    pub sd: f64,
    pub percent_identified: f64,
    /// Binomial standard error of `percent_identified`, in percent.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeanonError {
    #[error("no true name for item `{0}`")]
    MissingTruth(String),
    #[error("no judgments to score")]
    NoJudgments,
}

/// Percentage and binomial SE of `hits` out of `n`.
pub fn proportion_with_se(hits: usize, n: usize) -> (f64, f64) {
    let p = hits as f64 / n as f64;
    (p * 100.0, (p * (1.0 - p) / n as f64).sqrt() * 100.0)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn sorted_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Averages each item's similarities, marks the item identified when the
/// mean reaches `threshold`, and summarises over items. Items come back
/// sorted by id, so the result does not depend on judgment order.
pub fn score_items(
    judgments: &[Judgment],
    truths: &BTreeMap<String, String>,
    threshold: f64,
) -> Result<(Vec<ItemDeanonResult>, DeanonSummary), DeanonError> {
    if judgments.is_empty() {
        return Err(DeanonError::NoJudgments);
    }
    let mut by_item: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for j in judgments {
        let truth = truths
            .get(&j.item_id)
            .ok_or_else(|| DeanonError::MissingTruth(j.item_id.clone()))?;
        by_item.entry(&j.item_id).or_default().push(char_cosine(&j.guess, truth));
    }
    let results: Vec<ItemDeanonResult> = by_item
        .into_iter()
        .map(|(id, similarities)| {
            let mean = sorted_sum(&similarities) / similarities.len() as f64;
            ItemDeanonResult {
                item_id: id.to_string(),
                true_name: truths[id].clone(),
                mean_similarity: mean,
                similarities,
                identified: mean >= threshold,
            }
        })
        .collect();
    let means: Vec<f64> = results.iter().map(|r| r.mean_similarity).collect();
    let (mean, sd) = mean_sd(&means);
    let hits = results.iter().filter(|r| r.identified).count();
    let (percent_identified, se) = proportion_with_se(hits, results.len());
    Ok((
        results,
        DeanonSummary {
            items: means.len(),
            mean,
            sd,
            percent_identified,
            se,
        },
    ))
}

/// Percentage of judgments whose yes/no claim agrees with whether that
/// judgment's own similarity reaches `threshold`.
pub fn agreement_rate(
    judgments: &[Judgment],
    truths: &BTreeMap<String, String>,
    threshold: f64,
) -> Result<f64, DeanonError> {
    if judgments.is_empty() {
        return Err(DeanonError::NoJudgments);
    }
    let mut agree = 0usize;
    for j in judgments {
        let truth = truths
            .get(&j.item_id)
            .ok_or_else(|| DeanonError::MissingTruth(j.item_id.clone()))?;
        if j.claimed_identified == (char_cosine(&j.guess, truth) >= threshold) {
            agree += 1;
        }
    }
    Ok(agree as f64 / judgments.len() as f64 * 100.0)
}

/// Most frequent contiguous 1..=`n_max`-grams across `notes`, after
/// lowercasing and dropping punctuation and stopwords. N-grams never cross
/// note boundaries and are joined with `_`. Ties sort lexicographically.
pub fn leakage_ngrams(
    notes: &[String],
    n_max: usize,
    k: usize,
    stopwords: &HashSet<String>,
) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for note in notes {
        let lowered = note.to_lowercase();
        let words: Vec<&str> = tokenize(&lowered)
            .iter()
            .filter(|t| t.is_countable())
            .map(|t| t.text(&lowered))
            .filter(|w| !stopwords.contains(*w))
            .collect();
        for n in 1..=n_max {
            for gram in words.windows(n) {
                *counts.entry(gram.join("_")).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("item `{0}` has more than one true name")]
    DuplicateTruth(String),
}

/// Reads `item_id,guess,claimed_identified,leakage_note` rows.
pub fn read_judgments<R: Read>(reader: R) -> Result<Vec<Judgment>, IngestError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    Ok(csv.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Deserialize)]
struct TruthRow {
    item_id: String,
    true_name: String,
}

/// Reads `item_id,true_name` rows.
pub fn read_truths<R: Read>(reader: R) -> Result<BTreeMap<String, String>, IngestError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let mut truths = BTreeMap::new();
    for row in csv.deserialize::<TruthRow>() {
        let row = row?;
        if truths.insert(row.item_id.clone(), row.true_name).is_some() {
            return Err(IngestError::DuplicateTruth(row.item_id));
        }
    }
    Ok(truths)
}

/// Summary as `items,M,SD,identified_pct,SE` CSV.
pub fn summary_csv(summary: &DeanonSummary) -> String {
    format!(
        "items,M,SD,identified_pct,SE\n{},{},{},{},{}\n",
        summary.items, summary.mean, summary.sd, summary.percent_identified, summary.se
    )
}
