//! Information-loss measurements: utility loss, construct loss via default
//! Bayes-factor t-tests, proportion of removed tokens, mean frequency rank
//! and perplexity from an external scorer.

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use super::quadrature::integrate;
use crate::placeholder::strip_placeholders;
use crate::sidecar::{LineClient, ScorerResponse, SidecarError, TextRequest};
use crate::text_model::Document;
use crate::tokenizer::{count_word_tokens, tokenize};

/// Medium Cauchy prior scale, √2/2.
pub const DEFAULT_PRIOR_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Accuracy drop in percentage points, rounded to 1e-9 to remove binary
/// representation noise (so 92.82 − 91.98 is 0.84).
pub fn utility_loss(acc_original: f64, acc_anonymised: f64) -> f64 {
    ((acc_original - acc_anonymised) * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("original text has no word tokens")]
pub struct EmptyOriginal;

/// `1 − words(anonymised without placeholders) / words(original)`.
pub fn proportion_removed(original: &str, anonymised: &str) -> Result<f64, EmptyOriginal> {
    let before = count_word_tokens(original);
    if before == 0 {
        return Err(EmptyOriginal);
    }
    let after = count_word_tokens(&strip_placeholders(anonymised));
    Ok(1.0 - after as f64 / before as f64)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("need at least 2 observations per sample, got {0}")]
    TooFew(usize),
    #[error("sample has zero variance")]
    DegenerateSample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("prior scale must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("feature `{feature}`: {source}")]
    Feature {
        feature: String,
        #[source]
        source: Box<BayesError>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesFactorResult {
    pub feature: String,
    pub t: f64,
    pub df: f64,
    /// Effective sample size: n for paired data, n1·n2/(n1+n2) for two samples.
    pub n_eff: f64,
    pub bf10: f64,
    pub bf01: f64,
    pub log_bf10: f64,
    pub prior_scale: f64,
}

impl BayesFactorResult {
    fn new(feature: &str, t: f64, n_eff: f64, df: f64, r: f64) -> Self {
        let log_bf10 = jzs_log_bf10(t, n_eff, df, r);
        Self {
            feature: feature.to_string(),
            t,
            df,
            n_eff,
            bf10: log_bf10.exp(),
            bf01: (-log_bf10).exp(),
            log_bf10,
            prior_scale: r,
        }
    }
}

/// Natural log of the JZS Bayes factor BF10 for a t statistic with `df`
/// degrees of freedom, effective sample size `n_eff` and Cauchy prior scale
/// `r` on the standardised effect size.
///
/// The marginal likelihood under H1 mixes normal priors over `g` with an
/// inverse-gamma(1/2, r²/2) density; the integral over `g` is taken in
/// `u = ln g` around its mode with adaptive Gauss–Kronrod quadrature.
pub fn jzs_log_bf10(t: f64, n_eff: f64, df: f64, r: f64) -> f64 {
    let half_power = (df + 1.0) / 2.0;
    let t2 = t * t;
    let log_null = -half_power * (t2 / df).ln_1p();
    let log_norm = r.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let h = |u: f64| {
        let g = u.exp();
        let a = (n_eff * g).ln_1p();
        -0.5 * a - half_power * (t2 / ((1.0 + n_eff * g) * df)).ln_1p() + log_norm
            - 0.5 * u
            - r * r / (2.0 * g)
    };

    // coarse scan then golden-section refinement of the mode
    let mut best = (-40.0f64, f64::NEG_INFINITY);
    let mut u = -40.0;
    while u <= 40.0 {
        let v = h(u);
        if v > best.1 {
            best = (u, v);
        }
        u += 0.25;
    }
    let (mut lo, mut hi) = (best.0 - 0.25, best.0 + 0.25);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = hi - ratio * (hi - lo);
        let x2 = lo + ratio * (hi - lo);
        if h(x1) < h(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let mode = 0.5 * (lo + hi);
    let peak = h(mode).max(best.1);

    // integrate where the integrand is within e^-60 of the peak
    let reach = |step: f64| {
        let mut x = mode;
        for _ in 0..10_000 {
            x += step;
            if h(x) - peak < -60.0 {
                break;
            }
        }
        x
    };
    let (a, b) = (reach(-0.5), reach(0.5));
    let integral = integrate(|u| (h(u) - peak).exp(), a, b, 1e-12, 0.0, 2000);
    peak + integral.value.ln() - log_null
}

fn check_sample(x: &[f64]) -> Result<(f64, f64), BayesError> {
    if x.len() < 2 {
        return Err(BayesError::TooFew(x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(BayesError::NonFinite);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(BayesError::DegenerateSample);
    }
    Ok((mean, var))
}

fn check_scale(r: f64) -> Result<(), BayesError> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(BayesError::BadScale(r))
    }
}

/// One-sample (paired-difference) JZS Bayes factor test.
pub fn bayes_factor_paired(
    feature: &str,
    differences: &[f64],
    r: f64,
) -> Result<BayesFactorResult, BayesError> {
    check_scale(r)?;
    let (mean, var) = check_sample(differences)?;
    let n = differences.len() as f64;
    let t = mean / (var / n).sqrt();
    Ok(BayesFactorResult::new(feature, t, n, n - 1.0, r))
}

/// Independent two-sample JZS Bayes factor test with pooled variance.
pub fn bayes_factor_two_sample(
    feature: &str,
    x: &[f64],
    y: &[f64],
    r: f64,
) -> Result<BayesFactorResult, BayesError> {
    check_scale(r)?;
    let too_few = x.len().min(y.len());
    if too_few < 2 {
        return Err(BayesError::TooFew(too_few));
    }
    let (mx, vx) = check_sample(x).or_else(|e| match e {
        BayesError::DegenerateSample => Ok((x[0], 0.0)),
        e => Err(e),
    })?;
    let (my, vy) = check_sample(y).or_else(|e| match e {
        BayesError::DegenerateSample => Ok((y[0], 0.0)),
        e => Err(e),
    })?;
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let df = n1 + n2 - 2.0;
    let pooled = ((n1 - 1.0) * vx + (n2 - 1.0) * vy) / df;
    if pooled <= 0.0 {
        return Err(BayesError::DegenerateSample);
    }
    let t = (mx - my) / (pooled * (1.0 / n1 + 1.0 / n2)).sqrt();
    Ok(BayesFactorResult::new(feature, t, n1 * n2 / (n1 + n2), df, r))
}

/// Per-document feature values under the original and anonymised
/// conditions. Rows are keyed by document id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub features: Vec<String>,
    pub original: BTreeMap<String, Vec<f64>>,
    pub anonymised: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum FeatureTableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header must start with `id,condition` and name at least one feature")]
    BadHeader,
    #[error("line {line}: condition must be `original` or `anonymised`, got {got:?}")]
    BadCondition { line: u64, got: String },
    #[error("line {line}: expected {expected} values, got {got}")]
    RowLength { line: u64, expected: usize, got: usize },
    #[error("line {line}: `{value}` is not a non-negative number")]
    BadValue { line: u64, value: String },
    #[error("document `{0}` appears twice under one condition")]
    Duplicate(String),
    #[error("document `{0}` is missing one of the two conditions")]
    Unpaired(String),
}

impl FeatureTable {
    /// Parses CSV with header `id,condition,feature1,...`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, FeatureTableError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = csv.headers()?.clone();
        if header.len() < 3 || &header[0] != "id" || &header[1] != "condition" {
            return Err(FeatureTableError::BadHeader);
        }
        let mut table = FeatureTable {
            features: header.iter().skip(2).map(str::to_string).collect(),
            ..Self::default()
        };
        for record in csv.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let expected = table.features.len() + 2;
            if record.len() != expected {
                return Err(FeatureTableError::RowLength {
                    line,
                    expected,
                    got: record.len(),
                });
            }
            let values = record
                .iter()
                .skip(2)
                .map(|v| match v.parse::<f64>() {
                    Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
                    _ => Err(FeatureTableError::BadValue {
                        line,
                        value: v.to_string(),
                    }),
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let side = match &record[1] {
                "original" => &mut table.original,
                "anonymised" | "anonymized" => &mut table.anonymised,
                other => {
                    return Err(FeatureTableError::BadCondition {
                        line,
                        got: other.to_string(),
                    })
                }
            };
            if side.insert(record[0].to_string(), values).is_some() {
                return Err(FeatureTableError::Duplicate(record[0].to_string()));
            }
        }
        table.check_paired()?;
        Ok(table)
    }

    fn check_paired(&self) -> Result<(), FeatureTableError> {
        let unpaired = self
            .original
            .keys()
            .find(|k| !self.anonymised.contains_key(*k))
            .or_else(|| self.anonymised.keys().find(|k| !self.original.contains_key(*k)));
        match unpaired {
            Some(id) => Err(FeatureTableError::Unpaired(id.clone())),
            None => Ok(()),
        }
    }

    /// Original minus anonymised value of feature `index`, in id order.
    pub fn differences(&self, index: usize) -> Vec<f64> {
        self.original
            .iter()
            .map(|(id, o)| o[index] - self.anonymised[id][index])
            .collect()
    }
}

/// Paired test on every feature, sorted by BF01 from most to least
/// null-favouring.
pub fn construct_loss_report(table: &FeatureTable, r: f64) -> Result<Vec<BayesFactorResult>, BayesError> {
    let mut results = table
        .features
        .iter()
        .enumerate()
        .map(|(i, name)| {
            bayes_factor_paired(name, &table.differences(i), r).map_err(|e| BayesError::Feature {
                feature: name.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    results.sort_by(|a, b| {
        a.log_bf10
            .total_cmp(&b.log_bf10)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(results)
}

/// `feature,t,df,BF10,BF01,r` CSV in report order.
pub fn bayes_csv(results: &[BayesFactorResult]) -> String {
    let mut out = String::from("feature,t,df,BF10,BF01,r\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.feature, r.t, r.df, r.bf10, r.bf01, r.prior_scale
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankedListError {
    #[error("ranked word list is empty")]
    Empty,
    #[error("line {0} of the ranked word list is blank")]
    Blank(usize),
    #[error("word `{word}` appears again on line {line}")]
    Duplicate { word: String, line: usize },
}

/// Word list where the word on line k has rank k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    ranks: HashMap<String, u64>,
}

impl RankedList {
    pub fn parse(contents: &str) -> Result<Self, RankedListError> {
        Self::from_words(contents.lines())
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Result<Self, RankedListError> {
        let mut ranks = HashMap::new();
        for (i, raw) in words.into_iter().enumerate() {
            let word = raw.trim().to_lowercase();
            if word.is_empty() {
                return Err(RankedListError::Blank(i + 1));
            }
            if ranks.insert(word.clone(), i as u64 + 1).is_some() {
                return Err(RankedListError::Duplicate { word, line: i + 1 });
            }
        }
        if ranks.is_empty() {
            return Err(RankedListError::Empty);
        }
        Ok(Self { ranks })
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Rank of a lowercase word; words not in the list get `len + 1`.
    pub fn rank(&self, word: &str) -> u64 {
        self.ranks.get(word).copied().unwrap_or(self.ranks.len() as u64 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("text has no word tokens")]
pub struct EmptyText;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRankScore {
    pub id: String,
    pub mean_rank: f64,
    pub words: usize,
    pub oov: usize,
}

/// Mean list rank over the lowercase word and number tokens of `text`.
pub fn frequency_rank(id: &str, text: &str, list: &RankedList) -> Result<FrequencyRankScore, EmptyText> {
    let lowered = text.to_lowercase();
    let ranks: Vec<u64> = tokenize(&lowered)
        .iter()
        .filter(|t| t.is_countable())
        .map(|t| list.rank(t.text(&lowered)))
        .collect();
    if ranks.is_empty() {
        return Err(EmptyText);
    }
    let oov_rank = list.len() as u64 + 1;
    Ok(FrequencyRankScore {
        id: id.to_string(),
        mean_rank: ranks.iter().sum::<u64>() as f64 / ranks.len() as f64,
        words: ranks.len(),
        oov: ranks.iter().filter(|&&r| r == oov_rank).count(),
    })
}

#[derive(Debug, Error)]
pub enum PerplexityError {
    #[error("perplexity scorer unavailable: {0}")]
    ScorerUnavailable(#[from] SidecarError),
    #[error("scorer returned non-positive perplexity {value} for `{id}`")]
    NonPositivePerplexity { id: String, value: f64 },
}

/// Sends each document to an external scorer speaking the line protocol and
/// returns `(id, perplexity)` in input order.
pub fn perplexity_via_scorer(
    docs: &[Document],
    command: &str,
    timeout: Duration,
    batch_size: usize,
) -> Result<Vec<(String, f64)>, PerplexityError> {
    let mut client = LineClient::spawn(command, timeout)?;
    let mut out = Vec::with_capacity(docs.len());
    for chunk in docs.chunks(batch_size.max(1)) {
        let requests: Vec<TextRequest> = chunk
            .iter()
            .map(|d| TextRequest {
                id: d.id.clone(),
                text: d.text.clone(),
            })
            .collect();
        let responses: Vec<ScorerResponse> = client.exchange(&requests)?;
        for resp in responses {
            if resp.perplexity.is_nan() || resp.perplexity <= 0.0 {
                return Err(PerplexityError::NonPositivePerplexity {
                    id: resp.id,
                    value: resp.perplexity,
                });
            }
            out.push((resp.id, resp.perplexity));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utility_loss_arithmetic() {
        assert_eq!(utility_loss(92.82, 91.98), 0.84);
        assert_eq!(utility_loss(91.98, 92.82), -0.84);
        assert_eq!(utility_loss(77.5, 77.5), 0.0);
    }

    #[test]
    fn removed_fraction() {
        assert_eq!(proportion_removed("a b c", "a b c").unwrap(), 0.0);
        let orig = "one two three four five six seven eight nine ten";
        let anon = "[firstname1] two three four five six seven eight nine [location1]";
        assert!((proportion_removed(orig, anon).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(proportion_removed(" . ", "x"), Err(EmptyOriginal));
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn reference_bayes_factors() {
        // values from high-precision numerical integration of the JZS integral
        let cases = [
            (3.5, 100.0, 99.0, DEFAULT_PRIOR_SCALE, 30.781613342456512671),
            (0.0, 100.0, 99.0, DEFAULT_PRIOR_SCALE, 0.11070463773306862637),
            (0.0, 10.0, 9.0, DEFAULT_PRIOR_SCALE, 0.30879355670828347885),
            (2.0, 20.0, 19.0, DEFAULT_PRIOR_SCALE, 1.205772601585994777),
            (2.5, 25.0, 98.0, DEFAULT_PRIOR_SCALE, 3.2334152099116117103),
            (3.5, 100.0, 99.0, 1.0, 24.123117321359710173),
        ];
        for (t, n, df, r, expected) in cases {
            let got = jzs_log_bf10(t, n, df, r).exp();
            assert!(((got - expected) / expected).abs() < 1e-9, "t={t} n={n}: {got} vs {expected}");
        }
        assert_eq!(jzs_log_bf10(-3.5, 100.0, 99.0, 0.7), jzs_log_bf10(3.5, 100.0, 99.0, 0.7));
    }

    #[test]
    fn sample_checks() {
        assert_eq!(bayes_factor_paired("x", &[1.0], 0.7), Err(BayesError::TooFew(1)));
        assert_eq!(bayes_factor_paired("x", &[2.0, 2.0, 2.0], 0.7), Err(BayesError::DegenerateSample));
        assert_eq!(bayes_factor_paired("x", &[1.0, f64::NAN], 0.7), Err(BayesError::NonFinite));
        assert_eq!(bayes_factor_paired("x", &[1.0, 2.0], 0.0), Err(BayesError::BadScale(0.0)));
        let r = bayes_factor_paired("x", &[1.0, 2.0, 3.0, 4.0], DEFAULT_PRIOR_SCALE).unwrap();
        assert!((r.t - 2.5 / (1.6666666666666667f64 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.df, 3.0);
        let two = bayes_factor_two_sample("x", &[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0, 7.0], 1.0).unwrap();
        assert_eq!(two.df, 5.0);
        assert!((two.n_eff - 12.0 / 7.0).abs() < 1e-15);
        assert!(two.t < 0.0);
    }

    #[test]
    fn feature_table_parsing() {
        let csv = "id,condition,NOUN,ntok\nd1,original,3,10\nd1,anonymised,2,10\nd2,original,5,12\nd2,anonymised,5,11\n";
        let table = FeatureTable::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(table.features, vec!["NOUN", "ntok"]);
        assert_eq!(table.differences(0), vec![1.0, 0.0]);
        assert_eq!(table.differences(1), vec![0.0, 1.0]);

        let unpaired = "id,condition,NOUN\nd1,original,3\n";
        assert!(matches!(
            FeatureTable::from_csv(unpaired.as_bytes()),
            Err(FeatureTableError::Unpaired(_))
        ));
        let negative = "id,condition,NOUN\nd1,original,-3\nd1,anonymised,2\n";
        assert!(matches!(
            FeatureTable::from_csv(negative.as_bytes()),
            Err(FeatureTableError::BadValue { .. })
        ));
        let bad = "id,condition,NOUN\nd1,raw,3\n";
        assert!(matches!(
            FeatureTable::from_csv(bad.as_bytes()),
            Err(FeatureTableError::BadCondition { .. })
        ));
    }

    #[test]
    fn ranks() {
        let list = RankedList::parse("the\nof\nand\n").unwrap();
        assert_eq!(frequency_rank("d", "The", &list).unwrap().mean_rank, 1.0);
        let s = frequency_rank("d", "the of zebra", &list).unwrap();
        assert_eq!(s.mean_rank, (1.0 + 2.0 + 4.0) / 3.0);
        assert_eq!(s.oov, 1);
        assert_eq!(frequency_rank("d", "!!", &list), Err(EmptyText));
        assert_eq!(RankedList::parse(""), Err(RankedListError::Empty));
        assert!(matches!(RankedList::parse("a\nA\n"), Err(RankedListError::Duplicate { .. })));
    }
}
