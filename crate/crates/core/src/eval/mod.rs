//! Evaluation of anonymised corpora: token-level recognition accuracy,
//! information loss and de-anonymisation scoring.

pub mod deanon;
pub mod infoloss;
pub mod quadrature;
pub mod technical;

pub use deanon::{
    agreement_rate, char_cosine, leakage_ngrams, score_items, DeanonError, DeanonSummary,
    ItemDeanonResult, Judgment,
};
pub use infoloss::{
    bayes_factor_paired, bayes_factor_two_sample, construct_loss_report, frequency_rank,
    jzs_log_bf10, perplexity_via_scorer, proportion_removed, utility_loss, BayesError,
    BayesFactorResult, FeatureTable, FrequencyRankScore, PerplexityError, RankedList,
};
pub use technical::{
    align_tokens, score, split_corpus, ConfusionCounts, ConfusionReport, CorpusSplit, LabelScore,
};
