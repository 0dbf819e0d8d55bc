use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Subcommand};
use veil_core::eval::deanon::{bundled_stopwords, read_judgments, read_truths, summary_csv, DEFAULT_THRESHOLD};
use veil_core::eval::infoloss::{bayes_csv, DEFAULT_PRIOR_SCALE};
use veil_core::eval::technical::span_report;
use veil_core::eval::{
    agreement_rate, align_tokens, construct_loss_report, frequency_rank, leakage_ngrams,
    perplexity_via_scorer, proportion_removed, score, score_items, utility_loss, FeatureTable,
    PerplexityError, RankedList,
};
use veil_core::recognition::Recognizer;
use veil_core::text_model::{AnnotatedDocument, Document};

use crate::commands::corpus::CorpusPrepArgs;
use crate::config::Settings;
use crate::error::{Classify, CliError, CliResult, Kind};
use crate::io::{read_corpus, read_records, read_text, write_atomic, InputFormat};

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Token-level precision, recall and F1 against gold annotations.
    Ner(NerArgs),
    /// Similarity between re-identification guesses and true names.
    Deanon(DeanonArgs),
    /// Information-loss measures.
    Infoloss(InfolossArgs),
    /// Same as the top-level `corpus-prep` command.
    CorpusPrep(CorpusPrepArgs),
}

#[derive(Debug, Args)]
pub struct NerArgs {
    /// Gold standoff records.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predicted standoff records; when omitted the recogniser runs on the
    /// gold texts.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// CSV report path.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Also print exact-match span scores.
    #[arg(long)]
    pub spans: bool,
}

#[derive(Debug, Args)]
pub struct DeanonArgs {
    /// `item_id,guess,claimed_identified,leakage_note` CSV.
    #[arg(long)]
    pub judgments: PathBuf,
    /// `item_id,true_name` CSV.
    #[arg(long)]
    pub truths: PathBuf,
    /// Summary CSV path.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Per-item CSV path.
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Number of leakage n-grams to list.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Longest leakage n-gram.
    #[arg(long, default_value_t = 2)]
    pub ngram: usize,
}

#[derive(Debug, Args)]
pub struct InfolossArgs {
    /// Per-document feature table (`id,condition,feature...`) for Bayes
    /// factors.
    #[arg(long)]
    pub bf: Option<PathBuf>,
    /// Cauchy prior scale for the Bayes factors.
    #[arg(long, default_value_t = DEFAULT_PRIOR_SCALE)]
    pub prior_scale: f64,
    /// Original and anonymised accuracies in percent.
    #[arg(long, num_args = 2, value_names = ["ORIGINAL", "ANONYMISED"])]
    pub utility: Option<Vec<f64>>,
    /// Original and anonymised corpora for the proportion of removed words.
    #[arg(long, num_args = 2, value_names = ["ORIGINAL", "ANONYMISED"])]
    pub removed: Option<Vec<PathBuf>>,
    /// Ranked word list, one word per line, most frequent first.
    #[arg(long, requires = "texts")]
    pub ranks: Option<PathBuf>,
    /// Perplexity scorer command, run through `sh -c`.
    #[arg(long, requires = "texts")]
    pub scorer_cmd: Option<String>,
    /// Scorer timeout per batch in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub scorer_timeout: f64,
    /// Corpus for frequency ranks and perplexity.
    #[arg(long)]
    pub texts: Option<PathBuf>,
    /// Directory for CSV reports.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn run(cmd: &EvalCommand, settings: &Settings) -> CliResult<()> {
    match cmd {
        EvalCommand::Ner(args) => ner(args, settings),
        EvalCommand::Deanon(args) => deanon(args, settings),
        EvalCommand::Infoloss(args) => infoloss(args),
        EvalCommand::CorpusPrep(args) => crate::commands::corpus::run(args, settings),
    }
}

fn ner(args: &NerArgs, settings: &Settings) -> CliResult<()> {
    let gold: Vec<AnnotatedDocument> = read_records(&args.gold).input()?;
    let pred: Vec<AnnotatedDocument> = match &args.pred {
        Some(path) => {
            let mut by_id: HashMap<String, AnnotatedDocument> = read_records::<AnnotatedDocument>(path)
                .input()?
                .into_iter()
                .map(|d| (d.id().to_string(), d))
                .collect();
            gold.iter()
                .map(|g| by_id.remove(g.id()).ok_or_else(|| anyhow!("no prediction for `{}`", g.id())))
                .collect::<anyhow::Result<_>>()
                .input()?
        }
        None => {
            let recognizer = Recognizer::new(settings.recognizer.clone()).map_err(|e| CliError {
                kind: if e.is_sidecar() { Kind::Sidecar } else { Kind::Config },
                source: e.into(),
            })?;
            let docs: Vec<Document> = gold.iter().map(|g| g.document.clone()).collect();
            recognizer
                .recognize_batch(&docs)
                .map_err(|e| CliError {
                    kind: if e.is_sidecar() { Kind::Sidecar } else { Kind::Config },
                    source: e.into(),
                })?
                .documents
        }
    };
    let mut pairs = Vec::new();
    for (g, p) in gold.iter().zip(&pred) {
        pairs.extend(align_tokens(g, p).input()?);
    }
    let report = score(&pairs).context("no word tokens in the gold corpus").input()?;
    print!("{}", report.render_table());
    if args.spans {
        let docs: Vec<(&AnnotatedDocument, &AnnotatedDocument)> = gold.iter().zip(&pred).collect();
        let spans = span_report(&docs).input()?;
        println!("\nexact span match");
        for row in &spans.rows {
            println!("{:<28} {:.4} {:.4} {:.4}", row.label.as_str(), row.precision, row.recall, row.f1);
        }
        println!("{:<28} {:.4} {:.4} {:.4}", "micro avg", spans.micro.precision, spans.micro.recall, spans.micro.f1);
    }
    if let Some(out) = &args.output {
        write_atomic(out, report.to_csv().as_bytes()).input()?;
    }
    Ok(())
}

fn open(path: &Path) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn deanon(args: &DeanonArgs, settings: &Settings) -> CliResult<()> {
    let threshold = settings.threshold.unwrap_or(DEFAULT_THRESHOLD);
    let judgments = open(&args.judgments)
        .and_then(|f| Ok(read_judgments(f)?))
        .with_context(|| format!("in {}", args.judgments.display()))
        .input()?;
    let truths = open(&args.truths)
        .and_then(|f| Ok(read_truths(f)?))
        .with_context(|| format!("in {}", args.truths.display()))
        .input()?;
    let (items, summary) = score_items(&judgments, &truths, threshold).input()?;
    let agreement = agreement_rate(&judgments, &truths, threshold).input()?;
    let csv = summary_csv(&summary);
    print!("{csv}");
    println!("threshold {threshold}, claim agreement {agreement:.2}%");
    let notes: Vec<String> = judgments.iter().map(|j| j.leakage_note.clone()).collect();
    let ngrams = leakage_ngrams(&notes, args.ngram, args.top, bundled_stopwords());
    if !ngrams.is_empty() {
        let listed: Vec<String> = ngrams.iter().map(|(g, c)| format!("{g} ({c})")).collect();
        println!("leakage: {}", listed.join(", "));
    }
    if let Some(out) = &args.output {
        write_atomic(out, csv.as_bytes()).input()?;
    }
    if let Some(out) = &args.items {
        let mut body = String::from("item_id,true_name,mean_similarity,judgments,identified\n");
        for item in &items {
            let _ = writeln!(
                body,
                "{},{},{},{},{}",
                csv_field(&item.item_id),
                csv_field(&item.true_name),
                item.mean_similarity,
                item.similarities.len(),
                item.identified
            );
        }
        write_atomic(out, body.as_bytes()).input()?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn read_docs(path: &Path) -> anyhow::Result<Vec<Document>> {
    Ok(read_corpus(path, InputFormat::infer(path))?
        .into_iter()
        .map(|d| d.document)
        .collect())
}

fn infoloss(args: &InfolossArgs) -> CliResult<()> {
    let mut reports: Vec<(&str, String)> = Vec::new();
    if let Some(v) = &args.utility {
        let loss = utility_loss(v[0], v[1]);
        reports.push(("utility.csv", format!("original,anonymised,utility_loss\n{},{},{}\n", v[0], v[1], loss)));
    }
    if let Some(path) = &args.bf {
        let table = open(path)
            .and_then(|f| Ok(FeatureTable::from_csv(f)?))
            .with_context(|| format!("in {}", path.display()))
            .input()?;
        let results = construct_loss_report(&table, args.prior_scale).input()?;
        reports.push(("bayes.csv", bayes_csv(&results)));
    }
    if let Some(paths) = &args.removed {
        let original = read_docs(&paths[0]).input()?;
        let anonymised = read_docs(&paths[1]).input()?;
        if original.len() != anonymised.len() {
            return Err(anyhow!("corpora differ in length: {} vs {}", original.len(), anonymised.len())).input();
        }
        let mut body = String::from("id,p_removed\n");
        let mut sum = 0.0;
        for (o, a) in original.iter().zip(&anonymised) {
            if o.id != a.id {
                return Err(anyhow!("document `{}` is paired with `{}`", o.id, a.id)).input();
            }
            let p = proportion_removed(&o.text, &a.text)
                .with_context(|| format!("document `{}`", o.id))
                .input()?;
            sum += p;
            let _ = writeln!(body, "{},{}", csv_field(&o.id), p);
        }
        if !original.is_empty() {
            let _ = writeln!(body, "mean,{}", sum / original.len() as f64);
        }
        reports.push(("removed.csv", body));
    }
    if let Some(list) = &args.ranks {
        let texts = args.texts.as_deref().expect("clap enforces --texts");
        let list = read_text(list)
            .and_then(|s| RankedList::parse(&s).map_err(Into::into))
            .input()?;
        let mut body = String::from("id,mean_rank,words,oov\n");
        for doc in read_docs(texts).input()? {
            match frequency_rank(&doc.id, &doc.text, &list) {
                Ok(s) => {
                    let _ = writeln!(body, "{},{},{},{}", csv_field(&s.id), s.mean_rank, s.words, s.oov);
                }
                Err(_) => log::warn!("document `{}` has no words; skipped", doc.id),
            }
        }
        reports.push(("ranks.csv", body));
    }
    if let Some(cmd) = &args.scorer_cmd {
        let texts = args.texts.as_deref().expect("clap enforces --texts");
        let docs = read_docs(texts).input()?;
        if args.scorer_timeout.is_nan() || args.scorer_timeout <= 0.0 {
            return Err(anyhow!("scorer timeout must be positive")).config();
        }
        let timeout = Duration::from_secs_f64(args.scorer_timeout);
        let scores = match perplexity_via_scorer(&docs, cmd, timeout, 32) {
            Ok(s) => s,
            Err(e @ PerplexityError::ScorerUnavailable(_)) => return Err(e).sidecar(),
            Err(e) => return Err(e).input(),
        };
        let mut body = String::from("id,perplexity\n");
        for (id, p) in scores {
            let _ = writeln!(body, "{},{}", csv_field(&id), p);
        }
        reports.push(("perplexity.csv", body));
    }
    if reports.is_empty() {
        return Err(anyhow!(
            "nothing to compute; pass --utility, --bf, --removed, --ranks or --scorer-cmd"
        ))
        .config();
    }
    if let Some(dir) = &args.out_dir {
        if !dir.is_dir() {
            return Err(anyhow!("output directory {} does not exist", dir.display())).config();
        }
    }
    for (name, body) in &reports {
        println!("# {name}");
        print!("{body}");
        if let Some(dir) = &args.out_dir {
            write_atomic(&dir.join(name), body.as_bytes()).input()?;
        }
    }
    Ok(())
}
