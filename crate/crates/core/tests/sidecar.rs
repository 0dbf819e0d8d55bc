use std::path::PathBuf;
use std::time::{Duration, Instant};

use veil_core::eval::{perplexity_via_scorer, PerplexityError};
use veil_core::recognition::{RecognitionError, Recognizer, RecognizerConfig, TaggerConfig, TermSource};
use veil_core::sidecar::{check_tagger_transcript, LineClient, SidecarError, TaggerResponse, TextRequest};
use veil_core::text_model::{Document, EntityLabel};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn tagger_cmd(mode: &str) -> String {
    format!("python3 {} {mode}", fixture("stub_tagger.py").display())
}

fn scorer_cmd(value: &str) -> String {
    format!("python3 {} {value}", fixture("stub_scorer.py").display())
}

fn req(id: &str, text: &str) -> TextRequest {
    TextRequest {
        id: id.into(),
        text: text.into(),
    }
}

fn read_lines(name: &str) -> Vec<String> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn stub_tagger_reproduces_golden_transcript() {
    let requests: Vec<TextRequest> = read_lines("tagger_requests.jsonl")
        .iter()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let golden = read_lines("tagger_responses.jsonl");
    assert!(check_tagger_transcript(&requests, &golden).is_empty());

    let mut client = LineClient::spawn(&tagger_cmd("ok"), Duration::from_secs(10)).unwrap();
    let live: Vec<TaggerResponse> = client.exchange(&requests).unwrap();
    let recorded: Vec<TaggerResponse> = golden.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(live, recorded);
}

#[test]
fn client_handles_several_batches_in_order() {
    let mut client = LineClient::spawn(&tagger_cmd("ok"), Duration::from_secs(10)).unwrap();
    for round in 0..5 {
        let requests: Vec<TextRequest> = (0..7).map(|i| req(&format!("{round}-{i}"), "Ada")).collect();
        let responses: Vec<TaggerResponse> = client.exchange(&requests).unwrap();
        let ids: Vec<&str> = responses.iter().map(|r| r.id.as_str()).collect();
        let expected: Vec<String> = requests.iter().map(|r| r.id.clone()).collect();
        assert_eq!(ids, expected);
    }
}

#[test]
fn id_mismatch_is_reported() {
    let mut client = LineClient::spawn(&tagger_cmd("bad-id"), Duration::from_secs(10)).unwrap();
    let err = client.exchange::<TaggerResponse>(&[req("a", "Ada")]).unwrap_err();
    assert!(matches!(err, SidecarError::IdMismatch { ref expected, ref got } if expected == "a" && got == "a-x"));
}

#[test]
fn malformed_line_is_reported() {
    let mut client = LineClient::spawn(&tagger_cmd("malformed"), Duration::from_secs(10)).unwrap();
    let err = client.exchange::<TaggerResponse>(&[req("a", "Ada"), req("b", "x")]).unwrap_err();
    assert!(matches!(err, SidecarError::Malformed { .. }), "{err}");
}

#[test]
fn slow_sidecar_times_out_and_is_not_reused() {
    let mut client = LineClient::spawn(&tagger_cmd("sleep"), Duration::from_millis(300)).unwrap();
    let started = Instant::now();
    let err = client.exchange::<TaggerResponse>(&[req("a", "Ada")]).unwrap_err();
    assert!(matches!(err, SidecarError::Timeout(_)), "{err}");
    assert!(started.elapsed() < Duration::from_secs(5));
    let again = client.exchange::<TaggerResponse>(&[req("b", "Ada")]).unwrap_err();
    assert!(matches!(again, SidecarError::Broken));
}

#[test]
fn dead_sidecar_reports_closed() {
    let mut client = LineClient::spawn(&tagger_cmd("die"), Duration::from_secs(10)).unwrap();
    let err = client.exchange::<TaggerResponse>(&[req("a", "Ada")]).unwrap_err();
    assert!(matches!(err, SidecarError::Closed | SidecarError::Write(_)), "{err}");
}

fn tagger_config(mode: &str, fallback: bool) -> RecognizerConfig {
    let mut cfg = RecognizerConfig::default();
    let mut tagger = TaggerConfig::new(tagger_cmd(mode));
    tagger.timeout = Duration::from_secs(10);
    cfg.tagger = Some(tagger);
    cfg.rules_only_fallback = fallback;
    cfg.add_gazetteer(EntityLabel::Location, TermSource::Terms(vec!["London".into()]));
    cfg
}

#[test]
fn tagger_spans_join_rule_spans() {
    let recognizer = Recognizer::new(tagger_config("ok", false)).unwrap();
    let doc = Document::new("d", "Ada Lovelace of Acme met Babbage in London.");
    let out = recognizer.recognize(&doc).unwrap();
    let labels: Vec<(usize, usize, EntityLabel)> = out.spans.iter().map(|s| (s.start, s.end, s.label)).collect();
    assert_eq!(
        labels,
        vec![
            (0, 3, EntityLabel::PersonFirstname),
            (4, 12, EntityLabel::PersonLastname),
            (16, 20, EntityLabel::Organization),
            (36, 42, EntityLabel::Location),
        ]
    );
}

#[test]
fn reserved_label_from_tagger_is_rejected() {
    let recognizer = Recognizer::new(tagger_config("reserved", false)).unwrap();
    let err = recognizer.recognize(&Document::new("d", "Ada")).unwrap_err();
    assert!(matches!(err, RecognitionError::InvalidTaggerEntity { .. }), "{err}");
}

#[test]
fn tagger_failure_is_an_error_without_fallback() {
    let recognizer = Recognizer::new(tagger_config("malformed", false)).unwrap();
    let err = recognizer.recognize(&Document::new("d", "Ada in London")).unwrap_err();
    assert!(err.is_sidecar());
}

#[test]
fn fallback_marks_batch_degraded_and_keeps_rule_spans() {
    let recognizer = Recognizer::new(tagger_config("malformed", true)).unwrap();
    let batch = recognizer
        .recognize_batch(&[Document::new("d", "Ada in London")])
        .unwrap();
    assert!(batch.degraded);
    let labels: Vec<EntityLabel> = batch.documents[0].spans.iter().map(|s| s.label).collect();
    assert_eq!(labels, vec![EntityLabel::Location]);
}

fn docs() -> Vec<Document> {
    (0..5).map(|i| Document::new(format!("p{i}"), format!("text number {i}"))).collect()
}

#[test]
fn scorer_values_pass_through_in_order() {
    let out = perplexity_via_scorer(&docs(), &scorer_cmd("50.0"), Duration::from_secs(10), 2).unwrap();
    let expected: Vec<(String, f64)> = (0..5).map(|i| (format!("p{i}"), 50.0)).collect();
    assert_eq!(out, expected);
}

#[test]
fn non_positive_perplexity_is_rejected() {
    let err = perplexity_via_scorer(&docs(), &scorer_cmd("-1"), Duration::from_secs(10), 2).unwrap_err();
    assert!(matches!(err, PerplexityError::NonPositivePerplexity { value, .. } if value == -1.0));
}

#[test]
fn missing_scorer_is_unavailable() {
    let err = perplexity_via_scorer(&docs(), "/nonexistent/scorer", Duration::from_secs(10), 2).unwrap_err();
    assert!(matches!(err, PerplexityError::ScorerUnavailable(_)), "{err}");
}
