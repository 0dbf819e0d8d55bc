//! Line-delimited JSON exchange with a child process.
//!
//! The engine writes one request per line to the child's stdin and reads one
//! response per line from its stdout, in request order. The same framing
//! carries tagger predictions and perplexity scores.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text_model::EntityLabel;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("failed to start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("write to sidecar failed: {0}")]
    Write(#[source] std::io::Error),
    #[error("sidecar did not answer within {0:?}")]
    Timeout(Duration),
    #[error("sidecar closed its output")]
    Closed,
    #[error("malformed response line {line:?}: {reason}")]
    Malformed { line: String, reason: String },
    #[error("response id `{got}` does not match request id `{expected}`")]
    IdMismatch { expected: String, got: String },
    #[error("sidecar is no longer usable after an earlier failure")]
    Broken,
}

/// `{"id", "text"}` request line, shared by tagger and scorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRequest {
    pub id: String,
    pub text: String,
}

pub type TaggerRequest = TextRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerEntity {
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(default = "default_score")]
    pub score: f64,
}

fn default_score() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerResponse {
    pub id: String,
    #[serde(default)]
    pub entities: Vec<TaggerEntity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerResponse {
    pub id: String,
    pub perplexity: f64,
}

/// Responses carry the id of the request they answer.
pub trait Identified {
    fn id(&self) -> &str;
}

impl Identified for TaggerResponse {
    fn id(&self) -> &str {
        &self.id
    }
}

impl Identified for ScorerResponse {
    fn id(&self) -> &str {
        &self.id
    }
}

/// One running child process speaking the line protocol.
pub struct LineClient {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    broken: bool,
}

impl LineClient {
    /// Starts `command` through `sh -c`. The child's stderr is inherited.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, SidecarError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(format!("exec {command}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| SidecarError::Spawn {
                command: command.to_string(),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        Ok(Self {
            command: command.to_string(),
            child,
            stdin,
            lines: rx,
            timeout,
            broken: false,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Sends every request, then reads exactly one response per request
    /// within the client's timeout. A malformed or mismatched line fails the
    /// whole batch; the remaining lines are still drained so the stream stays
    /// aligned for the next batch.
    pub fn exchange<Resp>(&mut self, requests: &[TextRequest]) -> Result<Vec<Resp>, SidecarError>
    where
        Resp: DeserializeOwned + Identified,
    {
        if self.broken {
            return Err(SidecarError::Broken);
        }
        let result = self.exchange_inner(requests);
        if matches!(
            result,
            Err(SidecarError::Timeout(_) | SidecarError::Closed | SidecarError::Write(_))
        ) {
            self.broken = true;
            let _ = self.child.kill();
        }
        result
    }

    fn exchange_inner<Resp>(&mut self, requests: &[TextRequest]) -> Result<Vec<Resp>, SidecarError>
    where
        Resp: DeserializeOwned + Identified,
    {
        let stdin = self.stdin.as_mut().ok_or(SidecarError::Broken)?;
        let mut payload = String::new();
        for request in requests {
            payload.push_str(&serde_json::to_string(request).expect("request serialises"));
            payload.push('\n');
        }
        stdin
            .write_all(payload.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(SidecarError::Write)?;

        let deadline = Instant::now() + self.timeout;
        let mut responses = Vec::with_capacity(requests.len());
        let mut first_error = None;
        for request in requests {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => return Err(SidecarError::Closed),
                Err(RecvTimeoutError::Timeout) => return Err(SidecarError::Timeout(self.timeout)),
            };
            if first_error.is_some() {
                continue;
            }
            match serde_json::from_str::<Resp>(&line) {
                Ok(resp) if resp.id() == request.id => responses.push(resp),
                Ok(resp) => {
                    first_error = Some(SidecarError::IdMismatch {
                        expected: request.id.clone(),
                        got: resp.id().to_string(),
                    })
                }
                Err(e) => {
                    first_error = Some(SidecarError::Malformed {
                        line,
                        reason: e.to_string(),
                    })
                }
            }
        }
        match first_error {
            Some(e) => Err(e),
            None => Ok(responses),
        }
    }
}

impl Drop for LineClient {
    fn drop(&mut self) {
        // closing stdin lets a well-behaved child exit on its own
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_millis(200);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A fixed set of identical sidecar processes. Each batch goes to the next
/// process in turn; a process handles one batch at a time.
pub struct SidecarPool {
    clients: Vec<Mutex<LineClient>>,
    next: AtomicUsize,
}

impl SidecarPool {
    pub fn spawn(command: &str, timeout: Duration, processes: usize) -> Result<Self, SidecarError> {
        let clients = (0..processes.max(1))
            .map(|_| LineClient::spawn(command, timeout).map(Mutex::new))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            clients,
            next: AtomicUsize::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    pub fn exchange<Resp>(&self, requests: &[TextRequest]) -> Result<Vec<Resp>, SidecarError>
    where
        Resp: DeserializeOwned + Identified,
    {
        let slot = self.next.fetch_add(1, Ordering::Relaxed) % self.clients.len();
        let mut client = self.clients[slot].lock().unwrap_or_else(|e| e.into_inner());
        client.exchange(requests)
    }
}

/// A protocol deviation found when checking a recorded tagger transcript.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConformanceIssue {
    #[error("{requests} requests but {responses} responses")]
    CountMismatch { requests: usize, responses: usize },
    #[error("response {index} is not a valid record: {reason}")]
    Unparseable { index: usize, reason: String },
    #[error("response {index} has id `{got}`, expected `{expected}`")]
    WrongId {
        index: usize,
        expected: String,
        got: String,
    },
    #[error("response {index} entity {entity} has label `{label}` outside the annotation scheme")]
    BadLabel {
        index: usize,
        entity: usize,
        label: String,
    },
    #[error("response {index} entity {entity} has offsets [{start}, {end}) outside text of length {len}")]
    BadOffsets {
        index: usize,
        entity: usize,
        start: usize,
        end: usize,
        len: usize,
    },
}

/// Checks a tagger transcript: one response per request, ids in request
/// order, labels from the twelve-label scheme, offsets inside the text.
pub fn check_tagger_transcript(
    requests: &[TaggerRequest],
    response_lines: &[String],
) -> Vec<ConformanceIssue> {
    let mut issues = Vec::new();
    if requests.len() != response_lines.len() {
        issues.push(ConformanceIssue::CountMismatch {
            requests: requests.len(),
            responses: response_lines.len(),
        });
    }
    for (index, (request, line)) in requests.iter().zip(response_lines).enumerate() {
        let response: TaggerResponse = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                issues.push(ConformanceIssue::Unparseable {
                    index,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if response.id != request.id {
            issues.push(ConformanceIssue::WrongId {
                index,
                expected: request.id.clone(),
                got: response.id.clone(),
            });
        }
        let len = request.text.chars().count();
        for (entity, e) in response.entities.iter().enumerate() {
            let label_ok = e
                .label
                .parse::<EntityLabel>()
                .is_ok_and(|l| l.in_annotation_scheme());
            if !label_ok {
                issues.push(ConformanceIssue::BadLabel {
                    index,
                    entity,
                    label: e.label.clone(),
                });
            }
            if !(e.start < e.end && e.end <= len) {
                issues.push(ConformanceIssue::BadOffsets {
                    index,
                    entity,
                    start: e.start,
                    end: e.end,
                    len,
                });
            }
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(id: &str, text: &str) -> TextRequest {
        TextRequest {
            id: id.into(),
            text: text.into(),
        }
    }

    #[test]
    fn transcript_check_accepts_conforming_lines() {
        let requests = vec![req("a", "Contact jane@doe.org"), req("b", "")];
        let lines = vec![
            r#"{"id":"a","entities":[{"start":8,"end":20,"label":"EMAIL_ADDRESS","score":0.9}],"extra":1}"#.to_string(),
            r#"{"id":"b","entities":[]}"#.to_string(),
        ];
        assert!(check_tagger_transcript(&requests, &lines).is_empty());
    }

    #[test]
    fn transcript_check_flags_each_problem() {
        let requests = vec![req("a", "abc"), req("b", "abc"), req("c", "abc")];
        let lines = vec![
            r#"{"id":"x","entities":[]}"#.to_string(),
            r#"{"id":"b","entities":[{"start":1,"end":9,"label":"PRONOUN"}]}"#.to_string(),
        ];
        let issues = check_tagger_transcript(&requests, &lines);
        assert!(issues.contains(&ConformanceIssue::CountMismatch {
            requests: 3,
            responses: 2
        }));
        assert!(issues.iter().any(|i| matches!(i, ConformanceIssue::WrongId { index: 0, .. })));
        assert!(issues.iter().any(|i| matches!(i, ConformanceIssue::BadLabel { index: 1, .. })));
        assert!(issues.iter().any(|i| matches!(i, ConformanceIssue::BadOffsets { index: 1, .. })));
    }

    #[test]
    fn request_line_shape() {
        assert_eq!(
            serde_json::to_string(&req("7", "hi \"there\"")).unwrap(),
            r#"{"id":"7","text":"hi \"there\""}"#
        );
    }
}
