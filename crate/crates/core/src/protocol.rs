//! Line-delimited JSON protocol for out-of-process scorers, rerankers and
//! proof generators.
//!
//! Each request is one JSON object on one line; the peer answers each
//! request with exactly one response line, in order. Every message carries
//! `"version": 1`.
//!
//! ```text
//! {"version":1,"kind":"score","hop":1,"context_claim":"...","context_evidence":[{"id":"E1","doc_title":"...","text":"..."}],"prefix":["E1","["],"allowed":["Seth","The"]}
//! {"version":1,"logprobs":{"Seth":-0.2,"The":-1.7}}
//!
//! {"version":1,"kind":"rerank","hop":1,"context_claim":"...","context_evidence":[],"candidates":[{"doc_title":"...","sent_index":0,"text":"..."}]}
//! {"version":1,"scores":[3.1]}
//!
//! {"version":1,"kind":"prove","hop":1,"context_claim":"...","context_evidence":[...],"beam":5}
//! {"version":1,"proof":"{ Seth Meyers } [ Seth Meyers ] EQ"}
//!
//! {"version":1,"error":"model not loaded"}
//! ```
//!
//! Score responses are treated as unnormalized log-scores and renormalized
//! over the allowed set; a response missing an allowed token is a protocol
//! error.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::natlog::{parse_proof, ProofGenerator, Proof};
use crate::reranker::{RankedEvidence, SentenceScorer};
use crate::scorer::{log_softmax, ContextSentence, ScoringContext, TokenScorer};

pub const PROTOCOL_VERSION: u32 = 1;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSentence {
    pub doc_title: String,
    pub sent_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequestBody {
    Score {
        hop: usize,
        context_claim: String,
        context_evidence: Vec<ContextSentence>,
        prefix: Vec<String>,
        allowed: Vec<String>,
    },
    Rerank {
        hop: usize,
        context_claim: String,
        /// Evidence kept at the previous hop.
        context_evidence: Vec<ContextSentence>,
        candidates: Vec<CandidateSentence>,
    },
    Prove {
        hop: usize,
        context_claim: String,
        context_evidence: Vec<ContextSentence>,
        beam: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub version: u32,
    #[serde(flatten)]
    pub body: RequestBody,
}

impl Request {
    pub fn new(body: RequestBody) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            body,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprobs: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn logprobs(logprobs: BTreeMap<String, f64>) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            logprobs: Some(logprobs),
            ..Self::default()
        }
    }

    pub fn scores(scores: Vec<f64>) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            scores: Some(scores),
            ..Self::default()
        }
    }

    pub fn proof(proof: impl Into<String>) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            proof: Some(proof.into()),
            ..Self::default()
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            error: Some(message.into()),
            ..Self::default()
        }
    }
}

fn evidence_context(evidence: &RankedEvidence) -> Vec<ContextSentence> {
    evidence
        .entries
        .iter()
        .map(|e| ContextSentence {
            id: e.id.clone(),
            doc_title: e.doc_title.clone(),
            text: e.text.clone(),
        })
        .collect()
}

struct Connection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    /// Set after a transport failure: a late reply would be read as the
    /// answer to the next request.
    broken: bool,
}

/// Client side of the protocol. Calls are strictly sequential; share one
/// client per worker.
pub struct ExternalClient {
    conn: Mutex<Connection>,
    timeout: Duration,
    child: Option<Mutex<Child>>,
    /// Closes a socket whose read half is held by the reader thread.
    closer: Option<Box<dyn Fn() + Send + Sync>>,
    proof_beam: usize,
    name: String,
}

impl std::fmt::Debug for ExternalClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalClient")
            .field("peer", &self.name)
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl ExternalClient {
    /// Wraps an already-connected byte stream pair.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Duration,
    ) -> Self {
        Self::with_name(reader, writer, timeout, None, "stream".into())
    }

    fn with_name(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Duration,
        child: Option<Child>,
        name: String,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Self {
            conn: Mutex::new(Connection {
                writer: Box::new(writer),
                lines: rx,
                broken: false,
            }),
            timeout,
            child: child.map(Mutex::new),
            closer: None,
            proof_beam: 5,
            name,
        }
    }

    /// Runs `command` through `sh -c` and talks to it over its stdin/stdout.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self::with_name(stdout, stdin, timeout, Some(child), command.to_string()))
    }

    #[cfg(unix)]
    pub fn connect_unix(path: impl AsRef<std::path::Path>, timeout: Duration) -> Result<Self> {
        let path = path.as_ref();
        let stream = std::os::unix::net::UnixStream::connect(path)
            .map_err(|e| Error::Transport(format!("cannot connect to {}: {e}", path.display())))?;
        let reader = stream
            .try_clone()
            .map_err(|e| Error::Transport(format!("cannot clone socket: {e}")))?;
        let closer = stream
            .try_clone()
            .map_err(|e| Error::Transport(format!("cannot clone socket: {e}")))?;
        let mut client = Self::with_name(reader, stream, timeout, None, path.display().to_string());
        client.closer = Some(Box::new(move || {
            let _ = closer.shutdown(std::net::Shutdown::Both);
        }));
        Ok(client)
    }

    pub fn with_proof_beam(mut self, beam: usize) -> Self {
        self.proof_beam = beam;
        self
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Sends one request and waits for its response.
    pub fn call(&self, request: &Request) -> Result<Response> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| Error::Transport("connection poisoned by an earlier failure".into()))?;
        if conn.broken {
            return Err(Error::Transport(format!("connection to {} is unusable after an earlier failure", self.name)));
        }
        let result = Self::exchange(&mut conn, request, &self.name, self.timeout);
        if matches!(result, Err(Error::Transport(_))) {
            conn.broken = true;
        }
        let response = result?;
        if response.version != PROTOCOL_VERSION {
            return Err(Error::Protocol(format!(
                "protocol version {} not supported (expected {PROTOCOL_VERSION})",
                response.version
            )));
        }
        if let Some(message) = response.error {
            return Err(Error::Protocol(format!("{} reported: {message}", self.name)));
        }
        Ok(response)
    }

    fn exchange(conn: &mut Connection, request: &Request, name: &str, timeout: Duration) -> Result<Response> {
        let mut line = serde_json::to_string(request).map_err(|e| Error::Protocol(e.to_string()))?;
        line.push('\n');
        conn.writer
            .write_all(line.as_bytes())
            .and_then(|_| conn.writer.flush())
            .map_err(|e| Error::Transport(format!("write to {name} failed: {e}")))?;
        let reply = match conn.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(Error::Transport(format!("read from {name} failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Transport(format!("{name} did not answer within {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::Transport(format!("{name} closed the connection")))
            }
        };
        serde_json::from_str(&reply).map_err(|e| Error::Protocol(format!("malformed response {reply:?}: {e}")))
    }
}

impl Drop for ExternalClient {
    fn drop(&mut self) {
        if let Some(close) = &self.closer {
            close();
        }
        if let Some(child) = &self.child {
            if let Ok(mut child) = child.lock() {
                let _ = child.kill();
                let _ = child.wait();
            }
        }
    }
}

impl TokenScorer for ExternalClient {
    fn next_token_logprobs(&self, ctx: &ScoringContext, prefix: &[String], allowed: &[String]) -> Result<Vec<f64>> {
        if allowed.is_empty() {
            return Err(Error::Contract("empty allowed set".into()));
        }
        let response = self.call(&Request::new(RequestBody::Score {
            hop: ctx.hop,
            context_claim: ctx.claim.clone(),
            context_evidence: ctx.evidence.clone(),
            prefix: prefix.to_vec(),
            allowed: allowed.to_vec(),
        }))?;
        let logprobs = response
            .logprobs
            .ok_or_else(|| Error::Protocol("score response without logprobs".into()))?;
        let raw = allowed
            .iter()
            .map(|tok| {
                logprobs
                    .get(tok)
                    .copied()
                    .ok_or_else(|| Error::Protocol(format!("no score for allowed token {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        log_softmax(&raw)
    }
}

impl SentenceScorer for ExternalClient {
    fn score_sentences(&self, claim: &str, prior: &RankedEvidence, candidates: &[&Sentence], hop: usize) -> Result<Vec<f64>> {
        let response = self.call(&Request::new(RequestBody::Rerank {
            hop,
            context_claim: claim.to_string(),
            context_evidence: evidence_context(prior),
            candidates: candidates
                .iter()
                .map(|s| CandidateSentence {
                    doc_title: s.doc_title.clone(),
                    sent_index: s.sent_index,
                    text: s.text.clone(),
                })
                .collect(),
        }))?;
        let scores = response
            .scores
            .ok_or_else(|| Error::Protocol("rerank response without scores".into()))?;
        if scores.len() != candidates.len() {
            return Err(Error::Protocol(format!(
                "rerank response has {} scores for {} candidates",
                scores.len(),
                candidates.len()
            )));
        }
        Ok(scores)
    }
}

impl ProofGenerator for ExternalClient {
    fn prove(&self, claim: &str, evidence: &RankedEvidence, hop: usize) -> Result<Proof> {
        let response = self.call(&Request::new(RequestBody::Prove {
            hop,
            context_claim: claim.to_string(),
            context_evidence: evidence_context(evidence),
            beam: self.proof_beam,
        }))?;
        let text = response
            .proof
            .ok_or_else(|| Error::Protocol("prove response without proof".into()))?;
        parse_proof(&text).map_err(|e| Error::Protocol(format!("unparseable proof {text:?}: {e}")))
    }
}

/// Answers requests with in-process backends. Missing backends answer with
/// an error response.
#[derive(Default)]
pub struct Handler<'a> {
    pub scorer: Option<&'a dyn TokenScorer>,
    pub reranker: Option<&'a dyn SentenceScorer>,
    pub prover: Option<&'a dyn ProofGenerator>,
}

fn ranked(context: &[ContextSentence]) -> RankedEvidence {
    RankedEvidence {
        entries: context
            .iter()
            .map(|c| crate::reranker::EvidenceSentence {
                id: c.id.clone(),
                doc_title: c.doc_title.clone(),
                sent_index: 0,
                text: c.text.clone(),
                score: 0.0,
            })
            .collect(),
        limit: context.len(),
    }
}

impl Handler<'_> {
    pub fn handle(&self, request: Request) -> Response {
        if request.version != PROTOCOL_VERSION {
            return Response::error(format!("unsupported protocol version {}", request.version));
        }
        let result = match request.body {
            RequestBody::Score {
                hop,
                context_claim,
                context_evidence,
                prefix,
                allowed,
            } => self.scorer.ok_or("no scorer").map_err(String::from).and_then(|s| {
                let ctx = ScoringContext {
                    claim: context_claim,
                    evidence: context_evidence,
                    hop,
                    hyperlinks: false,
                };
                s.next_token_logprobs(&ctx, &prefix, &allowed)
                    .map(|lps| Response::logprobs(allowed.into_iter().zip(lps).collect()))
                    .map_err(|e| e.to_string())
            }),
            RequestBody::Rerank {
                hop,
                context_claim,
                context_evidence,
                candidates,
            } => self.reranker.ok_or("no reranker").map_err(String::from).and_then(|r| {
                let sentences: Vec<Sentence> = candidates
                    .into_iter()
                    .map(|c| Sentence {
                        doc_title: c.doc_title,
                        sent_index: c.sent_index,
                        text: c.text,
                        hyperlinks: Vec::new(),
                    })
                    .collect();
                let refs: Vec<&Sentence> = sentences.iter().collect();
                r.score_sentences(&context_claim, &ranked(&context_evidence), &refs, hop)
                    .map(Response::scores)
                    .map_err(|e| e.to_string())
            }),
            RequestBody::Prove {
                hop,
                context_claim,
                context_evidence,
                ..
            } => self.prover.ok_or("no prover").map_err(String::from).and_then(|p| {
                p.prove(&context_claim, &ranked(&context_evidence), hop)
                    .map(|proof| Response::proof(crate::natlog::render_proof_ascii(&proof)))
                    .map_err(|e| e.to_string())
            }),
        };
        result.unwrap_or_else(Response::error)
    }
}

/// Serves requests from `reader` until end of input. Malformed lines get an
/// error response; the loop continues.
pub fn serve(reader: impl BufRead, mut writer: impl Write, handler: &Handler<'_>) -> Result<()> {
    for line in reader.lines() {
        let line = line.map_err(|e| Error::Transport(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(request) => handler.handle(request),
            Err(e) => Response::error(format!("malformed request: {e}")),
        };
        let mut out = serde_json::to_string(&response).map_err(|e| Error::Protocol(e.to_string()))?;
        out.push('\n');
        writer
            .write_all(out.as_bytes())
            .and_then(|_| writer.flush())
            .map_err(|e| Error::Transport(e.to_string()))?;
    }
    Ok(())
}
