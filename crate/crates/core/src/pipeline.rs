//! The hop loop: initial retrieval, rerank, sufficiency gate, constrained
//! decoding of the next document, repeated until the proof is sufficient or
//! the hop cap is reached.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::beam_decoder::{decode_variant, flatten_doc_sets, DecodeMode, DocSetScore, ScoredSequence};
use crate::corpus::{Claim, Corpus};
use crate::decoder_trie::DecoderTrie;
use crate::error::{Error, Result};
use crate::natlog::{
    predict_sufficiency, render_proof, FixedProver, Lexicon, ProofGenerator, Proof, ReferenceProver, Sufficiency,
};
use crate::protocol::ExternalClient;
use crate::reranker::{rerank, RankedEvidence, ReferenceReranker, SentenceScorer};
use crate::scorer::{ReferenceScorer, ScoringContext, TokenScorer};
use crate::sparse_index::{Bm25Params, InvertedIndex};

/// Name of the sequence scoring rule, echoed into results.
pub const DECODER_SCORING: &str = "raw-sum-logprob";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Reference,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProverBackend {
    #[default]
    Reference,
    External,
    AllSufficient,
    AllInsufficient,
}

/// Pipeline settings. Loaded from TOML; every field is optional there.
///
/// ```toml
/// k = 10
/// l = 5
/// max_hops = 2
/// beam_size = 25
/// mode = "joint"          # joint | top1 | not-joint | joint-docs
/// hyperlinks = false
/// prover = "reference"    # reference | external | all-sufficient | all-insufficient
/// external_command = "python3 scorer_server.py"
/// [bm25]
/// k1 = 0.6
/// b = 0.4
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Document sets kept per hop.
    pub k: usize,
    /// Evidence sentences kept per hop.
    pub l: usize,
    pub max_hops: usize,
    /// Sequences returned by the decoder per hop.
    pub beam_size: usize,
    /// Beam passed to external proof generators.
    pub proof_beam: usize,
    pub mode: DecodeMode,
    /// Append resolvable hyperlink titles to evidence texts seen by the scorer.
    pub hyperlinks: bool,
    /// Drop decoded document sets that share no document with the previous hop.
    pub retain_previous_hop: bool,
    pub bm25: Bm25Params,
    /// Smoothing constant of the reference scorer.
    pub smoothing: f64,
    pub scorer: Backend,
    pub reranker: Backend,
    pub prover: ProverBackend,
    pub lexicons: Vec<PathBuf>,
    /// Command started for external backends (line-delimited JSON on stdio).
    pub external_command: Option<String>,
    /// Unix socket of an already running external backend.
    pub external_socket: Option<PathBuf>,
    pub timeout_secs: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 10,
            l: 5,
            max_hops: 2,
            beam_size: 25,
            proof_beam: 5,
            mode: DecodeMode::Joint,
            hyperlinks: false,
            retain_previous_hop: false,
            bm25: Bm25Params::default(),
            smoothing: 1.0,
            scorer: Backend::Reference,
            reranker: Backend::Reference,
            prover: ProverBackend::Reference,
            lexicons: Vec::new(),
            external_command: None,
            external_socket: None,
            timeout_secs: 30.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if self.l < 1 {
            return Err(Error::Config("l must be >= 1".into()));
        }
        if self.max_hops < 1 {
            return Err(Error::Config("max_hops must be >= 1".into()));
        }
        if self.beam_size < self.k {
            return Err(Error::Config(format!(
                "beam_size ({}) must be >= k ({})",
                self.beam_size, self.k
            )));
        }
        if self.smoothing.is_nan() || self.smoothing <= 0.0 {
            return Err(Error::Config("smoothing must be > 0".into()));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(Error::Config("timeout_secs must be > 0".into()));
        }
        self.bm25.validate()?;
        let external = self.scorer == Backend::External
            || self.reranker == Backend::External
            || self.prover == ProverBackend::External;
        if external && self.external_command.is_none() && self.external_socket.is_none() {
            return Err(Error::Config(
                "an external backend needs external_command or external_socket".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// Suffixes each evidence text with the titles its hyperlinks resolve to.
/// Identifiers, order and scores are unchanged.
pub fn augment_hyperlinks(evidence: &RankedEvidence, corpus: &Corpus) -> RankedEvidence {
    let mut out = evidence.clone();
    for e in &mut out.entries {
        let Ok(sentence) = corpus.resolve_sentence(&e.doc_title, e.sent_index) else {
            continue;
        };
        let links: Vec<&str> = sentence
            .hyperlinks
            .iter()
            .filter(|t| corpus.contains_title(t))
            .map(String::as_str)
            .collect();
        if !links.is_empty() {
            e.text = format!("{} | links: {}", e.text, links.join(" ; "));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopState {
    pub hop: usize,
    /// `D_t`, best first.
    pub document_sets: Vec<DocSetScore>,
    /// Distinct documents of `D_t` in rank order.
    pub documents: Vec<String>,
    /// `E_t`.
    pub evidence: RankedEvidence,
    pub proof: Proof,
    pub proof_text: String,
    pub sufficiency: Sufficiency,
    /// Decoder output that produced this hop's document sets (hops >= 2).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<ScoredSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub claim_id: String,
    /// Hops executed.
    pub n_dyn: usize,
    pub decoder_rounds: usize,
    pub final_document_sets: Vec<DocSetScore>,
    pub final_documents: Vec<String>,
    pub final_evidence: RankedEvidence,
    pub trace: Vec<HopState>,
    pub decoder_scoring: String,
    pub config: PipelineConfig,
}

impl RetrievalResult {
    /// Documents of hop `t` (1-based), if it ran.
    pub fn hop_documents(&self, t: usize) -> Option<&[String]> {
        self.trace.get(t.checked_sub(1)?).map(|h| h.documents.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub claim_id: String,
    pub error: String,
    pub error_kind: String,
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResultLine {
    Ok(Box<RetrievalResult>),
    Err(ErrorRecord),
}

impl ResultLine {
    pub fn claim_id(&self) -> &str {
        match self {
            ResultLine::Ok(r) => &r.claim_id,
            ResultLine::Err(e) => &e.claim_id,
        }
    }
}

pub fn write_results(lines: &[ResultLine], mut w: impl Write) -> std::io::Result<()> {
    for line in lines {
        serde_json::to_writer(&mut w, line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn parse_results(reader: impl BufRead) -> Result<Vec<ResultLine>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultLine>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_results(BufReader::new(file))
}

/// Precomputed `D_1` rankings, one `{"claim_id": ..., "titles": [...]}` per line.
pub type InitialRankings = HashMap<String, Vec<String>>;

#[derive(Deserialize)]
struct RankingRecord {
    #[serde(deserialize_with = "crate::corpus::claim_id_de")]
    claim_id: String,
    titles: Vec<String>,
}

pub fn load_initial_rankings(path: impl AsRef<Path>) -> Result<InitialRankings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RankingRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.insert(rec.claim_id, rec.titles.iter().map(|t| crate::text::normalize_title(t)).collect());
    }
    Ok(out)
}

/// Shared, read-only inputs of a run.
#[derive(Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub corpus: &'a Corpus,
    pub index: &'a InvertedIndex,
    pub trie: &'a DecoderTrie,
    pub config: &'a PipelineConfig,
    pub initial: Option<&'a InitialRankings>,
}

/// Borrowed backends used for one claim.
#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub scorer: &'a dyn TokenScorer,
    pub reranker: &'a dyn SentenceScorer,
    pub prover: &'a dyn ProofGenerator,
}

/// Backends owned by one worker.
pub struct OwnedBackends {
    pub scorer: Arc<dyn TokenScorer + Send + Sync>,
    pub reranker: Arc<dyn SentenceScorer + Send + Sync>,
    pub prover: Arc<dyn ProofGenerator + Send + Sync>,
}

impl OwnedBackends {
    pub fn borrow(&self) -> Backends<'_> {
        Backends {
            scorer: &*self.scorer,
            reranker: &*self.reranker,
            prover: &*self.prover,
        }
    }
}

/// Builds per-worker backends from a config. Reference components are
/// fitted once and shared; each call to [`BackendFactory::make`] opens a
/// fresh external connection when one is configured.
pub struct BackendFactory {
    config: PipelineConfig,
    scorer: Option<Arc<ReferenceScorer>>,
    prover: Option<Arc<ReferenceProver>>,
}

impl BackendFactory {
    pub fn new(config: &PipelineConfig, corpus: &Corpus) -> Result<Self> {
        let scorer = match config.scorer {
            Backend::Reference => Some(Arc::new(ReferenceScorer::fit(corpus, config.smoothing)?)),
            Backend::External => None,
        };
        let prover = match config.prover {
            ProverBackend::Reference => {
                let lexicons = config.lexicons.iter().map(Lexicon::load).collect::<Result<Vec<_>>>()?;
                Some(Arc::new(ReferenceProver::new(lexicons)))
            }
            _ => None,
        };
        Ok(Self {
            config: config.clone(),
            scorer,
            prover,
        })
    }

    fn connect(&self) -> Result<ExternalClient> {
        let timeout = self.config.timeout();
        let client = if let Some(socket) = &self.config.external_socket {
            #[cfg(unix)]
            {
                ExternalClient::connect_unix(socket, timeout)?
            }
            #[cfg(not(unix))]
            {
                return Err(Error::Config(format!("unix sockets are unavailable: {}", socket.display())));
            }
        } else if let Some(command) = &self.config.external_command {
            ExternalClient::spawn(command, timeout)?
        } else {
            return Err(Error::Config("no external backend configured".into()));
        };
        Ok(client.with_proof_beam(self.config.proof_beam))
    }

    pub fn make(&self) -> Result<OwnedBackends> {
        let uses_external = self.config.scorer == Backend::External
            || self.config.reranker == Backend::External
            || self.config.prover == ProverBackend::External;
        let external = if uses_external { Some(Arc::new(self.connect()?)) } else { None };
        let scorer: Arc<dyn TokenScorer + Send + Sync> = match (&self.scorer, &external) {
            (Some(s), _) => s.clone(),
            (None, Some(c)) => c.clone(),
            (None, None) => unreachable!("scorer backend without implementation"),
        };
        let reranker: Arc<dyn SentenceScorer + Send + Sync> = match (self.config.reranker, &external) {
            (Backend::External, Some(c)) => c.clone(),
            _ => Arc::new(ReferenceReranker { params: self.config.bm25 }),
        };
        let prover: Arc<dyn ProofGenerator + Send + Sync> = match (self.config.prover, &external) {
            (ProverBackend::AllSufficient, _) => Arc::new(FixedProver(Sufficiency::Sufficient)),
            (ProverBackend::AllInsufficient, _) => Arc::new(FixedProver(Sufficiency::Insufficient)),
            (ProverBackend::External, Some(c)) => c.clone(),
            _ => self.prover.clone().expect("reference prover"),
        };
        Ok(OwnedBackends {
            scorer,
            reranker,
            prover,
        })
    }
}

fn gate(
    backends: &Backends<'_>,
    claim: &str,
    evidence: &RankedEvidence,
    hop: usize,
) -> Result<(Proof, Sufficiency)> {
    // Entailment and cover are not conclusive; they count as independence.
    let proof = backends.prover.prove(claim, evidence, hop)?.gate_normalized();
    let sufficiency = predict_sufficiency(&proof)?;
    Ok((proof, sufficiency))
}

fn initial_sets(claim: &Claim, inputs: &PipelineInputs<'_>) -> Result<Vec<DocSetScore>> {
    let k = inputs.config.k;
    let ranked: Vec<(String, f64)> = match inputs.initial {
        Some(rankings) => rankings
            .get(&claim.claim_id)
            .ok_or_else(|| Error::NotFound(format!("no initial ranking for claim {:?}", claim.claim_id)))?
            .iter()
            .filter(|t| {
                let known = inputs.corpus.contains_title(t);
                if !known {
                    log::warn!("claim {}: initial title {t:?} is not in the corpus", claim.claim_id);
                }
                known
            })
            .take(k)
            .map(|t| (t.clone(), 0.0))
            .collect(),
        None => inputs.index.rank(&claim.text, k),
    };
    Ok(ranked
        .into_iter()
        .map(|(title, score)| DocSetScore {
            doc_set: vec![title],
            logprob: score,
        })
        .collect())
}

/// Runs the hop loop for one claim.
pub fn run(claim: &Claim, inputs: &PipelineInputs<'_>, backends: &Backends<'_>) -> Result<RetrievalResult> {
    let config = inputs.config;
    config.validate()?;
    let sets = initial_sets(claim, inputs)?;
    let candidate: Vec<Vec<String>> = sets.iter().map(|s| s.doc_set.clone()).collect();
    let evidence = rerank(
        &claim.text,
        &RankedEvidence::empty(config.l),
        &candidate,
        inputs.corpus,
        config.l,
        backends.reranker,
        1,
    )?;
    let (proof, sufficiency) = gate(backends, &claim.text, &evidence, 1)?;
    let mut trace = vec![HopState {
        hop: 1,
        documents: flatten_doc_sets(sets.iter().map(|s| s.doc_set.as_slice())),
        document_sets: sets,
        evidence,
        proof_text: render_proof(&proof),
        proof,
        sufficiency,
        sequences: Vec::new(),
        diagnostic: None,
    }];
    let mut decoder_rounds = 0;

    loop {
        let current = trace.last().expect("at least one hop");
        let t = current.hop;
        if current.sufficiency == Sufficiency::Sufficient || t >= config.max_hops {
            break;
        }
        let context_evidence = if config.hyperlinks {
            augment_hyperlinks(&current.evidence, inputs.corpus)
        } else {
            current.evidence.clone()
        };
        let mut ctx = ScoringContext::new(claim.text.clone(), &context_evidence, t);
        ctx.hyperlinks = config.hyperlinks;
        let out = decode_variant(
            config.mode,
            backends.scorer,
            inputs.trie,
            &ctx,
            t,
            config.beam_size,
            config.k,
            &current.documents,
        )?;
        decoder_rounds += 1;
        let mut sets = out.doc_sets;
        if config.retain_previous_hop {
            let previous = &current.documents;
            let kept: Vec<DocSetScore> = sets
                .iter()
                .filter(|s| s.doc_set.iter().any(|d| previous.contains(d)))
                .cloned()
                .collect();
            if !kept.is_empty() {
                sets = kept;
            }
        }
        if sets.is_empty() {
            log::warn!(
                "claim {}: no legal sequence at hop {}; keeping hop {t}",
                claim.claim_id,
                t + 1
            );
            trace.last_mut().expect("at least one hop").diagnostic =
                Some(format!("decoder produced no legal sequence for hop {}", t + 1));
            break;
        }
        let candidate: Vec<Vec<String>> = sets.iter().map(|s| s.doc_set.clone()).collect();
        let evidence = rerank(
            &claim.text,
            &current.evidence,
            &candidate,
            inputs.corpus,
            config.l,
            backends.reranker,
            t + 1,
        )?;
        let (proof, sufficiency) = gate(backends, &claim.text, &evidence, t + 1)?;
        let documents = match config.mode {
            DecodeMode::NotJoint => out.ranked_documents,
            _ => flatten_doc_sets(sets.iter().map(|s| s.doc_set.as_slice())),
        };
        trace.push(HopState {
            hop: t + 1,
            document_sets: sets,
            documents,
            evidence,
            proof_text: render_proof(&proof),
            proof,
            sufficiency,
            sequences: out.sequences,
            diagnostic: out.diagnostic,
        });
    }

    let last = trace.last().expect("at least one hop");
    Ok(RetrievalResult {
        claim_id: claim.claim_id.clone(),
        n_dyn: trace.len(),
        decoder_rounds,
        final_document_sets: last.document_sets.clone(),
        final_documents: last.documents.clone(),
        final_evidence: last.evidence.clone(),
        trace,
        decoder_scoring: DECODER_SCORING.to_string(),
        config: config.clone(),
    })
}

fn outcome(claim: &Claim, result: Result<RetrievalResult>) -> ResultLine {
    match result {
        Ok(r) => ResultLine::Ok(Box::new(r)),
        Err(e) => {
            log::error!("claim {}: {e}", claim.claim_id);
            ResultLine::Err(ErrorRecord {
                claim_id: claim.claim_id.clone(),
                error: e.to_string(),
                error_kind: e.kind().to_string(),
            })
        }
    }
}

/// Runs every claim on a pool of `workers` threads, one backend set per
/// worker. Output order follows `claims`; a failing claim yields an error
/// record and does not affect the others.
pub fn run_batch(claims: &[Claim], inputs: &PipelineInputs<'_>, backends: Vec<OwnedBackends>) -> Vec<ResultLine> {
    assert!(!backends.is_empty(), "at least one worker");
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ResultLine>>> = Mutex::new(vec![None; claims.len()]);
    std::thread::scope(|scope| {
        for owned in &backends {
            let (next, slots) = (&next, &slots);
            scope.spawn(move || {
                let b = owned.borrow();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(claim) = claims.get(i) else { break };
                    let line = outcome(claim, run(claim, inputs, &b));
                    slots.lock().expect("result slots")[i] = Some(line);
                }
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|s| s.expect("every claim processed"))
        .collect()
}
