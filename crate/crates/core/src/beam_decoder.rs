//! Constrained decoding of sentence/document sequences and their
//! aggregation into document-set scores.
//!
//! A sequence `S [ d ]` scores
//! `log p(S | c, E_t) + log p(d | c, E_t, S)`, the sum of per-token
//! log-probabilities under the grammar of [`MarkupState`]. The score of a
//! document set is the probability mass of all retained sequences that
//! resolve to it: `log Σ exp(logprob)` over the group.
//!
//! The search is best-first over partial hypotheses. Every renormalized step
//! contributes a log-probability `≤ 0`, so scores never increase along a
//! path and the `q` hypotheses completed first are the exact top `q`
//! sequences. `max_frontier` bounds memory; when it prunes, the result is a
//! beam approximation and the diagnostic says so. Scores are raw summed
//! log-probabilities without length normalization.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decoder_trie::{parse_sentence_id, DecoderTrie, MarkupState, END_OF_TITLE};
use crate::error::{Error, Result};
use crate::scorer::{logsumexp, ScoringContext, TokenScorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeMode {
    /// Sentence identifiers then one title, scored jointly.
    #[default]
    Joint,
    /// Only the top evidence sentence is available and must be chosen.
    Top1,
    /// Titles only; decoded documents follow the `t` best documents of `D_t`.
    NotJoint,
    /// `t + 1` distinct titles, no sentence identifiers.
    JointDocs,
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "joint" => Ok(Self::Joint),
            "top1" | "top-1" => Ok(Self::Top1),
            "not-joint" => Ok(Self::NotJoint),
            "joint-docs" => Ok(Self::JointDocs),
            other => Err(Error::Config(format!(
                "unknown decoder mode {other:?} (expected joint, top1, not-joint or joint-docs)"
            ))),
        }
    }
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Joint => "joint",
            Self::Top1 => "top1",
            Self::NotJoint => "not-joint",
            Self::JointDocs => "joint-docs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    /// Sentence identifiers in the order they were generated.
    pub emitted_ids: Vec<String>,
    /// The same identifiers as a set, sorted by index.
    pub sentence_ids: Vec<String>,
    /// Documents the sequence conditions on: the sources of its sentences,
    /// or the carried-over documents of the not-joint mode.
    pub conditioning_docs: Vec<String>,
    /// Decoded titles in order.
    pub titles: Vec<String>,
    pub tokens: Vec<String>,
    pub logprob: f64,
}

impl ScoredSequence {
    /// The last decoded title, `d_{t+1}`.
    pub fn doc_title(&self) -> &str {
        self.titles.last().map_or("", String::as_str)
    }

    pub fn doc_set(&self) -> BTreeSet<String> {
        self.conditioning_docs
            .iter()
            .chain(self.titles.iter())
            .cloned()
            .collect()
    }

    /// Surface form without end markers, e.g. `E2 [ Seth Meyers ]`.
    pub fn rendered(&self) -> String {
        self.tokens
            .iter()
            .filter(|t| *t != END_OF_TITLE)
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn id_key(ids: &[String]) -> Vec<usize> {
    ids.iter().map(|i| parse_sentence_id(i).unwrap_or(usize::MAX)).collect()
}

/// Descending score, then sorted identifiers, titles and emission order.
pub fn compare_sequences(a: &ScoredSequence, b: &ScoredSequence) -> Ordering {
    b.logprob
        .total_cmp(&a.logprob)
        .then_with(|| id_key(&a.sentence_ids).cmp(&id_key(&b.sentence_ids)))
        .then_with(|| a.titles.cmp(&b.titles))
        .then_with(|| id_key(&a.emitted_ids).cmp(&id_key(&b.emitted_ids)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocSetScore {
    /// Sorted titles.
    pub doc_set: Vec<String>,
    pub logprob: f64,
}

/// Shape of the legal outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grammar {
    pub required_ids: usize,
    pub title_segments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_frontier: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_frontier: 250_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Decoded {
    pub sequences: Vec<ScoredSequence>,
    pub diagnostic: Option<String>,
    pub scorer_calls: usize,
}

struct Hypothesis {
    logprob: f64,
    tokens: Vec<String>,
    state: MarkupState,
}

impl PartialEq for Hypothesis {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Hypothesis {}

impl PartialOrd for Hypothesis {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hypothesis {
    // max-heap: higher score first, then the lexicographically smaller prefix
    fn cmp(&self, other: &Self) -> Ordering {
        self.logprob
            .total_cmp(&other.logprob)
            .then_with(|| other.tokens.cmp(&self.tokens))
    }
}

fn finish(h: Hypothesis, ctx: &ScoringContext, trie: &DecoderTrie, carried: &[String]) -> ScoredSequence {
    let emitted_ids = h.state.emitted_ids().to_vec();
    let mut sentence_ids = emitted_ids.clone();
    sentence_ids.sort_by_key(|i| parse_sentence_id(i));
    let conditioning_docs = if carried.is_empty() {
        sentence_ids
            .iter()
            .filter_map(|id| ctx.sentence(id).map(|s| s.doc_title.clone()))
            .collect()
    } else {
        carried.to_vec()
    };
    ScoredSequence {
        emitted_ids,
        sentence_ids,
        conditioning_docs,
        titles: h.state.titles().iter().map(|&o| trie.title(o).to_owned()).collect(),
        tokens: h.tokens,
        logprob: h.logprob,
    }
}

/// Top-`q` legal sequences under `grammar`, best first.
pub fn decode_grammar(
    scorer: &dyn TokenScorer,
    trie: &DecoderTrie,
    ctx: &ScoringContext,
    grammar: Grammar,
    q: usize,
    limits: SearchLimits,
) -> Result<Decoded> {
    decode_carrying(scorer, trie, ctx, grammar, q, limits, &[])
}

fn decode_carrying(
    scorer: &dyn TokenScorer,
    trie: &DecoderTrie,
    ctx: &ScoringContext,
    grammar: Grammar,
    q: usize,
    limits: SearchLimits,
    carried: &[String],
) -> Result<Decoded> {
    if q == 0 {
        return Err(Error::Contract("beam size must be >= 1".into()));
    }
    if grammar.title_segments == 0 {
        return Err(Error::Contract("at least one title segment is required".into()));
    }
    ctx.validate()?;
    if ctx.evidence.len() < grammar.required_ids {
        return Err(Error::Contract(format!(
            "{} sentence identifiers required but only {} evidence sentences",
            grammar.required_ids,
            ctx.evidence.len()
        )));
    }
    if trie.title_count() < grammar.title_segments {
        return Ok(Decoded {
            diagnostic: Some(format!(
                "no legal completion: trie holds {} titles, {} needed",
                trie.title_count(),
                grammar.title_segments
            )),
            ..Decoded::default()
        });
    }

    let ids = ctx.evidence_ids();
    let mut frontier = BinaryHeap::new();
    frontier.push(Hypothesis {
        logprob: 0.0,
        tokens: Vec::new(),
        state: MarkupState::with_title_segments(grammar.required_ids, grammar.title_segments),
    });
    let mut done = Vec::new();
    let mut calls = 0;
    let mut pruned = false;

    while let Some(h) = frontier.pop() {
        if h.state.is_closed() {
            done.push(finish(h, ctx, trie, carried));
            if done.len() == q {
                break;
            }
            continue;
        }
        let allowed = h.state.allowed_tokens(trie, &ids);
        let logprobs = match allowed.len() {
            0 => continue,
            1 => vec![0.0],
            _ => {
                calls += 1;
                let lp = scorer.next_token_logprobs(ctx, &h.tokens, &allowed)?;
                if lp.len() != allowed.len() {
                    return Err(Error::Protocol(format!(
                        "scorer returned {} values for {} tokens",
                        lp.len(),
                        allowed.len()
                    )));
                }
                lp
            }
        };
        for (token, lp) in allowed.into_iter().zip(logprobs) {
            if lp.is_nan() || lp > 1e-12 {
                return Err(Error::Protocol(format!("invalid log-probability {lp} for {token:?}")));
            }
            let state = h.state.advance(trie, &ids, &token)?;
            let mut tokens = h.tokens.clone();
            tokens.push(token);
            frontier.push(Hypothesis {
                logprob: h.logprob + lp.min(0.0),
                tokens,
                state,
            });
        }
        if frontier.len() > limits.max_frontier {
            let mut kept = std::mem::take(&mut frontier).into_sorted_vec();
            kept.drain(..kept.len() - limits.max_frontier);
            frontier = kept.into();
            pruned = true;
        }
    }

    done.sort_by(compare_sequences);
    let diagnostic = if pruned {
        Some(format!("frontier pruned to {} hypotheses; results are approximate", limits.max_frontier))
    } else if done.is_empty() {
        Some("no legal completion".to_owned())
    } else {
        None
    };
    Ok(Decoded {
        sequences: done,
        diagnostic,
        scorer_calls: calls,
    })
}

/// Joint decoding of `t` evidence sentences and the next document.
pub fn decode(
    scorer: &dyn TokenScorer,
    trie: &DecoderTrie,
    ctx: &ScoringContext,
    t: usize,
    q: usize,
) -> Result<Decoded> {
    if t == 0 {
        return Err(Error::Contract("hop t must be >= 1".into()));
    }
    decode_grammar(
        scorer,
        trie,
        ctx,
        Grammar {
            required_ids: t,
            title_segments: 1,
        },
        q,
        SearchLimits::default(),
    )
}

/// Groups sequences by document set and keeps the `k` most probable sets.
pub fn aggregate(sequences: &[ScoredSequence], k: usize) -> Vec<DocSetScore> {
    let mut groups: BTreeMap<Vec<String>, Vec<f64>> = BTreeMap::new();
    for s in sequences {
        groups
            .entry(s.doc_set().into_iter().collect())
            .or_default()
            .push(s.logprob);
    }
    let mut out: Vec<DocSetScore> = groups
        .into_iter()
        .map(|(doc_set, lps)| DocSetScore {
            doc_set,
            logprob: logsumexp(&lps),
        })
        .collect();
    out.sort_by(|a, b| b.logprob.total_cmp(&a.logprob).then_with(|| a.doc_set.cmp(&b.doc_set)));
    out.truncate(k);
    out
}

/// Documents of ranked sets, deduplicated, first position kept.
pub fn flatten_doc_sets<'a>(sets: impl IntoIterator<Item = &'a [String]>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for set in sets {
        for d in set {
            if seen.insert(d.clone()) {
                out.push(d.clone());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutput {
    pub mode: DecodeMode,
    pub sequences: Vec<ScoredSequence>,
    pub doc_sets: Vec<DocSetScore>,
    /// Flat document ranking implied by the mode.
    pub ranked_documents: Vec<String>,
    pub diagnostic: Option<String>,
    pub scorer_calls: usize,
}

/// Decodes hop `t + 1` in the given mode.
///
/// `prior_documents` is the flat document ranking of `D_t`; the not-joint
/// mode keeps its first `t` entries ahead of the decoded titles.
#[allow(clippy::too_many_arguments)]
pub fn decode_variant(
    mode: DecodeMode,
    scorer: &dyn TokenScorer,
    trie: &DecoderTrie,
    ctx: &ScoringContext,
    t: usize,
    q: usize,
    k: usize,
    prior_documents: &[String],
) -> Result<VariantOutput> {
    if t == 0 {
        return Err(Error::Contract("hop t must be >= 1".into()));
    }
    let limits = SearchLimits::default();
    let (decoded, carried) = match mode {
        DecodeMode::Joint => (decode(scorer, trie, ctx, t, q)?, Vec::new()),
        DecodeMode::Top1 => {
            let grammar = Grammar {
                required_ids: 1,
                title_segments: 1,
            };
            (decode_grammar(scorer, trie, &ctx.top1(), grammar, q, limits)?, Vec::new())
        }
        DecodeMode::NotJoint => {
            let carried: Vec<String> = flatten_doc_sets([prior_documents]).into_iter().take(t).collect();
            let grammar = Grammar {
                required_ids: 0,
                title_segments: 1,
            };
            (decode_carrying(scorer, trie, ctx, grammar, q, limits, &carried)?, carried)
        }
        DecodeMode::JointDocs => {
            let grammar = Grammar {
                required_ids: 0,
                title_segments: t + 1,
            };
            (decode_grammar(scorer, trie, ctx, grammar, q, limits)?, Vec::new())
        }
    };
    let doc_sets = aggregate(&decoded.sequences, k);
    let ranked_documents = match mode {
        DecodeMode::NotJoint => {
            let decoded_titles: Vec<String> = decoded.sequences.iter().map(|s| s.doc_title().to_owned()).collect();
            flatten_doc_sets([carried.as_slice(), decoded_titles.as_slice()])
        }
        _ => flatten_doc_sets(doc_sets.iter().map(|s| s.doc_set.as_slice())),
    };
    Ok(VariantOutput {
        mode,
        sequences: decoded.sequences,
        doc_sets,
        ranked_documents,
        diagnostic: decoded.diagnostic,
        scorer_calls: decoded.scorer_calls,
    })
}
