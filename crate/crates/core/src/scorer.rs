//! Next-token scoring for constrained decoding.
//!
//! A [`TokenScorer`] returns log-probabilities over the legal continuations
//! of a prefix, renormalized so they form a distribution over exactly that
//! set. Neural scorers live out of process (see [`crate::protocol`]);
//! [`ReferenceScorer`] is a deterministic lexical stand-in.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::decoder_trie::{parse_sentence_id, sentence_id, DecoderTrie, CLOSE_BRACKET, END_OF_TITLE, OPEN_BRACKET};
use crate::error::{Error, Result};
use crate::reranker::RankedEvidence;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSentence {
    pub id: String,
    pub doc_title: String,
    pub text: String,
}

/// Claim plus the identified evidence sentences a hypothesis may condition on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringContext {
    pub claim: String,
    pub evidence: Vec<ContextSentence>,
    pub hop: usize,
    #[serde(default)]
    pub hyperlinks: bool,
}

impl ScoringContext {
    pub fn new(claim: impl Into<String>, evidence: &RankedEvidence, hop: usize) -> Self {
        Self::from_sentences(
            claim,
            evidence.entries.iter().map(|e| (e.doc_title.clone(), e.text.clone())),
            hop,
        )
    }

    /// Assigns identifiers `E1..El` in the given order.
    pub fn from_sentences(
        claim: impl Into<String>,
        sentences: impl IntoIterator<Item = (String, String)>,
        hop: usize,
    ) -> Self {
        Self {
            claim: claim.into(),
            evidence: sentences
                .into_iter()
                .enumerate()
                .map(|(i, (doc_title, text))| ContextSentence {
                    id: sentence_id(i + 1),
                    doc_title,
                    text,
                })
                .collect(),
            hop,
            hyperlinks: false,
        }
    }

    pub fn evidence_ids(&self) -> Vec<String> {
        self.evidence.iter().map(|e| e.id.clone()).collect()
    }

    pub fn sentence(&self, id: &str) -> Option<&ContextSentence> {
        let i = parse_sentence_id(id)?;
        self.evidence.get(i - 1).filter(|s| s.id == id)
    }

    /// The context restricted to the top-ranked sentence.
    pub fn top1(&self) -> Self {
        Self {
            evidence: self.evidence.iter().take(1).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.evidence.iter().enumerate() {
            if s.id != sentence_id(i + 1) {
                return Err(Error::Contract(format!(
                    "evidence identifiers must be E1..El in order, found {:?} at position {}",
                    s.id,
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

pub trait TokenScorer {
    /// Log-probabilities aligned with `allowed`, normalized over it.
    fn next_token_logprobs(&self, ctx: &ScoringContext, prefix: &[String], allowed: &[String]) -> Result<Vec<f64>>;
}

impl<T: TokenScorer + ?Sized> TokenScorer for &T {
    fn next_token_logprobs(&self, ctx: &ScoringContext, prefix: &[String], allowed: &[String]) -> Result<Vec<f64>> {
        (**self).next_token_logprobs(ctx, prefix, allowed)
    }
}

impl<T: TokenScorer + ?Sized> TokenScorer for Box<T> {
    fn next_token_logprobs(&self, ctx: &ScoringContext, prefix: &[String], allowed: &[String]) -> Result<Vec<f64>> {
        (**self).next_token_logprobs(ctx, prefix, allowed)
    }
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Renormalizes arbitrary log-scores into log-probabilities.
pub fn log_softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.iter().any(|s| s.is_nan() || *s == f64::INFINITY) {
        return Err(Error::Protocol(format!("invalid scores {scores:?}")));
    }
    let z = logsumexp(scores);
    if z == f64::NEG_INFINITY {
        return Err(Error::Protocol("every allowed token has zero probability".into()));
    }
    Ok(scores.iter().map(|s| s - z).collect())
}

/// Log-probabilities proportional to non-negative weights.
pub fn log_normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / total).ln()).collect()
}

/// Equal probability for every allowed token.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformScorer;

impl TokenScorer for UniformScorer {
    fn next_token_logprobs(&self, _: &ScoringContext, _: &[String], allowed: &[String]) -> Result<Vec<f64>> {
        if allowed.is_empty() {
            return Err(Error::Contract("empty allowed set".into()));
        }
        Ok(vec![-(allowed.len() as f64).ln(); allowed.len()])
    }
}

/// Lexical surrogate for a fine-tuned generator.
///
/// At each step the weight of a legal token `v` is `λ + affinity(v)`:
///
/// - sentence identifier: number of distinct tokens the sentence shares
///   with the claim;
/// - title token or end marker: number of distinct context tokens that occur
///   in some title reachable through `v`. The context is the claim plus the
///   sentences already chosen in the prefix, or plus all evidence when the
///   prefix chose none;
/// - markup: 0.
#[derive(Debug, Clone)]
pub struct ReferenceScorer {
    smoothing: f64,
    trie: DecoderTrie,
    /// lexical token -> sorted title ordinals containing it
    postings: HashMap<String, Vec<u32>>,
}

pub fn fit_reference_scorer(corpus: &Corpus, smoothing: f64) -> Result<ReferenceScorer> {
    ReferenceScorer::fit(corpus, smoothing)
}

impl ReferenceScorer {
    pub fn fit(corpus: &Corpus, smoothing: f64) -> Result<Self> {
        let titles: Vec<&str> = corpus.titles().collect();
        Self::from_titles(&titles, smoothing)
    }

    pub fn from_titles<S: AsRef<str>>(titles: &[S], smoothing: f64) -> Result<Self> {
        if smoothing.is_nan() || smoothing <= 0.0 {
            return Err(Error::Config(format!("smoothing must be > 0, got {smoothing}")));
        }
        let trie = DecoderTrie::build(titles)?;
        let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
        for (ordinal, title) in trie.titles().iter().enumerate() {
            let distinct: HashSet<String> = tokenize(title).into_iter().collect();
            for tok in distinct {
                postings.entry(tok).or_default().push(ordinal as u32);
            }
        }
        Ok(Self {
            smoothing,
            trie,
            postings,
        })
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    fn range_affinity(&self, context: &HashSet<String>, range: std::ops::Range<u32>) -> usize {
        context
            .iter()
            .filter(|tok| {
                self.postings.get(tok.as_str()).is_some_and(|list| {
                    let i = list.partition_point(|&o| o < range.start);
                    i < list.len() && list[i] < range.end
                })
            })
            .count()
    }

    /// Raw affinities aligned with `allowed`.
    pub fn affinities(&self, ctx: &ScoringContext, prefix: &[String], allowed: &[String]) -> Vec<f64> {
        let open = prefix.iter().rposition(|t| t == OPEN_BRACKET);
        let close = prefix.iter().rposition(|t| t == CLOSE_BRACKET);
        let in_title = match (open, close) {
            (Some(o), Some(c)) => o > c,
            (Some(_), None) => true,
            _ => false,
        };
        let claim_tokens: HashSet<String> = tokenize(&ctx.claim).into_iter().collect();

        if !in_title {
            return allowed
                .iter()
                .map(|tok| match ctx.sentence(tok) {
                    Some(s) => tokenize(&s.text)
                        .into_iter()
                        .collect::<HashSet<_>>()
                        .intersection(&claim_tokens)
                        .count() as f64,
                    None => 0.0,
                })
                .collect();
        }

        let chosen: Vec<&ContextSentence> = prefix.iter().filter_map(|t| ctx.sentence(t)).collect();
        let mut context = claim_tokens;
        let sources: Vec<&ContextSentence> = if chosen.is_empty() {
            ctx.evidence.iter().collect()
        } else {
            chosen
        };
        for s in sources {
            context.extend(tokenize(&s.text));
        }

        let title_prefix = &prefix[open.expect("title phase has an open bracket") + 1..];
        let node = if title_prefix.last().is_some_and(|t| t == END_OF_TITLE) {
            None
        } else {
            self.trie.walk(title_prefix)
        };
        allowed
            .iter()
            .map(|tok| {
                let Some(node) = node else { return 0.0 };
                let range = if tok == END_OF_TITLE {
                    self.trie.terminal(node).map(|o| o..o + 1)
                } else {
                    self.trie.child(node, tok).map(|c| self.trie.subtree(c))
                };
                range.map_or(0.0, |r| self.range_affinity(&context, r) as f64)
            })
            .collect()
    }
}

impl TokenScorer for ReferenceScorer {
    fn next_token_logprobs(&self, ctx: &ScoringContext, prefix: &[String], allowed: &[String]) -> Result<Vec<f64>> {
        match allowed.len() {
            0 => Err(Error::Contract("empty allowed set".into())),
            1 => Ok(vec![0.0]),
            _ => {
                let weights: Vec<f64> = self
                    .affinities(ctx, prefix, allowed)
                    .into_iter()
                    .map(|a| self.smoothing + a)
                    .collect();
                Ok(log_normalize(&weights))
            }
        }
    }
}
