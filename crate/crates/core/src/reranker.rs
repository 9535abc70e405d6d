//! Sentence reranking: keeps the top `l` sentences of the candidate
//! documents as the evidence `E_t`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};
use crate::decoder_trie::sentence_id;
use crate::error::{Error, Result};
use crate::sparse_index::{Bm25Params, InvertedIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSentence {
    pub id: String,
    pub doc_title: String,
    pub sent_index: usize,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedEvidence {
    pub entries: Vec<EvidenceSentence>,
    pub limit: usize,
}

impl RankedEvidence {
    pub fn empty(limit: usize) -> Self {
        Self {
            entries: Vec::new(),
            limit,
        }
    }

    /// Evidence in the given order, identifiers assigned by position.
    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> Self {
        let entries: Vec<EvidenceSentence> = sentences
            .into_iter()
            .enumerate()
            .map(|(i, s)| EvidenceSentence {
                id: sentence_id(i + 1),
                doc_title: s.doc_title.clone(),
                sent_index: s.sent_index,
                text: s.text.clone(),
                score: 0.0,
            })
            .collect();
        let limit = entries.len();
        Self { entries, limit }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.text.as_str())
    }

    /// Distinct source documents in rank order.
    pub fn documents(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| seen.insert(e.doc_title.as_str()))
            .map(|e| e.doc_title.clone())
            .collect()
    }

    pub fn get(&self, id: &str) -> Option<&EvidenceSentence> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Scores candidate sentences for a claim. Higher is better.
pub trait SentenceScorer {
    fn score_sentences(
        &self,
        claim: &str,
        prior: &RankedEvidence,
        candidates: &[&Sentence],
        hop: usize,
    ) -> Result<Vec<f64>>;
}

impl<T: SentenceScorer + ?Sized> SentenceScorer for &T {
    fn score_sentences(&self, claim: &str, prior: &RankedEvidence, candidates: &[&Sentence], hop: usize) -> Result<Vec<f64>> {
        (**self).score_sentences(claim, prior, candidates, hop)
    }
}

impl<T: SentenceScorer + ?Sized> SentenceScorer for Box<T> {
    fn score_sentences(&self, claim: &str, prior: &RankedEvidence, candidates: &[&Sentence], hop: usize) -> Result<Vec<f64>> {
        (**self).score_sentences(claim, prior, candidates, hop)
    }
}

/// BM25 of the claim, extended with the prior evidence texts, against each
/// candidate sentence taken as its own document.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceReranker {
    pub params: Bm25Params,
}

impl ReferenceReranker {
    pub fn query(claim: &str, prior: &RankedEvidence) -> String {
        std::iter::once(claim)
            .chain(prior.texts())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl SentenceScorer for ReferenceReranker {
    fn score_sentences(&self, claim: &str, prior: &RankedEvidence, candidates: &[&Sentence], _hop: usize) -> Result<Vec<f64>> {
        let index = InvertedIndex::from_texts(
            candidates.iter().map(|s| (s.doc_title.clone(), s.text.clone())),
            self.params,
        )?;
        Ok(index.score_all(&Self::query(claim, prior)))
    }
}

/// Sentences of the distinct documents of `candidate_sets`, in first-mention
/// order. Titles missing from the corpus are skipped.
pub fn candidate_sentences<'c>(corpus: &'c Corpus, candidate_sets: &[Vec<String>]) -> Vec<&'c Sentence> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for title in candidate_sets.iter().flatten() {
        if !seen.insert(title.as_str()) {
            continue;
        }
        match corpus.document(title) {
            Some(doc) => out.extend(doc.sentences.iter()),
            None => log::warn!("candidate document {title:?} is not in the corpus"),
        }
    }
    out
}

/// Ranks every sentence of the candidate documents and keeps the top `l`.
///
/// Ties are broken by `(title, sentence index)`; `E1` is always the best
/// sentence.
pub fn rerank(
    claim: &str,
    prior: &RankedEvidence,
    candidate_sets: &[Vec<String>],
    corpus: &Corpus,
    l: usize,
    backend: &dyn SentenceScorer,
    hop: usize,
) -> Result<RankedEvidence> {
    if l == 0 {
        return Err(Error::Config("l must be >= 1".into()));
    }
    let candidates = candidate_sentences(corpus, candidate_sets);
    if candidates.is_empty() {
        return Ok(RankedEvidence::empty(l));
    }
    let scores = backend.score_sentences(claim, prior, &candidates, hop)?;
    if scores.len() != candidates.len() {
        return Err(Error::Protocol(format!(
            "reranker returned {} scores for {} sentences",
            scores.len(),
            candidates.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Protocol("reranker returned NaN".into()));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| candidates[a].doc_title.cmp(&candidates[b].doc_title))
            .then_with(|| candidates[a].sent_index.cmp(&candidates[b].sent_index))
    });
    let entries = order
        .into_iter()
        .take(l)
        .enumerate()
        .map(|(rank, i)| EvidenceSentence {
            id: sentence_id(rank + 1),
            doc_title: candidates[i].doc_title.clone(),
            sent_index: candidates[i].sent_index,
            text: candidates[i].text.clone(),
            score: scores[i],
        })
        .collect();
    Ok(RankedEvidence { entries, limit: l })
}
