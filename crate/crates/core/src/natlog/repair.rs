//! Turns proofs over the extended operator alphabet into sufficiency proofs
//! with a prescribed outcome, for building training pairs.

use super::align::is_negation_marker;
use super::lexicon::{any_antonym, any_synonym, max_phrase_len, Lexicon};
use super::{predict_sufficiency, NatOp, Proof, Sufficiency};
use crate::corpus::Label;
use crate::error::{Error, Result};

fn ngrams(text: &str, max_len: usize) -> Vec<String> {
    let keys: Vec<String> = text
        .split_whitespace()
        .map(Lexicon::key)
        .filter(|k| !k.is_empty())
        .collect();
    let mut out = Vec::new();
    for i in 0..keys.len() {
        for len in 1..=max_len.min(keys.len() - i) {
            out.push(keys[i..i + len].join(" "));
        }
    }
    out
}

fn negations(text: &str) -> usize {
    text.split_whitespace()
        .filter(|w| is_negation_marker(&Lexicon::key(w)))
        .count()
}

fn lexical_op(claim_span: &str, evidence_span: &str, lexicons: &[Lexicon]) -> Option<NatOp> {
    if evidence_span.trim().is_empty() {
        return None;
    }
    let max_len = max_phrase_len(lexicons).max(1);
    let (c, e) = (ngrams(claim_span, max_len), ngrams(evidence_span, max_len));
    let pairs = || c.iter().flat_map(|a| e.iter().map(move |b| (a, b)));
    if pairs().any(|(a, b)| any_synonym(lexicons, a, b)) {
        Some(NatOp::Equivalence)
    } else if pairs().any(|(a, b)| any_antonym(lexicons, a, b)) {
        Some(NatOp::Alternation)
    } else if negations(evidence_span) % 2 != negations(claim_span) % 2 {
        Some(NatOp::Negation)
    } else {
        None
    }
}

/// Repairs `proof` so that its sufficiency prediction equals `target`.
///
/// Entailment and cover operators become independence. For an insufficient
/// target with no independence left, the mutation whose spans are least
/// similar (earliest on ties) becomes independence. For a sufficient target
/// each independence mutation is first reassigned from the lexicons
/// (synonym to equivalence, antonym to alternation, a negation marker to
/// negation); the rest become equivalence for supported claims and negation
/// for refuted ones.
pub fn repair_proof(
    proof: &Proof,
    target: Sufficiency,
    label: Label,
    lexicons: &[Lexicon],
    similarity: &dyn Fn(&str, &str) -> f64,
) -> Result<Proof> {
    let mut out = proof.gate_normalized();
    match target {
        Sufficiency::Insufficient => {
            if out.mutations.is_empty() {
                return Err(Error::Contract("cannot make an empty proof insufficient".into()));
            }
            if !out.mutations.iter().any(|m| m.op == NatOp::Independence) {
                let mut worst = 0;
                let mut worst_sim = f64::INFINITY;
                for (i, m) in out.mutations.iter().enumerate() {
                    let sim = similarity(&m.claim_span, &m.evidence_span);
                    if sim.is_nan() {
                        return Err(Error::Contract(format!(
                            "similarity is NaN for span {:?}",
                            m.claim_span
                        )));
                    }
                    if sim < worst_sim {
                        worst = i;
                        worst_sim = sim;
                    }
                }
                out.mutations[worst].op = NatOp::Independence;
            }
        }
        Sufficiency::Sufficient => {
            let fallback = match label {
                Label::Supported => NatOp::Equivalence,
                Label::Refuted => NatOp::Negation,
                Label::Nei => {
                    return Err(Error::Contract(
                        "sufficient proofs need a SUPPORTED or REFUTED label".into(),
                    ))
                }
            };
            for m in out.mutations.iter_mut().filter(|m| m.op == NatOp::Independence) {
                m.op = lexical_op(&m.claim_span, &m.evidence_span, lexicons).unwrap_or(fallback);
            }
        }
    }
    debug_assert_eq!(predict_sufficiency(&out).ok(), Some(target));
    Ok(out)
}
