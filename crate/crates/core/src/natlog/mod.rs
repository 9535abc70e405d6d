//! Natural-logic sufficiency proofs.
//!
//! A proof mutates each claim span into an evidence span under a natural
//! logic operator. Evidence is insufficient iff some mutation carries
//! independence (`#`): that claim span has no related evidence. Refuting
//! evidence (negation, alternation) is sufficient evidence.
//!
//! Proof generators may emit the wider seven-operator alphabet; entailment
//! and cover are not conclusive for sufficiency and are mapped to
//! independence by [`repair_proof`] (or [`Proof::gate_normalized`]) before
//! a sufficiency decision is taken.

mod align;
mod lexicon;
mod repair;
mod similarity;
mod syntax;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reranker::RankedEvidence;

pub use align::{align_and_prove, is_negation_marker, NEGATION_MARKERS};
pub use lexicon::{Lexicon, Relation};
pub use repair::repair_proof;
pub use similarity::span_similarity_reference;
pub use syntax::{parse_proof, render_proof, render_proof_ascii};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NatOp {
    Equivalence,
    Negation,
    Alternation,
    Independence,
    ForwardEntailment,
    ReverseEntailment,
    Cover,
}

impl NatOp {
    pub const SUFFICIENCY: [NatOp; 4] = [
        NatOp::Equivalence,
        NatOp::Negation,
        NatOp::Alternation,
        NatOp::Independence,
    ];

    pub const ALL: [NatOp; 7] = [
        NatOp::Equivalence,
        NatOp::Negation,
        NatOp::Alternation,
        NatOp::Independence,
        NatOp::ForwardEntailment,
        NatOp::ReverseEntailment,
        NatOp::Cover,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            NatOp::Equivalence => "≡",
            NatOp::Negation => "¬",
            NatOp::Alternation => "⇃↾",
            NatOp::Independence => "#",
            NatOp::ForwardEntailment => "⊑",
            NatOp::ReverseEntailment => "⊒",
            NatOp::Cover => "⌣",
        }
    }

    pub fn ascii(self) -> &'static str {
        match self {
            NatOp::Equivalence => "EQ",
            NatOp::Negation => "NEG",
            NatOp::Alternation => "ALT",
            NatOp::Independence => "IND",
            NatOp::ForwardEntailment => "FWD",
            NatOp::ReverseEntailment => "REV",
            NatOp::Cover => "COV",
        }
    }

    pub fn from_token(token: &str) -> Option<NatOp> {
        let op = match token {
            "≡" => NatOp::Equivalence,
            "¬" => NatOp::Negation,
            "⇃↾" | "⇂↾" | "↿⇂" => NatOp::Alternation,
            "#" => NatOp::Independence,
            "⊑" => NatOp::ForwardEntailment,
            "⊒" => NatOp::ReverseEntailment,
            "⌣" | "‿" => NatOp::Cover,
            _ => match token.to_ascii_uppercase().as_str() {
                "EQ" => NatOp::Equivalence,
                "NEG" => NatOp::Negation,
                "ALT" => NatOp::Alternation,
                "IND" => NatOp::Independence,
                "FWD" | "FE" => NatOp::ForwardEntailment,
                "REV" | "RE" => NatOp::ReverseEntailment,
                "COV" | "COVER" => NatOp::Cover,
                _ => return None,
            },
        };
        Some(op)
    }

    /// Whether the operator belongs to the four-operator sufficiency alphabet.
    pub fn is_sufficiency_op(self) -> bool {
        Self::SUFFICIENCY.contains(&self)
    }
}

impl fmt::Display for NatOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutation {
    pub claim_span: String,
    pub evidence_span: String,
    pub op: NatOp,
}

impl Mutation {
    pub fn new(claim_span: impl Into<String>, evidence_span: impl Into<String>, op: NatOp) -> Self {
        Self {
            claim_span: claim_span.into(),
            evidence_span: evidence_span.into(),
            op,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub mutations: Vec<Mutation>,
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Proof {
    pub fn new(mutations: Vec<Mutation>) -> Self {
        Self { mutations }
    }

    pub fn ops(&self) -> Vec<NatOp> {
        self.mutations.iter().map(|m| m.op).collect()
    }

    /// Concatenated claim spans, whitespace-normalized.
    pub fn claim_text(&self) -> String {
        squash(
            &self
                .mutations
                .iter()
                .map(|m| m.claim_span.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        )
    }

    /// Whether the claim spans reconstruct `claim` up to whitespace.
    pub fn covers(&self, claim: &str) -> bool {
        self.claim_text() == squash(claim)
    }

    pub fn has_extended_ops(&self) -> bool {
        self.mutations.iter().any(|m| !m.op.is_sufficiency_op())
    }

    /// Copy with entailment and cover operators replaced by independence.
    pub fn gate_normalized(&self) -> Proof {
        Proof::new(
            self.mutations
                .iter()
                .map(|m| Mutation {
                    op: if m.op.is_sufficiency_op() {
                        m.op
                    } else {
                        NatOp::Independence
                    },
                    ..m.clone()
                })
                .collect(),
        )
    }
}

impl fmt::Display for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_proof(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Sufficiency {
    Sufficient,
    Insufficient,
}

impl fmt::Display for Sufficiency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sufficiency::Sufficient => "SUFFICIENT",
            Sufficiency::Insufficient => "INSUFFICIENT",
        })
    }
}

/// Insufficient iff any mutation is independence.
pub fn predict_sufficiency(proof: &Proof) -> Result<Sufficiency> {
    if let Some(m) = proof.mutations.iter().find(|m| !m.op.is_sufficiency_op()) {
        return Err(Error::Contract(format!(
            "operator {} on span {:?} is outside the sufficiency alphabet; repair the proof first",
            m.op, m.claim_span
        )));
    }
    Ok(if proof.mutations.iter().any(|m| m.op == NatOp::Independence) {
        Sufficiency::Insufficient
    } else {
        Sufficiency::Sufficient
    })
}

/// Plain-English reading of an operator for non-expert readers.
pub fn paraphrase(op: NatOp) -> Result<&'static str> {
    match op {
        NatOp::Equivalence => Ok("Equivalent Spans"),
        NatOp::Negation => Ok("Evidence span refutes claim span"),
        NatOp::Alternation => Ok("Evidence span contradicts the claim span"),
        NatOp::Independence => Ok("Unrelated claim span and evidence span"),
        other => Err(Error::Contract(format!("no paraphrase for operator {other}"))),
    }
}

/// Produces a sufficiency proof for a claim over the current evidence.
pub trait ProofGenerator {
    fn prove(&self, claim: &str, evidence: &RankedEvidence, hop: usize) -> Result<Proof>;
}

impl<T: ProofGenerator + ?Sized> ProofGenerator for &T {
    fn prove(&self, claim: &str, evidence: &RankedEvidence, hop: usize) -> Result<Proof> {
        (**self).prove(claim, evidence, hop)
    }
}

impl<T: ProofGenerator + ?Sized> ProofGenerator for Box<T> {
    fn prove(&self, claim: &str, evidence: &RankedEvidence, hop: usize) -> Result<Proof> {
        (**self).prove(claim, evidence, hop)
    }
}

/// Lexical alignment against the evidence sentences and titles.
#[derive(Debug, Clone, Default)]
pub struct ReferenceProver {
    pub lexicons: Vec<Lexicon>,
}

impl ReferenceProver {
    pub fn new(lexicons: Vec<Lexicon>) -> Self {
        Self { lexicons }
    }
}

impl ProofGenerator for ReferenceProver {
    fn prove(&self, claim: &str, evidence: &RankedEvidence, _hop: usize) -> Result<Proof> {
        Ok(align_and_prove(claim, evidence, &self.lexicons))
    }
}

/// Ignores the evidence and returns a one-mutation proof with a fixed
/// outcome. Useful as the always-sufficient and always-insufficient
/// baselines for the gate.
#[derive(Debug, Clone, Copy)]
pub struct FixedProver(pub Sufficiency);

impl ProofGenerator for FixedProver {
    fn prove(&self, claim: &str, _evidence: &RankedEvidence, _hop: usize) -> Result<Proof> {
        let claim = squash(claim);
        if claim.is_empty() {
            return Ok(Proof::default());
        }
        let op = match self.0 {
            Sufficiency::Sufficient => NatOp::Equivalence,
            Sufficiency::Insufficient => NatOp::Independence,
        };
        let evidence = if op == NatOp::Equivalence { claim.clone() } else { String::new() };
        Ok(Proof::new(vec![Mutation::new(claim, evidence, op)]))
    }
}
