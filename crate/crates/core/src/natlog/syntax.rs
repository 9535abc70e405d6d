//! Text form of proofs: `{ claim span } [ evidence span ] OP`, repeated.

use super::{Mutation, NatOp, Proof};
use crate::error::{Error, Result};

const DELIMITERS: [char; 4] = ['{', '}', '[', ']'];

fn span(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.replace(DELIMITERS, ""))
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn render_with(proof: &Proof, op: impl Fn(NatOp) -> &'static str) -> String {
    proof
        .mutations
        .iter()
        .map(|m| {
            let evidence = span(&m.evidence_span);
            if evidence.is_empty() {
                format!("{{ {} }} [ ] {}", span(&m.claim_span), op(m.op))
            } else {
                format!("{{ {} }} [ {} ] {}", span(&m.claim_span), evidence, op(m.op))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Canonical rendering with the Unicode operator symbols. Delimiter
/// characters inside spans are dropped.
pub fn render_proof(proof: &Proof) -> String {
    render_with(proof, NatOp::symbol)
}

/// Canonical rendering with the ASCII operator aliases.
pub fn render_proof_ascii(proof: &Proof) -> String {
    render_with(proof, NatOp::ascii)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::ProofSyntax {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(found) if found == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(found) => self.err(format!("expected {c:?}, found {found:?}")),
            None => self.err(format!("expected {c:?}, found end of input")),
        }
    }

    fn span_until(&mut self, close: char) -> Result<String> {
        let start = self.pos;
        for (i, c) in self.text[start..].char_indices() {
            if c == close {
                self.pos = start + i + c.len_utf8();
                return Ok(span(&self.text[start..start + i]));
            }
            if DELIMITERS.contains(&c) {
                self.pos = start + i;
                return self.err(format!("unexpected {c:?} inside span"));
            }
        }
        self.pos = self.text.len();
        self.err(format!("unbalanced span: missing {close:?}"))
    }

    fn op(&mut self) -> Result<NatOp> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        let end = rest
            .find(|c: char| c.is_whitespace() || c == '{')
            .unwrap_or(rest.len());
        let token = &rest[..end];
        if token.is_empty() {
            return self.err("missing operator after evidence span");
        }
        match NatOp::from_token(token) {
            Some(op) => {
                self.pos = start + end;
                Ok(op)
            }
            None => self.err(format!("unknown operator {token:?}")),
        }
    }
}

pub fn parse_proof(text: &str) -> Result<Proof> {
    let mut cur = Cursor { text, pos: 0 };
    let mut mutations = Vec::new();
    loop {
        cur.skip_ws();
        if cur.peek().is_none() {
            break;
        }
        cur.expect('{')?;
        let claim_start = cur.pos;
        let claim_span = cur.span_until('}')?;
        if claim_span.is_empty() {
            cur.pos = claim_start;
            return cur.err("empty claim span");
        }
        cur.expect('[')?;
        let evidence_span = cur.span_until(']')?;
        let op = cur.op()?;
        mutations.push(Mutation {
            claim_span,
            evidence_span,
            op,
        });
    }
    Ok(Proof::new(mutations))
}
