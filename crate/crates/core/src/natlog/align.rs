//! Lexical alignment prover: chunks the claim greedily against the evidence
//! and labels each chunk from exact matches, negation context and lexicon
//! relations.

use super::lexicon::{any_alternation, any_antonym, any_synonym, max_phrase_len, Lexicon};
use super::{Mutation, NatOp, Proof};
use crate::reranker::RankedEvidence;

pub const NEGATION_MARKERS: [&str; 3] = ["not", "never", "no"];

/// Evidence words inspected before a match when counting negations.
const NEGATION_WINDOW: usize = 3;

const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "by", "to", "for", "with", "from", "and", "or", "as",
    "is", "was", "are", "were", "be", "been", "being", "has", "have", "had", "that", "this",
    "which", "who", "it", "its", "his", "her", "their",
];

pub fn is_negation_marker(key: &str) -> bool {
    NEGATION_MARKERS.contains(&key)
}

#[derive(Debug, Clone)]
struct Word {
    surface: String,
    key: String,
}

impl Word {
    fn is_content(&self) -> bool {
        !self.key.is_empty()
            && !is_negation_marker(&self.key)
            && !FUNCTION_WORDS.contains(&self.key.as_str())
    }
}

fn words(text: &str) -> Vec<Word> {
    text.split_whitespace()
        .map(|w| Word {
            surface: w.to_string(),
            key: Lexicon::key(w),
        })
        .collect()
}

fn surface(words: &[Word]) -> String {
    words.iter().map(|w| w.surface.as_str()).collect::<Vec<_>>().join(" ")
}

fn phrase_key(words: &[Word]) -> String {
    words
        .iter()
        .filter(|w| !w.key.is_empty())
        .map(|w| w.key.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn negated(seq: &[Word], start: usize) -> bool {
    let from = start.saturating_sub(NEGATION_WINDOW);
    seq[from..start].iter().filter(|w| is_negation_marker(&w.key)).count() % 2 == 1
}

struct Match {
    len: usize,
    evidence: String,
    op: NatOp,
}

/// Longest exact run of claim words starting at `i`, preferring an
/// occurrence that is not under negation.
fn exact_match(claim: &[Word], i: usize, evidence: &[Vec<Word>]) -> Option<Match> {
    if claim[i].key.is_empty() {
        return None;
    }
    let mut best: Option<(usize, bool, &[Word])> = None;
    for seq in evidence {
        for j in 0..seq.len() {
            let len = claim[i..]
                .iter()
                .zip(&seq[j..])
                .take_while(|(c, e)| c.key == e.key)
                .count();
            if len == 0 {
                continue;
            }
            let neg = negated(seq, j);
            let better = match best {
                None => true,
                Some((l, n, _)) => len > l || (len == l && n && !neg),
            };
            if better {
                best = Some((len, neg, &seq[j..j + len]));
            }
        }
    }
    best.map(|(len, neg, span)| Match {
        len,
        evidence: surface(span),
        op: if neg { NatOp::Negation } else { NatOp::Equivalence },
    })
}

fn lexicon_match(claim: &[Word], i: usize, evidence: &[Vec<Word>], lexicons: &[Lexicon]) -> Option<Match> {
    let max_len = max_phrase_len(lexicons);
    if max_len == 0 || claim[i].key.is_empty() {
        return None;
    }
    for len in (1..=max_len.min(claim.len() - i)).rev() {
        if claim[i + len - 1].key.is_empty() {
            continue;
        }
        let key = phrase_key(&claim[i..i + len]);
        let mut best: Option<(u8, Match)> = None;
        for seq in evidence {
            for j in 0..seq.len() {
                for elen in 1..=max_len.min(seq.len() - j) {
                    let span = &seq[j..j + elen];
                    let ekey = phrase_key(span);
                    if ekey.is_empty() || ekey == key {
                        continue;
                    }
                    let found = if any_synonym(lexicons, &key, &ekey) {
                        let op = if negated(seq, j) { NatOp::Negation } else { NatOp::Equivalence };
                        Some((0, op))
                    } else if any_antonym(lexicons, &key, &ekey) {
                        Some((1, NatOp::Negation))
                    } else if any_alternation(lexicons, &key, &ekey) {
                        Some((2, NatOp::Alternation))
                    } else {
                        None
                    };
                    if let Some((rank, op)) = found {
                        if best.as_ref().is_none_or(|(r, _)| rank < *r) {
                            best = Some((rank, Match { len, evidence: surface(span), op }));
                        }
                    }
                }
            }
        }
        if let Some((_, m)) = best {
            return Some(m);
        }
    }
    None
}

enum Item {
    Chunk { start: usize, end: usize, evidence: String, op: NatOp },
    Free(usize),
}

struct Chunk {
    start: usize,
    end: usize,
    evidence: String,
    op: NatOp,
}

fn flip(op: NatOp) -> NatOp {
    match op {
        NatOp::Equivalence => NatOp::Negation,
        NatOp::Negation => NatOp::Equivalence,
        other => other,
    }
}

fn join_spans(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a} {b}"),
    }
}

/// Folds equivalence chunks made only of function words into a neighbour.
fn merge_function_chunks(chunks: Vec<Chunk>, words: &[Word]) -> Vec<Chunk> {
    let minor = |c: &Chunk| c.op == NatOp::Equivalence && !words[c.start..c.end].iter().any(Word::is_content);
    let mut out: Vec<Chunk> = Vec::with_capacity(chunks.len());
    let mut carry: Option<Chunk> = None;
    for mut c in chunks {
        if minor(&c) {
            if let Some(prev) = out.last_mut() {
                prev.end = c.end;
                if prev.op != NatOp::Independence {
                    prev.evidence = join_spans(&prev.evidence, &c.evidence);
                }
                continue;
            }
            carry = Some(match carry.take() {
                Some(mut k) => {
                    k.end = c.end;
                    k.evidence = join_spans(&k.evidence, &c.evidence);
                    k
                }
                None => c,
            });
            continue;
        }
        if let Some(k) = carry.take() {
            c.start = k.start;
            if c.op != NatOp::Independence {
                c.evidence = join_spans(&k.evidence, &c.evidence);
            }
        }
        out.push(c);
    }
    out.extend(carry);
    out
}

/// Builds a four-operator proof whose claim spans cover `claim`.
///
/// Runs of unmatched words that contain content words become independence
/// mutations with an empty evidence span. Runs of function words are
/// absorbed into a neighbouring chunk; an odd number of negation markers in
/// such a run flips the chunk it joins between equivalence and negation.
pub fn align_and_prove(claim: &str, evidence: &RankedEvidence, lexicons: &[Lexicon]) -> Proof {
    let claim_words = words(claim);
    if claim_words.is_empty() {
        return Proof::default();
    }
    let mut titles: Vec<&str> = Vec::new();
    let mut seqs: Vec<Vec<Word>> = Vec::new();
    for e in &evidence.entries {
        if !titles.contains(&e.doc_title.as_str()) {
            titles.push(&e.doc_title);
            seqs.push(words(&e.doc_title));
        }
        seqs.push(words(&e.text));
    }

    let mut items = Vec::new();
    let mut i = 0;
    while i < claim_words.len() {
        let exact = exact_match(&claim_words, i, &seqs);
        let lexical = lexicon_match(&claim_words, i, &seqs, lexicons);
        let chosen = match (exact, lexical) {
            (Some(e), Some(l)) => Some(if e.len >= l.len { e } else { l }),
            (e, l) => e.or(l),
        };
        match chosen {
            Some(m) => {
                items.push(Item::Chunk { start: i, end: i + m.len, evidence: m.evidence, op: m.op });
                i += m.len;
            }
            None => {
                items.push(Item::Free(i));
                i += 1;
            }
        }
    }

    let mut chunks: Vec<Chunk> = Vec::new();
    // Leading function-word run waiting for the next chunk, with its
    // negation parity.
    let mut pending: Option<(usize, bool)> = None;
    let mut run: Vec<usize> = Vec::new();
    let flush = |run: &mut Vec<usize>, chunks: &mut Vec<Chunk>, pending: &mut Option<(usize, bool)>, next_exists: bool| {
        if run.is_empty() {
            return;
        }
        let (start, end) = (run[0], run[run.len() - 1] + 1);
        let span = &claim_words[start..end];
        run.clear();
        if span.iter().any(Word::is_content) {
            let start = pending.take().map_or(start, |(s, _)| s);
            chunks.push(Chunk { start, end, evidence: String::new(), op: NatOp::Independence });
            return;
        }
        let odd = span.iter().filter(|w| is_negation_marker(&w.key)).count() % 2 == 1;
        if odd && next_exists {
            *pending = Some((start, true));
        } else if let Some(last) = chunks.last_mut() {
            last.end = end;
            if odd {
                last.op = flip(last.op);
            }
        } else {
            *pending = Some((start, odd));
        }
    };

    for item in items {
        match item {
            Item::Free(i) => run.push(i),
            Item::Chunk { start, end, evidence, op } => {
                flush(&mut run, &mut chunks, &mut pending, true);
                let (start, op) = match pending.take() {
                    Some((s, odd)) => (s, if odd { flip(op) } else { op }),
                    None => (start, op),
                };
                chunks.push(Chunk { start, end, evidence, op });
            }
        }
    }
    flush(&mut run, &mut chunks, &mut pending, false);
    if let Some((start, _)) = pending {
        // Nothing but function words: one unrelated span.
        chunks.push(Chunk { start, end: claim_words.len(), evidence: String::new(), op: NatOp::Independence });
    }

    let chunks = merge_function_chunks(chunks, &claim_words);
    Proof::new(
        chunks
            .into_iter()
            .map(|c| Mutation::new(surface(&claim_words[c.start..c.end]), c.evidence, c.op))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::super::{predict_sufficiency, Relation, Sufficiency};
    use super::*;

    fn evidence(items: &[(&str, &str)]) -> RankedEvidence {
        use crate::reranker::EvidenceSentence;
        RankedEvidence {
            entries: items
                .iter()
                .enumerate()
                .map(|(i, (t, s))| EvidenceSentence {
                    id: crate::decoder_trie::sentence_id(i + 1),
                    doc_title: t.to_string(),
                    sent_index: 0,
                    text: s.to_string(),
                    score: 0.0,
                })
                .collect(),
            limit: items.len(),
        }
    }

    #[test]
    fn exact_sentence_is_equivalence() {
        let claim = "Seth Meyers hosted the ceremony";
        let ev = evidence(&[("Seth Meyers", "Seth Meyers hosted the ceremony.")]);
        let p = align_and_prove(claim, &ev, &[]);
        assert!(p.covers(claim));
        assert!(p.ops().iter().all(|&o| o == NatOp::Equivalence));
        assert_eq!(predict_sufficiency(&p).unwrap(), Sufficiency::Sufficient);
    }

    #[test]
    fn unsupported_chunk_is_independent() {
        let claim = "The 66th Primetime Emmy Awards was hosted by an Iraqi comedian";
        let ev = evidence(&[(
            "66th Primetime Emmy Awards",
            "The 66th Primetime Emmy Awards was hosted by Seth Meyers.",
        )]);
        let p = align_and_prove(claim, &ev, &[]);
        assert!(p.covers(claim));
        let ind: Vec<_> = p.mutations.iter().filter(|m| m.op == NatOp::Independence).collect();
        assert_eq!(ind.len(), 1);
        assert_eq!(ind[0].claim_span, "an Iraqi comedian");
        assert_eq!(ind[0].evidence_span, "");
        assert_eq!(predict_sufficiency(&p).unwrap(), Sufficiency::Insufficient);
    }

    #[test]
    fn dates_are_not_matched() {
        let claim = "born in 1974";
        let ev = evidence(&[("Seth Meyers", "Seth Meyers was born December 28, 1973.")]);
        let p = align_and_prove(claim, &ev, &[]);
        assert!(p.covers(claim));
        assert_eq!(p.mutations.last().unwrap().claim_span, "in 1974");
        assert_eq!(p.mutations.last().unwrap().op, NatOp::Independence);
        assert_eq!(predict_sufficiency(&p).unwrap(), Sufficiency::Insufficient);
    }

    #[test]
    fn negated_evidence() {
        let ev = evidence(&[("X", "Smith was not a comedian.")]);
        let p = align_and_prove("a comedian", &ev, &[]);
        assert_eq!(p.ops(), vec![NatOp::Negation]);
    }

    #[test]
    fn negated_claim_flips() {
        let ev = evidence(&[("X", "Smith is a comedian.")]);
        let p = align_and_prove("Smith is not a comedian", &ev, &[]);
        assert!(p.covers("Smith is not a comedian"));
        assert!(p.ops().contains(&NatOp::Negation));
        assert!(!p.ops().contains(&NatOp::Independence));
    }

    #[test]
    fn lexicon_relations() {
        let lex = Lexicon::new("toy")
            .with("comedian", "comic", Relation::Synonym)
            .with("alive", "dead", Relation::Antonym)
            .with("alive", "living", Relation::Synonym)
            .with("actor", "performer", Relation::Entailment)
            .with("singer", "performer", Relation::Entailment);
        let ev = evidence(&[("X", "Smith is a comic who is dead and a singer.")]);
        let lexicons = [lex];
        assert_eq!(align_and_prove("comedian", &ev, &lexicons).ops(), vec![NatOp::Equivalence]);
        assert_eq!(align_and_prove("alive", &ev, &lexicons).ops(), vec![NatOp::Negation]);
        assert_eq!(align_and_prove("living", &ev, &lexicons).ops(), vec![NatOp::Alternation]);
        assert_eq!(align_and_prove("actor", &ev, &lexicons).ops(), vec![NatOp::Alternation]);
    }

    #[test]
    fn empty_inputs() {
        assert!(align_and_prove("", &RankedEvidence::default(), &[]).mutations.is_empty());
        let p = align_and_prove("Iraqi comedian", &RankedEvidence::default(), &[]);
        assert_eq!(p.ops(), vec![NatOp::Independence]);
        let p = align_and_prove("of the", &RankedEvidence::default(), &[]);
        assert_eq!(p.ops(), vec![NatOp::Independence]);
        assert!(p.covers("of the"));
    }
}
