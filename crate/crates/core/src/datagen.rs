//! Training files for external scorers and provers.
//!
//! Hop examples pair an input
//!
//! ```text
//! claim </s> [title] sentence </s> [title] sentence ...
//! ```
//!
//! holding `t − 1` gold sentences and `l − t` sampled negatives in shuffled
//! order with a target such as `E2 [ Seth Meyers ]`: the identifiers of the
//! gold sentences followed by the held-out gold document.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Claim, Corpus, EvidenceRef, Label, Sentence};
use crate::decoder_trie::{sentence_id, CLOSE_BRACKET, OPEN_BRACKET};
use crate::error::{Error, Result};
use crate::natlog::{
    predict_sufficiency, render_proof, repair_proof, span_similarity_reference, Lexicon, ProofGenerator,
    Sufficiency,
};
use crate::reranker::RankedEvidence;

pub const SEPARATOR: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopExample {
    pub claim_id: String,
    pub hop: usize,
    pub seed: u64,
    pub input: String,
    pub target: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopOptions {
    pub hop: usize,
    pub l: usize,
    /// Candidate documents sampled from first; later ones only pad.
    pub top_candidates: usize,
    /// Gold evidence order is meaningful: hold out only the last document.
    pub ordered: bool,
    pub seed: u64,
}

impl Default for HopOptions {
    fn default() -> Self {
        Self {
            hop: 1,
            l: 5,
            top_candidates: 10,
            ordered: true,
            seed: 0,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for one claim and hold-out, independent of claim order.
pub fn derive_seed(seed: u64, claim_id: &str, hop: usize, held_out: usize) -> u64 {
    // FNV-1a over the identifier
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in claim_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h ^ splitmix64((hop as u64) << 32 | held_out as u64)))
}

pub fn render_input<'a>(claim: &str, sentences: impl IntoIterator<Item = &'a Sentence>) -> String {
    let mut out = claim.to_string();
    for s in sentences {
        out.push_str(&format!(" {SEPARATOR} [{}] {}", s.doc_title, s.text));
    }
    out
}

fn sample_negatives<'c>(
    rng: &mut ChaCha8Rng,
    corpus: &'c Corpus,
    candidates: &[String],
    gold_docs: &[String],
    top: usize,
    needed: usize,
) -> Vec<&'c Sentence> {
    let pool = |docs: &[String]| -> Vec<&'c Sentence> {
        docs.iter()
            .filter(|d| !gold_docs.contains(d))
            .filter_map(|d| corpus.document(d))
            .flat_map(|d| d.sentences.iter())
            .collect()
    };
    let split = top.min(candidates.len());
    let mut out: Vec<&Sentence> = pool(&candidates[..split])
        .choose_multiple(rng, needed)
        .copied()
        .collect();
    if out.len() < needed {
        let extra: Vec<&Sentence> = pool(&candidates[split..])
            .choose_multiple(rng, needed - out.len())
            .copied()
            .collect();
        out.extend(extra);
    }
    out
}

/// Hop-`t` training records for every claim with exactly `t` gold sentences.
///
/// `candidates` gives the ranked candidate documents of a claim; negatives
/// come from its first `top_candidates` entries, padded from the rest.
pub fn make_hop_examples(
    claims: &[Claim],
    corpus: &Corpus,
    candidates: &dyn Fn(&Claim) -> Vec<String>,
    opts: HopOptions,
) -> Result<Vec<HopExample>> {
    let t = opts.hop;
    if t < 1 {
        return Err(Error::Config("hop must be >= 1".into()));
    }
    if opts.l < t {
        return Err(Error::Config(format!("l ({}) must be >= hop ({t})", opts.l)));
    }
    let negatives = opts.l - t;
    let mut out = Vec::new();
    for claim in claims.iter().filter(|c| c.gold_evidence.len() == t) {
        let gold: Vec<&Sentence> = claim
            .gold_evidence
            .iter()
            .map(|r| corpus.resolve_sentence(&r.title, r.sent_index))
            .collect::<Result<_>>()?;
        let gold_docs: Vec<String> = gold.iter().map(|s| s.doc_title.clone()).collect();
        let ranked = candidates(claim);
        let held_outs: Vec<usize> = if opts.ordered { vec![t - 1] } else { (0..t).collect() };
        for h in held_outs {
            let seed = derive_seed(opts.seed, &claim.claim_id, t, h);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let negs = sample_negatives(&mut rng, corpus, &ranked, &gold_docs, opts.top_candidates, negatives);
            if negs.len() < negatives {
                log::warn!(
                    "claim {}: only {} of {negatives} negatives available",
                    claim.claim_id,
                    negs.len()
                );
            }
            let mut items: Vec<(&Sentence, bool)> = gold
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != h)
                .map(|(_, s)| (*s, true))
                .chain(negs.into_iter().map(|s| (s, false)))
                .collect();
            items.shuffle(&mut rng);
            let mut target: Vec<String> = items
                .iter()
                .enumerate()
                .filter(|(_, (_, is_gold))| *is_gold)
                .map(|(i, _)| sentence_id(i + 1))
                .collect();
            target.extend([OPEN_BRACKET.to_string(), gold[h].doc_title.clone(), CLOSE_BRACKET.to_string()]);
            out.push(HopExample {
                claim_id: claim.claim_id.clone(),
                hop: t,
                seed,
                input: render_input(&claim.text, items.iter().map(|(s, _)| *s)),
                target: target.join(" "),
            });
        }
        if !opts.ordered {
            log::debug!("claim {}: {t} hold-out records", claim.claim_id);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofRecord {
    pub claim_id: String,
    pub label: Label,
    pub target: Sufficiency,
    pub evidence: Vec<EvidenceRef>,
    pub input: String,
    pub proof: String,
}

/// A sufficient proof over the full gold evidence and an insufficient one
/// over the gold evidence without its last sentence, both repaired to their
/// targets.
pub fn make_sufficiency_pairs(
    claim: &Claim,
    corpus: &Corpus,
    lexicons: &[Lexicon],
    prover: &dyn ProofGenerator,
) -> Result<(ProofRecord, ProofRecord)> {
    let label = match claim.label {
        Some(l @ (Label::Supported | Label::Refuted)) => l,
        _ => {
            return Err(Error::Contract(format!(
                "claim {} needs a SUPPORTED or REFUTED label",
                claim.claim_id
            )))
        }
    };
    if claim.gold_evidence.is_empty() {
        return Err(Error::Contract(format!("claim {} has no gold evidence", claim.claim_id)));
    }
    let gold: Vec<&Sentence> = claim
        .gold_evidence
        .iter()
        .map(|r| corpus.resolve_sentence(&r.title, r.sent_index))
        .collect::<Result<_>>()?;
    let record = |sentences: &[&Sentence], refs: &[EvidenceRef], target: Sufficiency| -> Result<ProofRecord> {
        let evidence = RankedEvidence::from_sentences(sentences.iter().copied());
        let raw = prover.prove(&claim.text, &evidence, 1)?;
        let proof = repair_proof(&raw, target, label, lexicons, &span_similarity_reference)?;
        debug_assert_eq!(predict_sufficiency(&proof)?, target);
        Ok(ProofRecord {
            claim_id: claim.claim_id.clone(),
            label,
            target,
            evidence: refs.to_vec(),
            input: render_input(&claim.text, sentences.iter().copied()),
            proof: render_proof(&proof),
        })
    };
    let n = gold.len();
    let sufficient = record(&gold, &claim.gold_evidence, Sufficiency::Sufficient)?;
    let insufficient = record(&gold[..n - 1], &claim.gold_evidence[..n - 1], Sufficiency::Insufficient)?;
    Ok((sufficient, insufficient))
}

pub fn write_jsonl<T: Serialize>(records: &[T], mut w: impl std::io::Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
