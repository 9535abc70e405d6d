//! Training records for external components: hop-t decoding targets and
//! repaired sufficiency proofs.
//!
//! ```text
//! cargo run --example training_data
//! ```

use evidence_hop::corpus::load_claims;
use evidence_hop::datagen::{make_hop_examples, make_sufficiency_pairs, HopExample, HopOptions, ProofRecord};
use evidence_hop::natlog::{Lexicon, ReferenceProver};
use evidence_hop::{Bm25Params, Claim, Corpus, InvertedIndex, Label, Result};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn run_example() -> Result<(Vec<HopExample>, Vec<ProofRecord>)> {
    let corpus = Corpus::load(format!("{FIXTURES}/toy_corpus.jsonl"))?;
    let claims = load_claims(format!("{FIXTURES}/toy_claims.jsonl"))?;
    let lexicons = vec![Lexicon::load(format!("{FIXTURES}/toy_lexicon.tsv"))?];
    let index = InvertedIndex::build(&corpus, Bm25Params::default())?;
    let candidates = |c: &Claim| index.rank(&c.text, 10).into_iter().map(|(t, _)| t).collect();

    let opts = HopOptions { hop: 2, l: 4, seed: 13, ..HopOptions::default() };
    let hops = make_hop_examples(&claims, &corpus, &candidates, opts)?;
    for e in &hops {
        println!("{} -> {}", e.input, e.target);
    }

    let prover = ReferenceProver::new(lexicons.clone());
    let mut proofs = Vec::new();
    for claim in claims.iter().filter(|c| matches!(c.label, Some(Label::Supported | Label::Refuted))) {
        let (sufficient, insufficient) = make_sufficiency_pairs(claim, &corpus, &lexicons, &prover)?;
        println!("{} {}: {}", claim.claim_id, sufficient.target, sufficient.proof);
        println!("{} {}: {}", claim.claim_id, insufficient.target, insufficient.proof);
        proofs.extend([sufficient, insufficient]);
    }
    Ok((hops, proofs))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
