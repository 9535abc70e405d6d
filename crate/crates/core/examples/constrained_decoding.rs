//! Trie-constrained joint decoding of evidence identifiers and the next
//! document title, then grouping of sequences into document sets.
//!
//! ```text
//! cargo run --example constrained_decoding
//! ```

use evidence_hop::reranker::ReferenceReranker;
use evidence_hop::{aggregate, decode, rerank, Corpus, DecoderTrie, DocSetScore, RankedEvidence, ReferenceScorer, Result, ScoringContext};

const CLAIM: &str = "The 66th Primetime Emmy Awards was hosted by an American comedian born in 1973.";

pub fn run_example() -> Result<Vec<DocSetScore>> {
    let corpus = Corpus::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_corpus.jsonl"))?;
    let trie = DecoderTrie::build(&corpus.titles().collect::<Vec<_>>())?;

    // hop-1 evidence from the Emmy page
    let evidence = rerank(
        CLAIM,
        &RankedEvidence::empty(3),
        &[vec!["66th Primetime Emmy Awards".to_string()]],
        &corpus,
        3,
        &ReferenceReranker::default(),
        1,
    )?;
    for e in &evidence.entries {
        println!("{}  [{}] {}", e.id, e.doc_title, e.text);
    }

    for prefix in [&[][..], &["Seth"][..], &["Seth", "Meyers"][..]] {
        println!("title prefix {prefix:?} allows {:?}", trie.allowed_next(prefix));
    }

    let scorer = ReferenceScorer::fit(&corpus, 1.0)?;
    let ctx = ScoringContext::new(CLAIM, &evidence, 1);
    let decoded = decode(&scorer, &trie, &ctx, 1, 8)?;
    for s in &decoded.sequences {
        println!("{:>9.4}  {}", s.logprob, s.rendered());
    }
    let sets = aggregate(&decoded.sequences, 3);
    for s in &sets {
        println!("{:>9.4}  {:?}", s.logprob, s.doc_set);
    }
    Ok(sets)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
