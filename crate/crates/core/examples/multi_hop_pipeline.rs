//! The full hop loop on the bundled toy knowledge base: BM25, reranking,
//! the sufficiency gate and joint decoding when evidence is missing.
//!
//! ```text
//! cargo run --example multi_hop_pipeline
//! ```

use evidence_hop::corpus::load_claims;
use evidence_hop::natlog::Lexicon;
use evidence_hop::pipeline::{run_batch, BackendFactory, PipelineInputs, ResultLine};
use evidence_hop::{Corpus, DecoderTrie, InvertedIndex, PipelineConfig, Result};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn run_example() -> Result<Vec<ResultLine>> {
    let corpus = Corpus::load(format!("{FIXTURES}/toy_corpus.jsonl"))?;
    let claims = load_claims(format!("{FIXTURES}/toy_claims.jsonl"))?;
    let mut config = PipelineConfig::load(format!("{FIXTURES}/toy_config.toml"))?;
    config.lexicons = vec![format!("{FIXTURES}/toy_lexicon.tsv").into()];
    Lexicon::load(&config.lexicons[0])?;

    let index = InvertedIndex::build(&corpus, config.bm25)?;
    let trie = DecoderTrie::build(&corpus.titles().collect::<Vec<_>>())?;
    let inputs = PipelineInputs {
        corpus: &corpus,
        index: &index,
        trie: &trie,
        config: &config,
        initial: None,
    };
    let factory = BackendFactory::new(&config, &corpus)?;
    let workers = (0..2).map(|_| factory.make()).collect::<Result<Vec<_>>>()?;
    let lines = run_batch(&claims, &inputs, workers);

    for line in &lines {
        let ResultLine::Ok(r) = line else { continue };
        println!("claim {} ({} hop(s), {} decoder round(s))", r.claim_id, r.n_dyn, r.decoder_rounds);
        for hop in &r.trace {
            println!("  hop {}: {:?}", hop.hop, hop.documents.iter().take(3).collect::<Vec<_>>());
            println!("    {}: {}", hop.sufficiency, hop.proof_text);
        }
    }
    Ok(lines)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
