//! Recall, exact match and F1 of the pipeline against BM25 alone on a
//! generated benchmark of two-hop bridge claims.
//!
//! ```text
//! cargo run --example evaluate_results
//! ```

use evidence_hop::eval::{recall_at_k, report, successful};
use evidence_hop::pipeline::{run_batch, BackendFactory, PipelineInputs};
use evidence_hop::synthetic::bridge_benchmark;
use evidence_hop::{DecoderTrie, InvertedIndex, PipelineConfig, Result};

pub struct Comparison {
    pub initial_recall: f64,
    pub pipeline_recall: f64,
    pub report: String,
}

pub fn run_example() -> Result<Comparison> {
    let bench = bridge_benchmark(30, 60, 5);
    let config = PipelineConfig { k: 5, ..PipelineConfig::default() };
    let index = InvertedIndex::build(&bench.corpus, config.bm25)?;
    let trie = DecoderTrie::build(&bench.corpus.titles().collect::<Vec<_>>())?;
    let inputs = PipelineInputs {
        corpus: &bench.corpus,
        index: &index,
        trie: &trie,
        config: &config,
        initial: None,
    };
    let factory = BackendFactory::new(&config, &bench.corpus)?;
    let lines = run_batch(&bench.claims, &inputs, vec![factory.make()?]);
    let results = successful(&lines);

    // the same results truncated to their first hop
    let initial: Vec<_> = results
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.trace.truncate(1);
            r.final_documents = r.trace[0].documents.clone();
            r
        })
        .collect();
    let initial_recall = recall_at_k(&initial, &bench.claims, 5)?;
    let pipeline_recall = recall_at_k(&results, &bench.claims, 5)?;
    let report = report(&lines, &bench.claims, &[2, 5], 5)?.render();
    println!("recall@5 initial  = {initial_recall:.3}");
    println!("recall@5 pipeline = {pipeline_recall:.3}");
    print!("{report}");
    Ok(Comparison {
        initial_recall,
        pipeline_recall,
        report,
    })
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
