//! Okapi BM25 over a three-page knowledge base.
//!
//! ```text
//! cargo run --example bm25_search
//! ```

use evidence_hop::corpus::DocumentRecord;
use evidence_hop::{Bm25Params, Corpus, InvertedIndex, Result};

pub fn run_example() -> Result<Vec<(String, f64)>> {
    let corpus = Corpus::from_records([
        DocumentRecord::new(
            "Emmy Awards",
            ["The Emmy Awards honor excellence in television.", "The Emmy ceremony is held every year."],
        ),
        DocumentRecord::new("Seth Meyers", ["Seth Meyers hosted the awards show in 2014."]),
        DocumentRecord::new(
            "Television",
            ["Television is a telecommunication medium.", "Emmy winners often appear on television."],
        ),
    ])?;
    let index = InvertedIndex::build(&corpus, Bm25Params::default())?;
    println!(
        "{} documents, {} terms, avg length {:.2}, {} bytes on disk",
        index.doc_count(),
        index.term_count(),
        index.avg_doc_length(),
        index.serialized_bytes()
    );

    let ranked = index.rank("Emmy Awards", 10);
    for (title, score) in &ranked {
        println!("{score:>10.6}  {title}");
    }
    Ok(ranked)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
