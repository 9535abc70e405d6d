//! On-disk size of the inverted index and the title trie for growing
//! knowledge bases. Trie bytes grow with the number of title tokens.
//!
//! ```text
//! cargo run --example footprint
//! ```

use evidence_hop::synthetic::random_corpus;
use evidence_hop::{Bm25Params, DecoderTrie, InvertedIndex, Result};

pub struct Row {
    pub docs: usize,
    pub title_tokens: usize,
    pub index_bytes: u64,
    pub trie_bytes: u64,
}

pub fn run_example() -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    println!("{:>7} {:>12} {:>12} {:>12} {:>14}", "docs", "title_tokens", "index_bytes", "trie_bytes", "trie_per_token");
    for (i, docs) in [500, 2000, 8000].into_iter().enumerate() {
        let corpus = random_corpus(docs, i as u64);
        let index = InvertedIndex::build(&corpus, Bm25Params::default())?;
        let trie = DecoderTrie::build(&corpus.titles().collect::<Vec<_>>())?;
        let row = Row {
            docs,
            title_tokens: trie.total_title_tokens(),
            index_bytes: index.serialized_bytes(),
            trie_bytes: trie.serialized_bytes(),
        };
        println!(
            "{:>7} {:>12} {:>12} {:>12} {:>14.2}",
            row.docs,
            row.title_tokens,
            row.index_bytes,
            row.trie_bytes,
            row.trie_bytes as f64 / row.title_tokens as f64
        );
        rows.push(row);
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
