//! Okapi BM25 over an in-memory inverted index.
//!
//! ```text
//! score(d, q) = Σ_{t ∈ q} idf(t) · tf·(k1+1) / (tf + k1·(1 − b + b·|d|/avgdl))
//! idf(t)      = ln((N − df + 0.5) / (df + 0.5) + 1)
//! ```
//!
//! Query terms are deduplicated; documents matching no query term are not
//! returned. Ties are broken by ascending document index.
//!
//! On-disk format (little endian): magic `EVHOPIDX`, `u32` version, `k1: f64`,
//! `b: f64`, `u64` document count, then per document `title: str`,
//! `length: u32`, then `u64` term count and per term `term: str`,
//! `u32` posting count, postings as `(doc: u32, tf: u32)`. Strings are a
//! `u32` byte length followed by UTF-8 bytes.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{self, ByteCounter};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::text::tokenize;

const MAGIC: &[u8; 8] = b"EVHOPIDX";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.6, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0 && self.k1.is_finite()) {
            return Err(Error::Config(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("b must lie in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    params: Bm25Params,
    titles: Vec<String>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

pub fn idf(doc_count: usize, df: usize) -> f64 {
    let (n, df) = (doc_count as f64, df as f64);
    ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
}

pub fn term_score(params: Bm25Params, idf: f64, tf: u32, doc_len: u32, avg_doc_length: f64) -> f64 {
    let tf = tf as f64;
    let norm = if avg_doc_length > 0.0 {
        doc_len as f64 / avg_doc_length
    } else {
        0.0
    };
    idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
}

impl InvertedIndex {
    /// Indexes the concatenated sentence text of every document.
    pub fn build(corpus: &Corpus, params: Bm25Params) -> Result<Self> {
        let docs = corpus.documents().iter().map(|d| (d.title.clone(), d.text()));
        Self::from_texts(docs, params)
    }

    /// Indexes arbitrary `(name, text)` pairs; the reranker uses this to
    /// treat each candidate sentence as a document.
    pub fn from_texts(docs: impl IntoIterator<Item = (String, String)>, params: Bm25Params) -> Result<Self> {
        params.validate()?;
        let mut titles = Vec::new();
        let mut doc_lengths = Vec::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (doc, (title, text)) in docs.into_iter().enumerate() {
            let tokens = tokenize(&text);
            doc_lengths.push(tokens.len() as u32);
            titles.push(title);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(Posting { doc: doc as u32, tf });
            }
        }
        Ok(Self::assemble(params, titles, doc_lengths, postings))
    }

    fn assemble(
        params: Bm25Params,
        titles: Vec<String>,
        doc_lengths: Vec<u32>,
        postings: BTreeMap<String, Vec<Posting>>,
    ) -> Self {
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64
        };
        Self {
            params,
            titles,
            doc_lengths,
            avg_doc_length,
            postings,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn titles(&self) -> &[String] {
        &self.titles
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    fn query_terms(query: &str) -> Vec<String> {
        let mut terms = tokenize(query);
        let mut seen = std::collections::HashSet::new();
        terms.retain(|t| seen.insert(t.clone()));
        terms
    }

    /// Scores of every matching document, keyed by document index.
    pub fn score_matches(&self, query: &str) -> HashMap<u32, f64> {
        let mut scores: HashMap<u32, f64> = HashMap::new();
        let n = self.doc_count();
        for term in Self::query_terms(query) {
            let list = self.postings(&term);
            if list.is_empty() {
                continue;
            }
            let w = idf(n, list.len());
            for p in list {
                let s = term_score(self.params, w, p.tf, self.doc_lengths[p.doc as usize], self.avg_doc_length);
                *scores.entry(p.doc).or_default() += s;
            }
        }
        scores
    }

    /// Dense score vector, zero for non-matching documents.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.doc_count()];
        for (doc, s) in self.score_matches(query) {
            out[doc as usize] = s;
        }
        out
    }

    /// Top-`k` `(doc index, score)` pairs.
    pub fn rank_indices(&self, query: &str, k: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self
            .score_matches(query)
            .into_iter()
            .map(|(d, s)| (d as usize, s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }

    /// Top-`k` documents for `query`, best first.
    pub fn rank(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        self.rank_indices(query, k)
            .into_iter()
            .map(|(d, s)| (self.titles[d].clone(), s))
            .collect()
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        binio::write_header(w, MAGIC, VERSION)?;
        binio::write_f64(w, self.params.k1)?;
        binio::write_f64(w, self.params.b)?;
        binio::write_u64(w, self.doc_count() as u64)?;
        for (title, len) in self.titles.iter().zip(&self.doc_lengths) {
            binio::write_str(w, title)?;
            binio::write_u32(w, *len)?;
        }
        binio::write_u64(w, self.postings.len() as u64)?;
        for (term, list) in &self.postings {
            binio::write_str(w, term)?;
            binio::write_u32(w, list.len() as u32)?;
            for p in list {
                binio::write_u32(w, p.doc)?;
                binio::write_u32(w, p.tf)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        binio::read_header(r, MAGIC, VERSION)?;
        let params = Bm25Params {
            k1: binio::read_f64(r)?,
            b: binio::read_f64(r)?,
        };
        let n = binio::read_u64(r)? as usize;
        let mut titles = Vec::with_capacity(n);
        let mut doc_lengths = Vec::with_capacity(n);
        for _ in 0..n {
            titles.push(binio::read_str(r)?);
            doc_lengths.push(binio::read_u32(r)?);
        }
        let terms = binio::read_u64(r)? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..terms {
            let term = binio::read_str(r)?;
            let len = binio::read_u32(r)? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                let doc = binio::read_u32(r)?;
                if doc as usize >= n {
                    return Err(Error::Format(format!("posting for {term:?} names document {doc} of {n}")));
                }
                list.push(Posting {
                    doc,
                    tf: binio::read_u32(r)?,
                });
            }
            postings.insert(term, list);
        }
        Ok(Self::assemble(params, titles, doc_lengths, postings))
    }

    /// Writes the index and returns its size in bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<u64> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))?;
        Ok(self.serialized_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    /// Size of the serialized index in bytes.
    pub fn serialized_bytes(&self) -> u64 {
        let mut counter = ByteCounter::default();
        self.write_to(&mut counter).expect("counting writer never fails");
        counter.0
    }
}
