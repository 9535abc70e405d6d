//! Multi-hop evidence retrieval for fact verification.
//!
//! The crate implements a retrieve-and-rerank loop over a knowledge base of
//! titled, pre-segmented documents:
//!
//! 1. [`sparse_index`] ranks documents for the claim with Okapi BM25.
//! 2. [`reranker`] keeps the top `l` sentences of the candidate documents as
//!    the evidence `E_t`, each addressed by an identifier `E1..El`.
//! 3. [`natlog`] builds a natural-logic proof for the claim over `E_t`; the
//!    evidence is insufficient iff some mutation carries the independence
//!    operator. A sufficient proof ends retrieval for the claim.
//! 4. Otherwise [`beam_decoder`] jointly scores evidence-sentence subsets and
//!    the next document title with an autoregressive [`scorer`], constrained
//!    by the markup grammar and title trie of [`decoder_trie`], and sums
//!    sequence probabilities into document-set scores.
//!
//! [`pipeline`] drives the hop loop, [`datagen`] writes training files for
//! external neural scorers, [`eval`] computes retrieval metrics and
//! [`protocol`] connects external scorers, rerankers and provers over a
//! line-delimited JSON protocol.
//!
//! Runnable walkthroughs for each capability live in the crate's
//! `examples/` directory.

pub mod beam_decoder;
pub mod binio;
pub mod cli;
pub mod corpus;
pub mod datagen;
pub mod decoder_trie;
pub mod error;
pub mod eval;
pub mod natlog;
pub mod pipeline;
pub mod protocol;
pub mod reranker;
pub mod scorer;
pub mod sparse_index;
pub mod synthetic;
pub mod text;

pub use beam_decoder::{aggregate, decode, decode_variant, DecodeMode, DocSetScore, ScoredSequence};
pub use corpus::{Claim, Corpus, Document, EvidenceRef, Label, Sentence};
pub use decoder_trie::{DecoderTrie, MarkupState, Phase};
pub use error::{Error, Result};
pub use natlog::{NatOp, Proof, Sufficiency};
pub use pipeline::{PipelineConfig, RetrievalResult};
pub use reranker::{rerank, RankedEvidence};
pub use scorer::{ReferenceScorer, ScoringContext, TokenScorer};
pub use sparse_index::{Bm25Params, InvertedIndex};
