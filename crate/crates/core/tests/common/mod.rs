//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use evidence_hop::scorer::{ScoringContext, TokenScorer};
use evidence_hop::Result;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

/// Deterministic pseudo-random scorer: every (prefix, token) pair gets a
/// fixed weight in [0.05, 1), normalized over the allowed set. The value
/// of a token does not depend on the order of `allowed`.
#[derive(Debug, Clone, Copy)]
pub struct HashScorer {
    pub seed: u64,
}

fn fnv(seed: u64, parts: &[&str]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for p in parts {
        for b in p.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h ^ (h >> 29)
}

impl HashScorer {
    pub fn weight(&self, prefix: &[String], token: &str) -> f64 {
        let mut parts: Vec<&str> = prefix.iter().map(String::as_str).collect();
        parts.push("|");
        parts.push(token);
        0.05 + (fnv(self.seed, &parts) % 1_000_000) as f64 / 1_052_632.0
    }
}

impl TokenScorer for HashScorer {
    fn next_token_logprobs(&self, _: &ScoringContext, prefix: &[String], allowed: &[String]) -> Result<Vec<f64>> {
        let w: Vec<f64> = allowed.iter().map(|a| self.weight(prefix, a)).collect();
        let total: f64 = w.iter().sum();
        Ok(w.iter().map(|x| x.ln() - total.ln()).collect())
    }
}

pub struct DecodeFixture {
    pub titles: Vec<String>,
    pub ctx: ScoringContext,
    pub t: usize,
}

const WORDS: &[&str] = &["Seth", "Meyers", "Rogen", "Late", "Night", "Show", "NBC", "Live"];

/// Titles over a tiny vocabulary so they share prefixes, some being
/// prefixes of others. At most `max_sequences` legal sequences.
pub fn decode_fixture(rng: &mut impl Rng, max_sequences: usize) -> DecodeFixture {
    let t = rng.random_range(1..=2);
    let l = rng.random_range(t..=5);
    let perms: usize = (0..t).map(|i| l - i).product();
    let max_titles = (max_sequences / perms).clamp(1, 50);
    let n_titles = rng.random_range(1..=max_titles);
    let mut titles = BTreeSet::new();
    while titles.len() < n_titles {
        let len = rng.random_range(1..=3);
        let title: Vec<&str> = (0..len).map(|_| *WORDS.choose(rng).expect("words")).collect();
        titles.insert(title.join(" "));
    }
    let titles: Vec<String> = titles.into_iter().collect();
    let sentences = (0..l).map(|i| {
        let doc = titles.choose(rng).expect("titles").clone();
        (doc, format!("sentence {i} about {}", WORDS.choose(rng).expect("words")))
    });
    DecodeFixture {
        ctx: ScoringContext::from_sentences("Seth hosted a show", sentences.collect::<Vec<_>>(), t),
        titles,
        t,
    }
}

/// Every legal token sequence with its summed log-probability, found by
/// exhaustive enumeration over the title list (no trie involved).
pub fn enumerate(scorer: &dyn TokenScorer, titles: &[String], ctx: &ScoringContext, t: usize) -> Vec<(Vec<String>, f64)> {
    let ids: Vec<String> = (1..=ctx.evidence.len()).map(|i| format!("E{i}")).collect();
    let split: Vec<Vec<&str>> = titles.iter().map(|t| t.split_whitespace().collect()).collect();
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<String>, f64)> = vec![(Vec::new(), 0.0)];
    while let Some((prefix, lp)) = stack.pop() {
        let allowed = legal_next(&prefix, &ids, &split, t);
        if allowed.is_empty() {
            out.push((prefix, lp));
            continue;
        }
        let scores = scorer.next_token_logprobs(ctx, &prefix, &allowed).expect("scorer");
        for (tok, s) in allowed.into_iter().zip(scores) {
            let mut next = prefix.clone();
            next.push(tok);
            stack.push((next, lp + s));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

fn legal_next(prefix: &[String], ids: &[String], titles: &[Vec<&str>], t: usize) -> Vec<String> {
    if prefix.len() < t {
        return ids.iter().filter(|i| !prefix.contains(i)).cloned().collect();
    }
    if prefix.len() == t {
        return vec!["[".into()];
    }
    let body = &prefix[t + 1..];
    if body.last().is_some_and(|x| x == "]") {
        return Vec::new();
    }
    if body.last().is_some_and(|x| x == "</title>") {
        return vec!["]".into()];
    }
    let mut next = BTreeSet::new();
    for title in titles {
        if title.len() >= body.len() && title.iter().zip(body).all(|(a, b)| a == b) {
            match title.get(body.len()) {
                Some(w) => next.insert(w.to_string()),
                None => next.insert("</title>".to_string()),
            };
        }
    }
    next.into_iter().collect()
}

fn naive_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Okapi BM25 straight from the formula, one document at a time.
pub fn naive_bm25(docs: &[String], query: &str, k1: f64, b: f64) -> Vec<f64> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|d| naive_tokens(d)).collect();
    let n = docs.len() as f64;
    let avg = tokenized.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut terms: Vec<String> = Vec::new();
    for q in naive_tokens(query) {
        if !terms.contains(&q) {
            terms.push(q);
        }
    }
    tokenized
        .iter()
        .map(|doc| {
            let mut counts: HashMap<&str, f64> = HashMap::new();
            for w in doc {
                *counts.entry(w.as_str()).or_default() += 1.0;
            }
            let mut score = 0.0;
            for term in &terms {
                let df = tokenized.iter().filter(|d| d.contains(term)).count() as f64;
                if df == 0.0 {
                    continue;
                }
                let Some(&tf) = counts.get(term.as_str()) else { continue };
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * doc.len() as f64 / avg));
            }
            score
        })
        .collect()
}

/// Matching documents sorted by score, ties by index.
pub fn naive_rank(docs: &[String], query: &str, k1: f64, b: f64) -> Vec<(usize, f64)> {
    let q: Vec<String> = naive_tokens(query);
    let scores = naive_bm25(docs, query, k1, b);
    let mut ranked: Vec<(usize, f64)> = scores
        .into_iter()
        .enumerate()
        .filter(|(i, _)| naive_tokens(&docs[*i]).iter().any(|w| q.contains(w)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

pub fn random_docs(rng: &mut impl Rng, n: usize) -> Vec<String> {
    const VOCAB: &[&str] = &[
        "emmy", "award", "show", "host", "comedian", "night", "late", "seth", "network", "city", "born", "film",
        "actor", "year", "television",
    ];
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=12);
            (0..len).map(|_| *VOCAB.choose(rng).expect("vocab")).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

pub mod metrics {
    use evidence_hop::beam_decoder::DocSetScore;
    use evidence_hop::pipeline::{ErrorRecord, HopState, ResultLine, RetrievalResult};
    use evidence_hop::{Claim, EvidenceRef, Label, PipelineConfig, Proof, RankedEvidence, Sufficiency};

    fn hop(t: usize, docs: &[&str]) -> HopState {
        HopState {
            hop: t,
            document_sets: docs
                .iter()
                .map(|d| DocSetScore { doc_set: vec![d.to_string()], logprob: 0.0 })
                .collect(),
            documents: docs.iter().map(|d| d.to_string()).collect(),
            evidence: RankedEvidence::default(),
            proof: Proof::default(),
            proof_text: String::new(),
            sufficiency: Sufficiency::Sufficient,
            sequences: vec![],
            diagnostic: None,
        }
    }

    /// A result whose hop `i + 1` ranked `hops[i]`.
    pub fn result(id: &str, hops: &[&[&str]]) -> ResultLine {
        let trace: Vec<HopState> = hops.iter().enumerate().map(|(i, d)| hop(i + 1, d)).collect();
        let last = trace.last().unwrap().clone();
        ResultLine::Ok(Box::new(RetrievalResult {
            claim_id: id.into(),
            n_dyn: trace.len(),
            decoder_rounds: trace.len() - 1,
            final_document_sets: last.document_sets,
            final_documents: last.documents,
            final_evidence: last.evidence,
            trace,
            decoder_scoring: "raw-sum-logprob".into(),
            config: PipelineConfig::default(),
        }))
    }

    fn claim(id: &str, gold: &[&str]) -> Claim {
        let c = Claim::new(id, format!("claim {id}"));
        if gold.is_empty() {
            return Claim { label: Some(Label::Nei), ..c };
        }
        c.with_gold(Label::Supported, gold.iter().map(|t| EvidenceRef::new(*t, 0)).collect())
    }

    /// Ten claims, nine with gold documents:
    ///
    /// | claim | gold            | ranking (last hop first)     | R@2 | R@5 | EM | F1@5 |
    /// |-------|-----------------|------------------------------|-----|-----|----|------|
    /// | c0    | A               | A B C D E                    | 1   | 1   | 1  | 1/3  |
    /// | c1    | A B             | C A D E F B                  | 0   | 0   | 0  | 2/7  |
    /// | c2    | A B             | A B, padded by C A D E       | 1   | 1   | 1  | 4/7  |
    /// | c3    | X Y             | X, then Z, then Y W          | 0   | 1   | 0  | 2/3  |
    /// | c4    | A, or B C       | B C D                        | 1   | 1   | 1  | 4/5  |
    /// | c5    | none (NEI)      | A                            | -   | -   | -  | -    |
    /// | c6    | A               | missing                      | 0   | 0   | 0  | 0    |
    /// | c7    | A               | failed                       | 0   | 0   | 0  | 0    |
    /// | c8    | A               | B                            | 0   | 0   | 0  | 0    |
    /// | c9    | A B C           | A B C D E F                  | 0   | 1   | 1  | 3/4  |
    pub fn fixture() -> (Vec<ResultLine>, Vec<Claim>) {
        let mut c4 = claim("c4", &["A"]);
        c4.alternative_evidence = vec![vec![EvidenceRef::new("B", 0), EvidenceRef::new("C", 1)]];
        let claims = vec![
            claim("c0", &["A"]),
            claim("c1", &["A", "B"]),
            claim("c2", &["A", "B"]),
            claim("c3", &["X", "Y"]),
            c4,
            claim("c5", &[]),
            claim("c6", &["A"]),
            claim("c7", &["A"]),
            claim("c8", &["A"]),
            claim("c9", &["A", "B", "C"]),
        ];
        let lines = vec![
            result("c0", &[&["A", "B", "C", "D", "E"]]),
            result("c1", &[&["C", "A", "D", "E", "F", "B"]]),
            result("c2", &[&["C", "A", "D", "E"], &["A", "B"]]),
            result("c3", &[&["Y", "W"], &["Z"], &["X"]]),
            result("c4", &[&["B", "C", "D"]]),
            result("c5", &[&["A"]]),
            ResultLine::Err(ErrorRecord {
                claim_id: "c7".into(),
                error: "transport error: timed out".into(),
                error_kind: "transport".into(),
            }),
            result("c8", &[&["B"]]),
            result("c9", &[&["A", "B", "C", "D", "E", "F"]]),
        ];
        (lines, claims)
    }

    pub const RECALL_2: f64 = 3.0 / 9.0;
    pub const RECALL_5: f64 = 5.0 / 9.0;
    pub const EXACT_MATCH: f64 = 4.0 / 9.0;
    pub const F1_5: f64 = (1.0 / 3.0 + 2.0 / 7.0 + 4.0 / 7.0 + 2.0 / 3.0 + 4.0 / 5.0 + 3.0 / 4.0) / 9.0;
}

pub mod pipe {
    use evidence_hop::pipeline::{run_batch, BackendFactory, InitialRankings, PipelineInputs, ResultLine};
    use evidence_hop::{Claim, Corpus, DecoderTrie, InvertedIndex, PipelineConfig};

    pub struct Setup {
        pub corpus: Corpus,
        pub index: InvertedIndex,
        pub trie: DecoderTrie,
    }

    impl Setup {
        pub fn new(corpus: Corpus) -> Self {
            let index = InvertedIndex::build(&corpus, Default::default()).unwrap();
            let trie = DecoderTrie::build(&corpus.titles().collect::<Vec<_>>()).unwrap();
            Self { corpus, index, trie }
        }

        pub fn run_with(
            &self,
            claims: &[Claim],
            config: &PipelineConfig,
            initial: Option<&InitialRankings>,
            workers: usize,
        ) -> Vec<ResultLine> {
            let inputs = PipelineInputs {
                corpus: &self.corpus,
                index: &self.index,
                trie: &self.trie,
                config,
                initial,
            };
            let factory = BackendFactory::new(config, &self.corpus).unwrap();
            let backends = (0..workers).map(|_| factory.make().unwrap()).collect();
            run_batch(claims, &inputs, backends)
        }

        pub fn run(&self, claims: &[Claim], config: &PipelineConfig, workers: usize) -> Vec<ResultLine> {
            self.run_with(claims, config, None, workers)
        }
    }

    pub fn bytes(lines: &[ResultLine]) -> Vec<u8> {
        let mut out = Vec::new();
        evidence_hop::pipeline::write_results(lines, &mut out).unwrap();
        out
    }
}
