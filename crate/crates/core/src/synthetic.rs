//! Seeded toy benchmarks built from pseudo-words, for tests, examples and
//! quick experiments.
//!
//! Bridge claims name an entity `A` whose page mentions a second entity `B`;
//! `B`'s page shares no token with the claim, so sparse retrieval on the
//! claim alone cannot find it, while the evidence from `A` points to it.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Claim, Corpus, DocumentRecord, EvidenceRef, Label};

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "st", "tr", "th"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ea"];
const CODAS: &[&str] = &["", "", "n", "r", "s", "l", "x", "m"];

/// Relations of bridge claims: (verb in the claim and on page A, noun in the claim).
const RELATIONS: &[(&str, &str)] = &[
    ("founded", "company"),
    ("directed", "film"),
    ("designed", "building"),
    ("wrote", "novel"),
    ("coached", "team"),
];

/// Unique capitalized pseudo-words.
pub struct Names {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Names {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            used: HashSet::new(),
        }
    }

    pub fn word(&mut self) -> String {
        loop {
            let syllables = self.rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(&mut self.rng).expect("onsets"));
                w.push_str(VOWELS.choose(&mut self.rng).expect("vowels"));
            }
            w.push_str(CODAS.choose(&mut self.rng).expect("codas"));
            let mut chars = w.chars();
            let first = chars.next().expect("non-empty").to_ascii_uppercase();
            let w: String = std::iter::once(first).chain(chars).collect();
            if self.used.insert(w.to_lowercase()) {
                return w;
            }
        }
    }

    pub fn name(&mut self, words: usize) -> String {
        (0..words).map(|_| self.word()).collect::<Vec<_>>().join(" ")
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub corpus: Corpus,
    pub claims: Vec<Claim>,
}

struct Builder {
    names: Names,
    docs: Vec<DocumentRecord>,
    claims: Vec<Claim>,
}

impl Builder {
    fn bridge(&mut self, id: String) {
        let (verb, noun) = *RELATIONS.choose(self.names.rng()).expect("relations");
        let a = self.names.name(2);
        let b = self.names.name(2);
        let place = self.names.word();
        let year = self.names.rng().random_range(1900..2000);
        self.docs.push(DocumentRecord::new(
            a.clone(),
            [
                format!("{a} {verb} {b} in {year}."),
                format!("{a} grew up near {place}."),
            ],
        ));
        let hall = self.names.word();
        self.docs.push(DocumentRecord::new(
            b.clone(),
            [
                format!("{b} opened during {}.", year + 1),
                format!("{b} stands beside {hall} Hall."),
            ],
        ));
        self.claims.push(
            Claim::new(id, format!("{a} {verb} a {noun}."))
                .with_gold(Label::Supported, vec![EvidenceRef::new(a, 0), EvidenceRef::new(b, 0)]),
        );
    }

    fn single(&mut self, id: String) {
        let a = self.names.name(2);
        let place = self.names.word();
        let sentence = format!("{a} was born in {place}.");
        self.docs.push(DocumentRecord::new(a.clone(), [sentence.clone(), format!("{a} plays the flute.")]));
        self.claims.push(
            Claim::new(id, sentence).with_gold(Label::Supported, vec![EvidenceRef::new(a, 0)]),
        );
    }

    fn distractor(&mut self) {
        let title = self.names.name(2);
        let other = self.names.word();
        self.docs.push(DocumentRecord::new(
            title.clone(),
            [format!("{title} is a village near {other}."), format!("{title} has a market.")],
        ));
    }

    fn finish(self) -> Benchmark {
        Benchmark {
            corpus: Corpus::from_records(self.docs).expect("generated titles are unique"),
            claims: self.claims,
        }
    }
}

/// `n_claims` two-hop bridge claims plus `n_distractors` unrelated pages.
pub fn bridge_benchmark(n_claims: usize, n_distractors: usize, seed: u64) -> Benchmark {
    let mut b = Builder {
        names: Names::new(seed),
        docs: Vec::new(),
        claims: Vec::new(),
    };
    for i in 0..n_claims {
        b.bridge(format!("bridge-{i}"));
    }
    for _ in 0..n_distractors {
        b.distractor();
    }
    b.finish()
}

/// Alternating single-hop claims (verbatim sentences, sufficient at once)
/// and two-hop bridge claims.
pub fn mixed_benchmark(n_claims: usize, n_distractors: usize, seed: u64) -> Benchmark {
    let mut b = Builder {
        names: Names::new(seed),
        docs: Vec::new(),
        claims: Vec::new(),
    };
    for i in 0..n_claims {
        if i % 2 == 0 {
            b.single(format!("single-{i}"));
        } else {
            b.bridge(format!("bridge-{i}"));
        }
    }
    for _ in 0..n_distractors {
        b.distractor();
    }
    b.finish()
}

/// `n_docs` one-sentence pages with titles of one to four pseudo-words.
pub fn random_corpus(n_docs: usize, seed: u64) -> Corpus {
    let mut names = Names::new(seed);
    let docs: Vec<DocumentRecord> = (0..n_docs)
        .map(|_| {
            let words = names.rng().random_range(1..=4);
            let title = names.name(words);
            let other = names.word();
            DocumentRecord::new(title.clone(), [format!("{title} is related to {other}.")])
        })
        .collect();
    Corpus::from_records(docs).expect("generated titles are unique")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    #[test]
    fn bridge_page_shares_nothing_with_claim() {
        let bench = bridge_benchmark(30, 10, 1);
        assert_eq!(bench.claims.len(), 30);
        for c in &bench.claims {
            let claim: HashSet<String> = tokenize(&c.text).into_iter().collect();
            let b = bench.corpus.document(&c.gold_evidence[1].title).unwrap();
            let page: HashSet<String> = tokenize(&format!("{} {}", b.title, b.text())).into_iter().collect();
            assert!(claim.is_disjoint(&page), "{} vs {}", c.text, b.text());
            c.check_gold(&bench.corpus).unwrap();
        }
    }

    #[test]
    fn seeded() {
        let a = mixed_benchmark(10, 5, 3);
        let b = mixed_benchmark(10, 5, 3);
        assert_eq!(a.claims, b.claims);
        assert_eq!(random_corpus(20, 9), random_corpus(20, 9));
    }
}
