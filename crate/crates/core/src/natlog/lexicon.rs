//! Term-relation lexicons loaded from `term_a<TAB>term_b<TAB>relation` files.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Synonym,
    Antonym,
    /// `term_a` entails `term_b` (hyponym to hypernym).
    Entailment,
}

impl Relation {
    pub fn parse(s: &str) -> Option<Relation> {
        match s.trim().to_ascii_lowercase().as_str() {
            "syn" | "synonym" => Some(Relation::Synonym),
            "ant" | "antonym" => Some(Relation::Antonym),
            "ent" | "hyp" | "entailment" | "hypernym" => Some(Relation::Entailment),
            _ => None,
        }
    }
}

type Edges = HashMap<String, BTreeSet<String>>;

/// Synonym and antonym pairs are stored symmetrically; entailment is
/// directed. Terms are keyed by their normalized token sequence.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    source: String,
    synonyms: Edges,
    antonyms: Edges,
    hypernyms: Edges,
    max_phrase_len: usize,
}

fn link(edges: &mut Edges, a: &str, b: &str) {
    edges.entry(a.to_string()).or_default().insert(b.to_string());
}

fn has(edges: &Edges, a: &str, b: &str) -> bool {
    edges.get(a).is_some_and(|s| s.contains(b))
}

impl Lexicon {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            ..Self::default()
        }
    }

    /// Normalized lookup key: lowercase alphanumeric tokens joined by a space.
    pub fn key(term: &str) -> String {
        tokenize(term).join(" ")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn is_empty(&self) -> bool {
        self.synonyms.is_empty() && self.antonyms.is_empty() && self.hypernyms.is_empty()
    }

    pub fn add(&mut self, a: &str, b: &str, relation: Relation) {
        let (a, b) = (Self::key(a), Self::key(b));
        if a.is_empty() || b.is_empty() || a == b {
            return;
        }
        self.max_phrase_len = self
            .max_phrase_len
            .max(a.split(' ').count())
            .max(b.split(' ').count());
        match relation {
            Relation::Synonym => {
                link(&mut self.synonyms, &a, &b);
                link(&mut self.synonyms, &b, &a);
            }
            Relation::Antonym => {
                link(&mut self.antonyms, &a, &b);
                link(&mut self.antonyms, &b, &a);
            }
            Relation::Entailment => link(&mut self.hypernyms, &a, &b),
        }
    }

    pub fn with(mut self, a: &str, b: &str, relation: Relation) -> Self {
        self.add(a, b, relation);
        self
    }

    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse(reader: impl BufRead, source: impl Into<String>) -> Result<Self> {
        let mut lex = Self::new(source);
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(lex.source.clone(), e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let relation = Relation::parse(fields[2]).ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("unknown relation {:?}", fields[2].trim()),
            })?;
            lex.add(fields[0], fields[1], relation);
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file), path.display().to_string())
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        has(&self.synonyms, a, b)
    }

    pub fn are_antonyms(&self, a: &str, b: &str) -> bool {
        has(&self.antonyms, a, b)
    }

    pub fn entails(&self, a: &str, b: &str) -> bool {
        has(&self.hypernyms, a, b)
    }

    /// Distinct terms sharing a direct hypernym.
    pub fn are_siblings(&self, a: &str, b: &str) -> bool {
        if a == b {
            return false;
        }
        match (self.hypernyms.get(a), self.hypernyms.get(b)) {
            (Some(pa), Some(pb)) => pa.intersection(pb).next().is_some(),
            _ => false,
        }
    }

    pub fn synonyms_of(&self, a: &str) -> impl Iterator<Item = &str> {
        self.synonyms.get(a).into_iter().flatten().map(String::as_str)
    }

    /// `b` contradicts `a` through a related term: `b` is an antonym of a
    /// synonym of `a`, or `a` and `b` are co-hyponyms.
    pub fn alternates(&self, a: &str, b: &str) -> bool {
        self.are_siblings(a, b) || self.synonyms_of(a).any(|s| self.are_antonyms(s, b))
    }
}

pub(crate) fn any_synonym(lexicons: &[Lexicon], a: &str, b: &str) -> bool {
    lexicons.iter().any(|l| l.are_synonyms(a, b))
}

pub(crate) fn any_antonym(lexicons: &[Lexicon], a: &str, b: &str) -> bool {
    lexicons.iter().any(|l| l.are_antonyms(a, b))
}

pub(crate) fn any_alternation(lexicons: &[Lexicon], a: &str, b: &str) -> bool {
    lexicons.iter().any(|l| l.alternates(a, b))
}

pub(crate) fn max_phrase_len(lexicons: &[Lexicon]) -> usize {
    lexicons.iter().map(Lexicon::max_phrase_len).max().unwrap_or(0)
}
