//! Knowledge base and claim loading.
//!
//! Corpus files hold one JSON record per line:
//!
//! ```text
//! {"title": "Seth Meyers", "sentences": [{"text": "...", "hyperlinks": ["NBC"]}]}
//! ```
//!
//! Claims files likewise:
//!
//! ```text
//! {"claim_id": "c1", "text": "...", "label": "SUPPORTED",
//!  "gold_evidence": [["Seth Meyers", 0]]}
//! ```
//!
//! Sentences are taken as segmented in the file. Titles are NFC-normalized
//! on load and compared byte-exact afterwards.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::normalize_title;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_title: String,
    pub sent_index: usize,
    pub text: String,
    pub hyperlinks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub title: String,
    pub doc_index: usize,
    pub sentences: Vec<Sentence>,
}

impl Document {
    /// Sentence texts joined with single spaces.
    pub fn text(&self) -> String {
        self.sentences
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// A hyperlink anchor that names no document of the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DanglingLink {
    pub doc_title: String,
    pub sent_index: usize,
    pub anchor: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    title_lookup: HashMap<String, usize>,
    dangling: Vec<DanglingLink>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hyperlinks: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub title: String,
    pub sentences: Vec<SentenceRecord>,
}

impl DocumentRecord {
    pub fn new<S: Into<String>>(title: impl Into<String>, sentences: impl IntoIterator<Item = S>) -> Self {
        Self {
            title: title.into(),
            sentences: sentences
                .into_iter()
                .map(|text| SentenceRecord {
                    text: text.into(),
                    hyperlinks: Vec::new(),
                })
                .collect(),
        }
    }
}

impl Corpus {
    pub fn from_records(records: impl IntoIterator<Item = DocumentRecord>) -> Result<Self> {
        let mut documents = Vec::new();
        let mut title_lookup = HashMap::new();
        for record in records {
            let title = normalize_title(&record.title);
            if title.trim().is_empty() {
                return Err(Error::Constraint("document with empty title".into()));
            }
            if record.sentences.is_empty() {
                return Err(Error::Constraint(format!("document {title:?} has no sentences")));
            }
            if title_lookup.contains_key(&title) {
                return Err(Error::DuplicateTitle(title));
            }
            let doc_index = documents.len();
            title_lookup.insert(title.clone(), doc_index);
            let sentences = record
                .sentences
                .into_iter()
                .enumerate()
                .map(|(sent_index, s)| Sentence {
                    doc_title: title.clone(),
                    sent_index,
                    text: s.text,
                    hyperlinks: s.hyperlinks.iter().map(|h| normalize_title(h)).collect(),
                })
                .collect();
            documents.push(Document {
                title,
                doc_index,
                sentences,
            });
        }

        let mut dangling = Vec::new();
        for doc in &documents {
            for s in &doc.sentences {
                for anchor in &s.hyperlinks {
                    if !title_lookup.contains_key(anchor) {
                        dangling.push(DanglingLink {
                            doc_title: doc.title.clone(),
                            sent_index: s.sent_index,
                            anchor: anchor.clone(),
                        });
                    }
                }
            }
        }
        if !dangling.is_empty() {
            log::debug!("{} dangling hyperlink anchors", dangling.len());
        }

        Ok(Self {
            documents,
            title_lookup,
            dangling,
        })
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DocumentRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Self::from_records(records)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file))
    }

    pub fn write(&self, mut w: impl Write) -> std::io::Result<()> {
        for doc in &self.documents {
            let record = DocumentRecord {
                title: doc.title.clone(),
                sentences: doc
                    .sentences
                    .iter()
                    .map(|s| SentenceRecord {
                        text: s.text.clone(),
                        hyperlinks: s.hyperlinks.clone(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.title.as_str())
    }

    pub fn doc_index(&self, title: &str) -> Option<usize> {
        self.title_lookup.get(title).copied()
    }

    pub fn document(&self, title: &str) -> Option<&Document> {
        self.doc_index(title).map(|i| &self.documents[i])
    }

    pub fn contains_title(&self, title: &str) -> bool {
        self.title_lookup.contains_key(title)
    }

    pub fn resolve_sentence(&self, doc_title: &str, sent_index: usize) -> Result<&Sentence> {
        self.document(doc_title)
            .and_then(|d| d.sentences.get(sent_index))
            .ok_or_else(|| Error::NotFound(format!("sentence ({doc_title:?}, {sent_index})")))
    }

    pub fn dangling_links(&self) -> &[DanglingLink] {
        &self.dangling
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "SUPPORTED", alias = "SUPPORTS")]
    Supported,
    #[serde(rename = "REFUTED", alias = "REFUTES")]
    Refuted,
    #[serde(rename = "NEI", alias = "NOT ENOUGH INFO")]
    Nei,
}

/// A `(title, sentence index)` pair, serialized as a two-element array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(String, usize)", into = "(String, usize)")]
pub struct EvidenceRef {
    pub title: String,
    pub sent_index: usize,
}

impl EvidenceRef {
    pub fn new(title: impl Into<String>, sent_index: usize) -> Self {
        Self {
            title: title.into(),
            sent_index,
        }
    }
}

impl From<(String, usize)> for EvidenceRef {
    fn from((title, sent_index): (String, usize)) -> Self {
        Self {
            title: normalize_title(&title),
            sent_index,
        }
    }
}

impl From<EvidenceRef> for (String, usize) {
    fn from(r: EvidenceRef) -> Self {
        (r.title, r.sent_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum ClaimId {
    Text(String),
    Number(i64),
}

pub(crate) fn claim_id_de<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    Ok(match ClaimId::deserialize(d)? {
        ClaimId::Text(s) => s,
        ClaimId::Number(n) => n.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    #[serde(deserialize_with = "claim_id_de")]
    pub claim_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    /// Ordered gold evidence; file order is treated as the evidence order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_evidence: Vec<EvidenceRef>,
    /// Further annotator evidence sets; a retrieval covering any one set
    /// counts as a hit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternative_evidence: Vec<Vec<EvidenceRef>>,
}

impl Claim {
    pub fn new(claim_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            claim_id: claim_id.into(),
            text: text.into(),
            label: None,
            gold_evidence: Vec::new(),
            alternative_evidence: Vec::new(),
        }
    }

    pub fn with_gold(mut self, label: Label, gold: Vec<EvidenceRef>) -> Self {
        self.label = Some(label);
        self.gold_evidence = gold;
        self
    }

    /// Distinct gold documents of every non-empty evidence set, each in
    /// first-mention order.
    pub fn gold_document_sets(&self) -> Vec<Vec<String>> {
        std::iter::once(&self.gold_evidence)
            .chain(self.alternative_evidence.iter())
            .filter(|set| !set.is_empty())
            .map(|set| {
                let mut seen = BTreeSet::new();
                set.iter()
                    .filter(|r| seen.insert(r.title.clone()))
                    .map(|r| r.title.clone())
                    .collect()
            })
            .collect()
    }

    /// Number of distinct documents in the primary gold set.
    pub fn hop_count(&self) -> usize {
        self.gold_document_sets().first().map_or(0, Vec::len)
    }

    pub fn check_gold(&self, corpus: &Corpus) -> Result<()> {
        for r in self.gold_evidence.iter().chain(self.alternative_evidence.iter().flatten()) {
            corpus.resolve_sentence(&r.title, r.sent_index)?;
        }
        Ok(())
    }
}

pub fn parse_claims(reader: impl BufRead) -> Result<Vec<Claim>> {
    let mut claims = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        claims.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(claims)
}

pub fn load_claims(path: impl AsRef<Path>) -> Result<Vec<Claim>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_claims(BufReader::new(file))
}

pub fn write_claims(claims: &[Claim], mut w: impl Write) -> std::io::Result<()> {
    for c in claims {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
