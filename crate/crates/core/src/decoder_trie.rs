//! Title trie and the markup grammar for constrained decoding.
//!
//! A decoded sequence names `t` evidence sentences and then one (or, for
//! joint document decoding, several) bracketed corpus titles:
//!
//! ```text
//! E2 E4 [ Seth Meyers </title> ]
//! ```
//!
//! Sentence identifiers are atomic tokens `E1..El`. Titles are spelled as
//! whitespace tokens and terminated by [`END_OF_TITLE`]; the brackets and
//! the end marker are grammar tokens. [`MarkupState`] tracks the position in
//! this grammar and yields the legal next tokens.
//!
//! Serialized trie layout (little endian): magic `EVHOPTRI`, `u32` version,
//! `u64` title count, then nodes in preorder. Each node is `token: str`,
//! `flags: u8` (bit 0 terminal, bit 1 title stored verbatim), the verbatim
//! title when bit 1 is set, and `u32` child count.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{self, ByteCounter};
use crate::error::{Error, Result};
use crate::text::{normalize_title, title_tokens};

pub const OPEN_BRACKET: &str = "[";
pub const CLOSE_BRACKET: &str = "]";
pub const END_OF_TITLE: &str = "</title>";

const MAGIC: &[u8; 8] = b"EVHOPTRI";
const VERSION: u32 = 1;

pub type NodeId = u32;

/// Identifier token of the `i`-th (1-based) evidence sentence.
pub fn sentence_id(i: usize) -> String {
    format!("E{i}")
}

pub fn parse_sentence_id(token: &str) -> Option<usize> {
    let digits = token.strip_prefix('E')?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

pub fn is_markup(token: &str) -> bool {
    token == OPEN_BRACKET || token == CLOSE_BRACKET || token == END_OF_TITLE
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Node {
    token: String,
    children: Vec<NodeId>,
    terminal: Option<u32>,
    first: u32,
    last: u32,
}

impl Node {
    fn new(token: String) -> Self {
        Self {
            token,
            children: Vec::new(),
            terminal: None,
            first: u32::MAX,
            last: 0,
        }
    }
}

/// Prefix tree over tokenized titles.
///
/// Titles are numbered by their position in token-sequence order, which is
/// also the preorder of their terminal nodes, so every subtree covers a
/// contiguous ordinal range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoderTrie {
    nodes: Vec<Node>,
    titles: Vec<String>,
    title_tokens: usize,
}

impl Default for DecoderTrie {
    fn default() -> Self {
        Self {
            nodes: vec![Node::new(String::new())],
            titles: Vec::new(),
            title_tokens: 0,
        }
    }
}

impl DecoderTrie {
    /// Builds the trie with whitespace title tokenization.
    pub fn build<S: AsRef<str>>(titles: &[S]) -> Result<Self> {
        Self::build_with(titles, title_tokens)
    }

    pub fn build_with<S: AsRef<str>>(titles: &[S], tokenizer: impl Fn(&str) -> Vec<String>) -> Result<Self> {
        let mut entries = Vec::with_capacity(titles.len());
        for t in titles {
            let title = normalize_title(t.as_ref());
            let tokens = tokenizer(&title);
            if tokens.is_empty() {
                return Err(Error::Constraint(format!("title {title:?} has no tokens")));
            }
            if let Some(bad) = tokens.iter().find(|t| is_markup(t)) {
                return Err(Error::Constraint(format!("title {title:?} contains the markup token {bad:?}")));
            }
            entries.push((tokens, title));
        }
        entries.sort();
        for pair in entries.windows(2) {
            if pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateTitle(pair[0].1.clone()));
            }
            if pair[0].0 == pair[1].0 {
                return Err(Error::Constraint(format!(
                    "titles {:?} and {:?} have identical token sequences",
                    pair[0].1, pair[1].1
                )));
            }
        }

        let mut trie = Self::default();
        for (ordinal, (tokens, title)) in entries.into_iter().enumerate() {
            let ordinal = ordinal as u32;
            trie.title_tokens += tokens.len();
            let mut node = 0usize;
            trie.touch(node, ordinal);
            for token in tokens {
                // sorted insertion: an existing child for this token is always the last one
                let existing = trie.nodes[node]
                    .children
                    .last()
                    .copied()
                    .filter(|&c| trie.nodes[c as usize].token == token);
                node = match existing {
                    Some(c) => c as usize,
                    None => {
                        let id = trie.nodes.len() as NodeId;
                        trie.nodes.push(Node::new(token));
                        trie.nodes[node].children.push(id);
                        id as usize
                    }
                };
                trie.touch(node, ordinal);
            }
            trie.nodes[node].terminal = Some(ordinal);
            trie.titles.push(title);
        }
        Ok(trie)
    }

    fn touch(&mut self, node: usize, ordinal: u32) {
        let n = &mut self.nodes[node];
        n.first = n.first.min(ordinal);
        n.last = n.last.max(ordinal + 1);
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn child(&self, node: NodeId, token: &str) -> Option<NodeId> {
        let children = &self.nodes[node as usize].children;
        children
            .binary_search_by(|&c| self.nodes[c as usize].token.as_str().cmp(token))
            .ok()
            .map(|i| children[i])
    }

    pub fn walk<S: AsRef<str>>(&self, tokens: &[S]) -> Option<NodeId> {
        tokens
            .iter()
            .try_fold(self.root(), |node, t| self.child(node, t.as_ref()))
    }

    pub fn children(&self, node: NodeId) -> impl Iterator<Item = (&str, NodeId)> + '_ {
        self.nodes[node as usize]
            .children
            .iter()
            .map(move |&c| (self.nodes[c as usize].token.as_str(), c))
    }

    /// Ordinal of the title ending at `node`.
    pub fn terminal(&self, node: NodeId) -> Option<u32> {
        self.nodes[node as usize].terminal
    }

    /// Ordinals of all titles below `node`.
    pub fn subtree(&self, node: NodeId) -> Range<u32> {
        let n = &self.nodes[node as usize];
        if n.first > n.last {
            0..0
        } else {
            n.first..n.last
        }
    }

    /// Legal continuations after `prefix`: the end marker when `prefix`
    /// spells a whole title, then the child tokens in sorted order.
    pub fn allowed_next<S: AsRef<str>>(&self, prefix: &[S]) -> Vec<String> {
        let Some(node) = self.walk(prefix) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        if self.terminal(node).is_some() {
            out.push(END_OF_TITLE.to_owned());
        }
        out.extend(self.children(node).map(|(t, _)| t.to_owned()));
        out
    }

    pub fn contains(&self, title: &str) -> bool {
        let title = normalize_title(title);
        self.walk(&title_tokens(&title))
            .and_then(|n| self.terminal(n))
            .is_some_and(|o| self.titles[o as usize] == title)
    }

    pub fn title(&self, ordinal: u32) -> &str {
        &self.titles[ordinal as usize]
    }

    /// Titles in ordinal order.
    pub fn titles(&self) -> &[String] {
        &self.titles
    }

    pub fn title_count(&self) -> usize {
        self.titles.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_title_tokens(&self) -> usize {
        self.title_tokens
    }

    /// Approximate resident size: node structs, child links, token bytes
    /// and title strings.
    pub fn memory_bytes(&self) -> u64 {
        let nodes: usize = self
            .nodes
            .iter()
            .map(|n| std::mem::size_of::<Node>() + n.token.len() + n.children.len() * 4)
            .sum();
        let titles: usize = self
            .titles
            .iter()
            .map(|t| std::mem::size_of::<String>() + t.len())
            .sum();
        (nodes + titles) as u64
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        binio::write_header(w, MAGIC, VERSION)?;
        binio::write_u64(w, self.titles.len() as u64)?;
        let mut path: Vec<&str> = Vec::new();
        self.write_node(w, 0, &mut path)
    }

    fn write_node<'a>(&'a self, w: &mut impl Write, id: usize, path: &mut Vec<&'a str>) -> std::io::Result<()> {
        let node = &self.nodes[id];
        binio::write_str(w, &node.token)?;
        if id != 0 {
            path.push(&node.token);
        }
        match node.terminal {
            Some(o) => {
                let title = &self.titles[o as usize];
                if *title == path.join(" ") {
                    binio::write_u8(w, 1)?;
                } else {
                    binio::write_u8(w, 3)?;
                    binio::write_str(w, title)?;
                }
            }
            None => binio::write_u8(w, 0)?,
        }
        binio::write_u32(w, node.children.len() as u32)?;
        for &c in &node.children {
            self.write_node(w, c as usize, path)?;
        }
        if id != 0 {
            path.pop();
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        binio::read_header(r, MAGIC, VERSION)?;
        let expected = binio::read_u64(r)? as usize;
        let mut trie = Self {
            nodes: Vec::new(),
            titles: Vec::new(),
            title_tokens: 0,
        };
        let mut path = Vec::new();
        trie.read_node(r, &mut path)?;
        if trie.titles.len() != expected {
            return Err(Error::Format(format!(
                "trie declares {expected} titles but holds {}",
                trie.titles.len()
            )));
        }
        Ok(trie)
    }

    fn read_node(&mut self, r: &mut impl Read, path: &mut Vec<String>) -> Result<NodeId> {
        let token = binio::read_str(r)?;
        let id = self.nodes.len();
        let is_root = id == 0;
        if !is_root {
            path.push(token.clone());
        }
        self.nodes.push(Node::new(token));
        let flags = binio::read_u8(r)?;
        if flags & 1 != 0 {
            let title = if flags & 2 != 0 {
                binio::read_str(r)?
            } else {
                path.join(" ")
            };
            let ordinal = self.titles.len() as u32;
            self.titles.push(title);
            self.title_tokens += path.len();
            self.nodes[id].terminal = Some(ordinal);
        }
        let first_before = self.titles.len() as u32;
        let n_children = binio::read_u32(r)?;
        let mut prev: Option<String> = None;
        for _ in 0..n_children {
            let c = self.read_node(r, path)?;
            let tok = &self.nodes[c as usize].token;
            if prev.as_ref().is_some_and(|p| p >= tok) {
                return Err(Error::Format("trie children out of order".into()));
            }
            prev = Some(tok.clone());
            self.nodes[id].children.push(c);
        }
        let start = self.nodes[id].terminal.unwrap_or(first_before);
        let end = self.titles.len() as u32;
        if end > start {
            self.nodes[id].first = start;
            self.nodes[id].last = end;
        }
        if !is_root {
            path.pop();
        }
        Ok(id as NodeId)
    }

    /// Writes the trie and returns its size in bytes.
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

    pub fn serialized_bytes(&self) -> u64 {
        let mut counter = ByteCounter::default();
        self.write_to(&mut counter).expect("counting writer never fails");
        counter.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    SentenceIds,
    OpenBracket,
    Title,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cursor {
    Node(NodeId),
    /// The end marker of title `ordinal` was emitted; only `]` may follow.
    TitleEnd(u32),
}

/// Position in the markup grammar of one decoding hypothesis.
///
/// Exactly `required_ids` distinct sentence identifiers come first, then
/// `title_segments` bracketed titles. With several segments the titles must
/// be distinct, and subtrees whose titles are all used are pruned so every
/// reachable state can still complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkupState {
    phase: Phase,
    emitted_ids: Vec<String>,
    required_ids: usize,
    title_segments: usize,
    titles: Vec<u32>,
    cursor: Cursor,
}

impl MarkupState {
    pub fn new(required_ids: usize) -> Self {
        Self::with_title_segments(required_ids, 1)
    }

    pub fn with_title_segments(required_ids: usize, title_segments: usize) -> Self {
        assert!(title_segments >= 1, "at least one title segment");
        Self {
            phase: if required_ids == 0 {
                Phase::OpenBracket
            } else {
                Phase::SentenceIds
            },
            emitted_ids: Vec::new(),
            required_ids,
            title_segments,
            titles: Vec::new(),
            cursor: Cursor::Node(0),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_closed(&self) -> bool {
        self.phase == Phase::Closed
    }

    /// Sentence identifiers in emission order.
    pub fn emitted_ids(&self) -> &[String] {
        &self.emitted_ids
    }

    pub fn required_ids(&self) -> usize {
        self.required_ids
    }

    /// Ordinals of the completed titles, in emission order.
    pub fn titles(&self) -> &[u32] {
        &self.titles
    }

    fn title_available(&self, ordinal: u32) -> bool {
        !self.titles.contains(&ordinal)
    }

    fn subtree_available(&self, trie: &DecoderTrie, node: NodeId) -> bool {
        let range = trie.subtree(node);
        let used = self.titles.iter().filter(|o| range.contains(o)).count();
        (range.len()) > used
    }

    pub fn allowed_tokens<S: AsRef<str>>(&self, trie: &DecoderTrie, evidence_ids: &[S]) -> Vec<String> {
        match self.phase {
            Phase::SentenceIds => evidence_ids
                .iter()
                .map(AsRef::as_ref)
                .filter(|id| !self.emitted_ids.iter().any(|e| e == id))
                .map(str::to_owned)
                .collect(),
            Phase::OpenBracket => vec![OPEN_BRACKET.to_owned()],
            Phase::Title => match self.cursor {
                Cursor::TitleEnd(_) => vec![CLOSE_BRACKET.to_owned()],
                Cursor::Node(node) => {
                    let mut out = Vec::new();
                    if let Some(o) = trie.terminal(node) {
                        if self.title_available(o) {
                            out.push(END_OF_TITLE.to_owned());
                        }
                    }
                    out.extend(
                        trie.children(node)
                            .filter(|&(_, c)| self.subtree_available(trie, c))
                            .map(|(t, _)| t.to_owned()),
                    );
                    out
                }
            },
            Phase::Closed => Vec::new(),
        }
    }

    /// Returns the successor state; `self` is left untouched.
    pub fn advance<S: AsRef<str>>(&self, trie: &DecoderTrie, evidence_ids: &[S], token: &str) -> Result<Self> {
        let allowed = self.allowed_tokens(trie, evidence_ids);
        if !allowed.iter().any(|a| a == token) {
            return Err(Error::Contract(format!(
                "token {token:?} not allowed in phase {:?} (allowed: {allowed:?})",
                self.phase
            )));
        }
        let mut next = self.clone();
        match (self.phase, self.cursor) {
            (Phase::SentenceIds, _) => {
                next.emitted_ids.push(token.to_owned());
                if next.emitted_ids.len() == self.required_ids {
                    next.phase = Phase::OpenBracket;
                }
            }
            (Phase::OpenBracket, _) => {
                next.phase = Phase::Title;
                next.cursor = Cursor::Node(trie.root());
            }
            (Phase::Title, Cursor::Node(node)) => {
                next.cursor = if token == END_OF_TITLE {
                    Cursor::TitleEnd(trie.terminal(node).expect("end marker only at terminals"))
                } else {
                    Cursor::Node(trie.child(node, token).expect("allowed child exists"))
                };
            }
            (Phase::Title, Cursor::TitleEnd(ordinal)) => {
                next.titles.push(ordinal);
                next.cursor = Cursor::Node(trie.root());
                next.phase = if next.titles.len() == self.title_segments {
                    Phase::Closed
                } else {
                    Phase::OpenBracket
                };
            }
            (Phase::Closed, _) => unreachable!("closed state allows no token"),
        }
        Ok(next)
    }
}
