//! Retrieval metrics over pipeline results.
//!
//! Claims without gold documents (NEI) are left out of every document
//! metric. A claim with several annotated evidence sets is a hit when any
//! one set is covered. A claim whose result is missing or failed counts as
//! a miss.
//!
//! Padding: when the final hop ranks fewer than `k` documents, the ranking
//! is filled with unused documents of the previous hop in their rank order,
//! then of earlier hops.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::Claim;
use crate::error::{Error, Result};
use crate::natlog::Sufficiency;
use crate::pipeline::{ResultLine, RetrievalResult};

/// Top-`k` documents of the final hop, padded from earlier hops.
pub fn padded_documents(result: &RetrievalResult, k: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(k);
    let mut seen = HashSet::new();
    let hops = result.trace.iter().rev().map(|h| h.documents.as_slice());
    let sources: Vec<&[String]> = if result.trace.is_empty() {
        vec![result.final_documents.as_slice()]
    } else {
        hops.collect()
    };
    for docs in sources {
        for d in docs {
            if out.len() == k {
                return out;
            }
            if seen.insert(d.as_str()) {
                out.push(d.clone());
            }
        }
    }
    out
}

fn index(results: &[RetrievalResult]) -> HashMap<&str, &RetrievalResult> {
    results.iter().map(|r| (r.claim_id.as_str(), r)).collect()
}

/// Successful results of a results file.
pub fn successful(lines: &[ResultLine]) -> Vec<RetrievalResult> {
    lines
        .iter()
        .filter_map(|l| match l {
            ResultLine::Ok(r) => Some((**r).clone()),
            ResultLine::Err(_) => None,
        })
        .collect()
}

fn gold_sets(claim: &Claim) -> Vec<BTreeSet<String>> {
    claim
        .gold_document_sets()
        .into_iter()
        .map(|s| s.into_iter().collect())
        .collect()
}

fn per_claim<F>(results: &[RetrievalResult], claims: &[Claim], mut f: F) -> Option<f64>
where
    F: FnMut(Option<&RetrievalResult>, &[BTreeSet<String>]) -> f64,
{
    let by_id = index(results);
    let mut total = 0.0;
    let mut n = 0usize;
    for claim in claims {
        let gold = gold_sets(claim);
        if gold.is_empty() {
            continue;
        }
        total += f(by_id.get(claim.claim_id.as_str()).copied(), &gold);
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}

/// Fraction of claims with some gold set inside the padded top `k`.
/// Returns 0 when no claim has gold documents.
pub fn recall_at_k(results: &[RetrievalResult], claims: &[Claim], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    Ok(per_claim(results, claims, |r, gold| {
        let Some(r) = r else { return 0.0 };
        let top: HashSet<String> = padded_documents(r, k).into_iter().collect();
        f64::from(u8::from(gold.iter().any(|g| g.iter().all(|d| top.contains(d)))))
    })
    .unwrap_or(0.0))
}

/// Fraction of claims whose top-|gold| documents equal a gold set.
pub fn exact_match(results: &[RetrievalResult], claims: &[Claim]) -> f64 {
    per_claim(results, claims, |r, gold| {
        let Some(r) = r else { return 0.0 };
        let hit = gold.iter().any(|g| {
            let top: BTreeSet<String> = padded_documents(r, g.len()).into_iter().collect();
            &top == g
        });
        f64::from(u8::from(hit))
    })
    .unwrap_or(0.0)
}

fn f1(retrieved: &BTreeSet<String>, gold: &BTreeSet<String>) -> f64 {
    if retrieved.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let tp = retrieved.intersection(gold).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / retrieved.len() as f64;
    let r = tp / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Mean F1 between the padded top-`k` set and the best-matching gold set.
pub fn doc_f1(results: &[RetrievalResult], claims: &[Claim], k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    Ok(per_claim(results, claims, |r, gold| {
        let Some(r) = r else { return 0.0 };
        let top: BTreeSet<String> = padded_documents(r, k).into_iter().collect();
        gold.iter().map(|g| f1(&top, g)).fold(0.0, f64::max)
    })
    .unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GateCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl GateCounts {
    pub fn invocations(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    /// 0 when nothing was predicted insufficient.
    pub fn precision(&self) -> f64 {
        let d = self.true_positive + self.false_positive;
        if d == 0 {
            0.0
        } else {
            self.true_positive as f64 / d as f64
        }
    }

    /// 0 when no gate call needed more evidence.
    pub fn recall(&self) -> f64 {
        let d = self.true_positive + self.false_negative;
        if d == 0 {
            0.0
        } else {
            self.true_positive as f64 / d as f64
        }
    }
}

/// Confusion counts of the gate over every hop of every result. A hop needs
/// more evidence (the positive class) when no gold set is covered by the
/// documents of its evidence sentences.
pub fn gate_counts(results: &[RetrievalResult], claims: &[Claim]) -> GateCounts {
    let gold: HashMap<&str, Vec<BTreeSet<String>>> =
        claims.iter().map(|c| (c.claim_id.as_str(), gold_sets(c))).collect();
    let mut counts = GateCounts::default();
    for r in results {
        let Some(sets) = gold.get(r.claim_id.as_str()).filter(|s| !s.is_empty()) else {
            continue;
        };
        for hop in &r.trace {
            let have: HashSet<String> = hop.evidence.documents().into_iter().collect();
            let needs_more = !sets.iter().any(|g| g.iter().all(|d| have.contains(d)));
            let predicted = hop.sufficiency == Sufficiency::Insufficient;
            match (predicted, needs_more) {
                (true, true) => counts.true_positive += 1,
                (true, false) => counts.false_positive += 1,
                (false, true) => counts.false_negative += 1,
                (false, false) => counts.true_negative += 1,
            }
        }
    }
    counts
}

/// `(precision, recall)` of the gate's insufficient decisions.
pub fn insufficiency_pr(results: &[RetrievalResult], claims: &[Claim]) -> (f64, f64) {
    let c = gate_counts(results, claims);
    (c.precision(), c.recall())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub claims: usize,
    pub recall: BTreeMap<usize, f64>,
    pub exact_match: f64,
    pub f1: f64,
    pub mean_hops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub claims: usize,
    pub results: usize,
    pub failed: usize,
    pub f1_k: usize,
    pub overall: GroupMetrics,
    /// Keyed by the number of gold documents.
    pub by_hops: BTreeMap<usize, GroupMetrics>,
    pub gate: GateCounts,
}

fn group(results: &[RetrievalResult], claims: &[Claim], ks: &[usize], f1_k: usize) -> Result<GroupMetrics> {
    let ids: HashSet<&str> = claims.iter().map(|c| c.claim_id.as_str()).collect();
    let mine: Vec<&RetrievalResult> = results.iter().filter(|r| ids.contains(r.claim_id.as_str())).collect();
    let mut recall = BTreeMap::new();
    for &k in ks {
        recall.insert(k, recall_at_k(results, claims, k)?);
    }
    Ok(GroupMetrics {
        claims: claims.iter().filter(|c| !c.gold_document_sets().is_empty()).count(),
        recall,
        exact_match: exact_match(results, claims),
        f1: doc_f1(results, claims, f1_k)?,
        mean_hops: if mine.is_empty() {
            0.0
        } else {
            mine.iter().map(|r| r.n_dyn as f64).sum::<f64>() / mine.len() as f64
        },
    })
}

/// Metrics overall and per gold hop count.
pub fn report(lines: &[ResultLine], claims: &[Claim], ks: &[usize], f1_k: usize) -> Result<Report> {
    let results = successful(lines);
    let mut by_hops = BTreeMap::new();
    let hop_counts: BTreeSet<usize> = claims.iter().map(Claim::hop_count).filter(|&h| h > 0).collect();
    for h in hop_counts {
        let subset: Vec<Claim> = claims.iter().filter(|c| c.hop_count() == h).cloned().collect();
        by_hops.insert(h, group(&results, &subset, ks, f1_k)?);
    }
    Ok(Report {
        claims: claims.len(),
        results: results.len(),
        failed: lines.len() - results.len(),
        f1_k,
        overall: group(&results, claims, ks, f1_k)?,
        by_hops,
        gate: gate_counts(&results, claims),
    })
}

impl Report {
    /// `key = value` lines.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("claims", self.claims.to_string());
        line("results", self.results.to_string());
        line("failed", self.failed.to_string());
        let mut group = |prefix: &str, g: &GroupMetrics| {
            line(&format!("{prefix}claims_with_gold"), g.claims.to_string());
            for (k, v) in &g.recall {
                line(&format!("{prefix}recall@{k}"), v.to_string());
            }
            line(&format!("{prefix}exact_match"), g.exact_match.to_string());
            line(&format!("{prefix}f1@{}", self.f1_k), g.f1.to_string());
            line(&format!("{prefix}mean_hops"), g.mean_hops.to_string());
        };
        group("", &self.overall);
        for (h, g) in &self.by_hops {
            group(&format!("hops_{h}."), g);
        }
        line("gate.invocations", self.gate.invocations().to_string());
        line("gate.insufficiency_precision", self.gate.precision().to_string());
        line("gate.insufficiency_recall", self.gate.recall().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam_decoder::DocSetScore;
    use crate::corpus::{EvidenceRef, Label};
    use crate::natlog::Proof;
    use crate::pipeline::{HopState, PipelineConfig};
    use crate::reranker::RankedEvidence;

    fn hop(t: usize, docs: &[&str]) -> HopState {
        HopState {
            hop: t,
            document_sets: docs.iter().map(|d| DocSetScore { doc_set: vec![d.to_string()], logprob: 0.0 }).collect(),
            documents: docs.iter().map(|d| d.to_string()).collect(),
            evidence: RankedEvidence::default(),
            proof: Proof::default(),
            proof_text: String::new(),
            sufficiency: Sufficiency::Sufficient,
            sequences: vec![],
            diagnostic: None,
        }
    }

    fn result(id: &str, hops: &[&[&str]]) -> RetrievalResult {
        let trace: Vec<HopState> = hops.iter().enumerate().map(|(i, d)| hop(i + 1, d)).collect();
        let last = trace.last().unwrap().clone();
        RetrievalResult {
            claim_id: id.into(),
            n_dyn: trace.len(),
            decoder_rounds: trace.len() - 1,
            final_document_sets: last.document_sets,
            final_documents: last.documents,
            final_evidence: last.evidence,
            trace,
            decoder_scoring: "raw-sum-logprob".into(),
            config: PipelineConfig::default(),
        }
    }

    fn claim(id: &str, gold: &[&str]) -> Claim {
        Claim::new(id, "x").with_gold(Label::Supported, gold.iter().map(|t| EvidenceRef::new(*t, 0)).collect())
    }

    #[test]
    fn padding_uses_previous_hop() {
        let r = result("c", &[&["A", "B", "C", "D"], &["X", "A", "Y"]]);
        assert_eq!(padded_documents(&r, 5), vec!["X", "A", "Y", "B", "C"]);
        assert_eq!(padded_documents(&r, 2), vec!["X", "A"]);
    }

    #[test]
    fn subset_rule() {
        let claims = [claim("c", &["A", "B"])];
        assert_eq!(recall_at_k(&[result("c", &[&["A", "B", "C"]])], &claims, 5).unwrap(), 1.0);
        assert_eq!(recall_at_k(&[result("c", &[&["A", "C", "D", "E", "F"]])], &claims, 5).unwrap(), 0.0);
        assert!(recall_at_k(&[], &claims, 0).is_err());
    }

    #[test]
    fn em_and_f1() {
        let claims = [claim("c", &["A", "B"])];
        assert_eq!(exact_match(&[result("c", &[&["B", "A"]])], &claims), 1.0);
        assert_eq!(exact_match(&[result("c", &[&["A", "C"]])], &claims), 0.0);
        assert_eq!(doc_f1(&[result("c", &[&["A", "C"]])], &claims, 2).unwrap(), 0.5);
        assert_eq!(doc_f1(&[result("c", &[&["C", "D"]])], &claims, 2).unwrap(), 0.0);
    }

    #[test]
    fn nei_excluded_and_missing_counts_as_miss() {
        let claims = [claim("a", &["A"]), Claim::new("n", "nei"), claim("m", &["M"])];
        let results = [result("a", &[&["A"]]), result("n", &[&["Z"]])];
        assert_eq!(recall_at_k(&results, &claims, 1).unwrap(), 0.5);
    }

    #[test]
    fn gate_extremes() {
        let claims = [claim("a", &["A", "B"])];
        let mut r = result("a", &[&["A"], &["A", "B"]]);
        // Nothing predicted insufficient.
        let (p, rec) = insufficiency_pr(std::slice::from_ref(&r), &claims);
        assert_eq!((p, rec), (0.0, 0.0));
        for h in &mut r.trace {
            h.sufficiency = Sufficiency::Insufficient;
        }
        let (_, rec) = insufficiency_pr(&[r], &claims);
        assert_eq!(rec, 1.0);
    }
}
