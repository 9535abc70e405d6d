//! Every runnable example, executed as a test.

#[path = "../examples/bm25_search.rs"]
mod bm25_search;
#[path = "../examples/constrained_decoding.rs"]
mod constrained_decoding;
#[path = "../examples/evaluate_results.rs"]
mod evaluate_results;
#[path = "../examples/external_scorer.rs"]
mod external_scorer;
#[path = "../examples/footprint.rs"]
mod footprint;
#[path = "../examples/multi_hop_pipeline.rs"]
mod multi_hop_pipeline;
#[path = "../examples/proof_repair.rs"]
mod proof_repair;
#[path = "../examples/sufficiency_proof.rs"]
mod sufficiency_proof;
#[path = "../examples/training_data.rs"]
mod training_data;

use evidence_hop::pipeline::ResultLine;
use evidence_hop::{NatOp, Sufficiency};

#[test]
fn bm25_search() {
    let ranked = bm25_search::run_example().unwrap();
    let titles: Vec<_> = ranked.iter().map(|(t, _)| t.as_str()).collect();
    assert_eq!(titles, ["Emmy Awards", "Seth Meyers", "Television"]);
    assert!((ranked[0].1 - 1.015_792_708_184_752_4).abs() < 1e-9);
}

#[test]
fn constrained_decoding() {
    let sets = constrained_decoding::run_example().unwrap();
    assert_eq!(sets.len(), 3);
    assert!(sets.windows(2).all(|w| w[0].logprob >= w[1].logprob));
    assert!(sets.iter().all(|s| s.doc_set.contains(&"66th Primetime Emmy Awards".to_string())));
}

#[test]
fn sufficiency_proof() {
    let out = sufficiency_proof::run_example().unwrap();
    assert_eq!(out[0].1, Sufficiency::Insufficient);
    assert_eq!(out[1].1, Sufficiency::Sufficient);
    assert!(out.iter().all(|(p, _)| p.covers(
        "The 66th Primetime Emmy Awards was hosted by an American comedian born in 1973."
    )));
}

#[test]
fn proof_repair() {
    let out = proof_repair::run_example().unwrap();
    assert_eq!(out.len(), 3);
    for (_, _, proof) in &out {
        assert!(!proof.has_extended_ops());
    }
    assert_eq!(out[0].2.mutations[2].op, NatOp::Alternation);
    assert!(out[2].2.ops().contains(&NatOp::Independence));
}

#[test]
fn multi_hop_pipeline() {
    let lines = multi_hop_pipeline::run_example().unwrap();
    assert_eq!(lines.len(), 7);
    for line in &lines {
        let ResultLine::Ok(r) = line else { panic!("{line:?}") };
        assert!(r.n_dyn <= 2);
        assert_eq!(r.decoder_rounds, r.n_dyn - 1);
    }
}

#[test]
fn training_data() {
    let (hops, proofs) = training_data::run_example().unwrap();
    assert_eq!(hops.len(), 4);
    assert!(hops.iter().all(|e| e.input.matches("</s>").count() == 3));
    assert_eq!(proofs.len(), 2 * 6);
}

#[test]
fn evaluate_results() {
    let c = evaluate_results::run_example().unwrap();
    assert!(c.pipeline_recall > c.initial_recall);
    assert!(c.report.contains("recall@5 = "));
}

#[test]
fn external_scorer() {
    let (local, remote) = external_scorer::run_example().unwrap();
    assert_eq!(local.len(), remote.len());
    for (a, b) in local.iter().zip(&remote) {
        assert_eq!(a.tokens, b.tokens);
        assert!((a.logprob - b.logprob).abs() < 1e-9);
    }
}

#[test]
fn footprint() {
    let rows = footprint::run_example().unwrap();
    let per_token: Vec<f64> = rows.iter().map(|r| r.trie_bytes as f64 / r.title_tokens as f64).collect();
    assert!(per_token.iter().all(|p| (p / per_token[0] - 1.0).abs() < 0.2));
}
