//! Natural-logic proofs over evidence and the sufficiency rule they feed.
//!
//! ```text
//! cargo run --example sufficiency_proof
//! ```

use evidence_hop::corpus::Sentence;
use evidence_hop::natlog::{
    parse_proof, predict_sufficiency, render_proof_ascii, Lexicon, ProofGenerator, ReferenceProver,
};
use evidence_hop::{Proof, RankedEvidence, Result, Sufficiency};

fn sentence(title: &str, text: &str) -> Sentence {
    Sentence {
        doc_title: title.into(),
        sent_index: 0,
        text: text.into(),
        hyperlinks: Vec::new(),
    }
}

pub fn run_example() -> Result<Vec<(Proof, Sufficiency)>> {
    let lexicon = Lexicon::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_lexicon.tsv"))?;
    let prover = ReferenceProver::new(vec![lexicon]);
    let claim = "The 66th Primetime Emmy Awards was hosted by an American comedian born in 1973.";

    let emmy = sentence(
        "66th Primetime Emmy Awards",
        "The 66th Primetime Emmy Awards was presented by Seth Meyers.",
    );
    let meyers = sentence("Seth Meyers", "Seth Meyers is an American comedian born in 1973.");

    let mut out = Vec::new();
    for evidence in [vec![&emmy], vec![&emmy, &meyers]] {
        let evidence = RankedEvidence::from_sentences(evidence);
        let proof = prover.prove(claim, &evidence, evidence.len())?;
        let verdict = predict_sufficiency(&proof)?;
        println!("{} evidence sentence(s): {verdict}", evidence.len());
        println!("  {proof}");
        let ascii = render_proof_ascii(&proof);
        println!("  {ascii}");
        assert_eq!(parse_proof(&ascii)?, proof);
        out.push((proof, verdict));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
