//! Repairing generated proofs so that they agree with a known sufficiency
//! target, as done when building prover training data.
//!
//! ```text
//! cargo run --example proof_repair
//! ```

use evidence_hop::natlog::{parse_proof, predict_sufficiency, repair_proof, span_similarity_reference, Lexicon, Relation};
use evidence_hop::{Label, Proof, Result, Sufficiency};

pub fn run_example() -> Result<Vec<(Sufficiency, Label, Proof)>> {
    let lexicon = Lexicon::new("inline")
        .with("hosted", "presented", Relation::Synonym)
        .with("american", "canadian", Relation::Antonym);
    let raw = parse_proof(
        "{ Seth Meyers } [ Seth Meyers ] EQ { hosted } [ presented ] COV { an American comedian } [ a Canadian comedian ] FWD",
    )?;
    println!("raw:      {raw}");

    let mut out = Vec::new();
    for (target, label) in [
        (Sufficiency::Sufficient, Label::Supported),
        (Sufficiency::Sufficient, Label::Refuted),
        (Sufficiency::Insufficient, Label::Supported),
    ] {
        let fixed = repair_proof(&raw, target, label, std::slice::from_ref(&lexicon), &span_similarity_reference)?;
        assert_eq!(predict_sufficiency(&fixed)?, target);
        println!("{target} {label:?}: {fixed}");
        out.push((target, label, fixed));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
