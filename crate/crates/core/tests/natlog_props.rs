use evidence_hop::natlog::{
    parse_proof, predict_sufficiency, render_proof, render_proof_ascii, repair_proof, span_similarity_reference,
    Lexicon, Mutation, Relation,
};
use evidence_hop::{Label, NatOp, Proof, Sufficiency};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ops_proof(ops: &[NatOp]) -> Proof {
    Proof::new(ops.iter().enumerate().map(|(i, &op)| Mutation::new(format!("c{i}"), format!("e{i}"), op)).collect())
}

#[test]
fn every_short_sequence_follows_the_rule() {
    let mut checked = 0;
    for n in 1..=5u32 {
        for code in 0..4usize.pow(n) {
            let ops: Vec<NatOp> = (0..n).map(|i| NatOp::SUFFICIENCY[(code >> (2 * i)) & 3]).collect();
            let expected = if ops.contains(&NatOp::Independence) {
                Sufficiency::Insufficient
            } else {
                Sufficiency::Sufficient
            };
            assert_eq!(predict_sufficiency(&ops_proof(&ops)).unwrap(), expected, "{ops:?}");
            checked += 1;
        }
    }
    assert_eq!(checked, 1364);
}

#[test]
fn extended_operators_are_rejected_by_the_gate() {
    for op in [NatOp::ForwardEntailment, NatOp::ReverseEntailment, NatOp::Cover] {
        assert!(predict_sufficiency(&ops_proof(&[NatOp::Equivalence, op])).is_err());
        let normalized = ops_proof(&[NatOp::Equivalence, op]).gate_normalized();
        assert_eq!(predict_sufficiency(&normalized).unwrap(), Sufficiency::Insufficient);
    }
}

const WORDS: &[&str] = &[
    "Seth", "Meyers", "hosted", "presented", "American", "Canadian", "comedian", "not", "never", "born", "in",
    "1973", "the", "show", "a", "eastern", "western",
];

fn random_span(rng: &mut ChaCha8Rng, min: usize) -> String {
    let len = rng.random_range(min..=4);
    (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn random_proof(rng: &mut ChaCha8Rng) -> Proof {
    let n = rng.random_range(1..=6);
    Proof::new(
        (0..n)
            .map(|_| {
                let op = *NatOp::ALL.choose(rng).unwrap();
                Mutation::new(random_span(rng, 1), random_span(rng, 0), op)
            })
            .collect(),
    )
}

#[test]
fn repair_always_reaches_its_target() {
    let lexicon = Lexicon::new("test")
        .with("hosted", "presented", Relation::Synonym)
        .with("american", "canadian", Relation::Antonym)
        .with("eastern", "western", Relation::Antonym);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut outputs = 0;
    for _ in 0..600 {
        let raw = random_proof(&mut rng);
        for target in [Sufficiency::Sufficient, Sufficiency::Insufficient] {
            for label in [Label::Supported, Label::Refuted] {
                let fixed = repair_proof(&raw, target, label, std::slice::from_ref(&lexicon), &span_similarity_reference).unwrap();
                assert_eq!(predict_sufficiency(&fixed).unwrap(), target, "{raw} -> {fixed}");
                assert!(!fixed.has_extended_ops());
                assert_eq!(fixed.mutations.len(), raw.mutations.len());
                for (a, b) in raw.mutations.iter().zip(&fixed.mutations) {
                    assert_eq!((&a.claim_span, &a.evidence_span), (&b.claim_span, &b.evidence_span));
                }
                outputs += 1;
            }
        }
    }
    assert_eq!(outputs, 2400);
}

#[test]
fn insufficient_repair_picks_least_similar_mutation() {
    let raw = Proof::new(vec![
        Mutation::new("comedian", "comedy", NatOp::Equivalence),
        Mutation::new("born", "xyz", NatOp::Equivalence),
        Mutation::new("1973", "1973", NatOp::Equivalence),
    ]);
    let fixed = repair_proof(&raw, Sufficiency::Insufficient, Label::Supported, &[], &span_similarity_reference).unwrap();
    assert_eq!(fixed.ops(), vec![NatOp::Equivalence, NatOp::Independence, NatOp::Equivalence]);
}

#[test]
fn trigram_cosine_value() {
    assert!((span_similarity_reference("comedian", "comedy") - 0.612_372_435_695_794_6).abs() < 1e-12);
    assert_eq!(span_similarity_reference("", "comedy"), 0.0);
    assert_eq!(span_similarity_reference("Comedy", "comedy"), 1.0);
}

fn op_strategy() -> impl Strategy<Value = NatOp> {
    prop::sample::select(NatOp::ALL.to_vec())
}

fn span_strategy(allow_empty: bool) -> impl Strategy<Value = String> {
    let min = usize::from(!allow_empty);
    prop::collection::vec("[A-Za-z0-9,.'-]{1,8}", min..4).prop_map(|w| w.join(" "))
}

fn proof_strategy() -> impl Strategy<Value = Proof> {
    prop::collection::vec((span_strategy(false), span_strategy(true), op_strategy()), 1..6)
        .prop_map(|ms| Proof::new(ms.into_iter().map(|(c, e, op)| Mutation::new(c, e, op)).collect()))
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(proof in proof_strategy()) {
        prop_assert_eq!(parse_proof(&render_proof(&proof)).unwrap(), proof.clone());
        prop_assert_eq!(parse_proof(&render_proof_ascii(&proof)).unwrap(), proof);
    }

    #[test]
    fn sufficiency_is_absence_of_independence(ops in prop::collection::vec(prop::sample::select(NatOp::SUFFICIENCY.to_vec()), 0..12)) {
        let verdict = predict_sufficiency(&ops_proof(&ops)).unwrap();
        prop_assert_eq!(verdict == Sufficiency::Insufficient, ops.contains(&NatOp::Independence));
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(a in "[a-z ]{0,12}", b in "[a-z ]{0,12}") {
        let x = span_similarity_reference(&a, &b);
        prop_assert!((x - span_similarity_reference(&b, &a)).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&x));
    }

    #[test]
    fn repair_is_idempotent(proof in proof_strategy(), sufficient in any::<bool>(), refuted in any::<bool>()) {
        let target = if sufficient { Sufficiency::Sufficient } else { Sufficiency::Insufficient };
        let label = if refuted { Label::Refuted } else { Label::Supported };
        let once = repair_proof(&proof, target, label, &[], &span_similarity_reference).unwrap();
        let twice = repair_proof(&once, target, label, &[], &span_similarity_reference).unwrap();
        prop_assert_eq!(once, twice);
    }
}
