mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::FIXTURES;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evidence-hop"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(bin(&["pipeline", "--bogus"]).status.code(), Some(1));
    let help = bin(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for sub in ["build-index", "build-trie", "pipeline", "prove", "check-sufficiency", "datagen", "eval", "footprint"] {
        assert!(stdout(&help).contains(sub), "{sub}");
    }
}

#[test]
fn input_errors_exit_one() {
    let out = bin(&["build-index", "--corpus", "/nonexistent/corpus.jsonl", "-o", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(bin(&["check-sufficiency", "--proof", "{ a } [ b ]"]).status.code(), Some(1));
}

#[test]
fn check_sufficiency_prints_the_verdict() {
    let out = bin(&["check-sufficiency", "--proof", "{ Seth } [ Seth ] EQ { hosted } [ ] IND"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "INSUFFICIENT\n");
    let out = bin(&["check-sufficiency", "--proof", "{ Seth } [ Seth ] ≡ { eastern } [ western ] ¬"]);
    assert_eq!(stdout(&out), "SUFFICIENT\n");
}

#[test]
fn prove_prints_proof_verdict_and_paraphrases() {
    let dir = tempfile::tempdir().unwrap();
    let evidence = dir.path().join("evidence.txt");
    std::fs::write(&evidence, "[Seth Meyers] Seth Meyers is an American comedian born in 1973.\n").unwrap();
    let lexicon = format!("{FIXTURES}/toy_lexicon.tsv");
    let out = bin(&[
        "prove",
        "--claim",
        "Seth Meyers is a Canadian comedian born in 1973.",
        "--evidence",
        path(&evidence),
        "--lexicon",
        &lexicon,
        "--ascii",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("{ Seth Meyers"), "{text}");
    assert!(lines[0].contains("NEG"), "{text}");
    assert_eq!(lines[1], "SUFFICIENT");
    assert!(lines[2..].iter().all(|l| l.split('\t').count() == 4));
}

#[test]
fn build_pipeline_eval_footprint() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = format!("{FIXTURES}/toy_corpus.jsonl");
    let claims = format!("{FIXTURES}/toy_claims.jsonl");
    let index = dir.path().join("index.bin");
    let trie = dir.path().join("trie.bin");
    assert_eq!(bin(&["build-index", "--corpus", &corpus, "-o", path(&index)]).status.code(), Some(0));
    assert_eq!(bin(&["build-trie", "--corpus", &corpus, "-o", path(&trie)]).status.code(), Some(0));

    let footprint = bin(&["footprint", "--index", path(&index), "--trie", path(&trie)]);
    assert_eq!(footprint.status.code(), Some(0));
    let text = stdout(&footprint);
    let value = |key: &str| -> u64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("{key} missing in {text}"))
            .parse()
            .unwrap()
    };
    assert_eq!(value("inverted_index_bytes"), std::fs::metadata(&index).unwrap().len());
    assert_eq!(value("trie_bytes"), std::fs::metadata(&trie).unwrap().len());
    assert_eq!(value("total_bytes"), value("inverted_index_bytes") + value("trie_bytes"));
    assert_eq!(value("trie_titles"), 9);

    let results = dir.path().join("results.jsonl");
    let run = |out: &Path, workers: &str| {
        bin(&[
            "pipeline",
            "--corpus",
            &corpus,
            "--claims",
            &claims,
            "--index",
            path(&index),
            "--trie",
            path(&trie),
            "--config",
            &format!("{FIXTURES}/toy_config.toml"),
            "--lexicon",
            &format!("{FIXTURES}/toy_lexicon.tsv"),
            "--workers",
            workers,
            "-o",
            path(out),
        ])
    };
    let status = run(&results, "2");
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let again = dir.path().join("again.jsonl");
    run(&again, "2");
    assert_eq!(std::fs::read(&results).unwrap(), std::fs::read(&again).unwrap());

    let eval = bin(&["eval", "--results", path(&results), "--claims", &claims, "--k", "2", "--k", "5"]);
    assert_eq!(eval.status.code(), Some(0));
    let report = stdout(&eval);
    assert!(report.contains("recall@5 = 1\n"), "{report}");
    assert!(report.contains("hops_2.recall@2 = "));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.jsonl");
    let out = bin(&[
        "pipeline",
        "--corpus",
        &format!("{FIXTURES}/toy_corpus.jsonl"),
        "--claims",
        &format!("{FIXTURES}/toy_claims.jsonl"),
        "--config",
        &format!("{FIXTURES}/toy_config.toml"),
        "--k",
        "3",
        "--prover",
        "all-insufficient",
        "--variant",
        "not-joint",
        "-o",
        path(&results),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = std::fs::read_to_string(&results).unwrap();
    let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    assert_eq!(line["config"]["k"], 3);
    assert_eq!(line["config"]["mode"], "not-joint");
    assert_eq!(line["config"]["prover"], "all-insufficient");
    assert_eq!(line["n_dyn"], 2);
}

#[test]
fn backend_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&[
        "pipeline",
        "--corpus",
        &format!("{FIXTURES}/toy_corpus.jsonl"),
        "--claims",
        &format!("{FIXTURES}/toy_claims.jsonl"),
        "--scorer",
        "external",
        "--prover",
        "all-insufficient",
        "--external-command",
        "python3 -c 'import sys; sys.stdin.readline()'",
        "--timeout-secs",
        "2",
        "-o",
        path(&dir.path().join("r.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn datagen_writes_both_record_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let hop = dir.path().join("hop.jsonl");
    let suff = dir.path().join("suff.jsonl");
    let corpus = format!("{FIXTURES}/toy_corpus.jsonl");
    let claims = format!("{FIXTURES}/toy_claims.jsonl");
    let args = |kind: &str, out: &Path| {
        bin(&["datagen", "--kind", kind, "--corpus", &corpus, "--claims", &claims, "--hop", "2", "--l", "4", "--seed", "3", "-o", path(out)])
    };
    assert_eq!(args("hop", &hop).status.code(), Some(0));
    assert_eq!(args("sufficiency", &suff).status.code(), Some(0));
    let hop_text = std::fs::read_to_string(&hop).unwrap();
    for line in hop_text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["hop"], 2);
        assert!(v["target"].as_str().unwrap().ends_with(']'));
        assert!(v["seed"].is_u64());
    }
    assert_eq!(hop_text.lines().count(), 4);
    assert_eq!(std::fs::read_to_string(&suff).unwrap().lines().count(), 12);
    let again = dir.path().join("hop2.jsonl");
    args("hop", &again);
    assert_eq!(std::fs::read(&hop).unwrap(), std::fs::read(&again).unwrap());
}
