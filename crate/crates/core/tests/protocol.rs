mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::Shutdown;
use std::os::unix::net::{UnixListener, UnixStream};
use std::thread;
use std::time::{Duration, Instant};

use common::pipe::Setup;
use common::FIXTURES;
use evidence_hop::corpus::load_claims;
use evidence_hop::natlog::{FixedProver, ProofGenerator};
use evidence_hop::pipeline::{Backend, ProverBackend, ResultLine};
use evidence_hop::protocol::{serve, ExternalClient, Handler, Request, RequestBody, Response};
use evidence_hop::reranker::{ReferenceReranker, SentenceScorer};
use evidence_hop::scorer::{ContextSentence, UniformScorer};
use evidence_hop::{Corpus, Error, PipelineConfig, RankedEvidence, ScoringContext, Sufficiency, TokenScorer};

const TIMEOUT: Duration = Duration::from_secs(10);

fn ctx() -> ScoringContext {
    ScoringContext::from_sentences(
        "Seth Meyers hosted the show",
        [("Seth Meyers".to_string(), "Seth Meyers is a comedian.".to_string())],
        1,
    )
}

fn server_script() -> String {
    format!("python3 {FIXTURES}/overlap_server.py")
}

/// A peer that answers every request line with `reply(request)`.
fn scripted_peer(reply: impl Fn(&str) -> String + Send + 'static) -> (ExternalClient, UnixStream) {
    let (server, client) = UnixStream::pair().unwrap();
    let input = server.try_clone().unwrap();
    thread::spawn(move || {
        let mut out = server;
        for line in BufReader::new(input).lines() {
            let Ok(line) = line else { break };
            if writeln!(out, "{}", reply(&line)).is_err() {
                break;
            }
        }
    });
    let closer = client.try_clone().unwrap();
    let reader = client.try_clone().unwrap();
    (ExternalClient::from_streams(reader, client, Duration::from_millis(500)), closer)
}

#[test]
fn in_process_server_round_trip() {
    let (server, client) = UnixStream::pair().unwrap();
    let closer = client.try_clone().unwrap();
    let handle = thread::spawn(move || {
        let prover = FixedProver(Sufficiency::Sufficient);
        let reranker = ReferenceReranker::default();
        let handler = Handler { scorer: Some(&UniformScorer), reranker: Some(&reranker), prover: Some(&prover) };
        serve(BufReader::new(server.try_clone().unwrap()), server, &handler).unwrap();
    });
    let remote = ExternalClient::from_streams(client.try_clone().unwrap(), client, TIMEOUT);
    let allowed = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let lp = remote.next_token_logprobs(&ctx(), &[], &allowed).unwrap();
    for x in lp {
        assert!((x + 3f64.ln()).abs() < 1e-12);
    }
    let proof = remote.prove("Seth Meyers hosted", &RankedEvidence::default(), 1).unwrap();
    assert_eq!(proof, FixedProver(Sufficiency::Sufficient).prove("Seth Meyers hosted", &RankedEvidence::default(), 1).unwrap());
    let corpus = Corpus::load(format!("{FIXTURES}/toy_corpus.jsonl")).unwrap();
    let sentences: Vec<_> = corpus.documents()[..2].iter().flat_map(|d| &d.sentences).collect();
    let local = ReferenceReranker::default().score_sentences("Seth Meyers", &RankedEvidence::default(), &sentences, 1).unwrap();
    let got = remote.score_sentences("Seth Meyers", &RankedEvidence::default(), &sentences, 1).unwrap();
    assert_eq!(local, got);
    drop(remote);
    closer.shutdown(Shutdown::Both).unwrap();
    handle.join().unwrap();
}

#[test]
fn scores_are_renormalized_over_allowed() {
    let (client, _closer) = scripted_peer(|_| r#"{"version":1,"logprobs":{"a":2.0,"b":2.0,"extra":9.0}}"#.into());
    let lp = client.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]).unwrap();
    assert!(lp.iter().all(|x| (x - 0.5f64.ln()).abs() < 1e-12));
}

#[test]
fn missing_allowed_token_is_a_protocol_error() {
    let (client, _closer) = scripted_peer(|_| r#"{"version":1,"logprobs":{"a":-0.1}}"#.into());
    let err = client.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]).unwrap_err();
    assert!(matches!(err, Error::Protocol(ref m) if m.contains("\"b\"")), "{err}");
}

#[test]
fn peer_errors_and_bad_versions_are_protocol_errors() {
    let (client, _closer) = scripted_peer(|_| r#"{"version":1,"error":"model not loaded"}"#.into());
    let err = client.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]).unwrap_err();
    assert!(matches!(err, Error::Protocol(ref m) if m.contains("model not loaded")));

    let (client, _closer) = scripted_peer(|_| r#"{"version":2,"logprobs":{}}"#.into());
    assert!(matches!(client.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]), Err(Error::Protocol(_))));

    let (client, _closer) = scripted_peer(|_| "not json".into());
    assert!(matches!(client.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]), Err(Error::Protocol(_))));

    let (client, _closer) = scripted_peer(|_| r#"{"version":1,"proof":"{ Seth } [ Seth ] WAT"}"#.into());
    assert!(matches!(client.prove("Seth", &RankedEvidence::default(), 1), Err(Error::Protocol(_))));
}

#[test]
fn silent_peer_times_out_and_the_connection_is_retired() {
    let (server, client) = UnixStream::pair().unwrap();
    let remote = ExternalClient::from_streams(client.try_clone().unwrap(), client, Duration::from_millis(200));
    let start = Instant::now();
    let err = remote.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
    assert!(start.elapsed() < Duration::from_secs(5));
    // a late answer must not be taken for the next request's reply
    let mut late = server.try_clone().unwrap();
    writeln!(late, r#"{{"version":1,"logprobs":{{"a":0.0,"b":0.0}}}}"#).unwrap();
    let err = remote.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
    drop(server);
}

#[test]
fn malformed_requests_get_error_responses() {
    let handler = Handler { scorer: Some(&UniformScorer), ..Handler::default() };
    let input = concat!(
        "{\"version\":1,\"kind\":\"score\",\"hop\":1,\"context_claim\":\"c\",\"context_evidence\":[],\"prefix\":[],\"allowed\":[\"x\",\"y\"]}\n",
        "garbage\n",
        "\n",
        "{\"version\":7,\"kind\":\"score\",\"hop\":1,\"context_claim\":\"c\",\"context_evidence\":[],\"prefix\":[],\"allowed\":[\"x\"]}\n",
        "{\"version\":1,\"kind\":\"prove\",\"hop\":1,\"context_claim\":\"c\",\"context_evidence\":[],\"beam\":5}\n",
    );
    let mut out = Vec::new();
    serve(input.as_bytes(), &mut out, &handler).unwrap();
    let replies: Vec<Response> = String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(replies.len(), 4);
    assert_eq!(replies[0].logprobs.as_ref().unwrap().len(), 2);
    assert!(replies[1].error.as_ref().unwrap().contains("malformed"));
    assert!(replies[2].error.as_ref().unwrap().contains("version"));
    assert!(replies[3].error.as_ref().unwrap().contains("no prover"));
    assert!(replies.iter().all(|r| r.version == 1));
}

#[test]
fn request_wire_format() {
    let req = Request::new(RequestBody::Score {
        hop: 2,
        context_claim: "c".into(),
        context_evidence: vec![ContextSentence { id: "E1".into(), doc_title: "D".into(), text: "t".into() }],
        prefix: vec!["E1".into()],
        allowed: vec!["[".into()],
    });
    let v: serde_json::Value = serde_json::to_value(&req).unwrap();
    assert_eq!(v["version"], 1);
    assert_eq!(v["kind"], "score");
    assert_eq!(v["context_evidence"][0]["doc_title"], "D");
    assert_eq!(v["allowed"][0], "[");
}

#[test]
fn subprocess_backend_runs_the_pipeline() {
    let corpus = Corpus::load(format!("{FIXTURES}/toy_corpus.jsonl")).unwrap();
    let claims = load_claims(format!("{FIXTURES}/toy_claims.jsonl")).unwrap();
    let setup = Setup::new(corpus);
    let config = PipelineConfig {
        k: 5,
        scorer: Backend::External,
        reranker: Backend::External,
        prover: ProverBackend::External,
        external_command: Some(server_script()),
        ..PipelineConfig::default()
    };
    let lines = setup.run(&claims, &config, 2);
    for line in &lines {
        let ResultLine::Ok(r) = line else { panic!("{line:?}") };
        assert!(r.n_dyn <= 2);
    }
}

#[test]
fn dying_subprocess_is_a_transport_error() {
    let client = ExternalClient::spawn(&format!("{} --fail-after 1", server_script()), TIMEOUT).unwrap();
    let allowed = vec!["Seth".to_string(), "show".to_string()];
    client.next_token_logprobs(&ctx(), &[], &allowed).unwrap();
    let err = client.next_token_logprobs(&ctx(), &[], &allowed).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err}");
}

#[test]
fn stalled_subprocess_times_out() {
    let client = ExternalClient::spawn(&format!("{} --stall", server_script()), Duration::from_millis(300)).unwrap();
    let start = Instant::now();
    let err = client.next_token_logprobs(&ctx(), &[], &["a".into(), "b".into()]).unwrap_err();
    assert!(matches!(err, Error::Transport(ref m) if m.contains("did not answer")), "{err}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn unix_socket_backend() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("backend.sock");
    let listener = UnixListener::bind(&path).unwrap();
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let handler = Handler { scorer: Some(&UniformScorer), ..Handler::default() };
        serve(BufReader::new(stream.try_clone().unwrap()), stream, &handler).unwrap();
    });
    let client = ExternalClient::connect_unix(&path, TIMEOUT).unwrap();
    let lp = client.next_token_logprobs(&ctx(), &[], &["x".into(), "y".into()]).unwrap();
    assert!((lp[0] - 0.5f64.ln()).abs() < 1e-12);
    drop(client);
    handle.join().unwrap();
    assert!(ExternalClient::connect_unix(dir.path().join("missing.sock"), TIMEOUT).is_err());
}
