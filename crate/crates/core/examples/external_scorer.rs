//! Driving the decoder through the line-delimited JSON protocol. A server
//! thread answers `score` requests with the reference scorer; the decoder
//! talks to it through an `ExternalClient` and must agree with a direct,
//! in-process decode.
//!
//! A real deployment starts the server as a subprocess instead:
//!
//! ```text
//! evidence-hop pipeline --scorer external --external-command "python3 scorer_server.py" ...
//! cargo run --example external_scorer
//! ```

use std::io::BufReader;
use std::net::Shutdown;
use std::os::unix::net::UnixStream;
use std::thread;

use evidence_hop::protocol::{serve, ExternalClient, Handler, DEFAULT_TIMEOUT};
use evidence_hop::{decode, Corpus, DecoderTrie, RankedEvidence, ReferenceScorer, Result, ScoredSequence, ScoringContext};

pub fn run_example() -> Result<(Vec<ScoredSequence>, Vec<ScoredSequence>)> {
    let corpus = Corpus::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_corpus.jsonl"))?;
    let trie = DecoderTrie::build(&corpus.titles().collect::<Vec<_>>())?;
    let evidence = RankedEvidence::from_sentences(corpus.document("66th Primetime Emmy Awards").into_iter().flat_map(|d| &d.sentences));
    let ctx = ScoringContext::new("The ceremony was hosted by a comedian born in 1973.", &evidence, 1);

    let (server_end, client_end) = UnixStream::pair().map_err(|e| evidence_hop::Error::Transport(e.to_string()))?;
    let transport = |e: std::io::Error| evidence_hop::Error::Transport(e.to_string());
    let reader = client_end.try_clone().map_err(transport)?;
    let closer = client_end.try_clone().map_err(transport)?;
    let server = thread::spawn(move || -> Result<()> {
        let scorer = ReferenceScorer::fit(&corpus, 1.0)?;
        let handler = Handler {
            scorer: Some(&scorer),
            ..Handler::default()
        };
        let input = server_end.try_clone().map_err(|e| evidence_hop::Error::Transport(e.to_string()))?;
        serve(BufReader::new(input), server_end, &handler)
    });

    let local = {
        let corpus = Corpus::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_corpus.jsonl"))?;
        let scorer = ReferenceScorer::fit(&corpus, 1.0)?;
        decode(&scorer, &trie, &ctx, 1, 5)?.sequences
    };
    let remote = {
        let client = ExternalClient::from_streams(reader, client_end, DEFAULT_TIMEOUT);
        let decoded = decode(&client, &trie, &ctx, 1, 5)?;
        println!("{} score requests", decoded.scorer_calls);
        decoded.sequences
    };
    // the client's reader thread keeps its socket open; end the session explicitly
    closer.shutdown(Shutdown::Both).map_err(transport)?;
    server.join().expect("server thread")?;

    for (a, b) in local.iter().zip(&remote) {
        println!("{:>9.5} {:>9.5}  {}", a.logprob, b.logprob, b.rendered());
    }
    Ok((local, remote))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(drop)
}
