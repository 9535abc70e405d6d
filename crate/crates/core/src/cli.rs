//! Command-line front end. Exit status: 0 on success, 1 on bad input or
//! usage, 2 when an external backend fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::beam_decoder::DecodeMode;
use crate::corpus::{load_claims, Corpus, Sentence};
use crate::datagen::{make_hop_examples, make_sufficiency_pairs, write_jsonl, HopOptions};
use crate::decoder_trie::DecoderTrie;
use crate::error::{Error, Result};
use crate::eval::report;
use crate::natlog::{
    paraphrase, parse_proof, predict_sufficiency, render_proof, render_proof_ascii, Lexicon, ProofGenerator,
    ReferenceProver,
};
use crate::pipeline::{
    load_initial_rankings, load_results, run_batch, write_results, Backend, BackendFactory, PipelineConfig,
    PipelineInputs, ProverBackend,
};
use crate::reranker::RankedEvidence;
use crate::sparse_index::{Bm25Params, InvertedIndex};

#[derive(Debug, Parser)]
#[command(name = "evidence-hop", version, about = "Multi-hop evidence retrieval for fact verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the BM25 inverted index of a corpus.
    BuildIndex {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        k1: f64,
        #[arg(long, default_value_t = 0.4)]
        b: f64,
    },
    /// Build the title trie used for constrained decoding.
    BuildTrie {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Run multi-hop retrieval for a claims file.
    Pipeline(Box<PipelineArgs>),
    /// Prove a claim against evidence sentences and report sufficiency.
    Prove {
        #[arg(long)]
        claim: String,
        /// One sentence per line, `[title] text`, or JSON lines with
        /// `title` and `text`.
        #[arg(long)]
        evidence: PathBuf,
        #[arg(long = "lexicon")]
        lexicons: Vec<PathBuf>,
        /// Print operators in ASCII.
        #[arg(long)]
        ascii: bool,
    },
    /// Parse a proof and report whether it marks the evidence sufficient.
    CheckSufficiency {
        #[arg(long)]
        proof: String,
    },
    /// Write training records.
    Datagen(DatagenArgs),
    /// Compute retrieval metrics for a results file.
    Eval {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        claims: PathBuf,
        /// Cut-offs for recall (repeatable).
        #[arg(long = "k", default_values_t = vec![5, 10, 100])]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        f1_k: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Report on-disk sizes of an index and a trie.
    Footprint {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        trie: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub claims: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Prebuilt index; built from the corpus when absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Prebuilt trie; built from the corpus when absent.
    #[arg(long)]
    pub trie: Option<PathBuf>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Precomputed first-hop rankings (JSON lines `{"claim_id", "titles"}`).
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub max_hops: Option<usize>,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long, value_enum)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub hyperlinks: bool,
    #[arg(long, value_enum)]
    pub scorer: Option<BackendArg>,
    #[arg(long, value_enum)]
    pub reranker: Option<BackendArg>,
    #[arg(long, value_enum)]
    pub prover: Option<ProverArg>,
    #[arg(long)]
    pub external_command: Option<String>,
    #[arg(long)]
    pub external_socket: Option<PathBuf>,
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    #[arg(long = "lexicon")]
    pub lexicons: Vec<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Variant {
    Joint,
    Top1,
    NotJoint,
    JointDocs,
}

impl From<Variant> for DecodeMode {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Joint => DecodeMode::Joint,
            Variant::Top1 => DecodeMode::Top1,
            Variant::NotJoint => DecodeMode::NotJoint,
            Variant::JointDocs => DecodeMode::JointDocs,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Reference,
    External,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Reference => Backend::Reference,
            BackendArg::External => Backend::External,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProverArg {
    Reference,
    External,
    AllSufficient,
    AllInsufficient,
}

impl From<ProverArg> for ProverBackend {
    fn from(p: ProverArg) -> Self {
        match p {
            ProverArg::Reference => ProverBackend::Reference,
            ProverArg::External => ProverBackend::External,
            ProverArg::AllSufficient => ProverBackend::AllSufficient,
            ProverArg::AllInsufficient => ProverBackend::AllInsufficient,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DatagenKind {
    /// Sentence/document decoding examples for one hop.
    Hop,
    /// Sufficient and insufficient proof pairs.
    Sufficiency,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long, value_enum)]
    pub kind: DatagenKind,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub claims: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub hop: usize,
    #[arg(long, default_value_t = 5)]
    pub l: usize,
    /// Candidate documents negatives are drawn from.
    #[arg(long, default_value_t = 10)]
    pub top_candidates: usize,
    /// Treat gold evidence as unordered: one record per held-out sentence.
    #[arg(long)]
    pub unordered: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "lexicon")]
    pub lexicons: Vec<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Flags override the config file, which overrides the defaults.
pub fn effective_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let mut c = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = args.k {
        c.k = v;
    }
    if let Some(v) = args.l {
        c.l = v;
    }
    if let Some(v) = args.max_hops {
        c.max_hops = v;
    }
    if let Some(v) = args.beam_size {
        c.beam_size = v;
    }
    if let Some(v) = args.variant {
        c.mode = v.into();
    }
    if args.hyperlinks {
        c.hyperlinks = true;
    }
    if let Some(v) = args.scorer {
        c.scorer = v.into();
    }
    if let Some(v) = args.reranker {
        c.reranker = v.into();
    }
    if let Some(v) = args.prover {
        c.prover = v.into();
    }
    if let Some(v) = &args.external_command {
        c.external_command = Some(v.clone());
    }
    if let Some(v) = &args.external_socket {
        c.external_socket = Some(v.clone());
    }
    if let Some(v) = args.timeout_secs {
        c.timeout_secs = v;
    }
    if !args.lexicons.is_empty() {
        c.lexicons = args.lexicons.clone();
    }
    c.validate()?;
    Ok(c)
}

fn run_pipeline(args: &PipelineArgs) -> Result<()> {
    let config = effective_config(args)?;
    let corpus = Corpus::load(&args.corpus)?;
    let claims = load_claims(&args.claims)?;
    let index = match &args.index {
        Some(p) => InvertedIndex::load(p)?,
        None => InvertedIndex::build(&corpus, config.bm25)?,
    };
    let trie = match &args.trie {
        Some(p) => DecoderTrie::load(p)?,
        None => DecoderTrie::build(&corpus.titles().collect::<Vec<_>>())?,
    };
    let initial = args.initial.as_ref().map(load_initial_rankings).transpose()?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, claims.len().max(1));
    log::info!(
        "{} claims, {} documents, {workers} workers, mode {}",
        claims.len(),
        corpus.len(),
        config.mode
    );
    let factory = BackendFactory::new(&config, &corpus)?;
    let backends = (0..workers).map(|_| factory.make()).collect::<Result<Vec<_>>>()?;
    let inputs = PipelineInputs {
        corpus: &corpus,
        index: &index,
        trie: &trie,
        config: &config,
        initial: initial.as_ref(),
    };
    let lines = run_batch(&claims, &inputs, backends);
    let mut w = create(&args.output)?;
    write_results(&lines, &mut w).map_err(|e| Error::io(&args.output, e))?;
    finish(w, &args.output)?;
    let failed: Vec<_> = lines
        .iter()
        .filter_map(|l| match l {
            crate::pipeline::ResultLine::Err(e) => Some(e),
            _ => None,
        })
        .collect();
    log::info!("wrote {} results ({} failed) to {}", lines.len(), failed.len(), args.output.display());
    if let Some(e) = failed.iter().find(|e| e.error_kind == "transport" || e.error_kind == "protocol") {
        return Err(Error::Transport(format!("claim {}: {}", e.claim_id, e.error)));
    }
    Ok(())
}

/// Evidence for `prove`: JSON lines with `title` and `text`, or plain lines
/// optionally prefixed with `[title]`.
pub fn read_evidence(path: &Path) -> Result<RankedEvidence> {
    #[derive(serde::Deserialize)]
    struct Line {
        #[serde(default)]
        title: String,
        text: String,
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (title, text) = if trimmed.starts_with('{') {
            let l: Line = serde_json::from_str(trimmed).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            (l.title, l.text)
        } else if let Some(rest) = trimmed.strip_prefix('[') {
            match rest.split_once(']') {
                Some((t, s)) => (t.trim().to_string(), s.trim().to_string()),
                None => (String::new(), trimmed.to_string()),
            }
        } else {
            (String::new(), trimmed.to_string())
        };
        sentences.push(Sentence {
            doc_title: title,
            sent_index: sentences.len(),
            text,
            hyperlinks: Vec::new(),
        });
    }
    Ok(RankedEvidence::from_sentences(&sentences))
}

fn prove(claim: &str, evidence: &Path, lexicons: &[PathBuf], ascii: bool, out: &mut dyn Write) -> Result<()> {
    let lexicons = lexicons.iter().map(Lexicon::load).collect::<Result<Vec<_>>>()?;
    let evidence = read_evidence(evidence)?;
    let proof = ReferenceProver::new(lexicons).prove(claim, &evidence, 1)?;
    let sufficiency = predict_sufficiency(&proof)?;
    let rendered = if ascii { render_proof_ascii(&proof) } else { render_proof(&proof) };
    let io = |e| Error::io("<stdout>", e);
    writeln!(out, "{rendered}").map_err(io)?;
    writeln!(out, "{sufficiency}").map_err(io)?;
    for m in &proof.mutations {
        let op = if ascii { m.op.ascii() } else { m.op.symbol() };
        writeln!(out, "{op}\t{}\t{}\t{}", m.claim_span, m.evidence_span, paraphrase(m.op)?).map_err(io)?;
    }
    Ok(())
}

fn datagen(args: &DatagenArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let claims = load_claims(&args.claims)?;
    let mut w = create(&args.output)?;
    match args.kind {
        DatagenKind::Hop => {
            let index = InvertedIndex::build(&corpus, Bm25Params::default())?;
            let pool = (args.top_candidates * 3).max(args.top_candidates + 10);
            let candidates = |c: &crate::corpus::Claim| -> Vec<String> {
                index.rank(&c.text, pool).into_iter().map(|(t, _)| t).collect()
            };
            let opts = HopOptions {
                hop: args.hop,
                l: args.l,
                top_candidates: args.top_candidates,
                ordered: !args.unordered,
                seed: args.seed,
            };
            let records = make_hop_examples(&claims, &corpus, &candidates, opts)?;
            log::info!("{} hop-{} records", records.len(), args.hop);
            write_jsonl(&records, &mut w).map_err(|e| Error::io(&args.output, e))?;
        }
        DatagenKind::Sufficiency => {
            let lexicons = args.lexicons.iter().map(Lexicon::load).collect::<Result<Vec<_>>>()?;
            let prover = ReferenceProver::new(lexicons.clone());
            let mut records = Vec::new();
            for claim in &claims {
                if claim.gold_evidence.is_empty()
                    || !matches!(claim.label, Some(crate::corpus::Label::Supported | crate::corpus::Label::Refuted))
                {
                    log::debug!("claim {}: no labelled gold evidence, skipped", claim.claim_id);
                    continue;
                }
                let (s, i) = make_sufficiency_pairs(claim, &corpus, &lexicons, &prover)?;
                records.push(s);
                records.push(i);
            }
            log::info!("{} proof records", records.len());
            write_jsonl(&records, &mut w).map_err(|e| Error::io(&args.output, e))?;
        }
    }
    finish(w, &args.output)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let io = |e| Error::io("<stdout>", e);
    match cli.command {
        Command::BuildIndex { corpus, output, k1, b } => {
            let corpus = Corpus::load(&corpus)?;
            let index = InvertedIndex::build(&corpus, Bm25Params { k1, b })?;
            let bytes = index.save(&output)?;
            log::info!("index: {} documents, {} terms, {bytes} bytes", index.doc_count(), index.term_count());
        }
        Command::BuildTrie { corpus, output } => {
            let corpus = Corpus::load(&corpus)?;
            let trie = DecoderTrie::build(&corpus.titles().collect::<Vec<_>>())?;
            let bytes = trie.save(&output)?;
            log::info!("trie: {} titles, {} nodes, {bytes} bytes", trie.title_count(), trie.node_count());
        }
        Command::Pipeline(args) => run_pipeline(&args)?,
        Command::Prove { claim, evidence, lexicons, ascii } => prove(&claim, &evidence, &lexicons, ascii, out)?,
        Command::CheckSufficiency { proof } => {
            let proof = parse_proof(&proof)?;
            writeln!(out, "{}", predict_sufficiency(&proof)?).map_err(io)?;
        }
        Command::Datagen(args) => datagen(&args)?,
        Command::Eval { results, claims, ks, f1_k, output } => {
            let lines = load_results(&results)?;
            let claims = load_claims(&claims)?;
            let text = report(&lines, &claims, &ks, f1_k)?.render();
            match output {
                Some(path) => {
                    std::fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
                }
                None => out.write_all(text.as_bytes()).map_err(io)?,
            }
        }
        Command::Footprint { index, trie } => {
            let index_bytes = std::fs::metadata(&index).map_err(|e| Error::io(&index, e))?.len();
            let trie_bytes = std::fs::metadata(&trie).map_err(|e| Error::io(&trie, e))?.len();
            let loaded = DecoderTrie::load(&trie)?;
            InvertedIndex::load(&index)?;
            writeln!(out, "inverted_index_bytes = {index_bytes}").map_err(io)?;
            writeln!(out, "trie_bytes = {trie_bytes}").map_err(io)?;
            writeln!(out, "total_bytes = {}", index_bytes + trie_bytes).map_err(io)?;
            writeln!(out, "trie_titles = {}", loaded.title_count()).map_err(io)?;
            writeln!(out, "trie_title_tokens = {}", loaded.total_title_tokens()).map_err(io)?;
            writeln!(out, "trie_nodes = {}", loaded.node_count()).map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_backend() {
                2
            } else {
                1
            }
        }
    }
}
