//! Batch command-line surface: generate, train, eval, check.
//!
//! Every command writes its outputs plus a `manifest.json` capturing the
//! command, config, inputs, outputs, seed and timings; `--from-manifest`
//! re-runs the recorded command. Identical inputs, flags and seed give
//! byte-identical data outputs for any `--threads` value.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::eval::{self, EvalError};
use crate::synth::{self, GenConfig, GroundTruth, TopicMatrix, WeightMode};
use crate::tsvd::{self, CutoffMode, FloorMode, TsvdConfig, TsvdError};

/// Exit code for usage and input errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for algorithmic failures.
pub const EXIT_ALGORITHM: i32 = 3;

const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable/invalid input files (exit 2).
    Usage(String),
    /// The algorithm itself failed (exit 3).
    Algorithm(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Algorithm(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Algorithm(_) => EXIT_ALGORITHM,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "tsvd",
    version,
    about = "Topic recovery by thresholded SVD, with a planted-model corpus generator and evaluation tools"
)]
pub struct Cli {
    /// Re-run the command recorded in a manifest file.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,

    /// Base RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker-thread cap (default: available parallelism). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus with planted topics and catchwords.
    Generate(GenerateArgs),
    /// Recover a topic matrix from a corpus.
    Train(TrainArgs),
    /// Compare recovered topics against a reference.
    Eval(EvalArgs),
    /// Check the model assumptions on a labeled corpus.
    Check(CheckArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Check(_) => "check",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightModeArg {
    Dominant,
    Dirichlet,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// Vocabulary size.
    #[arg(long)]
    pub d: usize,
    /// Number of topics.
    #[arg(long)]
    pub k: usize,
    /// Number of documents.
    #[arg(long)]
    pub s: usize,
    /// Words per document.
    #[arg(long)]
    pub m: usize,
    /// Minimum dominant-topic weight.
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    /// Maximum non-dominant topic weight.
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    /// Near-pure documents have dominant weight >= 1-delta.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Cross-topic catchword leakage ratio.
    #[arg(long, default_value_t = 0.07)]
    pub rho: f64,
    /// Total catchword mass per topic.
    #[arg(long, default_value_t = 0.2)]
    pub p0: f64,
    /// Probability of a near-pure document.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub epsilon0: f64,
    /// Minimum dominant-topic probability (default 1/k).
    #[arg(long)]
    pub w0: Option<f64>,
    #[arg(long = "catchwords-per-topic", default_value_t = 10)]
    pub catchwords_per_topic: usize,
    #[arg(long = "weight-mode", value_enum, default_value_t = WeightModeArg::Dominant)]
    pub weight_mode: WeightModeArg,
    /// Symmetric Dirichlet concentration (dirichlet weight mode).
    #[arg(long, default_value_t = 0.01)]
    pub concentration: f64,
    /// Load the topic matrix from a TSV instead of sampling one (no
    /// catchwords are planted then).
    #[arg(long, value_name = "FILE")]
    pub topics: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Corpus in UCI bag-of-words format.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Number of topics.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Minimum dominant-topic probability (default 1/k).
    #[arg(long)]
    pub w0: Option<f64>,
    #[arg(long, default_value_t = 1.0 / 6.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub epsilon0: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Catchword dominance ratio.
    #[arg(long, default_value_t = 1.1)]
    pub gamma: f64,
    /// Nominal document length (default: median length of the corpus).
    #[arg(long)]
    pub m: Option<usize>,
    /// Threshold floor: off, paper, or an explicit value.
    #[arg(long, default_value = "off")]
    pub floor: String,
    /// Catchword cutoff: off, paper, or an explicit value.
    #[arg(long, default_value = "off")]
    pub cutoff: String,
    /// k-means++ restarts.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long = "lloyd-iters", default_value_t = 100)]
    pub lloyd_iters: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Reference topic matrix TSV.
    #[arg(long, value_name = "FILE")]
    pub reference: PathBuf,
    /// Recovered topic matrix TSV.
    #[arg(long, value_name = "FILE")]
    pub recovered: PathBuf,
    /// Corpus for topic coherence (optional).
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    /// Top words per topic for coherence.
    #[arg(long, default_value_t = 5)]
    pub d0: usize,
    /// Coherence smoothing constant.
    #[arg(long, default_value_t = 1.0)]
    pub e: f64,
    /// Histogram bin count.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct CheckArgs {
    /// Corpus in UCI bag-of-words format.
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// Ground-truth TSV with dominant labels and weights.
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Catchword dominance ratio for the reference finder.
    #[arg(long, default_value_t = 2.3)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0 / 6.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub epsilon0: f64,
    /// Minimum dominant-topic probability (default 1/k).
    #[arg(long)]
    pub w0: Option<f64>,
    /// Nominal document length (default: median length of the corpus).
    #[arg(long)]
    pub m: Option<usize>,
    /// Catchword cutoff for the reference finder: off, paper, or a value.
    #[arg(long, default_value = "off")]
    pub cutoff: String,
    /// Word ids to dump count profiles for (comma separated).
    #[arg(long = "profile-words", value_delimiter = ',')]
    pub profile_words: Vec<u32>,
    /// Moving-average width for the local-minimum check.
    #[arg(long, default_value_t = 1)]
    pub window: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema: u32,
    tool_version: String,
    command: String,
    seed: u64,
    threads: Option<usize>,
    out_dir: PathBuf,
    inputs: BTreeMap<String, PathBuf>,
    outputs: BTreeMap<String, PathBuf>,
    config: serde_json::Value,
    timings_ms: BTreeMap<String, f64>,
}

/// Entry point used by the binary: parses argv, runs, maps errors to exit
/// codes (0 success, 2 usage/input, 3 algorithmic failure).
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(usage)?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(manifest_path) = &cli.from_manifest {
        if cli.command.is_some() {
            return Err(CliError::Usage(
                "--from-manifest cannot be combined with a subcommand".into(),
            ));
        }
        return rerun_from_manifest(manifest_path, &cli);
    }
    let command = cli
        .command
        .ok_or_else(|| CliError::Usage("a subcommand or --from-manifest is required".into()))?;
    let out = cli
        .out
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let seed = cli.seed.unwrap_or(0);
    run_command(&command, seed, cli.threads, &out)
}

fn rerun_from_manifest(path: &Path, cli: &Cli) -> Result<(), CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open manifest {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Usage(format!("bad manifest {}: {e}", path.display())))?;
    if manifest.schema != MANIFEST_SCHEMA {
        return Err(CliError::Usage(format!(
            "manifest schema {} unsupported (expected {MANIFEST_SCHEMA})",
            manifest.schema
        )));
    }
    let config = manifest.config.clone();
    let command = match manifest.command.as_str() {
        "generate" => Command::Generate(serde_json::from_value(config).map_err(usage)?),
        "train" => Command::Train(serde_json::from_value(config).map_err(usage)?),
        "eval" => Command::Eval(serde_json::from_value(config).map_err(usage)?),
        "check" => Command::Check(serde_json::from_value(config).map_err(usage)?),
        other => {
            return Err(CliError::Usage(format!(
                "unknown command {other:?} in manifest"
            )));
        }
    };
    let seed = cli.seed.unwrap_or(manifest.seed);
    let out = cli.out.clone().unwrap_or(manifest.out_dir.clone());
    run_command(&command, seed, cli.threads.or(manifest.threads), &out)
}

fn run_command(
    command: &Command,
    seed: u64,
    threads: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
    match command {
        Command::Generate(args) => cmd_generate(args, seed, threads, out),
        Command::Train(args) => cmd_train(args, seed, threads, out),
        Command::Eval(args) => cmd_eval(args, seed, threads, out),
        Command::Check(args) => cmd_check(args, seed, threads, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn finish<W: Write>(mut w: W) -> Result<(), CliError> {
    w.flush().map_err(usage)
}

fn write_manifest(
    out: &Path,
    command: &Command,
    seed: u64,
    threads: Option<usize>,
    inputs: BTreeMap<String, PathBuf>,
    outputs: BTreeMap<String, PathBuf>,
    timings_ms: BTreeMap<String, f64>,
) -> Result<(), CliError> {
    let config = match command {
        Command::Generate(a) => serde_json::to_value(a),
        Command::Train(a) => serde_json::to_value(a),
        Command::Eval(a) => serde_json::to_value(a),
        Command::Check(a) => serde_json::to_value(a),
    }
    .map_err(usage)?;
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        seed,
        threads,
        out_dir: out.to_path_buf(),
        inputs,
        outputs,
        config,
        timings_ms,
    };
    let mut w = create(&out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(usage)?;
    finish(w)
}

fn parse_floor(raw: &str) -> Result<FloorMode, CliError> {
    match raw {
        "off" => Ok(FloorMode::Off),
        "paper" => Ok(FloorMode::PaperFormula),
        v => v.parse::<f64>().map(FloorMode::Explicit).map_err(|_| {
            CliError::Usage(format!("--floor must be off, paper or a number, got {v:?}"))
        }),
    }
}

fn parse_cutoff(raw: &str) -> Result<CutoffMode, CliError> {
    match raw {
        "off" => Ok(CutoffMode::Off),
        "paper" => Ok(CutoffMode::PaperFormula),
        v => v.parse::<f64>().map(CutoffMode::Explicit).map_err(|_| {
            CliError::Usage(format!(
                "--cutoff must be off, paper or a number, got {v:?}"
            ))
        }),
    }
}

fn cmd_generate(
    args: &GenerateArgs,
    seed: u64,
    threads: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let start = Instant::now();
    let mut config = GenConfig::new(args.d, args.k, args.s, args.m);
    config.alpha = args.alpha;
    config.beta = args.beta;
    config.delta = args.delta;
    config.rho = args.rho;
    config.p0 = args.p0;
    config.epsilon0 = args.epsilon0;
    config.w0 = args.w0.unwrap_or(1.0 / args.k as f64);
    config.catchwords_per_topic = args.catchwords_per_topic;
    config.weight_mode = match args.weight_mode {
        WeightModeArg::Dominant => WeightMode::Dominant,
        WeightModeArg::Dirichlet => WeightMode::Dirichlet {
            concentration: args.concentration,
        },
    };
    config.seed = seed;
    let warnings = config.validate().map_err(usage)?;
    for w in &warnings {
        eprintln!("warning: outside guaranteed parameter regime: {w}");
    }

    let mut inputs = BTreeMap::new();
    let (topics, planted) = match &args.topics {
        Some(path) => {
            inputs.insert("topics".to_string(), path.clone());
            let tm = TopicMatrix::read_tsv(open(path)?).map_err(usage)?;
            if tm.num_words() != args.d || tm.num_topics() != args.k {
                return Err(CliError::Usage(format!(
                    "topic matrix {} is {}x{}, flags say {}x{}",
                    path.display(),
                    tm.num_words(),
                    tm.num_topics(),
                    args.d,
                    args.k
                )));
            }
            (tm, vec![Vec::new(); args.k])
        }
        None => {
            let mut rng = crate::stream_rng(seed, synth::STREAM_TOPIC_MATRIX);
            synth::sample_topic_matrix(&config, &mut rng)
                .map_err(|e| CliError::Algorithm(e.to_string()))?
        }
    };
    let (corpus, truth) = synth::generate_corpus(&topics, &config, planted)
        .map_err(|e| CliError::Algorithm(e.to_string()))?;
    let generate_ms = start.elapsed().as_secs_f64() * 1e3;

    let corpus_path = out.join("docword.txt");
    let mut w = create(&corpus_path)?;
    corpus.write_uci(&mut w).map_err(usage)?;
    finish(w)?;
    let topics_path = out.join("topics.tsv");
    let mut w = create(&topics_path)?;
    topics.write_tsv(&mut w).map_err(usage)?;
    finish(w)?;
    let truth_path = out.join("ground_truth.tsv");
    let mut w = create(&truth_path)?;
    truth.write_tsv(&mut w).map_err(usage)?;
    finish(w)?;
    let catchwords_path = out.join("catchwords.json");
    let mut w = create(&catchwords_path)?;
    synth::write_catchwords_json(&truth.planted_catchwords, &mut w).map_err(usage)?;
    finish(w)?;

    let outputs = BTreeMap::from([
        ("corpus".to_string(), corpus_path),
        ("topics".to_string(), topics_path),
        ("ground_truth".to_string(), truth_path),
        ("catchwords".to_string(), catchwords_path),
    ]);
    let timings = BTreeMap::from([
        ("generate_ms".to_string(), generate_ms),
        ("total_ms".to_string(), start.elapsed().as_secs_f64() * 1e3),
    ]);
    write_manifest(
        out,
        &Command::Generate(args.clone()),
        seed,
        threads,
        inputs,
        outputs,
        timings,
    )
}

fn tsvd_config_from(args: &TrainArgs, seed: u64) -> Result<TsvdConfig, CliError> {
    let k = args.k as usize;
    let mut config = TsvdConfig::new(k);
    config.w0 = args.w0.unwrap_or(1.0 / k as f64);
    config.epsilon = args.epsilon;
    config.epsilon0 = args.epsilon0;
    config.delta = args.delta;
    config.gamma = args.gamma;
    config.nominal_m = args.m;
    config.threshold_floor_mode = parse_floor(&args.floor)?;
    config.catchword_cutoff_mode = parse_cutoff(&args.cutoff)?;
    config.kmeans_restarts = args.restarts;
    config.lloyd_max_iters = args.lloyd_iters;
    config.seed = seed;
    config.validate().map_err(usage)?;
    Ok(config)
}

fn cmd_train(
    args: &TrainArgs,
    seed: u64,
    threads: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let start = Instant::now();
    let config = tsvd_config_from(args, seed)?;
    let corpus = Corpus::parse_uci_bag_of_words(open(&args.corpus)?, None::<BufReader<File>>)
        .map_err(usage)?;

    let model = tsvd::run_tsvd(&corpus, &config).map_err(|e| {
        let msg = match e.stage() {
            Some(stage) => format!("stage {stage} failed: {e}"),
            None => e.to_string(),
        };
        match &e {
            TsvdError::Config(_) => CliError::Usage(msg),
            _ => CliError::Algorithm(msg),
        }
    })?;

    let topics_path = out.join("topics.tsv");
    let mut w = create(&topics_path)?;
    model.m_hat.write_tsv(&mut w).map_err(usage)?;
    finish(w)?;
    let model_path = out.join("model.json");
    let mut w = create(&model_path)?;
    model.write_sidecar_json(&mut w).map_err(usage)?;
    finish(w)?;
    if !model.diagnostics.unrecovered_topics.is_empty() {
        eprintln!(
            "warning: topics without catchwords were filled uniformly: {:?}",
            model.diagnostics.unrecovered_topics
        );
    }

    let inputs = BTreeMap::from([("corpus".to_string(), args.corpus.clone())]);
    let outputs = BTreeMap::from([
        ("topics".to_string(), topics_path),
        ("model".to_string(), model_path),
    ]);
    let t = &model.diagnostics.timings;
    let timings = BTreeMap::from([
        ("split_ms".to_string(), t.split_ms),
        ("compute_thresholds_ms".to_string(), t.compute_thresholds_ms),
        ("apply_thresholds_ms".to_string(), t.apply_thresholds_ms),
        (
            "project_and_cluster_ms".to_string(),
            t.project_and_cluster_ms,
        ),
        ("lloyds_ms".to_string(), t.lloyds_ms),
        ("compute_g_ms".to_string(), t.compute_g_ms),
        (
            "identify_catchwords_ms".to_string(),
            t.identify_catchwords_ms,
        ),
        ("recover_topics_ms".to_string(), t.recover_topics_ms),
        ("total_ms".to_string(), start.elapsed().as_secs_f64() * 1e3),
    ]);
    write_manifest(
        out,
        &Command::Train(args.clone()),
        seed,
        threads,
        inputs,
        outputs,
        timings,
    )
}

#[derive(Serialize)]
struct CoherenceJson<'a> {
    mean: f64,
    std: f64,
    per_topic: &'a [f64],
}

#[derive(Serialize)]
struct EvalJson<'a> {
    schema: u32,
    delta: f64,
    per_topic_l1: &'a [f64],
    permutation: &'a [usize],
    #[serde(skip_serializing_if = "Option::is_none")]
    coherence: Option<CoherenceJson<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    top_words: Option<&'a [Vec<u32>]>,
}

fn cmd_eval(
    args: &EvalArgs,
    seed: u64,
    threads: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let start = Instant::now();
    let reference = TopicMatrix::read_tsv(open(&args.reference)?).map_err(usage)?;
    let recovered = TopicMatrix::read_tsv(open(&args.recovered)?).map_err(usage)?;
    let matched = eval::match_topics(&reference, &recovered).map_err(|e| match e {
        EvalError::Dimension(_) | EvalError::Config(_) => usage(e),
        other => CliError::Algorithm(other.to_string()),
    })?;
    let delta = matched.total_cost / reference.num_topics() as f64;

    let mut inputs = BTreeMap::from([
        ("reference".to_string(), args.reference.clone()),
        ("recovered".to_string(), args.recovered.clone()),
    ]);
    let coherence = match &args.corpus {
        Some(path) => {
            inputs.insert("corpus".to_string(), path.clone());
            let corpus = Corpus::parse_uci_bag_of_words(open(path)?, None::<BufReader<File>>)
                .map_err(usage)?;
            Some(eval::topic_coherence(&corpus, &recovered, args.d0, args.e).map_err(usage)?)
        }
        None => None,
    };

    let eval_path = out.join("eval.json");
    {
        let json = EvalJson {
            schema: 1,
            delta,
            per_topic_l1: &matched.per_topic_l1,
            permutation: &matched.permutation,
            coherence: coherence.as_ref().map(|c| CoherenceJson {
                mean: c.mean,
                std: c.stddev,
                per_topic: &c.per_topic,
            }),
            top_words: coherence.as_ref().map(|c| c.top_words.as_slice()),
        };
        let mut w = create(&eval_path)?;
        serde_json::to_writer_pretty(&mut w, &json).map_err(usage)?;
        finish(w)?;
    }
    let hist_path = out.join("histogram.tsv");
    let mut w = create(&hist_path)?;
    eval::per_topic_error_histogram(&matched, args.bins)
        .write_tsv(&mut w)
        .map_err(usage)?;
    finish(w)?;

    let outputs = BTreeMap::from([
        ("eval".to_string(), eval_path),
        ("histogram".to_string(), hist_path),
    ]);
    let timings = BTreeMap::from([("total_ms".to_string(), start.elapsed().as_secs_f64() * 1e3)]);
    write_manifest(
        out,
        &Command::Eval(args.clone()),
        seed,
        threads,
        inputs,
        outputs,
        timings,
    )
}

#[derive(Serialize)]
struct ProfileViolations {
    topic: u32,
    violations: Vec<usize>,
}

#[derive(Serialize)]
struct ProfileJson {
    word: u32,
    file: String,
    no_local_min_violations: Vec<ProfileViolations>,
}

#[derive(Serialize)]
struct CatchwordsJson {
    gamma: f64,
    sets: Vec<Vec<u32>>,
    mean_frequency: f64,
    empty_clusters: Vec<u32>,
}

#[derive(Serialize)]
struct CheckJson {
    schema: u32,
    k: usize,
    alpha: f64,
    beta: f64,
    delta: f64,
    dominant_fraction: f64,
    pure_fraction: f64,
    catchwords: CatchwordsJson,
    fixed_document_length: Option<usize>,
    profiles: Vec<ProfileJson>,
}

fn cmd_check(
    args: &CheckArgs,
    seed: u64,
    threads: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let start = Instant::now();
    let corpus = Corpus::parse_uci_bag_of_words(open(&args.corpus)?, None::<BufReader<File>>)
        .map_err(usage)?;
    let truth = GroundTruth::read_tsv(open(&args.truth)?).map_err(usage)?;
    if truth.num_docs() != corpus.num_docs() {
        return Err(CliError::Usage(format!(
            "ground truth has {} documents, corpus has {}",
            truth.num_docs(),
            corpus.num_docs()
        )));
    }
    let k = truth.num_topics();
    if k == 0 {
        return Err(CliError::Usage("ground truth has no topics".into()));
    }

    let dominant_fraction = synth::check_dominant_fraction(&truth, args.alpha, args.beta);
    let pure_fraction = synth::check_pure_fraction(&truth, args.delta);

    let mut config = TsvdConfig::new(k);
    config.w0 = args.w0.unwrap_or(1.0 / k as f64);
    config.epsilon = args.epsilon;
    config.epsilon0 = args.epsilon0;
    config.delta = args.delta;
    config.gamma = args.gamma;
    config.nominal_m = args.m;
    config.catchword_cutoff_mode = parse_cutoff(&args.cutoff)?;
    config.seed = seed;
    config.validate().map_err(usage)?;
    let found = synth::find_catchwords_reference(&corpus, &truth.dominant_label, &config)
        .map_err(|e| CliError::Algorithm(e.to_string()))?;

    // Count profiles need one fixed document length.
    let fixed_m = corpus
        .doc_lengths()
        .first()
        .copied()
        .filter(|&m| m > 0 && corpus.doc_lengths().iter().all(|&l| l == m))
        .map(|m| m as usize);

    let mut profiles = Vec::new();
    let mut outputs = BTreeMap::new();
    if let Some(m) = fixed_m {
        for &word in &args.profile_words {
            if (word as usize) >= corpus.num_words() {
                return Err(CliError::Usage(format!(
                    "--profile-words: word {word} out of range (d={})",
                    corpus.num_words()
                )));
            }
            let per_topic: Vec<synth::FrequencyProfile> = (0..k as u32)
                .map(|l| {
                    synth::empirical_frequency_profile(&corpus, &truth.dominant_label, word, l, m)
                })
                .collect::<Result<_, _>>()
                .map_err(usage)?;
            let file_name = format!("profile_word{word}.tsv");
            let path = out.join(&file_name);
            {
                let mut w = create(&path)?;
                let mut header = String::from("#zeta");
                for l in 0..k {
                    header.push_str(&format!("\tq_topic{l}"));
                }
                writeln!(w, "{header}").map_err(usage)?;
                for zeta in 0..=m {
                    let mut line = format!("{zeta}");
                    for profile in &per_topic {
                        line.push_str(&format!("\t{}", profile.q[zeta]));
                    }
                    writeln!(w, "{line}").map_err(usage)?;
                }
                finish(w)?;
            }
            outputs.insert(format!("profile_word{word}"), path);
            profiles.push(ProfileJson {
                word,
                file: file_name,
                no_local_min_violations: per_topic
                    .iter()
                    .map(|p| ProfileViolations {
                        topic: p.topic,
                        violations: synth::check_no_local_min(&p.q, args.window),
                    })
                    .collect(),
            });
        }
    } else if !args.profile_words.is_empty() {
        eprintln!("warning: count profiles need a fixed document length; skipping --profile-words");
    }

    let check_path = out.join("check.json");
    {
        let json = CheckJson {
            schema: 1,
            k,
            alpha: args.alpha,
            beta: args.beta,
            delta: args.delta,
            dominant_fraction,
            pure_fraction,
            catchwords: CatchwordsJson {
                gamma: args.gamma,
                sets: found.sets,
                mean_frequency: found.mean_frequency,
                empty_clusters: found.empty_clusters,
            },
            fixed_document_length: fixed_m,
            profiles,
        };
        let mut w = create(&check_path)?;
        serde_json::to_writer_pretty(&mut w, &json).map_err(usage)?;
        finish(w)?;
    }
    outputs.insert("check".to_string(), check_path);

    let inputs = BTreeMap::from([
        ("corpus".to_string(), args.corpus.clone()),
        ("truth".to_string(), args.truth.clone()),
    ]);
    let timings = BTreeMap::from([("total_ms".to_string(), start.elapsed().as_secs_f64() * 1e3)]);
    write_manifest(
        out,
        &Command::Check(args.clone()),
        seed,
        threads,
        inputs,
        outputs,
        timings,
    )
}
