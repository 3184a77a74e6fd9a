//! Command-line front end: `synth`, `split`, `train`, `eval`, `tune`,
//! `analyze` and `bench`.
//!
//! Exit status is 0 on success, 1 for usage and I/O problems and 2 for
//! numerical failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    dominant_roles, local_global_variation, pentagon_projection, pentagon_svg, sorted_adjacency_export, top_words,
    write_pentagon_csv, write_top_words_csv,
};
use crate::corpus::{
    generate_synthetic, load_corpus, load_split, load_vocab, split_edges, synthetic_vocab, write_corpus, write_split,
    write_vocab, SynthConfig, ThreadCorpus,
};
use crate::error::{Error, Result};
use crate::eval::{default_m_grid, evaluate_all};
use crate::hyper::{HyperConfig, HyperParams, Mode};
use crate::local::LocalOptions;
use crate::trainer::{
    bench_schedules, load_snapshot, recompute_locals, save_snapshot, train_with_locals, tune, write_trace_csv,
    Schedule, Snapshot, TextInit, TrainConfig, TuneGrids,
};

#[derive(Debug, Parser)]
#[command(name = "threadnet", version, about = "Joint community and topic model over forum threads")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic corpus and its ground truth.
    Synth(SynthArgs),
    /// Split a corpus's edges 80/10/10 into train, heldout and test.
    Split(SplitArgs),
    /// Train a model and write a snapshot.
    Train(TrainArgs),
    /// Score trained models on heldout and test edges.
    Eval(EvalArgs),
    /// Tune hyperparameters one at a time on heldout rmse.
    Tune(TuneArgs),
    /// Export role analytics for a trained model.
    Analyze(AnalyzeArgs),
    /// Record objective-versus-time traces for every schedule.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub users: usize,
    #[arg(long, default_value_t = 100)]
    pub threads: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 500)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 30.0)]
    pub avg_participants: f64,
    #[arg(long, default_value_t = 20)]
    pub doc_len: usize,
    /// Hyperparameter file for the block priors (α, η and K flags win).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory: corpus.jsonl, vocab.txt and truth_*.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
}

impl CorpusArgs {
    fn load(&self) -> Result<ThreadCorpus> {
        load_corpus(&self.corpus, &self.vocab)
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub data: CorpusArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add as many sampled zero-weight pairs as edges to heldout and test.
    #[arg(long)]
    pub zero_augmented: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// Hyperparameter JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "pssv")]
    pub schedule: Schedule,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    #[arg(long, default_value_t = 400)]
    pub minibatch: usize,
    #[arg(long, default_value_t = 20)]
    pub neighborhood: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub elbo_tol: f64,
    #[arg(long, default_value = "full")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub freeze_nu: bool,
    /// Start the joint model from the best of N text-only topic fits.
    #[arg(long, value_name = "N")]
    pub text_init: Option<usize>,
    /// Overrides the configured number of communities.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub omega: Option<f64>,
}

impl TrainingArgs {
    fn hyper(&self) -> Result<HyperParams> {
        let mut cfg = match &self.config {
            Some(p) => HyperConfig::from_json(&read_text(p)?)?,
            None => HyperConfig::default(),
        };
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if self.omega.is_some() {
            cfg.omega = self.omega;
        }
        cfg.resolve()
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            schedule: self.schedule,
            workers: self.workers,
            minibatch_threads: self.minibatch,
            neighborhood_size: self.neighborhood,
            max_outer_iters: self.max_iters,
            elbo_tol: self.elbo_tol,
            eval_every: self.eval_every,
            mode: self.mode,
            seed: self.seed,
            freeze_nu: self.freeze_nu,
            text_init: self.text_init.map(|restarts| TextInit { restarts, ..TextInit::default() }),
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: CorpusArgs,
    /// Train on the split's training edges only.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Snapshot directory; also receives report.json and trace.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: CorpusArgs,
    #[arg(long)]
    pub split: PathBuf,
    /// Snapshot of the joint model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Snapshot of the network-only model.
    #[arg(long)]
    pub mmsb: Option<PathBuf>,
    /// Snapshot of the text-only model.
    #[arg(long)]
    pub lda: Option<PathBuf>,
    /// Comma-separated candidates for the text-only block scale m.
    #[arg(long, value_delimiter = ',')]
    pub m_grid: Option<Vec<f64>>,
    /// CSV report path (the table always goes to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: CorpusArgs,
    #[arg(long)]
    pub split: PathBuf,
    /// JSON grids: {"alpha": [..], "omega": [..], "theta": [[d, o], ..],
    /// "kappa": [[d, o], ..], "eta": [..], "k": [..]}.
    #[arg(long)]
    pub grid: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: CorpusArgs,
    #[arg(long)]
    pub model: PathBuf,
    /// Restrict to the split's training edges (the ones the model saw).
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub top_n: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: CorpusArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Directory for trace_V.csv, trace_SV.csv, trace_SSV.csv, trace_PSSV.csv.
    #[arg(long)]
    pub out: PathBuf,
}

fn read_text(p: &Path) -> Result<String> {
    fs::read_to_string(p).map_err(|e| Error::io(p, e))
}

fn create(p: &Path) -> Result<fs::File> {
    fs::File::create(p).map_err(|e| Error::io(p, e))
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_matrix_csv(path: &Path, m: &ndarray::Array2<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Tune(a) => cmd_tune(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => HyperConfig::from_json(&read_text(p)?)?,
        None => HyperConfig::default(),
    };
    cfg.k = Some(a.k);
    cfg.alpha = Some(crate::hyper::VecSpec::Scalar(a.alpha));
    cfg.eta = Some(a.eta);
    let hyper = cfg.resolve()?;
    let sc = SynthConfig {
        num_users: a.users,
        num_threads: a.threads,
        vocab_size: a.vocab_size,
        avg_participants: a.avg_participants,
        doc_len: a.doc_len,
        seed: a.seed,
    };
    let (corpus, truth) = generate_synthetic(&sc, &hyper)?;
    mkdir(&a.out)?;
    write_corpus(&corpus, a.out.join("corpus.jsonl"))?;
    write_vocab(&synthetic_vocab(a.vocab_size), a.out.join("vocab.txt"))?;
    write_matrix_csv(&a.out.join("truth_pi.csv"), &truth.pi)?;
    write_matrix_csv(&a.out.join("truth_block.csv"), &truth.block)?;
    write_matrix_csv(&a.out.join("truth_beta.csv"), &truth.beta)?;
    println!(
        "wrote {} threads, {} users, {} edges, {} tokens to {}",
        corpus.num_threads(),
        corpus.num_users(),
        corpus.num_edges(),
        corpus.num_tokens(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_split(a: &SplitArgs) -> Result<()> {
    let corpus = a.data.load()?;
    let split = split_edges(&corpus, a.seed, a.zero_augmented)?;
    write_split(&split, &corpus, &a.out)?;
    println!("train {} / heldout {} / test {}", split.train.len(), split.heldout.len(), split.test.len());
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let corpus = a.data.load()?;
    let split = a.split.as_ref().map(|p| load_split(p, &corpus)).transpose()?;
    let hyper = a.training.hyper()?;
    let cfg = a.training.train_config();
    let trained = train_with_locals(&corpus, split.as_ref(), &hyper, &cfg)?;
    save_snapshot(&a.out, &trained.global, &hyper, cfg.mode, trained.report.iterations)?;
    let report_path = a.out.join("report.json");
    let mut text = serde_json::to_string_pretty(&trained.report)?;
    text.push('\n');
    fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
    write_trace_csv(&trained.report, create(&a.out.join("trace.csv"))?)?;
    let status = if trained.report.converged { "converged" } else { "stopped at max iterations" };
    println!(
        "{} / {}: {status} after {} rounds, final ELBO {}",
        cfg.schedule,
        cfg.mode,
        trained.report.iterations,
        trained.report.final_elbo().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn load_model(path: &Path, corpus: &ThreadCorpus) -> Result<Snapshot> {
    let s = load_snapshot(path)?;
    s.global.check_matches(corpus)?;
    Ok(s)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let corpus = a.data.load()?;
    let split = load_split(&a.split, &corpus)?;
    let full = a.model.as_ref().map(|p| load_model(p, &corpus)).transpose()?;
    let mmsb = a.mmsb.as_ref().map(|p| load_model(p, &corpus)).transpose()?;
    let lda_local = match &a.lda {
        Some(p) => {
            let s = load_model(p, &corpus)?;
            let h = &s.manifest.hyper;
            Some(recompute_locals(&corpus, &s.global, h, Mode::LdaOnly, LocalOptions::default(), 1)?)
        }
        None => None,
    };
    let grid = a.m_grid.clone().unwrap_or_else(default_m_grid);
    let report = evaluate_all(
        &corpus,
        &split,
        full.as_ref().map(|s| &s.global),
        mmsb.as_ref().map(|s| &s.global),
        lda_local.as_ref(),
        &grid,
    )?;
    print!("{}", report.to_table());
    if let Some(out) = &a.out {
        report.write_csv(create(out)?)?;
    }
    Ok(())
}

pub fn cmd_tune(a: &TuneArgs) -> Result<()> {
    let corpus = a.data.load()?;
    let split = load_split(&a.split, &corpus)?;
    let grids: TuneGrids = serde_json::from_str(&read_text(&a.grid)?)?;
    let hyper = a.training.hyper()?;
    let result = tune(&corpus, &split, &hyper, &grids, &a.training.train_config())?;
    result.write_csv(create(&a.out)?)?;
    for r in &result.rows {
        let score = r.heldout_rmse.map(|v| format!("{v:.4}")).unwrap_or_else(|| "failed".into());
        println!("{:<6} {:>14} {score}", r.param, r.value);
    }
    println!("best: {}", serde_json::to_string(&result.hyper)?);
    Ok(())
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let corpus = a.data.load()?;
    let vocab = load_vocab(&a.data.vocab)?;
    let corpus = match &a.split {
        Some(p) => corpus.restrict_edges(&load_split(p, &corpus)?.train)?,
        None => corpus,
    };
    let snap = load_model(&a.model, &corpus)?;
    let g = &snap.global;
    mkdir(&a.out)?;

    let roles = dominant_roles(&g.gamma);
    let adj = sorted_adjacency_export(&corpus, &roles);
    adj.write_order_csv(create(&a.out.join("roles.csv"))?)?;
    adj.write_edges_csv(create(&a.out.join("adjacency.csv"))?)?;

    let mode = snap.manifest.mode;
    if mode.uses_edges() {
        let local = recompute_locals(&corpus, g, &snap.manifest.hyper, mode, LocalOptions::default(), 3)?;
        let hist = local_global_variation(&corpus, &g.gamma, &local, a.bins)?;
        hist.write_csv(create(&a.out.join("variation.csv"))?)?;
        let mut w = csv::Writer::from_writer(create(&a.out.join("variation_records.csv"))?);
        for r in &hist.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(a.out.join("variation_records.csv"), e))?;
    }

    let degrees = corpus.degrees();
    for (i, group) in (0..g.k()).collect::<Vec<_>>().chunks(5).enumerate() {
        if group.len() < 5 {
            break;
        }
        let pts = pentagon_projection(&g.gamma, group, &degrees)?;
        write_pentagon_csv(&pts, create(&a.out.join(format!("pentagon_{i}.csv")))?)?;
        let svg_path = a.out.join(format!("pentagon_{i}.svg"));
        fs::write(&svg_path, pentagon_svg(&pts)).map_err(|e| Error::io(&svg_path, e))?;
    }

    let n = a.top_n.min(g.vocab_size());
    let words = top_words(&g.tau, &vocab, n)?;
    write_top_words_csv(&words, create(&a.out.join("top_words.csv"))?)?;
    let assigned = roles.iter().filter(|r| r.is_some()).count();
    println!("{assigned} of {} users have a dominant role; exports in {}", roles.len(), a.out.display());
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let corpus = a.data.load()?;
    let hyper = a.training.hyper()?;
    let cfg = a.training.train_config();
    let result = bench_schedules(&corpus, &hyper, &cfg)?;
    mkdir(&a.out)?;
    for (schedule, report) in &result.traces {
        write_trace_csv(report, create(&a.out.join(format!("trace_{}.csv", schedule.name())))?)?;
        println!(
            "{:<5} rounds {:>5}  seconds {:>9.3}  final ELBO {}",
            schedule.name(),
            report.iterations,
            report.elbo_trace.last().map_or(0.0, |p| p.seconds),
            report.final_elbo().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
