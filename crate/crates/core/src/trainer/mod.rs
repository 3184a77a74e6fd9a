//! Training schedules: full-batch coordinate ascent (V), single-thread
//! stochastic (SV), minibatch stochastic (SSV) and its parallel variant
//! (PSSV), in three modes (joint, network-only, text-only).

mod ablation;
mod bench;
mod snapshot;
mod tune;

use std::time::Instant;

use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{EvalSplit, ThreadCorpus};
use crate::elbo::elbo_for;
use crate::error::{Error, Result};
use crate::global::{
    gamma_from_stats, gamma_local_estimate, gamma_sample_scale, lambda_from_stats, learning_rate, log_factorials,
    nu_gradient_from_stats, nu_lambda_tau_local_estimates, nu_step, tau_from_stats, NeighborhoodIndex, SuffStats,
};
use crate::hyper::{HyperParams, Mode};
use crate::local::{sweep_thread, LocalOptions, SweepStats, ThreadLocals};
use crate::math::LogFactorial;
use crate::state::{Expectations, GlobalState, LocalState};

pub use ablation::{ablation, AblationResult};
pub use bench::{bench_only, bench_schedules, write_trace_csv, BenchResult};
pub use snapshot::{load_snapshot, save_snapshot, Manifest, Snapshot};
pub use tune::{tune, TuneGrids, TuneResult, TuneRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// All threads per round, exact batch global updates.
    V,
    /// One sampled thread per round.
    Sv,
    /// A minibatch of threads per round, one shard.
    Ssv,
    /// A minibatch split across `workers` shards processed in parallel.
    Pssv,
}

impl Schedule {
    pub const ALL: [Schedule; 4] = [Schedule::V, Schedule::Sv, Schedule::Ssv, Schedule::Pssv];

    pub fn name(self) -> &'static str {
        match self {
            Schedule::V => "V",
            Schedule::Sv => "SV",
            Schedule::Ssv => "SSV",
            Schedule::Pssv => "PSSV",
        }
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "v" => Ok(Schedule::V),
            "sv" => Ok(Schedule::Sv),
            "ssv" => Ok(Schedule::Ssv),
            "pssv" => Ok(Schedule::Pssv),
            other => Err(Error::Hyper(format!("unknown schedule {other:?} (expected v, sv, ssv or pssv)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub schedule: Schedule,
    /// Worker threads for PSSV shards and for ELBO evaluation.
    pub workers: usize,
    pub minibatch_threads: usize,
    /// Pairs sampled per user for the membership estimate (half non-zero,
    /// half zero).
    pub neighborhood_size: usize,
    pub max_outer_iters: usize,
    /// Relative ELBO spread over the last five evaluations that counts as
    /// converged.
    pub elbo_tol: f64,
    /// Stochastic schedules evaluate the full-corpus ELBO every this many
    /// rounds; V evaluates every round.
    pub eval_every: usize,
    pub mode: Mode,
    pub seed: u64,
    pub local: LocalOptionsConfig,
    /// Keep ν at its initial value (makes V a pure coordinate ascent).
    pub freeze_nu: bool,
    /// Start the joint model from topics fitted on the text alone (see
    /// [`init_from_text`]). Ignored in the network-only mode.
    #[serde(default)]
    pub text_init: Option<TextInit>,
}

/// Serializable mirror of [`LocalOptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOptionsConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl From<LocalOptionsConfig> for LocalOptions {
    fn from(c: LocalOptionsConfig) -> Self {
        LocalOptions { tol: c.tol, max_iters: c.max_iters }
    }
}

impl Default for LocalOptionsConfig {
    fn default() -> Self {
        let d = LocalOptions::default();
        Self { tol: d.tol, max_iters: d.max_iters }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::Pssv,
            workers: 4,
            minibatch_threads: 400,
            neighborhood_size: 20,
            max_outer_iters: 200,
            elbo_tol: 1e-5,
            eval_every: 10,
            mode: Mode::Full,
            seed: 0,
            local: LocalOptionsConfig::default(),
            freeze_nu: false,
            text_init: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.minibatch_threads == 0 || self.eval_every == 0 {
            return Err(Error::Hyper("workers, minibatch_threads and eval_every must be at least 1".into()));
        }
        if !(self.elbo_tol > 0.0) {
            return Err(Error::Hyper(format!("elbo_tol must be positive, got {}", self.elbo_tol)));
        }
        if !(self.local.tol > 0.0) || self.local.max_iters == 0 {
            return Err(Error::Hyper("local tolerance must be positive and max_iters at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    /// Training wall-clock time, excluding evaluation.
    pub seconds: f64,
    pub elbo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub schedule: Schedule,
    pub mode: Mode,
    pub elbo_trace: Vec<TracePoint>,
    pub converged: bool,
    pub iterations: usize,
    /// Inner-loop sweeps that hit `max_iters` before `tol`.
    pub unconverged_sweeps: usize,
}

impl TrainReport {
    pub fn final_elbo(&self) -> Option<f64> {
        self.elbo_trace.last().map(|p| p.elbo)
    }
}

/// Model, locals and report of a finished run.
#[derive(Debug, Clone)]
pub struct Trained {
    pub global: GlobalState,
    pub local: LocalState,
    pub report: TrainReport,
    /// Hyperparameters actually used (ω is 0 in the network-only mode).
    pub hyper: HyperParams,
}

/// γ = α + U(0,1), τ = η + U(0,0.01), ν = κ, λ = θ.
pub fn init_state(corpus: &ThreadCorpus, hyper: &HyperParams, seed: u64) -> GlobalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = hyper.k;
    let gamma = Array2::from_shape_fn((corpus.num_users(), k), |(_, j)| hyper.alpha[j] + rng.random::<f64>());
    let tau = Array2::from_shape_fn((k, corpus.vocab_size()), |_| hyper.eta + 0.01 * rng.random::<f64>());
    GlobalState {
        gamma,
        tau,
        nu: Array2::from_shape_fn((k, k), |(g, h)| hyper.kappa_at(g, h)),
        lambda: Array2::from_shape_fn((k, k), |(g, h)| hyper.theta_at(g, h)),
    }
}

/// Settings for [`init_from_text`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextInit {
    /// Batch rounds per text-only fit.
    pub rounds: usize,
    /// Independent fits; the one with the highest bound is kept.
    pub restarts: usize,
}

impl Default for TextInit {
    fn default() -> Self {
        Self { rounds: 50, restarts: 5 }
    }
}

/// [`init_state`] with the topics replaced by the best of several short
/// text-only batch fits.
///
/// Each text fit starts its topic parameters near one (η + Gamma(100, 1/100))
/// rather than near η. With a sparse word prior, ψ(τ) close to its pole
/// would otherwise freeze the first noise-driven word assignment, and the
/// joint model cannot move a user whose memberships formed around random
/// topics.
pub fn init_from_text(corpus: &ThreadCorpus, hyper: &HyperParams, seed: u64, opts: TextInit) -> Result<GlobalState> {
    let mut init = init_state(corpus, hyper, seed);
    if corpus.num_tokens() == 0 || opts.rounds == 0 || opts.restarts == 0 {
        return Ok(init);
    }
    let noise = Gamma::new(100.0, 0.01).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut best: Option<(f64, Array2<f64>)> = None;
    for r in 0..opts.restarts as u64 {
        let fit_seed = seed.wrapping_add(r.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut rng = ChaCha8Rng::seed_from_u64(fit_seed ^ 0x7e47_0001);
        let mut text_init = init.clone();
        text_init.tau.mapv_inplace(|_| hyper.eta + noise.sample(&mut rng));
        let cfg = TrainConfig {
            schedule: Schedule::V,
            mode: Mode::LdaOnly,
            max_outer_iters: opts.rounds,
            seed: fit_seed,
            ..TrainConfig::default()
        };
        let fit = train_from(corpus, hyper, &cfg, text_init)?;
        let score = fit.report.final_elbo().unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, fit.global.tau));
        }
    }
    if let Some((_, tau)) = best {
        init.tau = tau;
    }
    Ok(init)
}

/// Fresh locals for a corpus: uniform φ and χ, and in the text-only mode
/// document Dirichlets at α + len/K.
pub fn init_locals(corpus: &ThreadCorpus, hyper: &HyperParams, mode: Mode) -> LocalState {
    let mut local = LocalState::uniform(corpus, hyper.k);
    if mode == Mode::LdaOnly {
        local.init_doc_gamma(corpus.num_docs(), &hyper.alpha);
        let k = hyper.k as f64;
        for d in 0..corpus.num_docs() {
            let len = (corpus.token_offset(d + 1) - corpus.token_offset(d)) as f64;
            local.doc_gamma_mut(d).iter_mut().for_each(|g| *g += len / k);
        }
    }
    local
}

/// Hyperparameters a mode trains with.
pub fn effective_hyper(hyper: &HyperParams, mode: Mode) -> HyperParams {
    let mut h = hyper.clone();
    if mode == Mode::MmsbOnly {
        h.omega = 0.0;
    }
    h
}

/// Sweeps every thread against `global` and stores the result. Threads are
/// independent, so this runs in parallel on the current rayon pool.
pub fn refresh_locals(
    corpus: &ThreadCorpus,
    global: &GlobalState,
    hyper: &HyperParams,
    mode: Mode,
    opts: LocalOptions,
    local: &mut LocalState,
) -> Result<SweepStats> {
    let exp = Expectations::new(global, mode.uses_tokens())?;
    let lf = log_factorials(corpus, mode);
    let out: Vec<ThreadLocals> = (0..corpus.num_threads())
        .into_par_iter()
        .map(|t| sweep_thread(corpus, t, &exp, hyper, mode, opts, local, &lf))
        .collect();
    let mut stats = SweepStats::default();
    for tl in &out {
        local.store(corpus, tl);
        stats.merge(&tl.stats);
    }
    Ok(stats)
}

/// Locals for a saved model: `passes` refreshes from the uniform start.
pub fn recompute_locals(
    corpus: &ThreadCorpus,
    global: &GlobalState,
    hyper: &HyperParams,
    mode: Mode,
    opts: LocalOptions,
    passes: usize,
) -> Result<LocalState> {
    let mut local = init_locals(corpus, hyper, mode);
    for _ in 0..passes.max(1) {
        refresh_locals(corpus, global, hyper, mode, opts, &mut local)?;
    }
    Ok(local)
}

/// Trains on the split's training edges (or every edge without a split).
pub fn train(
    corpus: &ThreadCorpus,
    split: Option<&EvalSplit>,
    hyper: &HyperParams,
    config: &TrainConfig,
) -> Result<(GlobalState, TrainReport)> {
    let t = train_with_locals(corpus, split, hyper, config)?;
    Ok((t.global, t.report))
}

pub fn train_with_locals(
    corpus: &ThreadCorpus,
    split: Option<&EvalSplit>,
    hyper: &HyperParams,
    config: &TrainConfig,
) -> Result<Trained> {
    let restricted;
    let train_corpus = match split {
        Some(s) if config.mode.uses_edges() => {
            restricted = corpus.restrict_edges(&s.train)?;
            &restricted
        }
        _ => corpus,
    };
    let init = match config.text_init {
        Some(opts) if config.mode == Mode::Full => init_from_text(train_corpus, hyper, config.seed, opts)?,
        _ => init_state(train_corpus, hyper, config.seed),
    };
    train_from(train_corpus, hyper, config, init)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))
}

/// Trains `corpus` as given (all of its edges are training edges) from an
/// explicit initial global state.
pub fn train_from(
    corpus: &ThreadCorpus,
    hyper: &HyperParams,
    config: &TrainConfig,
    init: GlobalState,
) -> Result<Trained> {
    hyper.validate()?;
    config.validate()?;
    init.validate()?;
    init.check_matches(corpus)?;
    let mode = config.mode;
    if mode.uses_edges() && corpus.num_edges() == 0 {
        return Err(Error::Degenerate("no training edges".into()));
    }
    if mode == Mode::LdaOnly && corpus.num_tokens() == 0 {
        return Err(Error::Degenerate("no tokens to train the text-only model on".into()));
    }
    let hyper = effective_hyper(hyper, mode);
    let pool = build_pool(config.workers)?;
    pool.install(|| Engine::new(corpus, &hyper, config, init).run())
}

struct Engine<'a> {
    corpus: &'a ThreadCorpus,
    hyper: &'a HyperParams,
    config: &'a TrainConfig,
    opts: LocalOptions,
    global: GlobalState,
    local: LocalState,
    lf: LogFactorial,
    rng: ChaCha8Rng,
    report: TrainReport,
    training_secs: f64,
    /// Non-zero pair counts per user over the whole corpus.
    pair_totals: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn new(corpus: &'a ThreadCorpus, hyper: &'a HyperParams, config: &'a TrainConfig, init: GlobalState) -> Self {
        let mode = config.mode;
        let pair_totals = if mode.uses_edges() && config.schedule != Schedule::V {
            let idx = NeighborhoodIndex::full(corpus);
            (0..corpus.num_users()).map(|p| idx.nonzero(p).len()).collect()
        } else {
            Vec::new()
        };
        Self {
            corpus,
            hyper,
            config,
            opts: config.local.into(),
            global: init,
            local: init_locals(corpus, hyper, mode),
            lf: log_factorials(corpus, mode),
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7a11),
            report: TrainReport {
                schedule: config.schedule,
                mode,
                elbo_trace: Vec::new(),
                converged: false,
                iterations: 0,
                unconverged_sweeps: 0,
            },
            training_secs: 0.0,
            pair_totals,
        }
    }

    fn run(mut self) -> Result<Trained> {
        // every schedule starts from the bound of the initial globals with
        // freshly swept locals, so traces share their first point
        if self.config.schedule == Schedule::V {
            let s =
                refresh_locals(self.corpus, &self.global, self.hyper, self.config.mode, self.opts, &mut self.local)?;
            self.report.unconverged_sweeps += s.unconverged;
            let v = elbo_for(self.corpus, &self.global, &self.local, self.hyper, self.config.mode)?;
            self.record(0, v)?;
        } else {
            self.evaluate(0)?;
        }
        for round in 1..=self.config.max_outer_iters {
            let start = Instant::now();
            match self.config.schedule {
                Schedule::V => self.batch_round()?,
                Schedule::Sv => self.stochastic_round(round, 1, 1)?,
                Schedule::Ssv => self.stochastic_round(round, self.config.minibatch_threads, 1)?,
                Schedule::Pssv => self.stochastic_round(round, self.config.minibatch_threads, self.config.workers)?,
            }
            self.training_secs += start.elapsed().as_secs_f64();
            self.report.iterations = round;
            let is_last = round == self.config.max_outer_iters;
            if self.config.schedule == Schedule::V {
                let v = elbo_for(self.corpus, &self.global, &self.local, self.hyper, self.config.mode)?;
                self.record(round, v)?;
            } else if round % self.config.eval_every == 0 || is_last {
                self.evaluate(round)?;
            }
            if self.converged() {
                self.report.converged = true;
                break;
            }
        }
        if self.config.schedule != Schedule::V {
            // leave locals consistent with the final globals
            let s =
                refresh_locals(self.corpus, &self.global, self.hyper, self.config.mode, self.opts, &mut self.local)?;
            self.report.unconverged_sweeps += s.unconverged;
        }
        Ok(Trained { global: self.global, local: self.local, report: self.report, hyper: self.hyper.clone() })
    }

    fn record(&mut self, iteration: usize, elbo: f64) -> Result<()> {
        if !elbo.is_finite() {
            return Err(Error::Numerical(format!("ELBO became {elbo} at round {iteration}")));
        }
        self.report.elbo_trace.push(TracePoint { iteration, seconds: self.training_secs, elbo });
        Ok(())
    }

    /// Full-corpus bound with locals refreshed on a scratch copy.
    fn evaluate(&mut self, iteration: usize) -> Result<()> {
        let mut scratch = self.local.clone();
        refresh_locals(self.corpus, &self.global, self.hyper, self.config.mode, self.opts, &mut scratch)?;
        let v = elbo_for(self.corpus, &self.global, &scratch, self.hyper, self.config.mode)?;
        self.record(iteration, v)
    }

    fn converged(&self) -> bool {
        let tr = &self.report.elbo_trace;
        if tr.len() < 5 {
            return false;
        }
        let w = &tr[tr.len() - 5..];
        let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.elbo), b.max(p.elbo)));
        (hi - lo) / w[4].elbo.abs().max(1e-300) < self.config.elbo_tol
    }

    fn batch_round(&mut self) -> Result<()> {
        let (corpus, hyper, mode) = (self.corpus, self.hyper, self.config.mode);
        let s = refresh_locals(corpus, &self.global, hyper, mode, self.opts, &mut self.local)?;
        self.report.unconverged_sweeps += s.unconverged;
        let stats = SuffStats::full(corpus, &self.local, mode);
        if mode.uses_edges() {
            self.global.gamma = gamma_from_stats(&stats, hyper);
            self.global.lambda = lambda_from_stats(&stats, &self.global.nu, hyper, 1.0)?;
            if !self.config.freeze_nu {
                let grad = nu_gradient_from_stats(&stats, &self.global, hyper, 1.0);
                self.global.nu = nu_step(&self.global.nu, &grad, hyper.rho_nu);
            }
        }
        if mode.uses_tokens() {
            self.global.tau = tau_from_stats(&stats, hyper, 1.0);
        }
        Ok(())
    }

    fn sample_threads(&mut self, size: usize) -> Vec<usize> {
        let t = self.corpus.num_threads();
        let mut m: Vec<usize> = sample_indices(&mut self.rng, t, size.min(t)).into_vec();
        m.sort_unstable();
        m
    }

    fn stochastic_round(&mut self, round: usize, batch: usize, shards: usize) -> Result<()> {
        let (corpus, hyper, mode) = (self.corpus, self.hyper, self.config.mode);
        let threads = self.sample_threads(batch);
        let exp = Expectations::new(&self.global, mode.uses_tokens())?;
        let chunk = threads.len().div_ceil(shards.max(1)).max(1);
        let chunks: Vec<&[usize]> = threads.chunks(chunk).collect();

        let swept: Vec<Vec<ThreadLocals>> = {
            let local = &self.local;
            let lf = &self.lf;
            let opts = self.opts;
            let work = |c: &&[usize]| -> Vec<ThreadLocals> {
                c.iter().map(|&t| sweep_thread(corpus, t, &exp, hyper, mode, opts, local, lf)).collect()
            };
            if chunks.len() > 1 {
                chunks.par_iter().map(work).collect()
            } else {
                chunks.iter().map(work).collect()
            }
        };
        for tl in swept.iter().flatten() {
            self.local.store(corpus, tl);
            self.report.unconverged_sweeps += tl.stats.unconverged;
        }
        let shard_stats: Vec<SuffStats> = {
            let local = &self.local;
            let f = |c: &&[usize]| SuffStats::from_threads(corpus, local, c, mode);
            if chunks.len() > 1 {
                chunks.par_iter().map(f).collect()
            } else {
                chunks.iter().map(f).collect()
            }
        };
        let mut stats = shard_stats[0].clone();
        for s in &shard_stats[1..] {
            stats.merge(s);
        }

        let scale = corpus.num_threads() as f64 / threads.len() as f64;
        let xi = learning_rate(round as u64 - 1, hyper.zeta, hyper.rho);
        let (nu_est, lambda_est, tau_est) = nu_lambda_tau_local_estimates(&stats, &self.global, hyper, scale)?;
        if mode.uses_tokens() {
            self.global.tau = mix(&self.global.tau, &tau_est, xi);
        }
        if mode.uses_edges() {
            let gamma_est = self.gamma_estimates(&threads);
            for (p, row) in gamma_est {
                for (k, v) in row.into_iter().enumerate() {
                    let old = self.global.gamma[[p, k]];
                    self.global.gamma[[p, k]] = (1.0 - xi) * old + xi * v;
                }
            }
            self.global.lambda = mix(&self.global.lambda, &lambda_est, xi);
            if !self.config.freeze_nu {
                self.global.nu = mix(&self.global.nu, &nu_est, xi);
            }
        }
        Ok(())
    }

    /// Neighbourhood-sampled membership estimates for users with a non-zero
    /// pair inside the minibatch, in ascending user order.
    fn gamma_estimates(&mut self, threads: &[usize]) -> Vec<(usize, Vec<f64>)> {
        let idx = NeighborhoodIndex::build(self.corpus, threads);
        let users: Vec<usize> = idx.active_users().collect();
        let mut out = Vec::with_capacity(users.len());
        for p in users {
            let sample = idx.sample(p, self.config.neighborhood_size, &mut self.rng);
            let scale = gamma_sample_scale(self.pair_totals[p], &sample);
            out.push((p, gamma_local_estimate(&sample, &self.local, self.hyper, scale)));
        }
        out
    }
}

fn mix(old: &Array2<f64>, est: &Array2<f64>, xi: f64) -> Array2<f64> {
    ndarray::Zip::from(old).and(est).map_collect(|&a, &b| (1.0 - xi) * a + xi * b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};

    fn toy() -> (ThreadCorpus, HyperParams) {
        let hyper = HyperParams::symmetric(2, 0.1, 0.05, (2.0, 1.0), (2.0, 1.0), 0.01);
        let cfg =
            SynthConfig { num_users: 20, num_threads: 10, vocab_size: 30, avg_participants: 5.0, doc_len: 8, seed: 3 };
        let (corpus, _) = generate_synthetic(&cfg, &hyper).unwrap();
        (corpus, hyper)
    }

    #[test]
    fn init_is_seeded_and_positive() {
        let (c, h) = toy();
        let a = init_state(&c, &h, 4);
        assert_eq!(a, init_state(&c, &h, 4));
        assert_ne!(a, init_state(&c, &h, 5));
        assert!(a.all_positive());
        assert_eq!(a.nu[[0, 0]], 2.0);
        let h1 = HyperParams::symmetric(1, 0.1, 0.05, (2.0, 1.0), (2.0, 1.0), 0.0);
        assert_eq!(init_state(&c, &h1, 0).gamma.ncols(), 1);
    }

    #[test]
    fn batch_trace_is_monotone_with_frozen_nu() {
        let (c, h) = toy();
        let cfg = TrainConfig {
            schedule: Schedule::V,
            max_outer_iters: 15,
            freeze_nu: true,
            elbo_tol: 1e-12,
            local: LocalOptionsConfig { tol: 1e-10, max_iters: 200 },
            ..TrainConfig::default()
        };
        let (_, report) = train(&c, None, &h, &cfg).unwrap();
        for w in report.elbo_trace.windows(2) {
            assert!(w[1].elbo >= w[0].elbo - 1e-8, "{:?}", w);
        }
    }

    #[test]
    fn single_worker_parallel_equals_minibatch() {
        let (c, h) = toy();
        let base = TrainConfig {
            minibatch_threads: 4,
            max_outer_iters: 6,
            eval_every: 3,
            workers: 1,
            ..TrainConfig::default()
        };
        let a = train_with_locals(&c, None, &h, &TrainConfig { schedule: Schedule::Ssv, ..base.clone() }).unwrap();
        let b = train_with_locals(&c, None, &h, &TrainConfig { schedule: Schedule::Pssv, ..base }).unwrap();
        assert_eq!(a.global, b.global);
        let ea: Vec<f64> = a.report.elbo_trace.iter().map(|p| p.elbo).collect();
        let eb: Vec<f64> = b.report.elbo_trace.iter().map(|p| p.elbo).collect();
        assert_eq!(ea, eb);
    }

    #[test]
    fn modes_respect_their_data() {
        let hyper = HyperParams::symmetric(2, 0.1, 0.05, (2.0, 1.0), (2.0, 1.0), 0.01);
        let cfg =
            SynthConfig { num_users: 20, num_threads: 10, vocab_size: 30, avg_participants: 5.0, doc_len: 0, seed: 3 };
        let (c, _) = generate_synthetic(&cfg, &hyper).unwrap();
        let tc =
            TrainConfig { mode: Mode::MmsbOnly, max_outer_iters: 3, minibatch_threads: 3, ..TrainConfig::default() };
        c.probe().reset();
        c.probe().enable();
        let t = train_with_locals(&c, None, &hyper, &tc).unwrap();
        c.probe().disable();
        assert_eq!(c.probe().token_reads(), 0);
        assert_eq!(t.hyper.omega, 0.0);

        let (c, _) = toy();
        for schedule in Schedule::ALL {
            let tc = TrainConfig {
                mode: Mode::LdaOnly,
                schedule,
                max_outer_iters: 3,
                minibatch_threads: 3,
                ..TrainConfig::default()
            };
            c.probe().reset();
            c.probe().enable();
            let t = train_with_locals(&c, None, &hyper, &tc).unwrap();
            c.probe().disable();
            assert_eq!(c.probe().edge_reads(), 0, "{schedule}");
            assert!(t.local.has_doc_gamma());
        }
    }

    #[test]
    fn empty_training_data_is_rejected() {
        let h = HyperParams::symmetric(2, 0.1, 0.05, (2.0, 1.0), (2.0, 1.0), 0.01);
        let c = ThreadCorpus::new(3, 3, vec![]).unwrap();
        assert!(matches!(train(&c, None, &h, &TrainConfig::default()), Err(Error::Degenerate(_))));
        let tc = TrainConfig { mode: Mode::LdaOnly, ..TrainConfig::default() };
        assert!(train(&c, None, &h, &tc).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let (c, h) = toy();
        for schedule in [Schedule::V, Schedule::Ssv, Schedule::Pssv] {
            let cfg = TrainConfig {
                schedule,
                minibatch_threads: 4,
                max_outer_iters: 5,
                eval_every: 2,
                workers: 3,
                ..TrainConfig::default()
            };
            let a = train_with_locals(&c, None, &h, &cfg).unwrap();
            let b = train_with_locals(&c, None, &h, &cfg).unwrap();
            assert_eq!(a.global, b.global);
            assert_eq!(a.local, b.local);
            let ea: Vec<f64> = a.report.elbo_trace.iter().map(|p| p.elbo).collect();
            let eb: Vec<f64> = b.report.elbo_trace.iter().map(|p| p.elbo).collect();
            assert_eq!(ea, eb);
            assert!(a.local.max_normalization_error() < 1e-9);
            assert!(a.global.all_positive());
        }
    }
}
