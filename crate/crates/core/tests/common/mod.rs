//! Shared oracles for the integration and acceptance tests.
//!
//! Everything here recomputes quantities from first principles with statrs
//! special functions, never through the crate's own expectation helpers.

#![allow(dead_code)]

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::{digamma, ln_gamma};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use threadnet::corpus::{generate_synthetic, Document, SynthConfig};
use threadnet::elbo::elbo;
use threadnet::global::{
    gamma_local_estimate, gamma_sample_scale, gamma_update_batch, lambda_update_batch, nu_gradient, nu_gradient_step,
    nu_lambda_tau_local_estimates, tau_update_batch, NeighborhoodIndex, SuffStats,
};
use threadnet::local::LocalOptions;
use threadnet::local::{chi_update, phi_row_sums, phi_update};
use threadnet::trainer::{init_state, recompute_locals};
use threadnet::{Expectations, GlobalState, HyperParams, LocalState, Mode, ThreadCorpus, ThreadRecord};

pub struct Tiny {
    pub corpus: ThreadCorpus,
    pub global: GlobalState,
    pub local: LocalState,
    pub hyper: HyperParams,
}

fn positive(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Random corpus with at most 3 users, 1–2 threads, K = 2, at most
/// `max_edges` edges and `max_tokens` tokens, plus a random positive state.
pub fn tiny_instance(rng: &mut impl Rng, max_edges: usize, max_tokens: usize) -> Tiny {
    let users = rng.random_range(2..=3usize);
    let vocab = 3;
    let k = 2;
    let num_threads = rng.random_range(1..=2usize);
    let mut edge_budget = max_edges;
    let mut token_budget = max_tokens;
    let mut threads = Vec::new();
    for t in 0..num_threads {
        let mut members: Vec<usize> = (0..users).collect();
        members.shuffle(rng);
        members.truncate(rng.random_range(2..=users));
        let mut pairs: Vec<(usize, usize)> =
            members.iter().flat_map(|&a| members.iter().filter(move |&&b| b != a).map(move |&b| (a, b))).collect();
        pairs.shuffle(rng);
        // the first thread always has an edge so the network part is exercised
        let lo = usize::from(t == 0).min(edge_budget);
        let n_edges = rng.random_range(lo..=edge_budget.min(pairs.len()).max(lo));
        edge_budget -= n_edges;
        let edges: Vec<(usize, usize, i64)> =
            pairs[..n_edges].iter().map(|&(a, b)| (a, b, rng.random_range(1..=3i64))).collect();
        let mut docs: Vec<Document> = members.iter().map(|&u| Document { user: u, tokens: Vec::new() }).collect();
        let n_tokens = rng.random_range(0..=token_budget);
        token_budget -= n_tokens;
        for _ in 0..n_tokens {
            let d = rng.random_range(0..docs.len());
            docs[d].tokens.push(rng.random_range(0..vocab as u32));
        }
        threads.push(ThreadRecord::new(format!("t{t}"), docs, edges).unwrap());
    }
    let corpus = ThreadCorpus::new(users, vocab, threads).unwrap();

    let mut hyper = HyperParams::symmetric(
        k,
        positive(rng, 0.2, 2.0),
        positive(rng, 0.2, 2.0),
        (positive(rng, 0.5, 3.0), positive(rng, 0.5, 3.0)),
        (positive(rng, 0.5, 3.0), positive(rng, 0.5, 3.0)),
        positive(rng, 0.0, 2.0),
    );
    hyper.alpha = (0..k).map(|_| positive(rng, 0.2, 2.0)).collect();
    hyper.epsilon = positive(rng, 0.05, 1.0);

    let global = GlobalState {
        gamma: Array2::from_shape_fn((users, k), |_| positive(rng, 0.2, 3.0)),
        tau: Array2::from_shape_fn((k, vocab), |_| positive(rng, 0.2, 3.0)),
        nu: Array2::from_shape_fn((k, k), |_| positive(rng, 0.3, 4.0)),
        lambda: Array2::from_shape_fn((k, k), |_| positive(rng, 0.3, 4.0)),
    };
    let mut local = LocalState::uniform(&corpus, k);
    for e in 0..corpus.num_edges() {
        local.phi_mut(e).copy_from_slice(&simplex(rng, k * k));
    }
    for i in 0..corpus.num_tokens() {
        local.chi_mut(i).copy_from_slice(&simplex(rng, k));
    }
    Tiny { corpus, global, local, hyper }
}

fn dirichlet_elog(row: &[f64]) -> Vec<f64> {
    let total = digamma(row.iter().sum());
    row.iter().map(|&a| digamma(a) - total).collect()
}

/// E_q[log Dir(x | prior)] − E_q[log q(x)] for q = Dir(post).
fn dirichlet_term(prior: &[f64], post: &[f64]) -> f64 {
    let elog = dirichlet_elog(post);
    let log_norm = |a: &[f64]| ln_gamma(a.iter().sum()) - a.iter().map(|&v| ln_gamma(v)).sum::<f64>();
    let e_prior: f64 = log_norm(prior) + prior.iter().zip(&elog).map(|(a, e)| (a - 1.0) * e).sum::<f64>();
    let e_post: f64 = log_norm(post) + post.iter().zip(&elog).map(|(a, e)| (a - 1.0) * e).sum::<f64>();
    e_prior - e_post
}

/// E_q[log Gamma(B | shape κ, scale θ)] + H[Gamma(shape ν, scale λ)].
fn gamma_term(kappa: f64, theta: f64, nu: f64, lambda: f64) -> f64 {
    let elog = digamma(nu) + lambda.ln();
    let mean = nu * lambda;
    let prior = (kappa - 1.0) * elog - mean / theta - kappa * theta.ln() - ln_gamma(kappa);
    let entropy = nu + lambda.ln() + ln_gamma(nu) + (1.0 - nu) * digamma(nu);
    prior + entropy
}

/// One latent variable: its owner and candidate values with q-probabilities.
enum Slot {
    Edge(usize),
    Token(usize),
}

/// The bound by exhaustive enumeration of every joint configuration of
/// edge community pairs and token topics, plus closed-form global terms.
pub fn brute_force_elbo(corpus: &ThreadCorpus, global: &GlobalState, local: &LocalState, hyper: &HyperParams) -> f64 {
    let k = hyper.k;
    let elog_pi: Vec<Vec<f64>> = global.gamma.rows().into_iter().map(|r| dirichlet_elog(&r.to_vec())).collect();
    let elog_beta: Vec<Vec<f64>> = global.tau.rows().into_iter().map(|r| dirichlet_elog(&r.to_vec())).collect();

    // flat views of every edge and token in corpus order
    struct E {
        src: usize,
        dst: usize,
        y: u32,
    }
    struct T {
        word: usize,
        thread: usize,
        doc: usize,
    }
    let mut edges = Vec::new();
    let mut tokens = Vec::new();
    // (thread, doc) -> global edge indices sent by that doc's user
    let mut out_of = std::collections::HashMap::<(usize, usize), Vec<usize>>::new();
    for (t, th) in corpus.threads().iter().enumerate() {
        for (d, doc) in th.docs().iter().enumerate() {
            for &w in &doc.tokens {
                tokens.push(T { word: w as usize, thread: t, doc: d });
            }
            out_of.insert((t, d), Vec::new());
        }
        for e in th.edges() {
            let sender_doc = th.doc_of(e.src).unwrap();
            out_of.get_mut(&(t, sender_doc)).unwrap().push(edges.len());
            edges.push(E { src: e.src, dst: e.dst, y: e.weight });
        }
    }
    let slots: Vec<Slot> = (0..edges.len()).map(Slot::Edge).chain((0..tokens.len()).map(Slot::Token)).collect();
    let radix: Vec<usize> = slots.iter().map(|s| if matches!(s, Slot::Edge(_)) { k * k } else { k }).collect();
    let total: usize = radix.iter().product();

    let mut sum = 0.0;
    let mut digits = vec![0usize; slots.len()];
    for code in 0..total {
        let mut c = code;
        for (dgt, &r) in digits.iter_mut().zip(&radix) {
            *dgt = c % r;
            c /= r;
        }
        let mut log_q = 0.0;
        let mut log_p = 0.0;
        for (slot, &v) in slots.iter().zip(&digits) {
            match *slot {
                Slot::Edge(e) => {
                    let (g, h) = (v / k, v % k);
                    log_q += local.phi(e)[v].ln();
                    let E { src, dst, y } = edges[e];
                    let b_elog = digamma(global.nu[[g, h]]) + global.lambda[[g, h]].ln();
                    let b_mean = global.nu[[g, h]] * global.lambda[[g, h]];
                    log_p +=
                        f64::from(y) * b_elog - b_mean - ln_factorial(u64::from(y)) + elog_pi[src][g] + elog_pi[dst][h];
                }
                Slot::Token(i) => {
                    log_q += local.chi(i)[v].ln();
                    log_p += elog_beta[v][tokens[i].word];
                }
            }
        }
        // coupling: each token of a sending author is scored against the
        // number of that author's out-edges whose sender community matches
        if hyper.omega > 0.0 {
            for (i, tok) in tokens.iter().enumerate() {
                let outs = &out_of[&(tok.thread, tok.doc)];
                if outs.is_empty() {
                    continue;
                }
                let delta = outs.len() as f64;
                let topic = digits[edges.len() + i];
                let n = outs.iter().filter(|&&e| digits[e] / k == topic).count() as f64;
                let f =
                    (hyper.epsilon / delta).ln() * (1.0 - n) / delta + (n / delta) * (1.0 + hyper.epsilon / delta).ln();
                log_p += hyper.omega * f;
            }
        }
        sum += log_q.exp() * (log_p - log_q);
    }

    for p in 0..corpus.num_users() {
        sum += dirichlet_term(&hyper.alpha, &global.gamma.row(p).to_vec());
    }
    let eta = vec![hyper.eta; corpus.vocab_size()];
    for row in global.tau.rows() {
        sum += dirichlet_term(&eta, &row.to_vec());
    }
    for g in 0..k {
        for h in 0..k {
            sum += gamma_term(hyper.kappa[g][h], hyper.theta[g][h], global.nu[[g, h]], global.lambda[[g, h]]);
        }
    }
    sum
}

/// Largest |elbo − brute force| over `n` random tiny instances.
pub fn elbo_oracle_max_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = tiny_instance(&mut rng, 4, 3);
        let got = elbo(&x.corpus, &x.global, &x.local, &x.hyper).unwrap();
        let want = brute_force_elbo(&x.corpus, &x.global, &x.local, &x.hyper);
        worst = worst.max((got - want).abs());
    }
    worst
}

/// Largest relative error between ∂L/∂ν and a centred difference of the
/// bound, over every ν entry of `n` random states.
pub fn nu_gradient_max_rel_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let x = tiny_instance(&mut rng, 4, 3);
        let grad = nu_gradient(&x.corpus, &x.local, &x.global, &x.hyper);
        for ((g, h), &an) in grad.indexed_iter() {
            let nu = x.global.nu[[g, h]];
            let step = 1e-5 * nu;
            let at = |v: f64| {
                let mut s = x.global.clone();
                s.nu[[g, h]] = v;
                elbo(&x.corpus, &s, &x.local, &x.hyper).unwrap()
            };
            let fd = (at(nu + step) - at(nu - step)) / (2.0 * step);
            let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    worst
}

/// Position of every token: (thread, document within thread).
pub fn token_owners(corpus: &ThreadCorpus) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (t, th) in corpus.threads().iter().enumerate() {
        for (d, doc) in th.docs().iter().enumerate() {
            out.extend(std::iter::repeat_n((t, d), doc.tokens.len()));
        }
    }
    out
}

/// Runs `trials` random sequences of single coordinate updates with ν held
/// fixed and returns the most negative change of the bound seen (0 if it
/// never dropped), labelled with the update that caused it.
pub fn monotonicity_worst_drop(trials: usize, seed: u64) -> (f64, &'static str) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, "none");
    for _ in 0..trials {
        let mut x = tiny_instance(&mut rng, 5, 6);
        let owners = token_owners(&x.corpus);
        let mut prev = elbo(&x.corpus, &x.global, &x.local, &x.hyper).unwrap();
        for _ in 0..12 {
            let which = rng.random_range(0..5);
            let label = match which {
                0 if x.corpus.num_edges() > 0 => {
                    let e = rng.random_range(0..x.corpus.num_edges());
                    let (t, i) = x.corpus.all_edges().nth(e).map(|(t, _)| (t, e - x.corpus.edge_offset(t))).unwrap();
                    let th = x.corpus.thread(t);
                    let edge = th.edges()[i];
                    let sd = th.edge_docs()[i].0;
                    let off = x.corpus.token_offset(x.corpus.doc_offset(t) + sd);
                    let mut chi_sum = vec![0.0; x.hyper.k];
                    for j in 0..th.tokens(sd).len() {
                        chi_sum.iter_mut().zip(x.local.chi(off + j)).for_each(|(a, b)| *a += b);
                    }
                    let exp = Expectations::new(&x.global, true).unwrap();
                    let new =
                        phi_update(&exp, &x.hyper, edge.src, edge.dst, edge.weight, &chi_sum, th.delta(sd)).unwrap();
                    x.local.phi_mut(e).copy_from_slice(&new);
                    "phi_update"
                }
                1 if x.corpus.num_tokens() > 0 => {
                    let i = rng.random_range(0..x.corpus.num_tokens());
                    let (t, d) = owners[i];
                    let th = x.corpus.thread(t);
                    let w = th.tokens(d)[i - x.corpus.token_offset(x.corpus.doc_offset(t) + d)] as usize;
                    let s = phi_row_sums(&x.corpus, t, d, &x.local);
                    let exp = Expectations::new(&x.global, true).unwrap();
                    let new = chi_update(&exp, &x.hyper, w, &s, th.delta(d)).unwrap();
                    x.local.chi_mut(i).copy_from_slice(&new);
                    "chi_update"
                }
                2 => {
                    x.global.gamma = gamma_update_batch(&x.corpus, &x.local, &x.hyper);
                    "gamma_update_batch"
                }
                3 => {
                    x.global.tau = tau_update_batch(&x.corpus, &x.local, &x.hyper);
                    "tau_update_batch"
                }
                _ => {
                    x.global.lambda = lambda_update_batch(&x.corpus, &x.local, &x.global, &x.hyper).unwrap();
                    "lambda_update_batch"
                }
            };
            let now = elbo(&x.corpus, &x.global, &x.local, &x.hyper).unwrap();
            if now - prev < worst.0 {
                worst = (now - prev, label);
            }
            prev = now;
        }
    }
    worst
}

/// Small synthetic corpus with locals swept against a random state.
pub fn toy_model(seed: u64) -> (ThreadCorpus, GlobalState, LocalState, HyperParams) {
    let hyper = HyperParams::symmetric(3, 0.3, 0.2, (2.0, 1.0), (2.0, 1.0), 0.5);
    let cfg = SynthConfig { num_users: 30, num_threads: 25, vocab_size: 40, avg_participants: 6.0, doc_len: 6, seed };
    let (corpus, _) = generate_synthetic(&cfg, &hyper).unwrap();
    let global = init_state(&corpus, &hyper, seed);
    let local = recompute_locals(&corpus, &global, &hyper, Mode::Full, LocalOptions::default(), 1).unwrap();
    (corpus, global, local, hyper)
}

/// Largest absolute gap between full-sample estimates at unit scale and
/// the batch updates, over γ, ν, λ and τ.
pub fn unit_scale_max_gap(seed: u64) -> f64 {
    let (corpus, global, local, hyper) = toy_model(seed);
    let mut worst: f64 = 0.0;
    let idx = NeighborhoodIndex::full(&corpus);
    let batch_gamma = gamma_update_batch(&corpus, &local, &hyper);
    for p in 0..corpus.num_users() {
        let est = gamma_local_estimate(idx.nonzero(p), &local, &hyper, 1.0);
        for (a, b) in est.iter().zip(batch_gamma.row(p)) {
            worst = worst.max((a - b).abs());
        }
    }
    let stats = SuffStats::full(&corpus, &local, Mode::Full);
    let (nu, lambda, tau) = nu_lambda_tau_local_estimates(&stats, &global, &hyper, 1.0).unwrap();
    let pairs = [
        (nu, nu_gradient_step(&corpus, &local, &global, &hyper)),
        (lambda, lambda_update_batch(&corpus, &local, &global, &hyper).unwrap()),
        (tau, tau_update_batch(&corpus, &local, &hyper)),
    ];
    for (a, b) in &pairs {
        for (x, y) in a.iter().zip(b.iter()) {
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

/// Worst per-user relative L1 error of the Monte Carlo mean of sampled γ
/// data sums against the batch sums, over `draws` neighbourhood samples of
/// `size` pairs each.
pub fn monte_carlo_gamma_rel_error(seed: u64, draws: usize, size: usize) -> f64 {
    let (corpus, _, local, hyper) = toy_model(seed);
    let idx = NeighborhoodIndex::full(&corpus);
    let batch = gamma_update_batch(&corpus, &local, &hyper);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let mut worst: f64 = 0.0;
    for p in idx.active_users().collect::<Vec<_>>() {
        let total = idx.nonzero(p).len();
        let mut mean = vec![0.0; hyper.k];
        for _ in 0..draws {
            let sample = idx.sample(p, size, &mut rng);
            let est = gamma_local_estimate(&sample, &local, &hyper, gamma_sample_scale(total, &sample));
            for ((m, e), a) in mean.iter_mut().zip(&est).zip(&hyper.alpha) {
                *m += (e - a) / draws as f64;
            }
        }
        let want: Vec<f64> = batch.row(p).iter().zip(&hyper.alpha).map(|(g, a)| g - a).collect();
        let err: f64 = mean.iter().zip(&want).map(|(m, w)| (m - w).abs()).sum();
        let norm: f64 = want.iter().sum();
        if norm > 0.0 {
            worst = worst.max(err / norm);
        }
    }
    worst
}

/// Mean and standard error of the aligned membership rmse of batch fits,
/// per α, on corpora drawn with that α and η = 0.01.
pub fn recovery_sweep(alphas: &[f64], seeds: u64, users: usize, threads: usize) -> Vec<(f64, f64, f64)> {
    use threadnet::eval::aligned_membership_rmse;
    use threadnet::trainer::{train, TextInit};
    use threadnet::{Schedule, TrainConfig};

    let mut out = Vec::new();
    for &alpha in alphas {
        let hyper = HyperParams::symmetric(5, alpha, 0.01, (2.5, 1.5), (2.5, 1.5), 0.1);
        let mut scores = Vec::new();
        for seed in 0..seeds {
            let cfg = SynthConfig { num_users: users, num_threads: threads, seed, ..SynthConfig::default() };
            let (corpus, truth) = generate_synthetic(&cfg, &hyper).unwrap();
            let config = TrainConfig {
                schedule: Schedule::V,
                max_outer_iters: 100,
                seed,
                text_init: Some(TextInit::default()),
                ..TrainConfig::default()
            };
            let (global, _) = train(&corpus, None, &hyper, &config).unwrap();
            let degrees = corpus.degrees();
            let active: Vec<usize> = (0..users).filter(|&u| degrees[u] > 0).collect();
            scores.push(aligned_membership_rmse(&truth.pi, &global.pi(), &active).unwrap().rmse);
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        out.push((alpha, mean, (var / n).sqrt()));
    }
    out
}

/// Mean test rmse of the joint model, the network-only model, the text
/// baseline and the mean predictor, in that order, on planted corpora.
pub fn link_prediction_study(seeds: u64) -> [f64; 4] {
    use threadnet::corpus::{split_edges, SplitSet};
    use threadnet::eval::{default_m_grid, Method};
    use threadnet::trainer::{ablation, TextInit};
    use threadnet::{Schedule, TrainConfig};

    let planted = HyperParams::symmetric(5, 0.05, 0.05, (4.0, 1.0), (2.5, 0.5), 0.1);
    let methods = [Method::Model, Method::Mmsb, Method::Lda, Method::Baseline];
    let mut totals = [0.0; 4];
    for seed in 0..seeds {
        let cfg =
            SynthConfig { num_users: 500, num_threads: 400, avg_participants: 15.0, seed, ..SynthConfig::default() };
        let (corpus, _) = generate_synthetic(&cfg, &planted).unwrap();
        let split = split_edges(&corpus, seed, false).unwrap();
        let config = TrainConfig {
            schedule: Schedule::V,
            max_outer_iters: 100,
            seed,
            text_init: Some(TextInit::default()),
            ..TrainConfig::default()
        };
        let r = ablation(&corpus, &split, &planted, &config, &[0.05, 0.5], &default_m_grid()).unwrap();
        for (t, m) in totals.iter_mut().zip(methods) {
            *t += r.report.get(m, SplitSet::Test).unwrap() / seeds as f64;
        }
    }
    totals
}
