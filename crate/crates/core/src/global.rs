//! Global updates: exact batch coordinate steps for γ, τ, λ, a gradient
//! step for ν, their sub-sampled estimates, and the mixing schedule.

use ndarray::{Array2, Zip};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::ThreadCorpus;
use crate::error::{Error, Result};
use crate::hyper::{HyperParams, Mode};
use crate::math::{psi1, LogFactorial};
use crate::state::{GlobalState, LocalState};

/// Lower bound applied to ν after every gradient step.
pub const NU_FLOOR: f64 = 1e-6;

/// Sufficient statistics of the locals of a set of threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    /// U×K: Σ of sender marginals over edges p sends plus receiver
    /// marginals over edges p receives.
    pub user_mass: Array2<f64>,
    /// K×K: Σ φ.
    pub block_mass: Array2<f64>,
    /// K×K: Σ φ·y.
    pub block_weight: Array2<f64>,
    /// K×V: Σ χ per word.
    pub word_mass: Array2<f64>,
    pub threads: usize,
}

impl SuffStats {
    pub fn zeros(num_users: usize, k: usize, vocab: usize) -> Self {
        Self {
            user_mass: Array2::zeros((num_users, k)),
            block_mass: Array2::zeros((k, k)),
            block_weight: Array2::zeros((k, k)),
            word_mass: Array2::zeros((k, vocab)),
            threads: 0,
        }
    }

    /// Accumulates thread `t` from `local`, reading only the data the mode
    /// uses.
    pub fn add_thread(&mut self, corpus: &ThreadCorpus, local: &LocalState, t: usize, mode: Mode) {
        let k = local.k();
        let th = corpus.thread(t);
        self.threads += 1;
        if mode.uses_edges() {
            let e0 = corpus.edge_offset(t);
            for (i, edge) in th.edges().iter().enumerate() {
                let phi = local.phi(e0 + i);
                let y = f64::from(edge.weight);
                for g in 0..k {
                    for h in 0..k {
                        let f = phi[g * k + h];
                        self.block_mass[[g, h]] += f;
                        self.block_weight[[g, h]] += f * y;
                        self.user_mass[[edge.src, g]] += f;
                        self.user_mass[[edge.dst, h]] += f;
                    }
                }
            }
        }
        if mode.uses_tokens() {
            let d0 = corpus.doc_offset(t);
            for (d, doc) in th.docs().iter().enumerate() {
                let base = corpus.token_offset(d0 + d);
                for (i, &w) in doc.tokens.iter().enumerate() {
                    for (kk, &c) in local.chi(base + i).iter().enumerate() {
                        self.word_mass[[kk, w as usize]] += c;
                    }
                }
            }
        }
    }

    pub fn from_threads(corpus: &ThreadCorpus, local: &LocalState, threads: &[usize], mode: Mode) -> Self {
        let mut s = Self::zeros(corpus.num_users(), local.k(), corpus.vocab_size());
        for &t in threads {
            s.add_thread(corpus, local, t, mode);
        }
        s
    }

    pub fn full(corpus: &ThreadCorpus, local: &LocalState, mode: Mode) -> Self {
        let all: Vec<usize> = (0..corpus.num_threads()).collect();
        Self::from_threads(corpus, local, &all, mode)
    }

    /// Adds another shard's statistics.
    pub fn merge(&mut self, o: &SuffStats) {
        self.user_mass += &o.user_mass;
        self.block_mass += &o.block_mass;
        self.block_weight += &o.block_weight;
        self.word_mass += &o.word_mass;
        self.threads += o.threads;
    }
}

fn alpha_rows(num_users: usize, hyper: &HyperParams) -> Array2<f64> {
    Array2::from_shape_fn((num_users, hyper.k), |(_, k)| hyper.alpha[k])
}

/// γ_{p,k} = α_k + Σ sender marginals of p's out-edges + Σ receiver
/// marginals of p's in-edges.
pub fn gamma_update_batch(corpus: &ThreadCorpus, local: &LocalState, hyper: &HyperParams) -> Array2<f64> {
    gamma_from_stats(&SuffStats::full(corpus, local, Mode::MmsbOnly), hyper)
}

pub fn gamma_from_stats(stats: &SuffStats, hyper: &HyperParams) -> Array2<f64> {
    alpha_rows(stats.user_mass.nrows(), hyper) + &stats.user_mass
}

/// τ_{k,v} = η + Σ χ_{·,k} over tokens of word v.
pub fn tau_update_batch(corpus: &ThreadCorpus, local: &LocalState, hyper: &HyperParams) -> Array2<f64> {
    tau_from_stats(&SuffStats::full(corpus, local, Mode::LdaOnly), hyper, 1.0)
}

pub fn tau_from_stats(stats: &SuffStats, hyper: &HyperParams, scale: f64) -> Array2<f64> {
    stats.word_mass.mapv(|m| hyper.eta + scale * m)
}

/// λ_{g,h} = (Σ φ y + κ) / ((Σ φ + 1/θ) ν).
pub fn lambda_update_batch(
    corpus: &ThreadCorpus,
    local: &LocalState,
    global: &GlobalState,
    hyper: &HyperParams,
) -> Result<Array2<f64>> {
    lambda_from_stats(&SuffStats::full(corpus, local, Mode::MmsbOnly), &global.nu, hyper, 1.0)
}

pub fn lambda_from_stats(stats: &SuffStats, nu: &Array2<f64>, hyper: &HyperParams, scale: f64) -> Result<Array2<f64>> {
    if let Some(v) = nu.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!("nu entry {v} must be positive")));
    }
    let k = hyper.k;
    Ok(Array2::from_shape_fn((k, k), |(g, h)| {
        (scale * stats.block_weight[[g, h]] + hyper.kappa_at(g, h))
            / ((scale * stats.block_mass[[g, h]] + 1.0 / hyper.theta_at(g, h)) * nu[[g, h]])
    }))
}

/// ∂L/∂ν with the data part Σ φ (y Ψ′(ν) − λ) multiplied by `scale`.
pub fn nu_gradient_from_stats(stats: &SuffStats, global: &GlobalState, hyper: &HyperParams, scale: f64) -> Array2<f64> {
    let k = hyper.k;
    Array2::from_shape_fn((k, k), |(g, h)| {
        let nu = global.nu[[g, h]];
        let lam = global.lambda[[g, h]];
        let t = psi1(nu);
        let data = stats.block_weight[[g, h]] * t - stats.block_mass[[g, h]] * lam;
        scale * data + (hyper.kappa_at(g, h) - nu) * t + 1.0 - lam / hyper.theta_at(g, h)
    })
}

pub fn nu_gradient(
    corpus: &ThreadCorpus,
    local: &LocalState,
    global: &GlobalState,
    hyper: &HyperParams,
) -> Array2<f64> {
    nu_gradient_from_stats(&SuffStats::full(corpus, local, Mode::MmsbOnly), global, hyper, 1.0)
}

/// ν + ρ_ν ∂L/∂ν, clamped at [`NU_FLOOR`].
pub fn nu_step(nu: &Array2<f64>, grad: &Array2<f64>, rho_nu: f64) -> Array2<f64> {
    Zip::from(nu).and(grad).map_collect(|&n, &g| (n + rho_nu * g).max(NU_FLOOR))
}

pub fn nu_gradient_step(
    corpus: &ThreadCorpus,
    local: &LocalState,
    global: &GlobalState,
    hyper: &HyperParams,
) -> Array2<f64> {
    nu_step(&global.nu, &nu_gradient(corpus, local, global, hyper), hyper.rho_nu)
}

/// One interacting pair of user `p` in a thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborPair {
    pub thread: usize,
    pub other: usize,
    /// Global edge id of `p → other`.
    pub out_edge: Option<usize>,
    /// Global edge id of `other → p`.
    pub in_edge: Option<usize>,
    /// Weight of `p → other` (0 when absent).
    pub weight: u32,
}

impl NeighborPair {
    pub fn is_zero(&self) -> bool {
        self.out_edge.is_none() && self.in_edge.is_none()
    }
}

/// Per-user lists of non-zero pairs (an edge in either direction) and zero
/// pairs (co-participants with no edge either way) over a set of threads.
#[derive(Debug, Clone, Default)]
pub struct NeighborhoodIndex {
    nonzero: Vec<Vec<NeighborPair>>,
    zero: Vec<Vec<NeighborPair>>,
}

impl NeighborhoodIndex {
    pub fn build(corpus: &ThreadCorpus, threads: &[usize]) -> Self {
        let u = corpus.num_users();
        let mut nonzero = vec![Vec::new(); u];
        let mut zero = vec![Vec::new(); u];
        for &t in threads {
            let th = corpus.thread(t);
            let e0 = corpus.edge_offset(t);
            let users: Vec<usize> = th.participants().collect();
            let edges = th.edges();
            let find = |a: usize, b: usize| edges.binary_search_by(|e| (e.src, e.dst).cmp(&(a, b))).ok();
            for &p in &users {
                for &q in &users {
                    let out = find(p, q);
                    let inn = if p == q { None } else { find(q, p) };
                    if out.is_none() && inn.is_none() {
                        if p != q {
                            zero[p].push(NeighborPair {
                                thread: t,
                                other: q,
                                out_edge: None,
                                in_edge: None,
                                weight: 0,
                            });
                        }
                        continue;
                    }
                    nonzero[p].push(NeighborPair {
                        thread: t,
                        other: q,
                        out_edge: out.map(|i| e0 + i),
                        in_edge: inn.map(|i| e0 + i),
                        weight: out.map(|i| edges[i].weight).unwrap_or(0),
                    });
                }
            }
        }
        Self { nonzero, zero }
    }

    pub fn full(corpus: &ThreadCorpus) -> Self {
        let all: Vec<usize> = (0..corpus.num_threads()).collect();
        Self::build(corpus, &all)
    }

    pub fn nonzero(&self, p: usize) -> &[NeighborPair] {
        &self.nonzero[p]
    }

    pub fn zero(&self, p: usize) -> &[NeighborPair] {
        &self.zero[p]
    }

    /// Users with at least one non-zero pair, ascending.
    pub fn active_users(&self) -> impl Iterator<Item = usize> + '_ {
        self.nonzero.iter().enumerate().filter(|(_, v)| !v.is_empty()).map(|(p, _)| p)
    }

    /// Up to `size/2` non-zero pairs drawn uniformly without replacement and
    /// the same number of zero pairs (both truncated to what is available).
    pub fn sample(&self, p: usize, size: usize, rng: &mut impl Rng) -> Vec<NeighborPair> {
        let nz = &self.nonzero[p];
        let z = &self.zero[p];
        let m = (size / 2).max(1).min(nz.len());
        let mut out: Vec<NeighborPair> = sample_indices(rng, nz.len(), m).into_iter().map(|i| nz[i]).collect();
        let mz = m.min(z.len());
        out.extend(sample_indices(rng, z.len(), mz).into_iter().map(|i| z[i]));
        out
    }
}

/// Neighbourhood sample of `p` over the whole corpus, deterministic per seed.
pub fn sample_neighborhood(corpus: &ThreadCorpus, p: usize, size: usize, seed: u64) -> Vec<NeighborPair> {
    let idx = NeighborhoodIndex::full(corpus);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.sample(p, size, &mut rng)
}

/// α + scale · (Σ sender marginals of sampled out-edges + Σ receiver
/// marginals of sampled in-edges). Zero pairs carry no mass.
pub fn gamma_local_estimate(sample: &[NeighborPair], local: &LocalState, hyper: &HyperParams, scale: f64) -> Vec<f64> {
    let k = hyper.k;
    let mut out = hyper.alpha.clone();
    if sample.is_empty() {
        return out;
    }
    let mut mass = vec![0.0; k];
    for pair in sample {
        if let Some(e) = pair.out_edge {
            for (g, row) in local.phi(e).chunks(k).enumerate() {
                mass[g] += row.iter().sum::<f64>();
            }
        }
        if let Some(e) = pair.in_edge {
            for row in local.phi(e).chunks(k) {
                mass.iter_mut().zip(row).for_each(|(m, v)| *m += v);
            }
        }
    }
    out.iter_mut().zip(&mass).for_each(|(o, m)| *o += scale * m);
    out
}

/// Ratio scale for a neighbourhood sample: the user's total non-zero pair
/// count over the sampled non-zero pairs. Unbiased for the batch sum under
/// uniform sampling.
pub fn gamma_sample_scale(total_nonzero: usize, sample: &[NeighborPair]) -> f64 {
    let nz = sample.iter().filter(|p| !p.is_zero()).count();
    if nz == 0 {
        0.0
    } else {
        total_nonzero as f64 / nz as f64
    }
}

/// Sub-sampled estimates of (ν, λ, τ) from minibatch statistics, each sum
/// scaled by `scale` (the inverse sampling fraction).
pub fn nu_lambda_tau_local_estimates(
    stats: &SuffStats,
    global: &GlobalState,
    hyper: &HyperParams,
    scale: f64,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let grad = nu_gradient_from_stats(stats, global, hyper, scale);
    let nu = nu_step(&global.nu, &grad, hyper.rho_nu);
    let lambda = lambda_from_stats(stats, &global.nu, hyper, scale)?;
    let tau = tau_from_stats(stats, hyper, scale);
    Ok((nu, lambda, tau))
}

/// ξ_t = (t + ζ)^(−ρ).
pub fn learning_rate(t: u64, zeta: f64, rho: f64) -> f64 {
    (t as f64 + zeta).powf(-rho)
}

/// Elementwise (1 − ξ) old + ξ est for every global parameter.
pub fn mix_global(old: &GlobalState, est: &GlobalState, xi: f64) -> Result<GlobalState> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::Domain(format!("mixing weight {xi} outside [0, 1]")));
    }
    let pairs = [(&old.gamma, &est.gamma), (&old.tau, &est.tau), (&old.nu, &est.nu), (&old.lambda, &est.lambda)];
    if pairs.iter().any(|(a, b)| a.dim() != b.dim()) {
        return Err(Error::Shape("mixing states of different shapes".into()));
    }
    let mix = |a: &Array2<f64>, b: &Array2<f64>| Zip::from(a).and(b).map_collect(|&x, &y| (1.0 - xi) * x + xi * y);
    Ok(GlobalState {
        gamma: mix(&old.gamma, &est.gamma),
        tau: mix(&old.tau, &est.tau),
        nu: mix(&old.nu, &est.nu),
        lambda: mix(&old.lambda, &est.lambda),
    })
}

/// Log-factorial table covering every weight in the corpus.
pub fn log_factorials(corpus: &ThreadCorpus, mode: Mode) -> LogFactorial {
    LogFactorial::new(if mode.uses_edges() { corpus.max_weight() } else { 0 })
}
