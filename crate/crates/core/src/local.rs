//! Per-thread coordinate ascent for the edge pair distributions φ and the
//! token topic distributions χ.
//!
//! φ of the edges a user sends depends on χ of that user's document in the
//! same thread and nothing else local, so each (thread, sender) block is an
//! independent subproblem. Edges a user receives are refreshed in the
//! sender's block.

use crate::corpus::ThreadCorpus;
use crate::elbo::sender_mass;
use crate::error::{Error, Result};
use crate::hyper::{Coupling, HyperParams, Mode};
use crate::math::{dirichlet_elog_into, log_softmax_normalize, LogFactorial};
use crate::state::{Expectations, LocalState};

/// Inner-loop stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    /// Stop once no φ or χ entry moves by more than this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self { tol: 1e-4, max_iters: 50 }
    }
}

/// φ log-weights for one edge, normalized in place into `out` (K×K,
/// row-major over sender g, receiver h).
///
/// `text` carries `(Σ_i χ_i, δ)` for the sender's document when the
/// coupling is active.
#[allow(clippy::too_many_arguments)]
pub(crate) fn phi_update_into(
    exp: &Expectations,
    hyper: &HyperParams,
    sender: usize,
    receiver: usize,
    y: u32,
    log_fact_y: f64,
    text: Option<(&[f64], usize)>,
    out: &mut [f64],
) {
    let k = exp.k;
    let yf = f64::from(y);
    let ep = exp.elog_pi_row(sender);
    let eq = exp.elog_pi_row(receiver);
    let coef = text.map(|(_, d)| hyper.phi_text_coef(d)).unwrap_or(0.0);
    for g in 0..k {
        let text_g = text.map(|(x, _)| coef * x[g]).unwrap_or(0.0);
        for h in 0..k {
            out[g * k + h] = yf * exp.elog_b[[g, h]] - exp.mean_b[[g, h]] - log_fact_y + ep[g] + eq[h] + text_g;
        }
    }
    log_softmax_normalize(out);
}

/// Optimal K×K φ of the edge `sender → receiver` with weight `y`.
///
/// `chi_sum_sender[g]` is Σ_i χ_{i,g} over the sender's tokens in the
/// thread and `delta` the sender's out-degree there; pass an empty slice or
/// `delta = 0` for no coupling.
pub fn phi_update(
    exp: &Expectations,
    hyper: &HyperParams,
    sender: usize,
    receiver: usize,
    y: u32,
    chi_sum_sender: &[f64],
    delta: usize,
) -> Result<Vec<f64>> {
    let k = exp.k;
    let users = exp.elog_pi.nrows();
    if sender >= users || receiver >= users {
        return Err(Error::Validation(format!("edge {sender}->{receiver} outside {users} users")));
    }
    let text = if chi_sum_sender.is_empty() || delta == 0 || hyper.omega == 0.0 {
        None
    } else if chi_sum_sender.len() != k {
        return Err(Error::Shape(format!("chi sum has {} entries, K = {k}", chi_sum_sender.len())));
    } else {
        Some((chi_sum_sender, delta))
    };
    let mut out = vec![0.0; k * k];
    let lfy = LogFactorial::new(0).get(y);
    phi_update_into(exp, hyper, sender, receiver, y, lfy, text, &mut out);
    Ok(out)
}

/// χ log-weights for one token of word `w`, normalized into `out`.
/// `coupling` carries `(s, δ)` with `s[k] = Σ_{q∈δ} Σ_h φ_{p→q}[k, h]`.
pub(crate) fn chi_update_into(
    exp: &Expectations,
    hyper: &HyperParams,
    w: usize,
    coupling: Option<(&[f64], usize)>,
    out: &mut [f64],
) {
    out.copy_from_slice(exp.elog_beta_word(w));
    if let Some((s, delta)) = coupling {
        for (o, &sk) in out.iter_mut().zip(s) {
            *o += hyper.chi_text_term(delta, sk);
        }
    }
    log_softmax_normalize(out);
}

/// Optimal topic distribution of one token of word `w` whose author sends
/// `delta` edges in the thread with sender marginal sums `phi_row_sums`.
pub fn chi_update(
    exp: &Expectations,
    hyper: &HyperParams,
    w: usize,
    phi_row_sums: &[f64],
    delta: usize,
) -> Result<Vec<f64>> {
    let v = exp.elog_beta_t.nrows();
    if w >= v {
        return Err(Error::Validation(format!("word id {w} outside vocabulary of {v}")));
    }
    let coupling = coupling_for(hyper, delta, phi_row_sums);
    let mut out = vec![0.0; exp.k];
    chi_update_into(exp, hyper, w, coupling, &mut out);
    Ok(out)
}

fn coupling_for<'a>(hyper: &HyperParams, delta: usize, s: &'a [f64]) -> Option<(&'a [f64], usize)> {
    let active = delta > 0
        && !s.is_empty()
        && match hyper.coupling {
            Coupling::Consistent => hyper.omega > 0.0,
            Coupling::Printed => true,
        };
    active.then_some((s, delta))
}

/// Converged locals of one user in one thread.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSweep {
    /// φ of the user's out-edges, in thread edge order, K² entries each.
    pub phi: Vec<f64>,
    /// χ of the user's tokens, K entries each.
    pub chi: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn max_abs_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter().zip(new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Alternates φ over the user's out-edges and χ over the user's tokens,
/// warm-started from `phi_thread` (all of the thread's φ, K² per edge) and
/// `chi_doc` (the user's χ, K per token; empty when text is unused).
#[allow(clippy::too_many_arguments)]
pub fn local_sweep(
    corpus: &ThreadCorpus,
    t: usize,
    doc: usize,
    exp: &Expectations,
    hyper: &HyperParams,
    mode: Mode,
    opts: LocalOptions,
    phi_thread: &[f64],
    chi_doc: &[f64],
    lf: &LogFactorial,
) -> UserSweep {
    let k = exp.k;
    let kk = k * k;
    let th = corpus.thread(t);
    let sender = th.user_at(doc);
    let out_edges: Vec<usize> = th.out_edges(doc).to_vec();
    let delta = out_edges.len();
    let edges = th.edges();
    let use_text = mode.uses_tokens() && !chi_doc.is_empty();
    let words: &[u32] = if use_text { th.tokens(doc) } else { &[] };
    let coupled = use_text && delta > 0 && coupling_for(hyper, delta, &[0.0]).is_some();
    // φ only sees the text through ω; the printed χ term can be active at ω = 0
    let phi_sees_text = coupled && hyper.omega > 0.0;

    let mut phi: Vec<f64> = out_edges.iter().flat_map(|&e| phi_thread[e * kk..(e + 1) * kk].iter().copied()).collect();
    let mut chi = chi_doc.to_vec();
    let mut x = vec![0.0; k];
    let mut s = vec![0.0; k];
    let mut buf = vec![0.0; kk.max(k)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut change: f64 = 0.0;
        if phi_sees_text {
            x.iter_mut().for_each(|v| *v = 0.0);
            for c in chi.chunks(k) {
                x.iter_mut().zip(c).for_each(|(a, b)| *a += b);
            }
        }
        for (j, &e) in out_edges.iter().enumerate() {
            let edge = edges[e];
            let text = phi_sees_text.then_some((x.as_slice(), delta));
            let out = &mut buf[..kk];
            phi_update_into(exp, hyper, sender, edge.dst, edge.weight, lf.get(edge.weight), text, out);
            let slot = &mut phi[j * kk..(j + 1) * kk];
            change = change.max(max_abs_change(slot, out));
            slot.copy_from_slice(out);
        }
        if use_text {
            if coupled {
                s.iter_mut().for_each(|v| *v = 0.0);
                for block in phi.chunks(kk) {
                    for (g, row) in block.chunks(k).enumerate() {
                        s[g] += row.iter().sum::<f64>();
                    }
                }
            }
            let coupling = coupled.then_some((s.as_slice(), delta));
            for (i, &w) in words.iter().enumerate() {
                let out = &mut buf[..k];
                chi_update_into(exp, hyper, w as usize, coupling, out);
                let slot = &mut chi[i * k..(i + 1) * k];
                change = change.max(max_abs_change(slot, out));
                slot.copy_from_slice(out);
            }
        }
        if change < opts.tol {
            converged = true;
            break;
        }
        // without coupling one pass reaches the fixed point; the next confirms it
        if !coupled && iterations >= 2 {
            converged = true;
            break;
        }
    }
    UserSweep { phi, chi, iterations, converged }
}

/// Inner-loop bookkeeping for one or more threads.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub sweeps: usize,
    pub iterations: usize,
    pub unconverged: usize,
}

impl SweepStats {
    pub fn merge(&mut self, o: &SweepStats) {
        self.sweeps += o.sweeps;
        self.iterations += o.iterations;
        self.unconverged += o.unconverged;
    }
}

/// Refreshed locals of one thread, ready to be stored back.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreadLocals {
    pub thread: usize,
    /// All of the thread's φ (empty in the text-only mode).
    pub phi: Vec<f64>,
    /// All of the thread's χ (empty in the network-only mode).
    pub chi: Vec<f64>,
    /// Per-document topic Dirichlets (text-only mode only).
    pub doc_gamma: Vec<f64>,
    pub stats: SweepStats,
}

/// Sweeps every participant of thread `t` once against a fixed global
/// snapshot. Pure: reads `local` as the warm start and returns new values.
#[allow(clippy::too_many_arguments)]
pub fn sweep_thread(
    corpus: &ThreadCorpus,
    t: usize,
    exp: &Expectations,
    hyper: &HyperParams,
    mode: Mode,
    opts: LocalOptions,
    local: &LocalState,
    lf: &LogFactorial,
) -> ThreadLocals {
    if mode == Mode::LdaOnly {
        return lda_sweep_thread(corpus, t, exp, hyper, opts, local);
    }
    let k = exp.k;
    let kk = k * k;
    let th = corpus.thread(t);
    let edge_range = corpus.thread_edge_range(t);
    let tok_range = corpus.thread_token_range(t);
    let mut phi = local.phi_range(edge_range.clone()).to_vec();
    let mut chi = if mode.uses_tokens() { local.chi_range(tok_range.clone()).to_vec() } else { Vec::new() };
    let mut stats = SweepStats::default();
    let tok0 = tok_range.start;
    let d0 = corpus.doc_offset(t);
    for doc in 0..th.num_participants() {
        let chi_doc: &[f64] = if mode.uses_tokens() {
            let a = corpus.token_offset(d0 + doc) - tok0;
            let b = corpus.token_offset(d0 + doc + 1) - tok0;
            &chi[a * k..b * k]
        } else {
            &[]
        };
        let r = local_sweep(corpus, t, doc, exp, hyper, mode, opts, &phi, chi_doc, lf);
        for (j, &e) in th.out_edges(doc).iter().enumerate() {
            phi[e * kk..(e + 1) * kk].copy_from_slice(&r.phi[j * kk..(j + 1) * kk]);
        }
        if mode.uses_tokens() {
            let a = corpus.token_offset(d0 + doc) - tok0;
            chi[a * k..a * k + r.chi.len()].copy_from_slice(&r.chi);
        }
        stats.sweeps += 1;
        stats.iterations += r.iterations;
        stats.unconverged += usize::from(!r.converged);
    }
    ThreadLocals { thread: t, phi, chi, doc_gamma: Vec::new(), stats }
}

/// Standard mean-field LDA step for every document of thread `t`.
fn lda_sweep_thread(
    corpus: &ThreadCorpus,
    t: usize,
    exp: &Expectations,
    hyper: &HyperParams,
    opts: LocalOptions,
    local: &LocalState,
) -> ThreadLocals {
    let k = exp.k;
    let th = corpus.thread(t);
    let tok_range = corpus.thread_token_range(t);
    let d0 = corpus.doc_offset(t);
    let mut chi = local.chi_range(tok_range.clone()).to_vec();
    // Documents restart at α + len/K each sweep instead of warm-starting:
    // with a sparse α a warm start pins a document to the topic it first
    // leaned towards, whatever the current topics say.
    let mut doc_gamma = vec![0.0; th.num_participants() * k];
    let mut stats = SweepStats::default();
    let mut elog = vec![0.0; k];
    let mut buf = vec![0.0; k];
    for (d, doc) in th.docs().iter().enumerate() {
        let a = corpus.token_offset(d0 + d) - tok_range.start;
        let words = &doc.tokens;
        let chi_doc = &mut chi[a * k..(a + words.len()) * k];
        let g = &mut doc_gamma[d * k..(d + 1) * k];
        let len = words.len() as f64 / k as f64;
        g.iter_mut().zip(&hyper.alpha).for_each(|(g, a)| *g = a + len);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iters {
            iterations += 1;
            dirichlet_elog_into(g, &mut elog).expect("document Dirichlet stays positive");
            let mut change: f64 = 0.0;
            for (i, &w) in words.iter().enumerate() {
                let eb = exp.elog_beta_word(w as usize);
                buf.iter_mut().zip(eb.iter().zip(&elog)).for_each(|(o, (b, e))| *o = b + e);
                log_softmax_normalize(&mut buf);
                let slot = &mut chi_doc[i * k..(i + 1) * k];
                change = change.max(max_abs_change(slot, &buf));
                slot.copy_from_slice(&buf);
            }
            g.copy_from_slice(&hyper.alpha);
            for c in chi_doc.chunks(k) {
                g.iter_mut().zip(c).for_each(|(a, b)| *a += b);
            }
            if change < opts.tol {
                converged = true;
                break;
            }
        }
        stats.sweeps += 1;
        stats.iterations += iterations;
        stats.unconverged += usize::from(!converged);
    }
    ThreadLocals { thread: t, phi: Vec::new(), chi, doc_gamma, stats }
}

impl LocalState {
    /// Writes a thread's refreshed locals back into flat storage.
    pub fn store(&mut self, corpus: &ThreadCorpus, tl: &ThreadLocals) {
        if !tl.phi.is_empty() {
            self.phi_range_mut(corpus.thread_edge_range(tl.thread)).copy_from_slice(&tl.phi);
        }
        if !tl.chi.is_empty() {
            self.chi_range_mut(corpus.thread_token_range(tl.thread)).copy_from_slice(&tl.chi);
        }
        if !tl.doc_gamma.is_empty() {
            let d0 = corpus.doc_offset(tl.thread);
            let k = self.k();
            for (d, g) in tl.doc_gamma.chunks(k).enumerate() {
                self.doc_gamma_mut(d0 + d).copy_from_slice(g);
            }
        }
    }
}

/// Sender-side φ mass of a user's out-edges in thread `t`, for callers that
/// need the χ coupling input without running a sweep.
pub fn phi_row_sums(corpus: &ThreadCorpus, t: usize, doc: usize, local: &LocalState) -> Vec<f64> {
    let k = local.k();
    let mut s = vec![0.0; k];
    sender_mass(local, corpus.thread(t).out_edges(doc), corpus.edge_offset(t), k, &mut s);
    s
}
