//! Evidence lower bound of the joint model, broken down by term.
//!
//! Local terms are summed thread by thread in corpus order, so the value is
//! reproducible bit for bit regardless of how a caller parallelizes.

use rayon::prelude::*;

use crate::corpus::ThreadCorpus;
use crate::error::{Error, Result};
use crate::hyper::{HyperParams, Mode};
use crate::math::{
    dirichlet_elog_into, dirichlet_prior_minus_entropy, gamma_prior_minus_entropy,
    symmetric_dirichlet_prior_minus_entropy, LogFactorial,
};
use crate::state::{Expectations, GlobalState, LocalState};

/// Additive pieces of the bound. Local pieces sum over threads; global
/// pieces are E_q[log prior] + entropy of each global factor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElboTerms {
    /// Poisson likelihood, membership draws and φ entropy over stored edges.
    pub edges: f64,
    /// ω-weighted token-to-community coupling.
    pub coupling: f64,
    /// Word likelihood and χ entropy (plus per-document topic draws in the
    /// text-only mode).
    pub tokens: f64,
    pub memberships: f64,
    pub topics: f64,
    pub blocks: f64,
    /// Per-document topic Dirichlets (text-only mode).
    pub documents: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.edges + self.coupling + self.tokens + self.memberships + self.topics + self.blocks + self.documents
    }

    fn add(mut self, o: &ElboTerms) -> Self {
        self.edges += o.edges;
        self.coupling += o.coupling;
        self.tokens += o.tokens;
        self.memberships += o.memberships;
        self.topics += o.topics;
        self.blocks += o.blocks;
        self.documents += o.documents;
        self
    }
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Full bound of the joint model.
pub fn elbo(corpus: &ThreadCorpus, global: &GlobalState, local: &LocalState, hyper: &HyperParams) -> Result<f64> {
    Ok(elbo_terms(corpus, global, local, hyper, Mode::Full)?.total())
}

/// Bound of the model a training mode optimizes.
pub fn elbo_for(
    corpus: &ThreadCorpus,
    global: &GlobalState,
    local: &LocalState,
    hyper: &HyperParams,
    mode: Mode,
) -> Result<f64> {
    Ok(elbo_terms(corpus, global, local, hyper, mode)?.total())
}

pub fn elbo_terms(
    corpus: &ThreadCorpus,
    global: &GlobalState,
    local: &LocalState,
    hyper: &HyperParams,
    mode: Mode,
) -> Result<ElboTerms> {
    check_shapes(corpus, global, local, hyper, mode)?;
    let exp = Expectations::new(global, mode.uses_tokens())?;
    let lf = LogFactorial::new(if mode.uses_edges() { corpus.max_weight() } else { 0 });
    let per_thread: Vec<ElboTerms> = (0..corpus.num_threads())
        .into_par_iter()
        .map(|t| thread_terms(corpus, t, &exp, local, hyper, mode, &lf))
        .collect();
    let local_sum = per_thread.iter().fold(ElboTerms::default(), |acc, x| acc.add(x));
    let g = global_terms(global, &exp, hyper, mode);
    let total = local_sum.add(&g);
    if !total.total().is_finite() {
        return Err(Error::Numerical(format!("non-finite ELBO: {total:?}")));
    }
    Ok(total)
}

fn check_shapes(
    corpus: &ThreadCorpus,
    global: &GlobalState,
    local: &LocalState,
    hyper: &HyperParams,
    mode: Mode,
) -> Result<()> {
    global.check_matches(corpus)?;
    let k = hyper.k;
    if global.k() != k || local.k() != k {
        return Err(Error::Shape(format!("K mismatch: hyper {k}, global {}, local {}", global.k(), local.k())));
    }
    if local.num_edges() != corpus.num_edges() || local.num_tokens() != corpus.num_tokens() {
        return Err(Error::Shape(format!(
            "local state covers {} edges / {} tokens, corpus has {} / {}",
            local.num_edges(),
            local.num_tokens(),
            corpus.num_edges(),
            corpus.num_tokens()
        )));
    }
    if mode == Mode::LdaOnly && !local.has_doc_gamma() {
        return Err(Error::Shape("text-only bound needs per-document topic parameters".into()));
    }
    Ok(())
}

/// Local contribution of one thread.
pub fn thread_terms(
    corpus: &ThreadCorpus,
    t: usize,
    exp: &Expectations,
    local: &LocalState,
    hyper: &HyperParams,
    mode: Mode,
    lf: &LogFactorial,
) -> ElboTerms {
    let k = hyper.k;
    let th = corpus.thread(t);
    let e0 = corpus.edge_offset(t);
    let d0 = corpus.doc_offset(t);
    let mut out = ElboTerms::default();

    if mode.uses_edges() {
        for (i, (edge, &(sd, rd))) in th.edges().iter().zip(th.edge_docs()).enumerate() {
            let phi = local.phi(e0 + i);
            let y = f64::from(edge.weight);
            let lfy = lf.get(edge.weight);
            let ep = exp.elog_pi_row(th.user_at(sd));
            let eq = exp.elog_pi_row(th.user_at(rd));
            let mut v = 0.0;
            for g in 0..k {
                for h in 0..k {
                    let f = phi[g * k + h];
                    if f > 0.0 {
                        let w = y * exp.elog_b[[g, h]] - exp.mean_b[[g, h]] - lfy + ep[g] + eq[h];
                        v += f * w - xlogx(f);
                    }
                }
            }
            out.edges += v;
        }
    }

    if mode.uses_tokens() {
        let coupled = mode == Mode::Full && hyper.omega > 0.0;
        let mut s = vec![0.0; k];
        let mut doc_elog = vec![0.0; k];
        let mut x = vec![0.0; k];
        for (d, doc) in th.docs().iter().enumerate() {
            let gd = d0 + d;
            let base = corpus.token_offset(gd);
            x.iter_mut().for_each(|v| *v = 0.0);
            if mode == Mode::LdaOnly {
                let g = local.doc_gamma(gd);
                dirichlet_elog_into(g, &mut doc_elog).expect("doc gamma positive");
                out.documents += dirichlet_prior_minus_entropy(&hyper.alpha, g, &doc_elog);
            }
            for (i, &w) in doc.tokens.iter().enumerate() {
                let chi = local.chi(base + i);
                let eb = exp.elog_beta_word(w as usize);
                for kk in 0..k {
                    let c = chi[kk];
                    if c > 0.0 {
                        out.tokens += c * eb[kk] - xlogx(c);
                        if mode == Mode::LdaOnly {
                            out.tokens += c * doc_elog[kk];
                        }
                    }
                    x[kk] += c;
                }
            }
            if coupled && !doc.tokens.is_empty() {
                let delta = th.delta(d);
                if delta > 0 {
                    sender_mass(local, th.out_edges(d), e0, k, &mut s);
                    for kk in 0..k {
                        out.coupling += hyper.omega * x[kk] * hyper.coupling_potential(delta, s[kk]);
                    }
                }
            }
        }
    }
    out
}

/// s_g = Σ over the given local edges of the sender marginal Σ_h φ[g, h].
pub(crate) fn sender_mass(local: &LocalState, edges: &[usize], e0: usize, k: usize, s: &mut [f64]) {
    s.iter_mut().for_each(|v| *v = 0.0);
    for &e in edges {
        for (g, row) in local.phi(e0 + e).chunks(k).enumerate() {
            s[g] += row.iter().sum::<f64>();
        }
    }
}

/// Prior-plus-entropy terms of the global factors the mode uses.
pub fn global_terms(global: &GlobalState, exp: &Expectations, hyper: &HyperParams, mode: Mode) -> ElboTerms {
    let mut out = ElboTerms::default();
    if mode.uses_edges() {
        for p in 0..global.num_users() {
            let g = global.gamma.row(p);
            out.memberships += dirichlet_prior_minus_entropy(&hyper.alpha, g.as_slice().unwrap(), exp.elog_pi_row(p));
        }
        for g in 0..hyper.k {
            for h in 0..hyper.k {
                out.blocks += gamma_prior_minus_entropy(
                    hyper.kappa_at(g, h),
                    hyper.theta_at(g, h),
                    global.nu[[g, h]],
                    global.lambda[[g, h]],
                );
            }
        }
    }
    if mode.uses_tokens() {
        let mut elog = vec![0.0; global.vocab_size()];
        for row in global.tau.rows() {
            let r = row.as_slice().unwrap();
            dirichlet_elog_into(r, &mut elog).expect("tau validated positive");
            out.topics += symmetric_dirichlet_prior_minus_entropy(hyper.eta, r, &elog);
        }
    }
    out
}
