//! Variational global and local parameters.

use ndarray::{Array2, Axis};

use crate::corpus::ThreadCorpus;
use crate::error::{Error, Result};
use crate::math::{dirichlet_elog_into, psi};

/// Global variational parameters: q(π_p) = Dir(γ_p), q(β_k) = Dir(τ_k),
/// q(B_gh) = Gamma(shape ν_gh, scale λ_gh).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    /// U×K
    pub gamma: Array2<f64>,
    /// K×V
    pub tau: Array2<f64>,
    /// K×K
    pub nu: Array2<f64>,
    /// K×K
    pub lambda: Array2<f64>,
}

impl GlobalState {
    pub fn k(&self) -> usize {
        self.nu.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.tau.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.gamma.ncols() != k || self.tau.nrows() != k || self.nu.dim() != (k, k) || self.lambda.dim() != (k, k) {
            return Err(Error::Shape(format!(
                "gamma {:?}, tau {:?}, nu {:?}, lambda {:?}",
                self.gamma.dim(),
                self.tau.dim(),
                self.nu.dim(),
                self.lambda.dim()
            )));
        }
        for (name, m) in [("gamma", &self.gamma), ("tau", &self.tau), ("nu", &self.nu), ("lambda", &self.lambda)] {
            if let Some(v) = m.iter().find(|&&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!("{name} has non-positive entry {v}")));
            }
        }
        Ok(())
    }

    pub fn check_matches(&self, corpus: &ThreadCorpus) -> Result<()> {
        if self.num_users() != corpus.num_users() || self.vocab_size() != corpus.vocab_size() {
            return Err(Error::Shape(format!(
                "state is for U={}, V={} but corpus has U={}, V={}",
                self.num_users(),
                self.vocab_size(),
                corpus.num_users(),
                corpus.vocab_size()
            )));
        }
        Ok(())
    }

    /// Posterior-mean memberships: γ rows normalized.
    pub fn pi(&self) -> Array2<f64> {
        let sums = self.gamma.sum_axis(Axis(1)).insert_axis(Axis(1));
        &self.gamma / &sums
    }

    pub fn pi_row(&self, p: usize) -> Vec<f64> {
        let row = self.gamma.row(p);
        let s = row.sum();
        row.iter().map(|v| v / s).collect()
    }

    /// Posterior-mean block rates B = ν ⊙ λ.
    pub fn block(&self) -> Array2<f64> {
        &self.nu * &self.lambda
    }

    pub fn all_positive(&self) -> bool {
        [&self.gamma, &self.tau, &self.nu, &self.lambda].iter().all(|m| m.iter().all(|&v| v > 0.0 && v.is_finite()))
    }
}

/// Expectations of a global snapshot that the local updates consume.
#[derive(Debug, Clone)]
pub struct Expectations {
    pub k: usize,
    /// U×K: E[log π_pk].
    pub elog_pi: Array2<f64>,
    /// K×K: E[log B_gh] = Ψ(ν) + ln λ.
    pub elog_b: Array2<f64>,
    /// K×K: E[B_gh] = ν λ.
    pub mean_b: Array2<f64>,
    /// V×K (word-major): E[log β_kv]. Empty when text is not used.
    pub elog_beta_t: Array2<f64>,
}

impl Expectations {
    pub fn new(global: &GlobalState, with_text: bool) -> Result<Self> {
        global.validate()?;
        let k = global.k();
        let mut elog_pi = Array2::zeros(global.gamma.dim());
        for (src, mut dst) in global.gamma.rows().into_iter().zip(elog_pi.rows_mut()) {
            dirichlet_elog_into(src.as_slice().unwrap(), dst.as_slice_mut().unwrap())?;
        }
        let elog_b = Array2::from_shape_fn((k, k), |(g, h)| psi(global.nu[[g, h]]) + global.lambda[[g, h]].ln());
        let mean_b = global.block();
        let elog_beta_t = if with_text {
            let v = global.vocab_size();
            let mut t = Array2::zeros((v, k));
            for (kk, row) in global.tau.rows().into_iter().enumerate() {
                let total = psi(row.sum());
                for (w, &x) in row.iter().enumerate() {
                    t[[w, kk]] = psi(x) - total;
                }
            }
            t
        } else {
            Array2::zeros((0, k))
        };
        Ok(Self { k, elog_pi, elog_b, mean_b, elog_beta_t })
    }

    #[inline]
    pub fn elog_pi_row(&self, p: usize) -> &[f64] {
        self.elog_pi.row(p).to_slice().unwrap()
    }

    #[inline]
    pub fn elog_beta_word(&self, w: usize) -> &[f64] {
        self.elog_beta_t.row(w).to_slice().unwrap()
    }
}

/// Local variational parameters in flat storage keyed by the corpus'
/// global edge / token / document indices.
///
/// - `phi[e]`: K×K joint over (sender community g, receiver community h)
///   for train edge `e`, row-major.
/// - `chi[i]`: K-vector over token topics for token `i`.
/// - `doc_gamma[d]`: per-document topic Dirichlet, only used by the
///   text-only ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState {
    k: usize,
    phi: Vec<f64>,
    chi: Vec<f64>,
    doc_gamma: Vec<f64>,
}

impl LocalState {
    pub fn uniform(corpus: &ThreadCorpus, k: usize) -> Self {
        let kk = (k * k) as f64;
        Self {
            k,
            phi: vec![1.0 / kk; corpus.num_edges() * k * k],
            chi: vec![1.0 / k as f64; corpus.num_tokens() * k],
            doc_gamma: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_edges(&self) -> usize {
        self.phi.len() / (self.k * self.k)
    }

    pub fn num_tokens(&self) -> usize {
        self.chi.len() / self.k
    }

    #[inline]
    pub fn phi(&self, edge: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.phi[edge * kk..(edge + 1) * kk]
    }

    #[inline]
    pub fn phi_mut(&mut self, edge: usize) -> &mut [f64] {
        let kk = self.k * self.k;
        &mut self.phi[edge * kk..(edge + 1) * kk]
    }

    /// φ of a contiguous edge range (e.g. one thread).
    pub fn phi_range(&self, r: std::ops::Range<usize>) -> &[f64] {
        let kk = self.k * self.k;
        &self.phi[r.start * kk..r.end * kk]
    }

    pub fn phi_range_mut(&mut self, r: std::ops::Range<usize>) -> &mut [f64] {
        let kk = self.k * self.k;
        &mut self.phi[r.start * kk..r.end * kk]
    }

    #[inline]
    pub fn chi(&self, token: usize) -> &[f64] {
        &self.chi[token * self.k..(token + 1) * self.k]
    }

    #[inline]
    pub fn chi_mut(&mut self, token: usize) -> &mut [f64] {
        &mut self.chi[token * self.k..(token + 1) * self.k]
    }

    pub fn chi_range(&self, r: std::ops::Range<usize>) -> &[f64] {
        &self.chi[r.start * self.k..r.end * self.k]
    }

    pub fn chi_range_mut(&mut self, r: std::ops::Range<usize>) -> &mut [f64] {
        &mut self.chi[r.start * self.k..r.end * self.k]
    }

    pub fn has_doc_gamma(&self) -> bool {
        !self.doc_gamma.is_empty()
    }

    /// Allocates per-document topic Dirichlets initialized to `init`.
    pub fn init_doc_gamma(&mut self, num_docs: usize, init: &[f64]) {
        self.doc_gamma = init.iter().copied().cycle().take(num_docs * self.k).collect();
    }

    pub fn doc_gamma(&self, doc: usize) -> &[f64] {
        &self.doc_gamma[doc * self.k..(doc + 1) * self.k]
    }

    pub fn doc_gamma_mut(&mut self, doc: usize) -> &mut [f64] {
        &mut self.doc_gamma[doc * self.k..(doc + 1) * self.k]
    }

    /// Normalized per-document topic proportions.
    pub fn doc_proportions(&self, doc: usize) -> Vec<f64> {
        let g = self.doc_gamma(doc);
        let s: f64 = g.iter().sum();
        g.iter().map(|v| v / s).collect()
    }

    /// Sender marginal Σ_h φ[g, h] of an edge.
    pub fn sender_marginal(&self, edge: usize) -> Vec<f64> {
        self.phi(edge).chunks(self.k).map(|row| row.iter().sum()).collect()
    }

    /// Receiver marginal Σ_g φ[g, h] of an edge.
    pub fn receiver_marginal(&self, edge: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for row in self.phi(edge).chunks(self.k) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// Largest deviation of any φ matrix or χ vector from unit mass, or of
    /// any entry from [0, 1].
    pub fn max_normalization_error(&self) -> f64 {
        let kk = self.k * self.k;
        let blocks = self.phi.chunks(kk).chain(self.chi.chunks(self.k));
        blocks
            .map(|b| {
                let bad = b.iter().any(|&v| !(0.0..=1.0).contains(&v) || !v.is_finite());
                if bad {
                    f64::INFINITY
                } else {
                    (b.iter().sum::<f64>() - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}
