//! Link-prediction scoring: bilinear edge-weight prediction from global
//! memberships, RMSE, and the mean and text-only baselines.

use std::fmt::Write as _;
use std::io::Write;

use ndarray::Array2;
use serde::Serialize;

use crate::corpus::{EvalSplit, SplitEntry, SplitSet, ThreadCorpus};
use crate::error::{Error, Result};
use crate::state::{GlobalState, LocalState};

/// B = ν ⊙ λ.
pub fn block_matrix(global: &GlobalState) -> Array2<f64> {
    global.block()
}

/// π_u^T B π_v.
pub fn predict_edge(pi_u: &[f64], pi_v: &[f64], b: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    for (g, &pu) in pi_u.iter().enumerate() {
        let mut row = 0.0;
        for (h, &pv) in pi_v.iter().enumerate() {
            row += b[[g, h]] * pv;
        }
        s += pu * row;
    }
    s
}

/// Root of the mean squared error over (prediction, observed) pairs.
pub fn rmse(pairs: &[(f64, f64)]) -> Result<f64> {
    rmse_with(pairs, true)
}

/// With `mean = false`, the root of the raw sum of squared errors.
pub fn rmse_with(pairs: &[(f64, f64)], mean: bool) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Degenerate("rmse of an empty set".into()));
    }
    let sse: f64 = pairs.iter().map(|(p, y)| (p - y) * (p - y)).sum();
    Ok(if mean { (sse / pairs.len() as f64).sqrt() } else { sse.sqrt() })
}

/// (prediction, observed) pairs for split entries under a trained model.
pub fn score_entries(global: &GlobalState, entries: &[SplitEntry]) -> Vec<(f64, f64)> {
    let b = global.block();
    let pi = global.pi();
    entries
        .iter()
        .map(|e| {
            let pu = pi.row(e.src);
            let pv = pi.row(e.dst);
            (predict_edge(pu.as_slice().unwrap(), pv.as_slice().unwrap(), &b), f64::from(e.weight))
        })
        .collect()
}

pub fn model_rmse(global: &GlobalState, entries: &[SplitEntry]) -> Result<f64> {
    rmse(&score_entries(global, entries))
}

/// The constant predictor: mean weight of the given set.
pub fn mean_baseline(entries: &[SplitEntry]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::Degenerate("mean baseline of an empty set".into()));
    }
    Ok(entries.iter().map(|e| f64::from(e.weight)).sum::<f64>() / entries.len() as f64)
}

pub fn mean_baseline_rmse(entries: &[SplitEntry]) -> Result<f64> {
    let m = mean_baseline(entries)?;
    rmse(&entries.iter().map(|e| (m, f64::from(e.weight))).collect::<Vec<_>>())
}

/// Per-(thread, user) topic proportions of a trained text-only model.
pub struct DocProportions<'a> {
    corpus: &'a ThreadCorpus,
    local: &'a LocalState,
    user_avg: Vec<Option<Vec<f64>>>,
}

impl<'a> DocProportions<'a> {
    pub fn new(corpus: &'a ThreadCorpus, local: &'a LocalState) -> Result<Self> {
        if !local.has_doc_gamma() {
            return Err(Error::Shape("text-only baseline needs per-document topic parameters".into()));
        }
        let k = local.k();
        let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; corpus.num_users()];
        for t in 0..corpus.num_threads() {
            let th = corpus.thread(t);
            for d in 0..th.num_participants() {
                let p = local.doc_proportions(corpus.doc_offset(t) + d);
                let e = sums[th.user_at(d)].get_or_insert_with(|| (vec![0.0; k], 0));
                e.0.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
                e.1 += 1;
            }
        }
        let user_avg =
            sums.into_iter().map(|s| s.map(|(v, n)| v.into_iter().map(|x| x / n as f64).collect())).collect();
        Ok(Self { corpus, local, user_avg })
    }

    /// Proportions of `user`'s document in thread `t`; falls back to the
    /// user's average (then uniform) and reports whether it did.
    pub fn get(&self, t: usize, user: usize) -> (Vec<f64>, bool) {
        if let Some(d) = self.corpus.thread(t).doc_of(user) {
            return (self.local.doc_proportions(self.corpus.doc_offset(t) + d), false);
        }
        let k = self.local.k();
        match self.user_avg.get(user).and_then(|v| v.clone()) {
            Some(v) => (v, true),
            None => (vec![1.0 / k as f64; k], true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdaBaseline {
    pub m: f64,
    pub heldout: f64,
    pub test: f64,
    /// Heldout rmse per grid value.
    pub grid: Vec<(f64, f64)>,
    pub fallbacks: usize,
}

fn lda_pairs(props: &DocProportions, entries: &[SplitEntry], m: f64, fallbacks: &mut usize) -> Vec<(f64, f64)> {
    entries
        .iter()
        .map(|e| {
            let (a, fa) = props.get(e.thread, e.src);
            let (b, fb) = props.get(e.thread, e.dst);
            *fallbacks += usize::from(fa) + usize::from(fb);
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            (m * dot, f64::from(e.weight))
        })
        .collect()
}

/// Scores Ŷ = m · π̂_{t,u}·π̂_{t,v} for each m in `m_grid`, picks the m with
/// the lowest heldout rmse (ties to the smaller m) and scores test with it.
pub fn lda_baseline(
    corpus: &ThreadCorpus,
    local: &LocalState,
    m_grid: &[f64],
    split: &EvalSplit,
) -> Result<LdaBaseline> {
    if m_grid.is_empty() {
        return Err(Error::Hyper("empty m grid".into()));
    }
    let props = DocProportions::new(corpus, local)?;
    let mut grid = Vec::with_capacity(m_grid.len());
    let mut fallbacks = 0;
    for &m in m_grid {
        let mut fb = 0;
        grid.push((m, rmse(&lda_pairs(&props, &split.heldout, m, &mut fb))?));
        fallbacks = fb;
    }
    let (m, heldout) = grid.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0))).unwrap();
    let test = rmse(&lda_pairs(&props, &split.test, m, &mut fallbacks))?;
    Ok(LdaBaseline { m, heldout, test, grid, fallbacks })
}

/// Geometric grid 2^(−2) … 2^6 in half-octave steps.
pub fn default_m_grid() -> Vec<f64> {
    (-4..=12).map(|i| 2f64.powf(f64::from(i) / 2.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Model,
    Mmsb,
    Lda,
    Baseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Model => "model",
            Method::Mmsb => "mmsb",
            Method::Lda => "lda",
            Method::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseRow {
    pub method: Method,
    pub split: SplitSet,
    pub rmse: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseReport {
    pub rows: Vec<RmseRow>,
    pub lda_m: Option<f64>,
}

fn split_name(s: SplitSet) -> &'static str {
    match s {
        SplitSet::Train => "train",
        SplitSet::Heldout => "heldout",
        SplitSet::Test => "test",
    }
}

impl RmseReport {
    pub fn get(&self, method: Method, split: SplitSet) -> Option<f64> {
        self.rows.iter().find(|r| r.method == method && r.split == split).map(|r| r.rmse)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["method", "split", "rmse", "n"])?;
        for r in &self.rows {
            out.write_record([r.method.name(), split_name(r.split), &format!("{}", r.rmse), &r.n.to_string()])?;
        }
        out.flush().map_err(|e| Error::Io { path: "<report>".into(), source: e })?;
        Ok(())
    }

    /// Methods as rows, splits as columns.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>10} {:>10}", "method", "heldout", "test");
        for m in [Method::Model, Method::Mmsb, Method::Lda, Method::Baseline] {
            let cell = |sp| self.get(m, sp).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "{:<10} {:>10} {:>10}", m.name(), cell(SplitSet::Heldout), cell(SplitSet::Test));
        }
        if let Some(m) = self.lda_m {
            let _ = writeln!(s, "(lda m = {m})");
        }
        s
    }
}

/// Scores the joint model, the network-only model, the text-only baseline
/// and the mean baseline on heldout and test. Any of the trained inputs may
/// be missing; their rows are then omitted.
pub fn evaluate_all(
    corpus: &ThreadCorpus,
    split: &EvalSplit,
    full: Option<&GlobalState>,
    mmsb: Option<&GlobalState>,
    lda: Option<&LocalState>,
    m_grid: &[f64],
) -> Result<RmseReport> {
    let mut rows = Vec::new();
    let sets = [(SplitSet::Heldout, &split.heldout), (SplitSet::Test, &split.test)];
    for (method, g) in [(Method::Model, full), (Method::Mmsb, mmsb)] {
        if let Some(g) = g {
            for (sp, entries) in sets {
                rows.push(RmseRow { method, split: sp, rmse: model_rmse(g, entries)?, n: entries.len() });
            }
        }
    }
    let mut lda_m = None;
    if let Some(local) = lda {
        let b = lda_baseline(corpus, local, m_grid, split)?;
        rows.push(RmseRow { method: Method::Lda, split: SplitSet::Heldout, rmse: b.heldout, n: split.heldout.len() });
        rows.push(RmseRow { method: Method::Lda, split: SplitSet::Test, rmse: b.test, n: split.test.len() });
        lda_m = Some(b.m);
    }
    for (sp, entries) in sets {
        rows.push(RmseRow {
            method: Method::Baseline,
            split: sp,
            rmse: mean_baseline_rmse(entries)?,
            n: entries.len(),
        });
    }
    Ok(RmseReport { rows, lda_m })
}

/// Result of matching estimated communities to true ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedRmse {
    pub rmse: f64,
    /// `perm[k]` is the estimated column matched to true column `k`.
    pub perm: Vec<usize>,
}

/// RMSE between true and estimated membership rows over `users`, minimized
/// over all relabelings of the estimated communities. Exhaustive, so only
/// meant for small K (K ≤ 8).
pub fn aligned_membership_rmse(truth: &Array2<f64>, est: &Array2<f64>, users: &[usize]) -> Result<AlignedRmse> {
    let k = truth.ncols();
    if est.dim() != truth.dim() {
        return Err(Error::Shape(format!("memberships {:?} vs {:?}", truth.dim(), est.dim())));
    }
    if !(1..=8).contains(&k) {
        return Err(Error::Domain(format!("permutation search needs 1 <= K <= 8, got {k}")));
    }
    if users.is_empty() {
        return Err(Error::Degenerate("no users to compare".into()));
    }
    // cost[a][b]: squared error of true column a against estimated column b
    let mut cost = vec![vec![0.0; k]; k];
    for &u in users {
        for a in 0..k {
            for b in 0..k {
                let d = truth[[u, a]] - est[[u, b]];
                cost[a][b] += d * d;
            }
        }
    }
    let score = |p: &[usize]| p.iter().enumerate().map(|(a, &b)| cost[a][b]).sum::<f64>();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (score(&perm), perm.clone());
    let mut c = vec![0usize; k];
    // Heap's algorithm
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let v = score(&perm);
            if v < best.0 {
                best = (v, perm.clone());
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    let n = (users.len() * k) as f64;
    Ok(AlignedRmse { rmse: (best.0 / n).sqrt(), perm: best.1 })
}
