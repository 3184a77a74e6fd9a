//! Side-by-side fit of the joint model and its two ablations, each with its
//! membership prior picked on heldout edges.

use std::collections::BTreeMap;

use crate::corpus::{EvalSplit, SplitSet, ThreadCorpus};
use crate::error::{Error, Result};
use crate::eval::{lda_baseline, mean_baseline_rmse, model_rmse, Method, RmseReport, RmseRow};
use crate::hyper::{HyperParams, Mode};

use super::{train, train_with_locals, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub report: RmseReport,
    /// Selected symmetric α per fitted method.
    pub alphas: BTreeMap<Method, f64>,
}

struct Fit {
    alpha: f64,
    heldout: f64,
    test: f64,
    m: Option<f64>,
}

fn keep_better(best: &mut Option<Fit>, fit: Fit) {
    // strict comparison keeps the earlier (grid-order) value on ties
    if best.as_ref().is_none_or(|b| fit.heldout < b.heldout) {
        *best = Some(fit);
    }
}

/// Fits the joint, network-only and text-only models for every α in
/// `alpha_grid`, keeps each method's best heldout rmse, and reports heldout
/// and test rmse for the winners and the mean predictor.
pub fn ablation(
    corpus: &ThreadCorpus,
    split: &EvalSplit,
    hyper: &HyperParams,
    config: &TrainConfig,
    alpha_grid: &[f64],
    m_grid: &[f64],
) -> Result<AblationResult> {
    if alpha_grid.is_empty() {
        return Err(Error::Hyper("empty alpha grid".into()));
    }
    let (mut full, mut mmsb, mut lda) = (None, None, None);
    for &alpha in alpha_grid {
        let h = HyperParams { alpha: vec![alpha; hyper.k], ..hyper.clone() };
        for (mode, slot) in [(Mode::Full, &mut full), (Mode::MmsbOnly, &mut mmsb)] {
            let (g, _) = train(corpus, Some(split), &h, &TrainConfig { mode, ..config.clone() })?;
            let fit =
                Fit { alpha, heldout: model_rmse(&g, &split.heldout)?, test: model_rmse(&g, &split.test)?, m: None };
            keep_better(slot, fit);
        }
        let t = train_with_locals(corpus, Some(split), &h, &TrainConfig { mode: Mode::LdaOnly, ..config.clone() })?;
        let b = lda_baseline(corpus, &t.local, m_grid, split)?;
        keep_better(&mut lda, Fit { alpha, heldout: b.heldout, test: b.test, m: Some(b.m) });
    }
    let mut rows = Vec::new();
    let mut alphas = BTreeMap::new();
    let mut lda_m = None;
    for (method, fit) in [(Method::Model, full), (Method::Mmsb, mmsb), (Method::Lda, lda)] {
        let fit = fit.expect("grid is non-empty");
        rows.push(RmseRow { method, split: SplitSet::Heldout, rmse: fit.heldout, n: split.heldout.len() });
        rows.push(RmseRow { method, split: SplitSet::Test, rmse: fit.test, n: split.test.len() });
        alphas.insert(method, fit.alpha);
        if fit.m.is_some() {
            lda_m = fit.m;
        }
    }
    for (sp, entries) in [(SplitSet::Heldout, &split.heldout), (SplitSet::Test, &split.test)] {
        rows.push(RmseRow {
            method: Method::Baseline,
            split: sp,
            rmse: mean_baseline_rmse(entries)?,
            n: entries.len(),
        });
    }
    Ok(AblationResult { report: RmseReport { rows, lda_m }, alphas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, split_edges, SynthConfig};
    use crate::trainer::Schedule;

    #[test]
    fn picks_one_alpha_per_method() {
        let hyper = HyperParams::symmetric(2, 0.1, 0.1, (2.0, 1.0), (2.0, 1.0), 0.1);
        let cfg =
            SynthConfig { num_users: 20, num_threads: 30, vocab_size: 20, avg_participants: 5.0, doc_len: 5, seed: 4 };
        let (corpus, _) = generate_synthetic(&cfg, &hyper).unwrap();
        let split = split_edges(&corpus, 1, false).unwrap();
        let config = TrainConfig { schedule: Schedule::V, max_outer_iters: 5, workers: 1, ..TrainConfig::default() };
        let r = ablation(&corpus, &split, &hyper, &config, &[0.1, 0.5], &[1.0, 2.0]).unwrap();
        assert_eq!(r.alphas.len(), 3);
        assert!(r.alphas.values().all(|a| [0.1, 0.5].contains(a)));
        assert_eq!(r.report.rows.len(), 8);
        assert!(r.report.lda_m.is_some());
        assert!(ablation(&corpus, &split, &hyper, &config, &[], &[1.0]).is_err());
    }
}
