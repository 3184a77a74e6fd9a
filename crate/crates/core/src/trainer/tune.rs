//! Sequential coordinate tuning of the symmetric hyperparameters on heldout
//! rmse, in the order α, ω, θ, κ, η, K.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{train, TrainConfig};
use crate::corpus::{EvalSplit, ThreadCorpus};
use crate::error::{Error, Result};
use crate::eval::model_rmse;
use crate::hyper::HyperParams;

/// Candidate values per parameter. Block priors are (diagonal, off-diagonal)
/// pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrids {
    pub alpha: Vec<f64>,
    pub omega: Vec<f64>,
    pub theta: Vec<(f64, f64)>,
    pub kappa: Vec<(f64, f64)>,
    pub eta: Vec<f64>,
    pub k: Vec<usize>,
}

impl TuneGrids {
    /// Single-point grids at the given (symmetric) hyperparameters.
    pub fn singleton(h: &HyperParams) -> Self {
        let off = |m: &Vec<Vec<f64>>| m[0].get(1).copied().unwrap_or(m[0][0]);
        Self {
            alpha: vec![h.alpha[0]],
            omega: vec![h.omega],
            theta: vec![(h.theta[0][0], off(&h.theta))],
            kappa: vec![(h.kappa[0][0], off(&h.kappa))],
            eta: vec![h.eta],
            k: vec![h.k],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneRow {
    pub param: &'static str,
    pub value: String,
    /// `None` when training failed.
    pub heldout_rmse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub hyper: HyperParams,
    pub rows: Vec<TuneRow>,
}

impl TuneResult {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["param", "value", "heldout_rmse", "error"])?;
        for r in &self.rows {
            let score = r.heldout_rmse.map(|v| format!("{v}")).unwrap_or_default();
            out.write_record([r.param, &r.value, &score, r.error.as_deref().unwrap_or("")])?;
        }
        out.flush().map_err(|e| Error::Io { path: "<tune>".into(), source: e })?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    alpha: f64,
    omega: f64,
    theta: (f64, f64),
    kappa: (f64, f64),
    eta: f64,
    k: usize,
}

impl Point {
    fn hyper(&self, base: &HyperParams) -> HyperParams {
        HyperParams {
            epsilon: base.epsilon,
            zeta: base.zeta,
            rho: base.rho,
            rho_nu: base.rho_nu,
            coupling: base.coupling,
            ..HyperParams::symmetric(self.k, self.alpha, self.eta, self.kappa, self.theta, self.omega)
        }
    }
}

fn score(corpus: &ThreadCorpus, split: &EvalSplit, hyper: &HyperParams, config: &TrainConfig) -> Result<f64> {
    let (global, _) = train(corpus, Some(split), hyper, config)?;
    model_rmse(&global, &split.heldout)
}

/// Tunes one parameter at a time, fixing each at its best grid value before
/// moving on. Ties go to the smaller value; failed trainings are recorded
/// and skipped.
pub fn tune(
    corpus: &ThreadCorpus,
    split: &EvalSplit,
    base: &HyperParams,
    grids: &TuneGrids,
    config: &TrainConfig,
) -> Result<TuneResult> {
    if grids.alpha.is_empty()
        || grids.omega.is_empty()
        || grids.theta.is_empty()
        || grids.kappa.is_empty()
        || grids.eta.is_empty()
        || grids.k.is_empty()
    {
        return Err(Error::Hyper("every tuning grid needs at least one value".into()));
    }
    let first = TuneGrids::singleton(base);
    let mut cur = Point {
        alpha: first.alpha[0],
        omega: first.omega[0],
        theta: first.theta[0],
        kappa: first.kappa[0],
        eta: first.eta[0],
        k: base.k,
    };
    let mut rows = Vec::new();

    macro_rules! sweep {
        ($name:literal, $field:ident, $grid:expr, $fmt:expr, $key:expr) => {{
            let mut best: Option<(f64, _)> = None;
            for &v in $grid.iter() {
                let mut cand = cur;
                cand.$field = v;
                let h = cand.hyper(base);
                match h.validate().and_then(|_| score(corpus, split, &h, config)) {
                    Ok(r) => {
                        rows.push(TuneRow { param: $name, value: $fmt(v), heldout_rmse: Some(r), error: None });
                        let better = match &best {
                            None => true,
                            Some((br, bv)) => r < *br || (r == *br && $key(v) < $key(*bv)),
                        };
                        if better {
                            best = Some((r, v));
                        }
                    }
                    Err(e) => rows.push(TuneRow {
                        param: $name,
                        value: $fmt(v),
                        heldout_rmse: None,
                        error: Some(e.to_string()),
                    }),
                }
            }
            if let Some((_, v)) = best {
                cur.$field = v;
            }
        }};
    }

    let scalar = |v: f64| format!("{v}");
    let pair = |v: (f64, f64)| format!("{}/{}", v.0, v.1);
    sweep!("alpha", alpha, grids.alpha, scalar, |v: f64| v);
    sweep!("omega", omega, grids.omega, scalar, |v: f64| v);
    sweep!("theta", theta, grids.theta, pair, |v: (f64, f64)| v.0 + v.1);
    sweep!("kappa", kappa, grids.kappa, pair, |v: (f64, f64)| v.0 + v.1);
    sweep!("eta", eta, grids.eta, scalar, |v: f64| v);
    sweep!("k", k, grids.k, |v: usize| v.to_string(), |v: usize| v as f64);
    Ok(TuneResult { hyper: cur.hyper(base), rows })
}
