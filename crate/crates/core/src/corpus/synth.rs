use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Open01, Poisson};

use super::{Document, ThreadCorpus, ThreadRecord};
use crate::error::{Error, Result};
use crate::hyper::HyperParams;

/// Knobs for the synthetic generator. Participation and document length
/// are free choices; everything else follows the model's priors.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_threads: usize,
    pub vocab_size: usize,
    /// Mean thread size; sizes are 1 + Poisson(avg − 1), capped at U.
    pub avg_participants: f64,
    /// Tokens per participant document.
    pub doc_len: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { num_users: 1000, num_threads: 100, vocab_size: 500, avg_participants: 30.0, doc_len: 20, seed: 0 }
    }
}

/// Parameters the synthetic corpus was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    /// U×K memberships, rows on the simplex.
    pub pi: Array2<f64>,
    /// K×K Poisson block rates.
    pub block: Array2<f64>,
    /// K×V topic-word distributions.
    pub beta: Array2<f64>,
}

/// Draws a Dirichlet vector through log-space Gamma variates so that tiny
/// concentrations do not underflow to an all-zero vector.
pub(crate) fn sample_dirichlet(alpha: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    let mut logs: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            // Gamma(a) = Gamma(a + 1) · U^(1/a)
            let g = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
            let u: f64 = Open01.sample(rng);
            g.ln() + u.ln() / a
        })
        .collect();
    crate::math::log_softmax_normalize(&mut logs);
    logs
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Samples a corpus from the generative process: memberships, block rates
/// and topics first, then per thread a participant set in thread-starter
/// topology (every other participant replies to the first one), Poisson
/// edge weights from sampled sender/receiver communities, and documents
/// whose token topics follow the sender's average community indicator.
pub fn generate_synthetic(cfg: &SynthConfig, hyper: &HyperParams) -> Result<(ThreadCorpus, SyntheticTruth)> {
    hyper.validate()?;
    if cfg.num_users == 0 || cfg.num_threads == 0 {
        return Err(Error::Hyper("synthetic corpus needs at least one user and one thread".into()));
    }
    if cfg.vocab_size == 0 {
        return Err(Error::Hyper("vocabulary must be non-empty".into()));
    }
    if !(cfg.avg_participants >= 1.0) {
        return Err(Error::Hyper(format!("avg_participants must be >= 1, got {}", cfg.avg_participants)));
    }
    let k = hyper.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pi = Array2::zeros((cfg.num_users, k));
    for mut row in pi.rows_mut() {
        let draw = sample_dirichlet(&hyper.alpha, &mut rng);
        row.iter_mut().zip(draw).for_each(|(r, v)| *r = v);
    }
    let mut block = Array2::zeros((k, k));
    for ((g, h), b) in block.indexed_iter_mut() {
        let dist = Gamma::new(hyper.kappa_at(g, h), hyper.theta_at(g, h))
            .map_err(|e| Error::Hyper(format!("block prior ({g},{h}): {e}")))?;
        *b = dist.sample(&mut rng);
    }
    let eta = vec![hyper.eta; cfg.vocab_size];
    let mut beta = Array2::zeros((k, cfg.vocab_size));
    for mut row in beta.rows_mut() {
        let draw = sample_dirichlet(&eta, &mut rng);
        row.iter_mut().zip(draw).for_each(|(r, v)| *r = v);
    }
    let size_dist = if cfg.avg_participants > 1.0 {
        Some(Poisson::new(cfg.avg_participants - 1.0).map_err(|e| Error::Hyper(e.to_string()))?)
    } else {
        None
    };
    let thread_seeds: Vec<u64> = (0..cfg.num_threads).map(|_| rng.random()).collect();

    let mut threads = Vec::with_capacity(cfg.num_threads);
    for (t, &ts) in thread_seeds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(ts);
        let extra = size_dist.as_ref().map_or(0.0, |d| d.sample(&mut rng)) as usize;
        let n = (1 + extra).min(cfg.num_users);
        let users: Vec<usize> = sample(&mut rng, cfg.num_users, n).into_vec();
        let starter = users[0];
        let mut edges = Vec::new();
        // sender community indicator per participant (δ ≤ 1 in this topology)
        let mut sender_topic: Vec<Option<usize>> = vec![None; n];
        for (i, &p) in users.iter().enumerate().skip(1) {
            let g = sample_categorical(pi.row(p).as_slice().unwrap(), &mut rng);
            let h = sample_categorical(pi.row(starter).as_slice().unwrap(), &mut rng);
            let rate = block[[g, h]];
            let y = Poisson::new(rate).map(|d| d.sample(&mut rng) as i64).unwrap_or(0);
            if y > 0 {
                edges.push((p, starter, y));
                sender_topic[i] = Some(g);
            }
        }
        let docs = users
            .iter()
            .zip(&sender_topic)
            .map(|(&p, z)| {
                let tokens = (0..cfg.doc_len)
                    .map(|_| {
                        let topic = match z {
                            Some(g) => *g,
                            None => sample_categorical(pi.row(p).as_slice().unwrap(), &mut rng),
                        };
                        sample_categorical(beta.row(topic).as_slice().unwrap(), &mut rng) as u32
                    })
                    .collect();
                Document { user: p, tokens }
            })
            .collect();
        threads.push(ThreadRecord::new(format!("t{t}"), docs, edges)?);
    }
    let corpus = ThreadCorpus::new(cfg.num_users, cfg.vocab_size, threads)?;
    Ok((corpus, SyntheticTruth { pi, block, beta }))
}

/// Placeholder vocabulary `w0, w1, …` for synthetic corpora.
pub fn synthetic_vocab(vocab_size: usize) -> Vec<String> {
    (0..vocab_size).map(|v| format!("w{v}")).collect()
}
