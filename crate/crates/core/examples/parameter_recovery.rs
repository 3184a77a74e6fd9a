//! Membership recovery on synthetic corpora across a sweep of α.
//!
//! ```text
//! cargo run --release --example parameter_recovery -- [users] [threads] [seeds] [text_restarts]
//! ```
//!
//! For each α the corpus is drawn from the model with that α and η = 0.01,
//! the joint model is fitted with the batch schedule from text-fitted
//! topics, and the estimated memberships are compared with the truth after
//! the best relabeling of communities. Pass 0 restarts to start from the
//! plain random initialization instead.

use threadnet::corpus::{generate_synthetic, SynthConfig};
use threadnet::eval::aligned_membership_rmse;
use threadnet::trainer::{train, TextInit};
use threadnet::{HyperParams, Schedule, TrainConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> threadnet::Result<()> {
    let (users, threads, seeds, restarts) = (arg(1, 1000), arg(2, 100), arg(3, 5) as u64, arg(4, 5));
    println!("alpha    mean_rmse   std_err   (users={users}, threads={threads}, seeds={seeds})");
    for alpha in [0.01, 0.05, 0.1, 0.2] {
        let hyper = HyperParams::symmetric(5, alpha, 0.01, (2.5, 1.5), (2.5, 1.5), 0.1);
        let mut scores = Vec::new();
        for seed in 0..seeds {
            let cfg = SynthConfig { num_users: users, num_threads: threads, seed, ..SynthConfig::default() };
            let (corpus, truth) = generate_synthetic(&cfg, &hyper)?;
            let config = TrainConfig {
                schedule: Schedule::V,
                max_outer_iters: 100,
                seed,
                text_init: (restarts > 0).then_some(TextInit { restarts, ..TextInit::default() }),
                ..TrainConfig::default()
            };
            let (global, _) = train(&corpus, None, &hyper, &config)?;
            let degrees = corpus.degrees();
            let active: Vec<usize> = (0..users).filter(|&u| degrees[u] > 0).collect();
            scores.push(aligned_membership_rmse(&truth.pi, &global.pi(), &active)?.rmse);
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        println!("{alpha:<8} {mean:<11.4} {:.4}", (var / n).sqrt());
    }
    Ok(())
}
