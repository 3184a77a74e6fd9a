//! Held-out link prediction on planted synthetic corpora: the joint model
//! against its network-only and text-only ablations and the mean
//! predictor. Each model's α is picked on heldout edges; test rmse is
//! reported.
//!
//! ```text
//! cargo run --release --example link_prediction -- [seeds] [users] [threads]
//! ```

use threadnet::corpus::{generate_synthetic, split_edges, SplitSet, SynthConfig};
use threadnet::eval::{default_m_grid, Method};
use threadnet::trainer::{ablation, TextInit};
use threadnet::{HyperParams, Schedule, TrainConfig};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> threadnet::Result<()> {
    let (seeds, users, threads) = (arg(1, 5) as u64, arg(2, 500), arg(3, 400));
    // sparse memberships and a strongly assortative block matrix
    let planted = HyperParams::symmetric(5, 0.05, 0.05, (4.0, 1.0), (2.5, 0.5), 0.1);
    let methods = [Method::Model, Method::Mmsb, Method::Lda, Method::Baseline];
    let mut totals = [0.0; 4];
    for seed in 0..seeds {
        let cfg = SynthConfig {
            num_users: users,
            num_threads: threads,
            avg_participants: 15.0,
            seed,
            ..SynthConfig::default()
        };
        let (corpus, _) = generate_synthetic(&cfg, &planted)?;
        let split = split_edges(&corpus, seed, false)?;
        let config = TrainConfig {
            schedule: Schedule::V,
            max_outer_iters: 100,
            seed,
            text_init: Some(TextInit::default()),
            ..TrainConfig::default()
        };
        let r = ablation(&corpus, &split, &planted, &config, &[0.05, 0.5], &default_m_grid())?;
        print!("seed {seed}:");
        for (i, m) in methods.iter().enumerate() {
            let v = r.report.get(*m, SplitSet::Test).expect("every method is scored");
            totals[i] += v;
            print!("  {} {v:.4}", m.name());
        }
        println!("   alphas {:?}", r.alphas.values().collect::<Vec<_>>());
    }
    print!("mean:  ");
    for (m, t) in methods.iter().zip(totals) {
        print!("  {} {:.4}", m.name(), t / seeds as f64);
    }
    println!();
    Ok(())
}
