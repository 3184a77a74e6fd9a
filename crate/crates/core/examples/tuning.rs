//! One-parameter-at-a-time hyperparameter search on heldout link
//! prediction.
//!
//! ```text
//! cargo run --release --example tuning
//! ```

use threadnet::corpus::{generate_synthetic, split_edges, SynthConfig};
use threadnet::trainer::{tune, TuneGrids};
use threadnet::{HyperParams, Schedule, TrainConfig};

fn main() -> threadnet::Result<()> {
    let planted = HyperParams::symmetric(4, 0.05, 0.05, (4.0, 1.0), (2.5, 0.5), 0.1);
    let cfg =
        SynthConfig { num_users: 200, num_threads: 120, avg_participants: 12.0, seed: 4, ..SynthConfig::default() };
    let (corpus, _) = generate_synthetic(&cfg, &planted)?;
    let split = split_edges(&corpus, 4, false)?;

    let grids = TuneGrids {
        alpha: vec![0.05, 0.5],
        omega: vec![0.01, 0.1],
        theta: vec![(2.5, 0.5)],
        kappa: vec![(4.0, 1.0), (2.0, 2.0)],
        eta: vec![0.05],
        k: vec![3, 4],
    };
    let config = TrainConfig { schedule: Schedule::V, max_outer_iters: 30, seed: 4, ..TrainConfig::default() };
    let result = tune(&corpus, &split, &planted, &grids, &config)?;
    for r in &result.rows {
        println!("{:<6} {:<12} {}", r.param, r.value, r.heldout_rmse.map_or("failed".into(), |v| format!("{v:.4}")));
    }
    println!("chosen: K = {}, alpha = {}, omega = {}", result.hyper.k, result.hyper.alpha[0], result.hyper.omega);
    result.write_csv(std::io::stdout())?;
    Ok(())
}
