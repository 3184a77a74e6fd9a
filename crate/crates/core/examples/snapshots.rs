//! Save a trained model, load it back and rebuild its locals; the bound of
//! the reloaded model matches the original.
//!
//! ```text
//! cargo run --release --example snapshots
//! ```

use threadnet::corpus::{generate_synthetic, SynthConfig};
use threadnet::elbo::elbo;
use threadnet::local::LocalOptions;
use threadnet::trainer::{load_snapshot, recompute_locals, save_snapshot, train};
use threadnet::{HyperParams, Mode, Schedule, TrainConfig};

fn main() -> threadnet::Result<()> {
    let hyper = HyperParams::symmetric(4, 0.1, 0.05, (2.5, 1.5), (2.5, 1.5), 0.1);
    let cfg = SynthConfig { num_users: 150, num_threads: 100, seed: 5, ..SynthConfig::default() };
    let (corpus, _) = generate_synthetic(&cfg, &hyper)?;
    let config = TrainConfig { schedule: Schedule::V, max_outer_iters: 30, seed: 5, ..TrainConfig::default() };
    let (global, report) = train(&corpus, None, &hyper, &config)?;

    let dir = tempfile_dir();
    save_snapshot(&dir, &global, &hyper, Mode::Full, report.iterations)?;
    let snap = load_snapshot(&dir)?;
    println!("saved and reloaded {} (iteration {}, K = {})", dir.display(), snap.manifest.iteration, snap.manifest.k);

    let opts = LocalOptions::default();
    let a = elbo(&corpus, &global, &recompute_locals(&corpus, &global, &hyper, Mode::Full, opts, 2)?, &hyper)?;
    let b = elbo(
        &corpus,
        &snap.global,
        &recompute_locals(&corpus, &snap.global, &snap.manifest.hyper, Mode::Full, opts, 2)?,
        &hyper,
    )?;
    println!("bound before saving {a:.6}, after reloading {b:.6}");
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    std::env::temp_dir().join(format!("threadnet_snapshot_{}", std::process::id()))
}
