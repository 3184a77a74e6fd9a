//! Objective against wall-clock time for the four training schedules from
//! a shared start, with the traces written as CSV.
//!
//! ```text
//! cargo run --release --example schedules -- [threads] [out_dir]
//! ```

use std::path::PathBuf;

use threadnet::corpus::{generate_synthetic, SynthConfig};
use threadnet::trainer::{bench_schedules, write_trace_csv};
use threadnet::{HyperParams, Schedule, TrainConfig};

fn main() -> threadnet::Result<()> {
    let threads = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let out =
        std::env::args().nth(2).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("threadnet_bench"));
    std::fs::create_dir_all(&out).map_err(|e| threadnet::Error::io(&out, e))?;

    let hyper = HyperParams::symmetric(5, 0.1, 0.05, (2.5, 1.5), (2.5, 1.5), 0.1);
    let cfg =
        SynthConfig { num_users: 300, num_threads: threads, avg_participants: 10.0, seed: 2, ..SynthConfig::default() };
    let (corpus, _) = generate_synthetic(&cfg, &hyper)?;
    let config =
        TrainConfig { max_outer_iters: 600, minibatch_threads: 100, eval_every: 5, seed: 2, ..TrainConfig::default() };
    let result = bench_schedules(&corpus, &hyper, &config)?;

    let target = result.traces[&Schedule::V].final_elbo().unwrap_or(f64::NAN);
    println!("schedule  rounds  seconds   final ELBO      time to within 1% of V");
    for (s, r) in &result.traces {
        let f = std::fs::File::create(out.join(format!("trace_{}.csv", s.name())))
            .map_err(|e| threadnet::Error::io(&out, e))?;
        write_trace_csv(r, f)?;
        let reach = result.time_to_reach(*s, target, 0.01).map_or("never".to_string(), |t| format!("{t:.2}s"));
        println!(
            "{:<9} {:>6}  {:>7.2}  {:>14.1}  {reach}",
            s.name(),
            r.iterations,
            r.elbo_trace.last().map_or(0.0, |p| p.seconds),
            r.final_elbo().unwrap_or(f64::NAN)
        );
    }
    println!("traces in {}", out.display());
    Ok(())
}
