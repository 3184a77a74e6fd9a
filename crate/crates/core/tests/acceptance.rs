//! Acceptance harness: one PASS, FAIL or WARN line per criterion. Exits
//! non-zero if any criterion fails.
//!
//! Run alone with `cargo test --release --test acceptance`.

mod common;

use std::path::Path;
use std::time::Instant;

use common::*;
use threadnet::corpus::{generate_synthetic, split_edges, SynthConfig};
use threadnet::eval::{predict_edge, rmse};
use threadnet::trainer::{bench_only, train_with_locals, write_trace_csv};
use threadnet::{HyperParams, Mode, Schedule, TrainConfig};

#[derive(Clone, Copy, PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Warn,
}

struct Harness {
    failed: bool,
}

impl Harness {
    fn report(&mut self, n: usize, v: Verdict, msg: String) {
        let tag = match v {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Warn => "WARN",
        };
        self.failed |= v == Verdict::Fail;
        println!("{tag} criterion {n}: {msg}");
    }

    /// Checks `ok` and the wall-clock budget together.
    fn timed(&mut self, n: usize, budget_s: f64, f: impl FnOnce() -> (bool, String)) {
        let start = Instant::now();
        let (ok, msg) = f();
        let secs = start.elapsed().as_secs_f64();
        let within = secs < budget_s;
        let v = if ok && within { Verdict::Pass } else { Verdict::Fail };
        self.report(n, v, format!("{msg}; {secs:.1}s (budget {budget_s:.0}s)"));
    }
}

fn main() {
    let mut h = Harness { failed: false };

    h.timed(1, 10.0, || {
        let err = elbo_oracle_max_error(25, 11);
        (err <= 1e-8, format!("25 tiny instances, max |elbo - enumeration| = {err:.2e} (tol 1e-8)"))
    });

    h.timed(2, 30.0, || {
        let err = nu_gradient_max_rel_error(20, 12);
        (err <= 1e-4, format!("20 states, max relative error of dL/dnu = {err:.2e} (tol 1e-4)"))
    });

    h.timed(3, 60.0, || {
        let (drop, which) = monotonicity_worst_drop(100, 13);
        let worst = if drop < 0.0 {
            format!("worst change {drop:.2e} from {which}")
        } else {
            "no update lowered the bound".into()
        };
        (drop >= -1e-8, format!("100 trials, {worst} (tol -1e-8)"))
    });

    h.timed(4, 120.0, || {
        let gap = unit_scale_max_gap(14);
        let mc = monte_carlo_gamma_rel_error(15, 1000, 4);
        (
            gap <= 1e-12 && mc <= 0.05,
            format!("unit-scale gap {gap:.2e} (tol 1e-12), Monte Carlo gamma error {:.2}% (tol 5%)", 100.0 * mc),
        )
    });

    h.timed(5, 1800.0, || {
        let sweep = recovery_sweep(&[0.01, 0.05, 0.1, 0.2], 5, 1000, 100);
        let desc: Vec<String> = sweep.iter().map(|(a, m, s)| format!("{a}: {m:.4}+-{s:.4}")).collect();
        let ends = sweep[0].1 < sweep[3].1;
        let monotone = sweep.windows(2).all(|w| w[1].1 >= w[0].1 - (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
        (
            ends && monotone,
            format!(
                "rmse by alpha [{}], ends ordered {ends}, non-decreasing within pooled SE {monotone}",
                desc.join(", ")
            ),
        )
    });

    h.timed(6, 1200.0, || {
        let [model, mmsb, lda, base] = link_prediction_study(5);
        let gap = |lo: f64, hi: f64| (hi - lo) / hi;
        let gaps = [gap(model, mmsb), gap(mmsb, base), gap(model, lda)];
        let ok = gaps.iter().all(|&g| g >= 0.03);
        (
            ok,
            format!(
                "test rmse model {model:.4}, mmsb {mmsb:.4}, lda {lda:.4}, baseline {base:.4}; gaps {:.1}%, {:.1}%, {:.1}% (min 3%)",
                100.0 * gaps[0],
                100.0 * gaps[1],
                100.0 * gaps[2]
            ),
        )
    });

    criterion_7(&mut h);

    h.timed(8, 300.0, || match normalization_suite() {
        Ok(msg) => (true, msg),
        Err(msg) => (false, msg),
    });

    h.timed(9, 300.0, || match determinism() {
        Ok(msg) => (true, msg),
        Err(msg) => (false, msg),
    });

    if h.failed {
        std::process::exit(1);
    }
}

fn criterion_7(h: &mut Harness) {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let hyper = HyperParams::symmetric(5, 0.1, 0.05, (2.5, 1.5), (2.5, 1.5), 0.1);
    let cfg = SynthConfig {
        num_users: 500,
        num_threads: 2000,
        avg_participants: 10.0,
        doc_len: 20,
        seed: 3,
        ..SynthConfig::default()
    };
    let (corpus, _) = generate_synthetic(&cfg, &hyper).unwrap();
    let base = TrainConfig { workers: 4, minibatch_threads: 200, eval_every: 5, seed: 3, ..TrainConfig::default() };
    let v = bench_only(&corpus, &hyper, &TrainConfig { max_outer_iters: 400, ..base.clone() }, &[Schedule::V]).unwrap();
    let p = bench_only(&corpus, &hyper, &TrainConfig { max_outer_iters: 1500, ..base }, &[Schedule::Pssv]).unwrap();

    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_traces");
    std::fs::create_dir_all(&dir).unwrap();
    for r in v.traces.values().chain(p.traces.values()) {
        let f = std::fs::File::create(dir.join(format!("trace_{}.csv", r.schedule.name()))).unwrap();
        write_trace_csv(r, f).unwrap();
    }

    let vr = &v.traces[&Schedule::V];
    let target = vr.final_elbo().unwrap();
    let t_v = vr.elbo_trace.last().unwrap().seconds;
    let reached = p.time_to_reach(Schedule::Pssv, target, 0.01);
    let ratio = reached.map(|t| t / t_v);
    let msg = format!(
        "V converged={} at {t_v:.2}s, ELBO {target:.1}; PSSV(4 workers) within 1% at {}; ratio {} (max 0.5); {cores} core(s); traces in {}",
        vr.converged,
        reached.map_or("never".to_string(), |t| format!("{t:.2}s")),
        ratio.map_or("n/a".to_string(), |r| format!("{r:.2}")),
        dir.display()
    );
    let v = match ratio {
        Some(r) if r <= 0.5 => Verdict::Pass,
        _ if cores < 4 => Verdict::Warn,
        _ => Verdict::Fail,
    };
    h.report(7, v, msg);
}

fn normalization_suite() -> Result<String, String> {
    let hyper = HyperParams::symmetric(3, 0.2, 0.1, (2.0, 1.0), (2.0, 1.0), 0.5);
    let cfg =
        SynthConfig { num_users: 60, num_threads: 40, vocab_size: 50, avg_participants: 6.0, doc_len: 8, seed: 21 };
    let (corpus, _) = generate_synthetic(&cfg, &hyper).map_err(|e| e.to_string())?;
    let split = split_edges(&corpus, 21, true).map_err(|e| e.to_string())?;
    let runs = [
        (Schedule::V, Mode::Full),
        (Schedule::Ssv, Mode::Full),
        (Schedule::Pssv, Mode::Full),
        (Schedule::Sv, Mode::Full),
        (Schedule::V, Mode::MmsbOnly),
        (Schedule::V, Mode::LdaOnly),
    ];
    let mut worst_norm: f64 = 0.0;
    for (schedule, mode) in runs {
        let config = TrainConfig {
            schedule,
            mode,
            max_outer_iters: 15,
            minibatch_threads: 10,
            eval_every: 5,
            seed: 21,
            ..TrainConfig::default()
        };
        let t = train_with_locals(&corpus, Some(&split), &hyper, &config).map_err(|e| e.to_string())?;
        let norm = t.local.max_normalization_error();
        worst_norm = worst_norm.max(norm);
        if norm > 1e-9 {
            return Err(format!("{schedule}/{mode}: normalization error {norm:e}"));
        }
        if !t.global.all_positive() {
            return Err(format!("{schedule}/{mode}: a global parameter is not strictly positive"));
        }
        let (pi, b) = (t.global.pi(), t.global.block());
        for u in 0..corpus.num_users() {
            for v in 0..corpus.num_users() {
                let y = predict_edge(pi.row(u).as_slice().unwrap(), pi.row(v).as_slice().unwrap(), &b);
                if y.is_nan() || y < 0.0 {
                    return Err(format!("{schedule}/{mode}: prediction {y} for ({u}, {v})"));
                }
            }
        }
    }
    let perfect: Vec<(f64, f64)> = split.test.iter().map(|e| (f64::from(e.weight), f64::from(e.weight))).collect();
    let r = rmse(&perfect).map_err(|e| e.to_string())?;
    if r != 0.0 {
        return Err(format!("rmse of perfect predictions is {r}"));
    }
    Ok(format!("6 runs, worst normalization error {worst_norm:.1e} (tol 1e-9), globals positive, predictions non-negative, perfect rmse 0"))
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let data = root.join("data");
    let synth = [
        "threadnet",
        "synth",
        "--users",
        "80",
        "--threads",
        "60",
        "--vocab-size",
        "60",
        "--avg-participants",
        "6",
        "--seed",
        "4",
    ];
    let mut args: Vec<String> = synth.iter().map(|a| a.to_string()).collect();
    args.extend(["--out".into(), s(&data)]);
    if threadnet::cli::run(&args) != 0 {
        return Err("synth failed".into());
    }
    let mut checked = Vec::new();
    for schedule in ["v", "ssv"] {
        let mut outs = Vec::new();
        for run in 0..2 {
            let out = root.join(format!("{schedule}_{run}"));
            let args: Vec<String> = [
                "threadnet",
                "train",
                "--corpus",
                &s(&data.join("corpus.jsonl")),
                "--vocab",
                &s(&data.join("vocab.txt")),
                "--schedule",
                schedule,
                "--max-iters",
                "12",
                "--minibatch",
                "15",
                "--eval-every",
                "2",
                "--k",
                "3",
                "--seed",
                "9",
                "--text-init",
                "2",
                "--out",
                &s(&out),
            ]
            .iter()
            .map(|a| a.to_string())
            .collect();
            if threadnet::cli::run(&args) != 0 {
                return Err(format!("train {schedule} failed"));
            }
            outs.push(out);
        }
        let elbos = |dir: &Path| -> Result<Vec<f64>, String> {
            let text = std::fs::read_to_string(dir.join("report.json")).map_err(|e| e.to_string())?;
            let r: threadnet::trainer::TrainReport = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            Ok(r.elbo_trace.iter().map(|p| p.elbo).collect())
        };
        let (a, b) = (elbos(&outs[0])?, elbos(&outs[1])?);
        if a != b {
            return Err(format!("{schedule}: ELBO traces differ"));
        }
        for f in ["manifest.json", "gamma.csv", "tau.csv", "nu.csv", "lambda.csv"] {
            let x = std::fs::read(outs[0].join(f)).map_err(|e| e.to_string())?;
            let y = std::fs::read(outs[1].join(f)).map_err(|e| e.to_string())?;
            if x != y {
                return Err(format!("{schedule}: {f} differs between runs"));
            }
        }
        checked.push(format!("{} ({} ELBO points)", schedule.to_uppercase(), a.len()));
    }
    Ok(format!("identical traces and byte-identical snapshots for {}", checked.join(", ")))
}
