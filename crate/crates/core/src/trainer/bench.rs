//! Objective-versus-time traces of every schedule from one shared start.

use std::collections::BTreeMap;
use std::io::Write;

use super::{init_state, train_from, TrainConfig, TrainReport};
use crate::corpus::ThreadCorpus;
use crate::error::{Error, Result};
use crate::hyper::HyperParams;
use crate::trainer::Schedule;

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub traces: BTreeMap<Schedule, TrainReport>,
}

impl BenchResult {
    /// Seconds until a trace first reaches `target` (relative tolerance
    /// `rel`), if it does.
    pub fn time_to_reach(&self, schedule: Schedule, target: f64, rel: f64) -> Option<f64> {
        let goal = target - rel * target.abs();
        self.traces.get(&schedule)?.elbo_trace.iter().find(|p| p.elbo >= goal).map(|p| p.seconds)
    }
}

/// Runs V, SV, SSV and PSSV from the same initial globals. `config` supplies
/// everything but the schedule.
pub fn bench_schedules(corpus: &ThreadCorpus, hyper: &HyperParams, config: &TrainConfig) -> Result<BenchResult> {
    bench_only(corpus, hyper, config, &Schedule::ALL)
}

pub fn bench_only(
    corpus: &ThreadCorpus,
    hyper: &HyperParams,
    config: &TrainConfig,
    schedules: &[Schedule],
) -> Result<BenchResult> {
    let init = init_state(corpus, hyper, config.seed);
    let mut traces = BTreeMap::new();
    for &schedule in schedules {
        let cfg = TrainConfig { schedule, ..config.clone() };
        let t = train_from(corpus, hyper, &cfg, init.clone())?;
        traces.insert(schedule, t.report);
    }
    Ok(BenchResult { traces })
}

/// `iteration,seconds,elbo` rows.
pub fn write_trace_csv(report: &TrainReport, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "seconds", "elbo"])?;
    for p in &report.elbo_trace {
        out.write_record([p.iteration.to_string(), format!("{}", p.seconds), format!("{}", p.elbo)])?;
    }
    out.flush().map_err(|e| Error::Io { path: "<trace>".into(), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};

    #[test]
    fn traces_share_their_start() {
        let hyper = HyperParams::symmetric(2, 0.1, 0.05, (2.0, 1.0), (2.0, 1.0), 0.01);
        let cfg =
            SynthConfig { num_users: 30, num_threads: 12, vocab_size: 20, avg_participants: 6.0, doc_len: 5, seed: 1 };
        let (c, _) = generate_synthetic(&cfg, &hyper).unwrap();
        let tc = TrainConfig {
            max_outer_iters: 4,
            minibatch_threads: 4,
            eval_every: 2,
            workers: 2,
            ..TrainConfig::default()
        };
        let r = bench_schedules(&c, &hyper, &tc).unwrap();
        assert_eq!(r.traces.len(), 4);
        let starts: Vec<f64> = r.traces.values().map(|t| t.elbo_trace[0].elbo).collect();
        assert!(starts.windows(2).all(|w| w[0] == w[1]));
        let mut buf = Vec::new();
        write_trace_csv(&r.traces[&Schedule::V], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
        let v_final = r.traces[&Schedule::V].final_elbo().unwrap();
        assert!(r.time_to_reach(Schedule::V, v_final, 0.0).is_some());
    }
}
