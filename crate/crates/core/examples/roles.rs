//! Role analysis of a fitted model: dominant roles, the role-sorted
//! adjacency matrix, thread-level against global role variation, the
//! pentagon projection and the top words per topic.
//!
//! ```text
//! cargo run --release --example roles -- [out_dir]
//! ```

use std::fs::File;
use std::path::{Path, PathBuf};

use threadnet::analysis::{
    dominant_roles, local_global_variation, pentagon_projection, pentagon_svg, sorted_adjacency_export, top_words,
    write_pentagon_csv, write_top_words_csv,
};
use threadnet::corpus::{generate_synthetic, SynthConfig};
use threadnet::trainer::{train_with_locals, TextInit};
use threadnet::{Error, HyperParams, Result, Schedule, TrainConfig};

fn create(p: &Path) -> Result<File> {
    File::create(p).map_err(|e| Error::io(p, e))
}

fn main() -> Result<()> {
    let out =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("threadnet_roles"));
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let hyper = HyperParams::symmetric(5, 0.05, 0.05, (3.0, 1.0), (2.5, 1.0), 0.1);
    let cfg = SynthConfig { num_users: 300, num_threads: 150, vocab_size: 200, seed: 9, ..SynthConfig::default() };
    let (corpus, _) = generate_synthetic(&cfg, &hyper)?;
    let config = TrainConfig {
        schedule: Schedule::V,
        max_outer_iters: 60,
        seed: 9,
        text_init: Some(TextInit::default()),
        ..TrainConfig::default()
    };
    let t = train_with_locals(&corpus, None, &hyper, &config)?;

    let roles = dominant_roles(&t.global.gamma);
    let mut sizes = vec![0; hyper.k];
    roles.iter().flatten().for_each(|&r| sizes[r] += 1);
    println!("users per dominant role {sizes:?}, unassigned {}", roles.iter().filter(|r| r.is_none()).count());

    let adj = sorted_adjacency_export(&corpus, &roles);
    adj.write_order_csv(create(&out.join("roles.csv"))?)?;
    adj.write_edges_csv(create(&out.join("adjacency.csv"))?)?;

    let var = local_global_variation(&corpus, &t.global.gamma, &t.local, 10)?;
    var.write_csv(create(&out.join("variation.csv"))?)?;
    println!("thread-level variation histogram (10% bins): {:?}", var.counts);

    let points = pentagon_projection(&t.global.gamma, &[0, 1, 2, 3, 4], &corpus.degrees())?;
    write_pentagon_csv(&points, create(&out.join("pentagon.csv"))?)?;
    std::fs::write(out.join("pentagon.svg"), pentagon_svg(&points)).map_err(|e| Error::io(&out, e))?;

    let vocab: Vec<String> = (0..cfg.vocab_size).map(|w| format!("w{w}")).collect();
    let words = top_words(&t.global.tau, &vocab, 8)?;
    for (k, ws) in words.iter().enumerate() {
        println!("topic {k}: {}", ws.join(" "));
    }
    write_top_words_csv(&words, create(&out.join("top_words.csv"))?)?;
    println!("exports in {}", out.display());
    Ok(())
}
