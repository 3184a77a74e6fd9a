//! Draw a corpus from the generative model, write it in the on-disk
//! formats, read it back and split its edges for evaluation.
//!
//! ```text
//! cargo run --release --example synthetic_corpus -- [out_dir]
//! ```

use std::path::PathBuf;

use threadnet::corpus::{
    generate_synthetic, load_corpus, load_split, split_edges, write_corpus, write_split, write_vocab, SynthConfig,
};
use threadnet::HyperParams;

fn main() -> threadnet::Result<()> {
    let out =
        std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("threadnet_synth"));
    std::fs::create_dir_all(&out).map_err(|e| threadnet::Error::io(&out, e))?;

    let hyper = HyperParams::symmetric(4, 0.1, 0.05, (3.0, 1.0), (2.0, 1.0), 0.1);
    let cfg =
        SynthConfig { num_users: 200, num_threads: 80, vocab_size: 300, avg_participants: 8.0, doc_len: 15, seed: 7 };
    let (corpus, truth) = generate_synthetic(&cfg, &hyper)?;
    println!(
        "drew {} threads, {} users, {} edges, {} tokens; planted block diagonal {:?}",
        corpus.num_threads(),
        corpus.num_users(),
        corpus.num_edges(),
        corpus.num_tokens(),
        truth.block.diag().to_vec()
    );

    let vocab: Vec<String> = (0..cfg.vocab_size).map(|w| format!("w{w}")).collect();
    write_vocab(&vocab, out.join("vocab.txt"))?;
    write_corpus(&corpus, out.join("corpus.jsonl"))?;
    let reloaded = load_corpus(out.join("corpus.jsonl"), out.join("vocab.txt"))?;
    assert_eq!(reloaded.num_edges(), corpus.num_edges());
    assert_eq!(reloaded.num_tokens(), corpus.num_tokens());
    println!("round trip through {} preserved every edge and token", out.display());

    let split = split_edges(&corpus, 7, true)?;
    write_split(&split, &corpus, out.join("split.json"))?;
    let split = load_split(out.join("split.json"), &corpus)?;
    for (set, entries) in split.sets() {
        let zeros = entries.iter().filter(|e| e.weight == 0).count();
        println!("{set:?}: {} pairs, {zeros} of them sampled absent pairs", entries.len());
    }
    Ok(())
}
