//! One round of coordinate ascent by hand: local sweeps for φ and χ, then
//! the batch updates of γ, τ and λ and a natural-gradient step on ν,
//! printing the bound after each.
//!
//! ```text
//! cargo run --release --example variational_updates
//! ```

use threadnet::corpus::{generate_synthetic, SynthConfig};
use threadnet::elbo::elbo_terms;
use threadnet::global::{gamma_update_batch, lambda_update_batch, nu_gradient_step, tau_update_batch};
use threadnet::local::LocalOptions;
use threadnet::trainer::{init_locals, init_state, refresh_locals};
use threadnet::{HyperParams, Mode};

fn main() -> threadnet::Result<()> {
    let hyper = HyperParams::symmetric(3, 0.2, 0.1, (2.5, 1.5), (2.5, 1.5), 0.5);
    let cfg =
        SynthConfig { num_users: 100, num_threads: 60, vocab_size: 80, avg_participants: 6.0, doc_len: 10, seed: 1 };
    let (corpus, _) = generate_synthetic(&cfg, &hyper)?;
    let mut global = init_state(&corpus, &hyper, 1);
    let mut local = init_locals(&corpus, &hyper, Mode::Full);

    let show = |label: &str, g: &threadnet::GlobalState, l: &threadnet::LocalState| -> threadnet::Result<()> {
        let t = elbo_terms(&corpus, g, l, &hyper, Mode::Full)?;
        println!(
            "{label:<14} total {:>12.2}  edges {:>11.2}  coupling {:>9.2}  tokens {:>11.2}",
            t.total(),
            t.edges,
            t.coupling,
            t.tokens
        );
        Ok(())
    };

    show("start", &global, &local)?;
    for round in 1..=3 {
        let stats = refresh_locals(&corpus, &global, &hyper, Mode::Full, LocalOptions::default(), &mut local)?;
        show(&format!("{round}: locals"), &global, &local)?;
        println!("{:>14} {stats:?}", "");
        global.gamma = gamma_update_batch(&corpus, &local, &hyper);
        show(&format!("{round}: gamma"), &global, &local)?;
        global.tau = tau_update_batch(&corpus, &local, &hyper);
        show(&format!("{round}: tau"), &global, &local)?;
        global.lambda = lambda_update_batch(&corpus, &local, &global, &hyper)?;
        show(&format!("{round}: lambda"), &global, &local)?;
        global.nu = nu_gradient_step(&corpus, &local, &global, &hyper);
        show(&format!("{round}: nu"), &global, &local)?;
    }
    Ok(())
}
