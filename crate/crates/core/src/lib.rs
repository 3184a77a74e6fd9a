//! Joint mixed-membership stochastic blockmodel and topic model over
//! per-thread forum sub-networks.
//!
//! Every discussion thread forms its own small directed, weighted
//! interaction graph. Users carry a global mixed membership over `K`
//! community-topics; within a thread each reply edge picks a sender and a
//! receiver community, the edge weight is Poisson with a Gamma-distributed
//! block rate, and the words a user writes in that thread are drawn from
//! topics tied to the communities the user enacted there.
//!
//! The crate provides
//! - [`corpus`]: threaded corpus model, file formats, edge splits and a
//!   synthetic generator,
//! - [`math`]: special functions and exponential-family expectations,
//! - [`elbo`]: the evidence lower bound,
//! - [`local`] and [`global`]: coordinate-ascent and stochastic updates,
//! - [`trainer`]: the V / SV / SSV / PSSV schedules, tuning and benchmarking,
//! - [`eval`]: link-prediction scoring with ablation baselines,
//! - [`analysis`]: role analytics exporters,
//! - [`cli`]: the command-line front end used by the `threadnet` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod elbo;
mod error;
pub mod eval;
pub mod global;
pub mod hyper;
pub mod local;
pub mod math;
pub mod state;
pub mod trainer;

pub use corpus::{EvalSplit, SplitEntry, ThreadCorpus, ThreadRecord};
pub use error::{Error, Result};
pub use hyper::{Coupling, HyperParams, Mode};
pub use state::{Expectations, GlobalState, LocalState};
pub use trainer::{Schedule, TrainConfig, TrainReport};
