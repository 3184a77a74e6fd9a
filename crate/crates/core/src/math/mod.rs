//! Special functions and exponential-family expectations shared by every
//! inference routine.

mod expect;
mod special;

pub use expect::{
    dirichlet_elog, dirichlet_elog_into, dirichlet_prior_minus_entropy, gamma_prior_minus_entropy,
    log_softmax_normalize, poisson_logpmf, symmetric_dirichlet_prior_minus_entropy,
};
pub use special::{digamma, ln_gamma, trigamma, LogFactorial};

pub(crate) use special::{psi, psi1};
