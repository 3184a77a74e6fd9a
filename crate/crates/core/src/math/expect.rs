use super::special::{ln_gamma, psi};
use crate::error::{Error, Result};

/// E[log x_k] under Dirichlet(params): Ψ(params_k) − Ψ(Σ params).
pub fn dirichlet_elog(params: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; params.len()];
    dirichlet_elog_into(params, &mut out)?;
    Ok(out)
}

pub fn dirichlet_elog_into(params: &[f64], out: &mut [f64]) -> Result<()> {
    if params.len() != out.len() {
        return Err(Error::Shape(format!("dirichlet_elog: {} params into {} slots", params.len(), out.len())));
    }
    if let Some(bad) = params.iter().find(|&&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::Domain(format!("Dirichlet parameter {bad} is not positive")));
    }
    let total = psi(params.iter().sum());
    for (o, &a) in out.iter_mut().zip(params) {
        *o = psi(a) - total;
    }
    Ok(())
}

/// Variational Poisson log-likelihood y·E[log B] − E[B] − ln(y!).
pub fn poisson_logpmf(y: u32, log_rate_expect: f64, rate_expect: f64) -> f64 {
    let yf = f64::from(y);
    let mut v = -rate_expect - ln_gamma(yf + 1.0);
    if y > 0 {
        v += yf * log_rate_expect;
    }
    v
}

/// E_q[log Dir(x | prior)] − E_q[log Dir(x | post)] with q = Dir(post).
pub fn dirichlet_prior_minus_entropy(prior: &[f64], post: &[f64], elog: &[f64]) -> f64 {
    let mut v = ln_gamma(prior.iter().sum()) - ln_gamma(post.iter().sum());
    for ((&a, &b), &e) in prior.iter().zip(post).zip(elog) {
        v += ln_gamma(b) - ln_gamma(a) + (a - b) * e;
    }
    v
}

/// Same as [`dirichlet_prior_minus_entropy`] for a symmetric prior.
pub fn symmetric_dirichlet_prior_minus_entropy(prior: f64, post: &[f64], elog: &[f64]) -> f64 {
    let n = post.len() as f64;
    let mut v = ln_gamma(prior * n) - n * ln_gamma(prior) - ln_gamma(post.iter().sum());
    for (&b, &e) in post.iter().zip(elog) {
        v += ln_gamma(b) + (prior - b) * e;
    }
    v
}

/// E_q[log Gamma(B | shape κ, scale θ)] + H[Gamma(shape ν, scale λ)].
pub fn gamma_prior_minus_entropy(kappa: f64, theta: f64, nu: f64, lambda: f64) -> f64 {
    let elog = psi(nu) + lambda.ln();
    let mean = nu * lambda;
    let prior = (kappa - 1.0) * elog - mean / theta - kappa * theta.ln() - ln_gamma(kappa);
    let entropy = nu + lambda.ln() + ln_gamma(nu) + (1.0 - nu) * psi(nu);
    prior + entropy
}

/// Exponentiates and normalizes a vector of log-weights in place using
/// max-subtraction. Returns the log normalizer.
pub fn log_softmax_normalize(v: &mut [f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
    max + total.ln()
}
