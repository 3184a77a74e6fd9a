use crate::error::{Error, Result};

// Asymptotic series coefficients B_{2k} / (2k) for digamma.
const PSI_SERIES: [f64; 7] =
    [1.0 / 12.0, -1.0 / 120.0, 1.0 / 252.0, -1.0 / 240.0, 1.0 / 132.0, -691.0 / 32760.0, 1.0 / 12.0];

// B_{2k} coefficients for trigamma: 1/x + 1/(2x^2) + sum B_{2k} / x^{2k+1}.
const PSI1_SERIES: [f64; 7] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0];

const SHIFT: f64 = 10.0;

/// Digamma function Ψ(x) = d/dx ln Γ(x) for x > 0.
///
/// Shifts the argument above 10 with Ψ(x+1) = Ψ(x) + 1/x, then applies the
/// asymptotic expansion in 1/x².
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma requires x > 0, got {x}")));
    }
    Ok(psi(x))
}

/// Unchecked digamma for hot loops; callers guarantee x > 0.
#[inline]
pub(crate) fn psi(mut x: f64) -> f64 {
    debug_assert!(x > 0.0, "psi({x})");
    let mut acc = 0.0;
    while x < SHIFT {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut term = inv2;
    let mut series = 0.0;
    for c in PSI_SERIES {
        series += c * term;
        term *= inv2;
    }
    acc + x.ln() - 0.5 / x - series
}

/// Trigamma function Ψ′(x) for x > 0.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("trigamma requires x > 0, got {x}")));
    }
    Ok(psi1(x))
}

#[inline]
pub(crate) fn psi1(mut x: f64) -> f64 {
    debug_assert!(x > 0.0, "psi1({x})");
    let mut acc = 0.0;
    while x < SHIFT {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv2 * inv;
    let mut series = 0.0;
    for c in PSI1_SERIES {
        series += c * term;
        term *= inv2;
    }
    acc + inv + 0.5 * inv2 + series
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Table of ln(y!) grown on demand. Edge weights repeat heavily, so the
/// trainer builds one table up to the corpus maximum and shares it.
#[derive(Debug, Clone)]
pub struct LogFactorial {
    table: Vec<f64>,
}

impl LogFactorial {
    pub fn new(max: u32) -> Self {
        let mut table = Vec::with_capacity(max as usize + 1);
        table.push(0.0);
        for y in 1..=max {
            table.push(ln_gamma(f64::from(y) + 1.0));
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, y: u32) -> f64 {
        match self.table.get(y as usize) {
            Some(v) => *v,
            None => ln_gamma(f64::from(y) + 1.0),
        }
    }
}
