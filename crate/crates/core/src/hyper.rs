//! Model priors and inference constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the token-topic coupling enters the local updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Both φ and χ updates are exact coordinate maximizers of the ELBO's
    /// coupling term `ω Σ_i Σ_k χ_ik [ln(ε/δ)(1 − s_k)/δ + (s_k/δ) ln(1 + ε/δ)]`.
    #[default]
    Consistent,
    /// The φ bracket `ln(ε/δ) − 1/δ + ln(1 + ε/δ)/δ` and an ω-free χ term,
    /// kept for literal reproduction. Not a coordinate-ascent scheme.
    Printed,
}

/// Which halves of the joint model are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Full,
    /// Network only: ω is forced to 0 and token data is never read.
    MmsbOnly,
    /// Text only: per-document topic proportions, edge data is never read.
    LdaOnly,
}

impl Mode {
    pub fn uses_edges(self) -> bool {
        self != Mode::LdaOnly
    }

    pub fn uses_tokens(self) -> bool {
        self != Mode::MmsbOnly
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "full" => Ok(Mode::Full),
            "mmsb_only" | "mmsb" => Ok(Mode::MmsbOnly),
            "lda_only" | "lda" => Ok(Mode::LdaOnly),
            other => Err(Error::Hyper(format!("unknown mode {other:?} (expected full, mmsb_only or lda_only)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::MmsbOnly => "mmsb_only",
            Mode::LdaOnly => "lda_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub k: usize,
    /// Membership Dirichlet prior, one entry per community.
    pub alpha: Vec<f64>,
    /// Symmetric word-topic Dirichlet prior.
    pub eta: f64,
    /// Gamma shape prior on the block rates, K×K.
    pub kappa: Vec<Vec<f64>>,
    /// Gamma scale prior on the block rates, K×K.
    pub theta: Vec<Vec<f64>>,
    /// Weight of the text coupling relative to the network.
    pub omega: f64,
    /// Smoothing constant inside the coupling logarithms.
    pub epsilon: f64,
    /// Learning-rate delay: ξ_t = (t + zeta)^(−rho).
    pub zeta: f64,
    pub rho: f64,
    /// Gradient-ascent step size for ν.
    pub rho_nu: f64,
    #[serde(default)]
    pub coupling: Coupling,
}

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_ZETA: f64 = 1024.0;
pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_RHO_NU: f64 = 1e-3;

fn diag_matrix(k: usize, diag: f64, off: f64) -> Vec<Vec<f64>> {
    (0..k).map(|g| (0..k).map(|h| if g == h { diag } else { off }).collect()).collect()
}

impl HyperParams {
    /// Symmetric priors with diagonal / off-diagonal block matrices.
    pub fn symmetric(k: usize, alpha: f64, eta: f64, kappa: (f64, f64), theta: (f64, f64), omega: f64) -> Self {
        Self {
            k,
            alpha: vec![alpha; k],
            eta,
            kappa: diag_matrix(k, kappa.0, kappa.1),
            theta: diag_matrix(k, theta.0, theta.1),
            omega,
            epsilon: DEFAULT_EPSILON,
            zeta: DEFAULT_ZETA,
            rho: DEFAULT_RHO,
            rho_nu: DEFAULT_RHO_NU,
            coupling: Coupling::Consistent,
        }
    }

    /// Tuned values for the thread-starter cancer graph.
    pub fn preset_ts() -> Self {
        Self::symmetric(10, 0.05, 0.05, (2.5, 1.5), (2.5, 1.5), 1e-4)
    }

    /// Tuned values for the username-mention cancer graph.
    pub fn preset_um() -> Self {
        Self::symmetric(10, 0.05, 0.05, (2.0, 1.0), (2.0, 1.0), 1e-3)
    }

    /// Tuned values for the Stack Overflow graph.
    pub fn preset_so() -> Self {
        Self::symmetric(20, 0.05, 0.05, (1.0, 0.5), (1.0, 0.5), 1e-2)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ts" => Ok(Self::preset_ts()),
            "um" => Ok(Self::preset_um()),
            "so" => Ok(Self::preset_so()),
            other => Err(Error::Hyper(format!("unknown preset {other:?} (expected ts, um or so)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k == 0 {
            return Err(Error::Hyper("K must be at least 1".into()));
        }
        if self.alpha.len() != k {
            return Err(Error::Hyper(format!("alpha has {} entries, K = {k}", self.alpha.len())));
        }
        for (name, m) in [("kappa", &self.kappa), ("theta", &self.theta)] {
            if m.len() != k || m.iter().any(|r| r.len() != k) {
                return Err(Error::Hyper(format!("{name} must be {k}x{k}")));
            }
            if m.iter().flatten().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Hyper(format!("{name} entries must be positive")));
            }
        }
        if self.alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::Hyper("alpha entries must be positive".into()));
        }
        let positive = [("eta", self.eta), ("epsilon", self.epsilon), ("zeta", self.zeta)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Hyper(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(Error::Hyper(format!("omega must be non-negative, got {}", self.omega)));
        }
        if !(0.5..=1.0).contains(&self.rho) {
            return Err(Error::Hyper(format!("rho must lie in [0.5, 1], got {}", self.rho)));
        }
        if !(self.rho_nu >= 0.0) || !self.rho_nu.is_finite() {
            return Err(Error::Hyper(format!("rho_nu must be non-negative, got {}", self.rho_nu)));
        }
        Ok(())
    }

    #[inline]
    pub fn kappa_at(&self, g: usize, h: usize) -> f64 {
        self.kappa[g][h]
    }

    #[inline]
    pub fn theta_at(&self, g: usize, h: usize) -> f64 {
        self.theta[g][h]
    }

    /// Coefficient multiplying `Σ_i χ_{i,g}` in the φ log-weights of an edge
    /// whose sender has `delta` out-neighbours in the thread.
    pub fn phi_text_coef(&self, delta: usize) -> f64 {
        let d = delta as f64;
        let a = (self.epsilon / d).ln();
        let b = (self.epsilon / d).ln_1p();
        match self.coupling {
            Coupling::Consistent => self.omega * (b - a) / d,
            Coupling::Printed => self.omega * (a - 1.0 / d + b / d),
        }
    }

    /// Coupling contribution to the χ log-weight of topic k, where `s_k` is
    /// the sender-side φ mass on k summed over the sender's out-edges.
    pub fn chi_text_term(&self, delta: usize, s_k: f64) -> f64 {
        let raw = self.coupling_potential(delta, s_k);
        match self.coupling {
            Coupling::Consistent => self.omega * raw,
            Coupling::Printed => raw,
        }
    }

    /// The log-potential `ln(ε/δ)(1 − s)/δ + (s/δ) ln(1 + ε/δ)` (unweighted).
    #[inline]
    pub fn coupling_potential(&self, delta: usize, s_k: f64) -> f64 {
        let d = delta as f64;
        (self.epsilon / d).ln() * (1.0 - s_k) / d + (s_k / d) * (self.epsilon / d).ln_1p()
    }
}

/// Scalar or per-community vector in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VecSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// Block-matrix prior in config files: a scalar, a diagonal/off-diagonal
/// pair, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatSpec {
    Scalar(f64),
    DiagOff { diag: f64, off: f64 },
    Matrix(Vec<Vec<f64>>),
}

impl VecSpec {
    fn expand(&self, k: usize) -> Vec<f64> {
        match self {
            VecSpec::Scalar(v) => vec![*v; k],
            VecSpec::Vector(v) => v.clone(),
        }
    }
}

impl MatSpec {
    fn expand(&self, k: usize) -> Vec<Vec<f64>> {
        match self {
            MatSpec::Scalar(v) => diag_matrix(k, *v, *v),
            MatSpec::DiagOff { diag, off } => diag_matrix(k, *diag, *off),
            MatSpec::Matrix(m) => m.clone(),
        }
    }
}

/// Hyperparameter configuration file. Every field is optional; missing
/// fields come from `preset` (default `ts`).
///
/// ```json
/// {"preset": "ts", "k": 5, "alpha": 0.1, "kappa": {"diag": 2.5, "off": 1.5}}
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperConfig {
    pub preset: Option<String>,
    pub k: Option<usize>,
    pub alpha: Option<VecSpec>,
    pub eta: Option<f64>,
    pub kappa: Option<MatSpec>,
    pub theta: Option<MatSpec>,
    pub omega: Option<f64>,
    pub epsilon: Option<f64>,
    pub zeta: Option<f64>,
    pub rho: Option<f64>,
    pub rho_nu: Option<f64>,
    pub coupling: Option<Coupling>,
}

impl HyperConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> Result<HyperParams> {
        let base = HyperParams::preset(self.preset.as_deref().unwrap_or("ts"))?;
        let k = self.k.unwrap_or(base.k);
        // preset shapes are symmetric, so re-expanding them at a new K is exact
        let base_alpha = VecSpec::Scalar(base.alpha[0]);
        let base_kappa =
            MatSpec::DiagOff { diag: base.kappa[0][0], off: base.kappa[0].get(1).copied().unwrap_or(base.kappa[0][0]) };
        let base_theta =
            MatSpec::DiagOff { diag: base.theta[0][0], off: base.theta[0].get(1).copied().unwrap_or(base.theta[0][0]) };
        let hp = HyperParams {
            k,
            alpha: self.alpha.as_ref().unwrap_or(&base_alpha).expand(k),
            eta: self.eta.unwrap_or(base.eta),
            kappa: self.kappa.as_ref().unwrap_or(&base_kappa).expand(k),
            theta: self.theta.as_ref().unwrap_or(&base_theta).expand(k),
            omega: self.omega.unwrap_or(base.omega),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
            zeta: self.zeta.unwrap_or(base.zeta),
            rho: self.rho.unwrap_or(base.rho),
            rho_nu: self.rho_nu.unwrap_or(base.rho_nu),
            coupling: self.coupling.unwrap_or(base.coupling),
        };
        hp.validate()?;
        Ok(hp)
    }
}
