//! Density evolution on the binary erasure and binary-input AWGN channels,
//! decoding thresholds by bisection, and Shannon limits for gap reporting.
//!
//! # Erasure channel
//!
//! Messages are erasure probabilities per edge type. With `x` the
//! variable-to-check and `y` the check-to-variable erasure vectors,
//!
//! ```text
//! y_i = 1 - R_{x_i}(1 - x) / R_{x_i}(1)
//! x_i = L_{x_i}(r~, y) / L_{x_i}(1, 1),   r~ = (1, eps)
//! ```
//!
//! so punctured bits start fully erased. Decoding succeeds when the
//! a-posteriori erasure probability `r~^b y^d` of every variable class falls
//! below `de_tol`. Degree-one variable nodes always emit `eps`, which is why
//! the test is on the a-posteriori value rather than on `x`.
//!
//! # BI-AWGN channel
//!
//! Messages are consistent Gaussians tracked through a kernel `phi` with
//! `phi(0) = 1` and `phi(inf) = 0`. For each edge type the variable side
//! averages `phi(mean)` over its classes, the check side combines
//! `1 - phi` multiplicatively and averages the resulting `phi` values, and the
//! check-to-variable mean is recovered with `phi^-1`:
//!
//! ```text
//! q_i = sum_v w_vi phi(m_ch(v) + sum_j (d_vj - [i=j]) u_j)
//! u_i = phi^-1( sum_c w_ci (1 - prod_j (1 - q_j)^(d_cj - [i=j])) )
//! ```
//!
//! with `m_ch = 2 / sigma^2` for transmitted and `0` for punctured classes.
//! The default kernel [`PhiKernel::SignError`] uses
//! `phi(m) = erfc(sqrt(m) / 2) = 2 P(sign error)`, for which the check rule is
//! the exact sign-error recursion; this is the bit-error-rate style Gaussian
//! approximation. [`PhiKernel::Tanh`] is the classic two-piece closed form of
//! `1 - E[tanh(u/2)]`, which tracks thresholds of full density evolution more
//! closely but is not what the bundled tables were computed with.
//! Means saturate at `m_max`.

mod awgn;
mod bec;
mod graph;
mod shannon;
mod threshold;

pub use awgn::{awgn_de_step, awgn_decodable, awgn_run, phi, phi_inv, TANH_SEAM};
pub use bec::{bec_de_step, bec_decodable, bec_run};
pub use shannon::{biawgn_capacity, shannon_limit};
pub use threshold::{
    awgn_threshold, bec_threshold, probe_trace_csv, threshold, Probe, ThresholdResult,
    ThresholdStatus,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Bec,
    BiAwgn,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Bec => write!(f, "bec"),
            ChannelKind::BiAwgn => write!(f, "biawgn"),
        }
    }
}

impl FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bec" => Ok(ChannelKind::Bec),
            "biawgn" | "awgn" | "bi-awgn" => Ok(ChannelKind::BiAwgn),
            _ => Err(Error::InvalidArgument(format!("unknown channel '{s}'"))),
        }
    }
}

/// A channel with its quality parameter: erasure probability for the BEC,
/// noise standard deviation for the BI-AWGN channel. Larger is worse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    kind: ChannelKind,
    param: f64,
}

impl ChannelSpec {
    pub fn new(kind: ChannelKind, param: f64) -> Result<Self> {
        let ok = match kind {
            ChannelKind::Bec => (0.0..=1.0).contains(&param),
            ChannelKind::BiAwgn => param > 0.0 && param.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "parameter {param} out of range for {kind}"
            )));
        }
        Ok(ChannelSpec { kind, param })
    }

    pub fn bec(erasure: f64) -> Result<Self> {
        Self::new(ChannelKind::Bec, erasure)
    }

    pub fn biawgn(sigma: f64) -> Result<Self> {
        Self::new(ChannelKind::BiAwgn, sigma)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn param(&self) -> f64 {
        self.param
    }
}

/// Gaussian-approximation kernel for the BI-AWGN recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhiKernel {
    /// `erfc(sqrt(m) / 2)`, twice the sign-error probability.
    #[default]
    SignError,
    /// Two-piece closed-form approximation of `1 - E[tanh(u / 2)]`.
    Tanh,
}

impl fmt::Display for PhiKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiKernel::SignError => write!(f, "sign-error"),
            PhiKernel::Tanh => write!(f, "tanh"),
        }
    }
}

impl FromStr for PhiKernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sign-error" | "ber" => Ok(PhiKernel::SignError),
            "tanh" => Ok(PhiKernel::Tanh),
            _ => Err(Error::InvalidArgument(format!("unknown kernel '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeConfig {
    /// Success when the worst a-posteriori error probability is at most this.
    pub de_tol: f64,
    pub max_iter: usize,
    /// Declare failure when the metric has not dropped by `rel_stall` over
    /// this many iterations.
    pub stall_window: usize,
    pub rel_stall: f64,
    pub bisect_tol_bec: f64,
    pub bisect_tol_awgn: f64,
    /// Saturation of Gaussian means.
    pub m_max: f64,
    pub kernel: PhiKernel,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            de_tol: 1e-7,
            max_iter: 1000,
            stall_window: 50,
            rel_stall: 1e-9,
            bisect_tol_bec: 1e-6,
            bisect_tol_awgn: 1e-4,
            m_max: 100.0,
            kernel: PhiKernel::SignError,
        }
    }
}

impl DeConfig {
    pub fn bisect_tol(&self, kind: ChannelKind) -> f64 {
        match kind {
            ChannelKind::Bec => self.bisect_tol_bec,
            ChannelKind::BiAwgn => self.bisect_tol_awgn,
        }
    }
}

/// Per-edge-type message statistics: erasure probabilities of
/// variable-to-check messages on the BEC, check-to-variable means on the
/// BI-AWGN channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DeState {
    pub values: Vec<f64>,
    pub iteration: usize,
}

impl DeState {
    pub fn new(values: Vec<f64>) -> Self {
        DeState {
            values,
            iteration: 0,
        }
    }
}

/// Result of running the recursion at one channel parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeOutcome {
    pub decodable: bool,
    pub iterations: usize,
    /// Final worst a-posteriori error probability.
    pub metric: f64,
}

/// Outcome at one channel parameter on either channel.
pub fn run(ens: &crate::Ensemble, channel: ChannelSpec, cfg: &DeConfig) -> DeOutcome {
    match channel.kind() {
        ChannelKind::Bec => bec_run(ens, channel.param(), cfg),
        ChannelKind::BiAwgn => awgn_run(ens, channel.param(), cfg),
    }
}
