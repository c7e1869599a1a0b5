//! Multi-edge-type ensemble representation.
//!
//! An ensemble is a pair of node-perspective degree distributions
//!
//! ```text
//! L(r, x) = sum L_{b,d} r^b x^d        R(x) = sum R_d x^d
//! ```
//!
//! where every term is one node class. Coefficients are fractions of the
//! number of transmitted bits `n`. Only binary-input channels are modelled, so
//! the channel vector `r` has two entries: `r[0]` for punctured bits and
//! `r[1]` for bits sent over the channel.
//!
//! Edge types are indexed from zero in the API and from one in every
//! human-readable output.

pub(crate) mod text;

pub use text::{parse_ensemble, serialize_ensemble};

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// Default tolerance for the transmitted-fraction, rate and socket-count
/// constraints. Published tables print six decimals.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Per-edge-type degrees `d = [d_1 .. d_me]` of a node class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeVector(Vec<u32>);

impl EdgeVector {
    pub fn new(degrees: Vec<u32>) -> Self {
        EdgeVector(degrees)
    }

    pub fn zeros(edge_types: usize) -> Self {
        EdgeVector(vec![0; edge_types])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total degree `|d|`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_entry(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

impl From<Vec<u32>> for EdgeVector {
    fn from(v: Vec<u32>) -> Self {
        EdgeVector(v)
    }
}

impl<const N: usize> From<[u32; N]> for EdgeVector {
    fn from(v: [u32; N]) -> Self {
        EdgeVector(v.to_vec())
    }
}

impl fmt::Display for EdgeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (k, d) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

/// The `b` vector of a variable class. With a single binary-input channel a
/// bit is either punctured (`b = [1 0]`) or transmitted (`b = [0 1]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelAssignment {
    Punctured,
    Transmitted,
}

impl ChannelAssignment {
    pub fn is_punctured(self) -> bool {
        matches!(self, ChannelAssignment::Punctured)
    }

    /// Index into the channel vector `r`.
    pub fn channel_index(self) -> usize {
        match self {
            ChannelAssignment::Punctured => 0,
            ChannelAssignment::Transmitted => 1,
        }
    }
}

impl fmt::Display for ChannelAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelAssignment::Punctured => write!(f, "[1 0]"),
            ChannelAssignment::Transmitted => write!(f, "[0 1]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableClass {
    pub channel: ChannelAssignment,
    pub degrees: EdgeVector,
    /// `L_{b,d}`, fraction of the code length.
    pub coeff: f64,
}

impl VariableClass {
    pub fn new(channel: ChannelAssignment, degrees: impl Into<EdgeVector>, coeff: f64) -> Self {
        VariableClass {
            channel,
            degrees: degrees.into(),
            coeff,
        }
    }

    pub fn transmitted(degrees: impl Into<EdgeVector>, coeff: f64) -> Self {
        Self::new(ChannelAssignment::Transmitted, degrees, coeff)
    }

    pub fn punctured(degrees: impl Into<EdgeVector>, coeff: f64) -> Self {
        Self::new(ChannelAssignment::Punctured, degrees, coeff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckClass {
    pub degrees: EdgeVector,
    /// `R_d`, fraction of the code length.
    pub coeff: f64,
}

impl CheckClass {
    pub fn new(degrees: impl Into<EdgeVector>, coeff: f64) -> Self {
        CheckClass {
            degrees: degrees.into(),
            coeff,
        }
    }
}

/// A complete MET-LDPC ensemble. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    edge_types: usize,
    var_classes: Vec<VariableClass>,
    chk_classes: Vec<CheckClass>,
    design_rate: f64,
}

impl Ensemble {
    /// Builds an ensemble after checking dimensions, signs and class-key
    /// uniqueness. Constraint satisfaction is checked separately by
    /// [`Ensemble::validate`].
    pub fn new(
        edge_types: usize,
        var_classes: Vec<VariableClass>,
        chk_classes: Vec<CheckClass>,
        design_rate: f64,
    ) -> Result<Self> {
        if edge_types == 0 {
            return Err(Error::InvalidArgument("edge_types must be at least 1".into()));
        }
        if !design_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("rate {design_rate} is not finite")));
        }
        let mut seen = HashSet::new();
        for (k, v) in var_classes.iter().enumerate() {
            if v.degrees.len() != edge_types {
                return Err(Error::InvalidArgument(format!(
                    "variable class {} has {} degrees, expected {edge_types}",
                    k + 1,
                    v.degrees.len()
                )));
            }
            if !(v.coeff.is_finite() && v.coeff >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "variable class {} has invalid coefficient {}",
                    k + 1,
                    v.coeff
                )));
            }
            if v.degrees.total() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "variable class {} has total degree 0",
                    k + 1
                )));
            }
            if !seen.insert((Some(v.channel), v.degrees.clone())) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate variable class {} {}",
                    v.channel, v.degrees
                )));
            }
        }
        for (k, c) in chk_classes.iter().enumerate() {
            if c.degrees.len() != edge_types {
                return Err(Error::InvalidArgument(format!(
                    "check class {} has {} degrees, expected {edge_types}",
                    k + 1,
                    c.degrees.len()
                )));
            }
            if !(c.coeff.is_finite() && c.coeff >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "check class {} has invalid coefficient {}",
                    k + 1,
                    c.coeff
                )));
            }
            if c.degrees.total() == 0 {
                return Err(Error::InvalidArgument(format!(
                    "check class {} has total degree 0",
                    k + 1
                )));
            }
            if !seen.insert((None, c.degrees.clone())) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate check class {}",
                    c.degrees
                )));
            }
        }
        Ok(Ensemble {
            edge_types,
            var_classes,
            chk_classes,
            design_rate,
        })
    }

    pub fn edge_types(&self) -> usize {
        self.edge_types
    }

    pub fn var_classes(&self) -> &[VariableClass] {
        &self.var_classes
    }

    pub fn chk_classes(&self) -> &[CheckClass] {
        &self.chk_classes
    }

    pub fn design_rate(&self) -> f64 {
        self.design_rate
    }

    /// Same ensemble with a different check side.
    pub fn with_checks(&self, chk_classes: Vec<CheckClass>) -> Result<Self> {
        Ensemble::new(
            self.edge_types,
            self.var_classes.clone(),
            chk_classes,
            self.design_rate,
        )
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.edge_types {
            return Err(Error::InvalidArgument(format!(
                "x has length {}, expected {}",
                x.len(),
                self.edge_types
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("x has non-finite entries".into()));
        }
        Ok(())
    }

    fn check_r(&self, r: &[f64]) -> Result<()> {
        if r.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "r has length {}, expected 2 (one channel)",
                r.len()
            )));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("r has non-finite entries".into()));
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.edge_types {
            return Err(Error::InvalidArgument(format!(
                "edge type index {i} out of range for {} edge types",
                self.edge_types
            )));
        }
        Ok(())
    }

    /// `L(r, x)`.
    pub fn eval_l(&self, r: &[f64], x: &[f64]) -> Result<f64> {
        self.check_r(r)?;
        self.check_x(x)?;
        Ok(self
            .var_classes
            .iter()
            .map(|v| v.coeff * r[v.channel.channel_index()] * monomial(x, v.degrees.as_slice()))
            .sum())
    }

    /// `R(x)`.
    pub fn eval_r(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        Ok(self
            .chk_classes
            .iter()
            .map(|c| c.coeff * monomial(x, c.degrees.as_slice()))
            .sum())
    }

    /// `dL/dx_i` at `(r, x)`.
    pub fn deriv_l(&self, i: usize, r: &[f64], x: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        self.check_r(r)?;
        self.check_x(x)?;
        Ok(self
            .var_classes
            .iter()
            .map(|v| {
                v.coeff
                    * r[v.channel.channel_index()]
                    * monomial_derivative(x, v.degrees.as_slice(), i)
            })
            .sum())
    }

    /// `dR/dx_i` at `x`.
    pub fn deriv_r(&self, i: usize, x: &[f64]) -> Result<f64> {
        self.check_index(i)?;
        self.check_x(x)?;
        Ok(self
            .chk_classes
            .iter()
            .map(|c| c.coeff * monomial_derivative(x, c.degrees.as_slice(), i))
            .sum())
    }

    /// `L(1,1)`: total variable nodes per transmitted bit.
    pub fn variable_mass(&self) -> f64 {
        self.var_classes.iter().map(|v| v.coeff).sum()
    }

    /// `R(1)`.
    pub fn check_mass(&self) -> f64 {
        self.chk_classes.iter().map(|c| c.coeff).sum()
    }

    /// Variable-side socket count of edge type `i`, `L_{x_i}(1,1)`.
    pub fn var_sockets(&self, i: usize) -> f64 {
        variable_sockets(&self.var_classes, i)
    }

    /// Check-side socket count of edge type `i`, `R_{x_i}(1)`.
    pub fn chk_sockets(&self, i: usize) -> f64 {
        self.chk_classes
            .iter()
            .map(|c| c.coeff * f64::from(c.degrees.get(i)))
            .sum()
    }

    /// `L(1,1) - R(1)`.
    pub fn code_rate(&self) -> f64 {
        self.variable_mass() - self.check_mass()
    }

    /// Largest variable-node total degree among classes with a nonzero
    /// coefficient.
    pub fn max_variable_degree(&self) -> u32 {
        self.var_classes
            .iter()
            .filter(|v| v.coeff > 0.0)
            .map(|v| v.degrees.total())
            .max()
            .unwrap_or(0)
    }

    /// Checks the transmitted-fraction, rate and per-type socket constraints.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let mut violations = Vec::new();
        let transmitted: f64 = self
            .var_classes
            .iter()
            .filter(|v| !v.channel.is_punctured())
            .map(|v| v.coeff)
            .sum();
        let r = transmitted - 1.0;
        if !(r.abs() <= tol) {
            violations.push(Violation {
                constraint: Constraint::TransmittedFraction,
                residual: r,
            });
        }
        let r = self.code_rate() - self.design_rate;
        if !(r.abs() <= tol) {
            violations.push(Violation {
                constraint: Constraint::Rate,
                residual: r,
            });
        }
        for i in 0..self.edge_types {
            let r = self.var_sockets(i) - self.chk_sockets(i);
            if !(r.abs() <= tol) {
                violations.push(Violation {
                    constraint: Constraint::SocketCount { edge_type: i },
                    residual: r,
                });
            }
        }
        ValidationReport { tol, violations }
    }
}

pub(crate) fn variable_sockets(vars: &[VariableClass], i: usize) -> f64 {
    vars.iter()
        .map(|v| v.coeff * f64::from(v.degrees.get(i)))
        .sum()
}

/// `x^d`, with `0^0 = 1`.
pub(crate) fn monomial(x: &[f64], d: &[u32]) -> f64 {
    x.iter()
        .zip(d)
        .filter(|(_, &e)| e > 0)
        .map(|(&xi, &e)| xi.powi(e as i32))
        .product()
}

/// `d/dx_i x^d`.
pub(crate) fn monomial_derivative(x: &[f64], d: &[u32], i: usize) -> f64 {
    if d[i] == 0 {
        return 0.0;
    }
    let mut p = f64::from(d[i]);
    for (j, (&xj, &e)) in x.iter().zip(d).enumerate() {
        let e = if j == i { e - 1 } else { e };
        if e > 0 {
            p *= xj.powi(e as i32);
        }
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Transmitted coefficients sum to one.
    TransmittedFraction,
    /// `L(1,1) - R(1)` equals the design rate.
    Rate,
    /// Variable and check socket counts of one edge type agree.
    SocketCount { edge_type: usize },
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::TransmittedFraction => write!(f, "transmitted-fraction"),
            Constraint::Rate => write!(f, "rate"),
            Constraint::SocketCount { edge_type } => {
                write!(f, "socket-count(edge type {})", edge_type + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    /// Signed residual, left-hand side minus right-hand side.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub tol: f64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok (tol {:e})", self.tol);
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "violated {}: residual {:+.3e}", v.constraint, v.residual)?;
        }
        Ok(())
    }
}
