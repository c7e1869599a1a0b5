use std::fmt::Write as _;

use super::graph::DeGraph;
use super::{awgn, bec, shannon_limit, ChannelKind, DeConfig, DeOutcome};
use crate::ensemble::Ensemble;
use crate::error::Result;

/// How the bisection ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdStatus {
    Converged,
    /// The ensemble fails even at the best channel in the bracket; the
    /// reported threshold is that lower end.
    UndecodableAtLower,
    /// The ensemble decodes at the worst channel in the bracket; the
    /// reported threshold is that upper end.
    DecodableAtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub param: f64,
    pub decodable: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub kind: ChannelKind,
    /// Largest channel parameter known to decode.
    pub threshold: f64,
    pub lower: f64,
    pub upper: f64,
    pub status: ThresholdStatus,
    pub probes: Vec<Probe>,
}

impl ThresholdResult {
    pub fn bracket_width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Distance to the Shannon limit at `rate`.
    pub fn gap(&self, rate: f64) -> Result<f64> {
        Ok(shannon_limit(self.kind, rate)? - self.threshold)
    }
}

pub fn probe_trace_csv(probes: &[Probe]) -> String {
    let mut out = String::from("probe_param,decodable,iterations\n");
    for p in probes {
        let _ = writeln!(out, "{},{},{}", p.param, p.decodable, p.iterations);
    }
    out
}

/// Initial bisection bracket for the channel.
fn bracket(kind: ChannelKind, rate: f64) -> Result<(f64, f64)> {
    Ok(match kind {
        ChannelKind::Bec => (0.0, 1.0),
        ChannelKind::BiAwgn => (0.1, 2.0 * shannon_limit(ChannelKind::BiAwgn, rate)?),
    })
}

fn bisect(
    kind: ChannelKind,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
    mut decode: impl FnMut(f64) -> DeOutcome,
) -> ThresholdResult {
    let mut probes = Vec::new();
    let mut probe = |p: f64, probes: &mut Vec<Probe>| {
        let o = decode(p);
        probes.push(Probe {
            param: p,
            decodable: o.decodable,
            iterations: o.iterations,
        });
        o.decodable
    };
    let finish = |threshold, lower, upper, status, probes| ThresholdResult {
        kind,
        threshold,
        lower,
        upper,
        status,
        probes,
    };
    if probe(hi, &mut probes) {
        return finish(hi, lo, hi, ThresholdStatus::DecodableAtUpper, probes);
    }
    if !probe(lo, &mut probes) {
        return finish(lo, lo, hi, ThresholdStatus::UndecodableAtLower, probes);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut probes) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    finish(lo, lo, hi, ThresholdStatus::Converged, probes)
}

/// Decoding threshold by bisection. The bracket is `[0, 1]` on the erasure
/// channel and `[0.1, 2 sigma_Shannon]` on the BI-AWGN channel, where the
/// Shannon limit is taken at the ensemble's design rate.
pub fn threshold(ens: &Ensemble, kind: ChannelKind, cfg: &DeConfig) -> Result<ThresholdResult> {
    let g = DeGraph::new(ens);
    let br = bracket(kind, ens.design_rate())?;
    let tol = cfg.bisect_tol(kind);
    Ok(match kind {
        ChannelKind::Bec => bisect(kind, br, tol, |e| bec::run_graph(&g, e, cfg)),
        ChannelKind::BiAwgn => bisect(kind, br, tol, |s| awgn::run_graph(&g, s, cfg)),
    })
}

pub fn bec_threshold(ens: &Ensemble, cfg: &DeConfig) -> Result<ThresholdResult> {
    threshold(ens, ChannelKind::Bec, cfg)
}

pub fn awgn_threshold(ens: &Ensemble, cfg: &DeConfig) -> Result<ThresholdResult> {
    threshold(ens, ChannelKind::BiAwgn, cfg)
}
