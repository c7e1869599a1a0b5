//! Bundled reference ensembles with their published thresholds.

use crate::density_evolution::ChannelKind;
use crate::ensemble::{parse_ensemble, Ensemble};

#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub name: &'static str,
    pub text: &'static str,
    /// Channel the ensemble was optimized for, with its published threshold
    /// and gap to capacity.
    pub channel: ChannelKind,
    pub threshold: f64,
    pub gap: f64,
    /// Published threshold on the other channel, where one is given.
    pub other_threshold: Option<f64>,
}

impl Reference {
    pub fn ensemble(&self) -> Ensemble {
        parse_ensemble(self.text).expect("bundled ensemble parses")
    }
}

macro_rules! reference {
    ($name:literal, $kind:ident, $th:expr, $gap:expr, $other:expr) => {
        Reference {
            name: $name,
            text: include_str!(concat!("../data/", $name, ".ens")),
            channel: ChannelKind::$kind,
            threshold: $th,
            gap: $gap,
            other_threshold: $other,
        }
    };
}

/// Rate-1/2 and rate-1/10 reference structures and optimized codes.
pub const REFERENCES: &[Reference] = &[
    reference!("ref1", Bec, 0.463135, 0.036865, Some(0.895569)),
    reference!("code1", Bec, 0.496606, 0.003394, None),
    reference!("code2", BiAwgn, 0.924438, 0.054162, None),
    reference!("code3", Bec, 0.497266, 0.002734, None),
    reference!("code4", BiAwgn, 0.927002, 0.051598, None),
    reference!("ref2", Bec, 0.876221, 0.023779, Some(2.179504)),
    reference!("code5", Bec, 0.894775, 0.005225, None),
    reference!("code6", BiAwgn, 2.336792, 0.255808, None),
    reference!("code7", Bec, 0.898315, 0.001685, None),
    reference!("code8", BiAwgn, 2.369385, 0.223215, None),
    reference!("code9", Bec, 0.897949, 0.002051, None),
    reference!("code10", BiAwgn, 2.323975, 0.268625, None),
];

/// Two-edge-type example with a single check class.
pub const FIG1: &str = include_str!("../data/fig1.ens");

pub fn reference(name: &str) -> Option<&'static Reference> {
    REFERENCES.iter().find(|r| r.name == name)
}
