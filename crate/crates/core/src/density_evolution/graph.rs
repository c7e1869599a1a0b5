use crate::ensemble::Ensemble;

/// One node class with its edge-perspective weights.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub punctured: bool,
    pub degrees: Vec<u32>,
    /// `coeff * d_i / sockets_i` per edge type; zero where `d_i == 0`.
    pub weights: Vec<f64>,
}

/// Ensemble flattened for the inner density-evolution loops. Classes with a
/// zero coefficient are dropped.
#[derive(Debug, Clone)]
pub(crate) struct DeGraph {
    pub edge_types: usize,
    pub vars: Vec<Term>,
    pub chks: Vec<Term>,
    pub chk_active: Vec<bool>,
}

impl DeGraph {
    pub fn new(ens: &Ensemble) -> Self {
        let me = ens.edge_types();
        let var_sockets: Vec<f64> = (0..me).map(|i| ens.var_sockets(i)).collect();
        let chk_sockets: Vec<f64> = (0..me).map(|i| ens.chk_sockets(i)).collect();
        let term = |punctured: bool, d: &[u32], coeff: f64, sockets: &[f64]| Term {
            punctured,
            degrees: d.to_vec(),
            weights: (0..me)
                .map(|i| {
                    if d[i] > 0 && sockets[i] > 0.0 {
                        coeff * f64::from(d[i]) / sockets[i]
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        DeGraph {
            edge_types: me,
            vars: ens
                .var_classes()
                .iter()
                .filter(|v| v.coeff > 0.0)
                .map(|v| {
                    term(
                        v.channel.is_punctured(),
                        v.degrees.as_slice(),
                        v.coeff,
                        &var_sockets,
                    )
                })
                .collect(),
            chks: ens
                .chk_classes()
                .iter()
                .filter(|c| c.coeff > 0.0)
                .map(|c| term(false, c.degrees.as_slice(), c.coeff, &chk_sockets))
                .collect(),
            chk_active: chk_sockets.iter().map(|&s| s > 0.0).collect(),
        }
    }
}

/// `prod_j z_j^(d_j - [j == skip])`.
#[inline]
pub(crate) fn leave_one_out(z: &[f64], d: &[u32], skip: usize) -> f64 {
    let mut p = 1.0;
    for (j, (&zj, &dj)) in z.iter().zip(d).enumerate() {
        let e = if j == skip { dj - 1 } else { dj };
        if e > 0 {
            p *= zj.powi(e as i32);
        }
    }
    p
}

/// `prod_j z_j^d_j`.
#[inline]
pub(crate) fn full_product(z: &[f64], d: &[u32]) -> f64 {
    let mut p = 1.0;
    for (&zj, &dj) in z.iter().zip(d) {
        if dj > 0 {
            p *= zj.powi(dj as i32);
        }
    }
    p
}

/// Convergence bookkeeping shared by both channels: success when the metric
/// drops to `tol`, failure when it has not decreased by a relative
/// `rel_stall` over `window` iterations.
pub(crate) struct StallDetector {
    history: Vec<f64>,
    window: usize,
    rel_stall: f64,
}

impl StallDetector {
    pub fn new(window: usize, rel_stall: f64) -> Self {
        StallDetector {
            history: Vec::with_capacity(window + 1),
            window,
            rel_stall,
        }
    }

    /// Records a metric value; returns true when progress has stalled.
    pub fn push(&mut self, metric: f64) -> bool {
        self.history.push(metric);
        let n = self.history.len();
        if self.window == 0 || n <= self.window {
            return false;
        }
        let old = self.history[n - 1 - self.window];
        metric > old * (1.0 - self.rel_stall)
    }
}
