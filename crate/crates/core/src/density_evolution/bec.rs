use super::graph::{full_product, leave_one_out, DeGraph, StallDetector};
use super::{DeConfig, DeOutcome};
use crate::ensemble::Ensemble;

fn channel_erasure(punctured: bool, eps: f64) -> f64 {
    if punctured {
        1.0
    } else {
        eps
    }
}

pub(crate) fn var_update(g: &DeGraph, eps: f64, y: &[f64], x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = 0.0);
    for t in &g.vars {
        let r = channel_erasure(t.punctured, eps);
        for i in 0..g.edge_types {
            if t.weights[i] > 0.0 {
                x[i] += t.weights[i] * r * leave_one_out(y, &t.degrees, i);
            }
        }
    }
}

pub(crate) fn check_update(g: &DeGraph, x: &[f64], y: &mut [f64], scratch: &mut [f64]) {
    for (s, &xi) in scratch.iter_mut().zip(x) {
        *s = 1.0 - xi;
    }
    let mut acc = vec![0.0; g.edge_types];
    for t in &g.chks {
        for i in 0..g.edge_types {
            if t.weights[i] > 0.0 {
                acc[i] += t.weights[i] * leave_one_out(scratch, &t.degrees, i);
            }
        }
    }
    for i in 0..g.edge_types {
        y[i] = if g.chk_active[i] {
            (1.0 - acc[i]).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
}

/// Worst a-posteriori erasure probability over variable classes.
pub(crate) fn posterior(g: &DeGraph, eps: f64, y: &[f64]) -> f64 {
    g.vars
        .iter()
        .map(|t| channel_erasure(t.punctured, eps) * full_product(y, &t.degrees))
        .fold(0.0, f64::max)
}

pub(crate) fn run_graph(g: &DeGraph, eps: f64, cfg: &DeConfig) -> DeOutcome {
    let me = g.edge_types;
    let mut x = vec![0.0; me];
    let mut y = vec![1.0; me];
    let mut scratch = vec![0.0; me];
    var_update(g, eps, &y, &mut x);
    let mut stall = StallDetector::new(cfg.stall_window, cfg.rel_stall);
    let mut metric = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        check_update(g, &x, &mut y, &mut scratch);
        metric = posterior(g, eps, &y);
        if metric <= cfg.de_tol {
            return DeOutcome {
                decodable: true,
                iterations: it,
                metric,
            };
        }
        if stall.push(metric) {
            return DeOutcome {
                decodable: false,
                iterations: it,
                metric,
            };
        }
        var_update(g, eps, &y, &mut x);
    }
    DeOutcome {
        decodable: false,
        iterations: cfg.max_iter,
        metric,
    }
}

/// One full iteration on the erasure channel: variable-to-check erasure
/// probabilities `x` in, updated `x` out.
pub fn bec_de_step(ens: &Ensemble, eps: f64, x: &[f64]) -> Vec<f64> {
    let g = DeGraph::new(ens);
    let mut y = vec![0.0; g.edge_types];
    let mut scratch = vec![0.0; g.edge_types];
    check_update(&g, x, &mut y, &mut scratch);
    let mut out = vec![0.0; g.edge_types];
    var_update(&g, eps, &y, &mut out);
    out
}

pub fn bec_run(ens: &Ensemble, eps: f64, cfg: &DeConfig) -> DeOutcome {
    run_graph(&DeGraph::new(ens), eps, cfg)
}

pub fn bec_decodable(ens: &Ensemble, eps: f64, cfg: &DeConfig) -> bool {
    bec_run(ens, eps, cfg).decodable
}
