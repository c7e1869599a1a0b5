//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use metldpc::{CheckClass, Ensemble, VariableClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn read_data(rel: &str) -> String {
    std::fs::read_to_string(data_path(rel)).expect("bundled data file")
}

/// Plain LDPC ensemble in edge perspective: `(degree, fraction)` pairs.
#[derive(Debug, Clone)]
pub struct Scalar {
    pub lambda: Vec<(u32, f64)>,
    pub rho: Vec<(u32, f64)>,
    /// Node-perspective variable fractions, for the a-posteriori test.
    pub var_nodes: Vec<(u32, f64)>,
}

fn poly(p: &[(u32, f64)], x: f64) -> f64 {
    p.iter().map(|&(d, w)| w * x.powi(d as i32 - 1)).sum()
}

impl Scalar {
    /// `x -> eps * lambda(1 - rho(1 - x))`.
    pub fn step(&self, eps: f64, x: f64) -> f64 {
        eps * poly(&self.lambda, 1.0 - poly(&self.rho, 1.0 - x))
    }

    /// Decoding test with the same rules as the library: worst a-posteriori
    /// erasure probability below `tol`, iteration cap, and a stall window
    /// over which the metric must drop by a relative `rel`.
    pub fn decodes(&self, eps: f64, tol: f64, max_iter: usize, window: usize, rel: f64) -> bool {
        let mut x = eps;
        let mut history: Vec<f64> = Vec::new();
        for _ in 0..max_iter {
            let y = 1.0 - poly(&self.rho, 1.0 - x);
            let y = y.clamp(0.0, 1.0);
            let post = self
                .var_nodes
                .iter()
                .filter(|&&(_, w)| w > 0.0)
                .map(|&(d, _)| eps * y.powi(d as i32))
                .fold(0.0, f64::max);
            if post <= tol {
                return true;
            }
            history.push(post);
            let n = history.len();
            if n > window && post > history[n - 1 - window] * (1.0 - rel) {
                return false;
            }
            x = eps * poly(&self.lambda, y);
        }
        false
    }

    pub fn threshold(&self, tol: f64) -> f64 {
        let dec = |e: f64| self.decodes(e, 1e-7, 1000, 50, 1e-9);
        let (mut lo, mut hi) = (0.0, 1.0);
        if dec(hi) {
            return hi;
        }
        if !dec(lo) {
            return lo;
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if dec(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// A random irregular single-edge-type ensemble and its scalar description.
pub fn random_single_type(seed: u64) -> (Ensemble, Scalar) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |lo: u32, hi: u32, n: usize, rng: &mut ChaCha8Rng| {
        let mut ds: Vec<u32> = Vec::new();
        while ds.len() < n {
            let d = rng.random_range(lo..=hi);
            if !ds.contains(&d) {
                ds.push(d);
            }
        }
        ds.sort_unstable();
        let w: Vec<f64> = ds.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = w.iter().sum();
        ds.into_iter().zip(w.into_iter().map(|v| v / s)).collect::<Vec<_>>()
    };
    let nv = rng.random_range(1..=3);
    let nc = rng.random_range(1..=3);
    let var_nodes = pick(2, 7, nv, &mut rng);
    let rho = pick(8, 16, nc, &mut rng);
    let edges: f64 = var_nodes.iter().map(|&(d, l)| d as f64 * l).sum();
    let lambda: Vec<(u32, f64)> = var_nodes
        .iter()
        .map(|&(d, l)| (d, d as f64 * l / edges))
        .collect();
    let chk_nodes: Vec<(u32, f64)> = rho.iter().map(|&(d, r)| (d, edges * r / d as f64)).collect();
    let rate = 1.0 - chk_nodes.iter().map(|&(_, c)| c).sum::<f64>();
    let ens = Ensemble::new(
        1,
        var_nodes
            .iter()
            .map(|&(d, l)| VariableClass::transmitted(vec![d], l))
            .collect(),
        chk_nodes
            .iter()
            .map(|&(d, c)| CheckClass::new(vec![d], c))
            .collect(),
        rate,
    )
    .expect("well-formed random ensemble");
    (
        ens,
        Scalar {
            lambda,
            rho,
            var_nodes,
        },
    )
}
