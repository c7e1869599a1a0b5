use super::graph::{leave_one_out, DeGraph, StallDetector};
use super::{DeConfig, DeOutcome, PhiKernel};
use crate::ensemble::Ensemble;

/// Mean above which the second piece of the tanh kernel is used. This is the
/// upper crossing of the two closed forms, so the kernel is continuous there.
pub const TANH_SEAM: f64 = 14.394_352_942_168_45;

const TANH_A: f64 = 0.4527;
const TANH_B: f64 = 0.86;
const TANH_C: f64 = 0.0218;

fn tanh_low(m: f64) -> f64 {
    (-TANH_A * m.powf(TANH_B) + TANH_C).exp().min(1.0)
}

fn tanh_high_ln(m: f64) -> f64 {
    0.5 * (std::f64::consts::PI / m).ln() - m / 4.0 + (1.0 - 10.0 / (7.0 * m)).ln()
}

pub fn phi(kernel: PhiKernel, m: f64) -> f64 {
    if m <= 0.0 {
        return 1.0;
    }
    match kernel {
        PhiKernel::SignError => libm::erfc(m.sqrt() / 2.0),
        PhiKernel::Tanh => {
            if m < TANH_SEAM {
                tanh_low(m)
            } else {
                tanh_high_ln(m).exp()
            }
        }
    }
}

/// Inverse of [`erfc`](libm::erfc) on `(0, 1]`, restricted to `[0, t_max]`.
fn erfc_inv(p: f64, t_max: f64) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    if p <= libm::erfc(t_max) {
        return t_max;
    }
    let ln_p = p.ln();
    let (mut lo, mut hi) = (0.0, t_max);
    let mut t = (-ln_p).sqrt().min(t_max) * 0.8;
    for _ in 0..100 {
        let e = libm::erfc(t);
        let h = e.ln() - ln_p;
        if h > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let dh = -std::f64::consts::FRAC_2_SQRT_PI * (-t * t).exp() / e;
        let mut next = t - h / dh;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-15 * t.max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

/// Inverse kernel, saturated at `m_max`.
pub fn phi_inv(kernel: PhiKernel, p: f64, m_max: f64) -> f64 {
    if p >= 1.0 {
        return 0.0;
    }
    if p <= phi(kernel, m_max) {
        return m_max;
    }
    let m = match kernel {
        PhiKernel::SignError => {
            let t = erfc_inv(p, m_max.sqrt() / 2.0);
            4.0 * t * t
        }
        PhiKernel::Tanh => {
            if p >= tanh_low(TANH_SEAM) {
                ((TANH_C - p.ln()) / TANH_A).powf(1.0 / TANH_B)
            } else {
                // ln(phi) is decreasing on the upper piece; bisect then polish.
                let target = p.ln();
                let (mut lo, mut hi) = (TANH_SEAM, m_max);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if tanh_high_ln(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-13 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    };
    m.min(m_max)
}

fn channel_mean(punctured: bool, sigma: f64) -> f64 {
    if punctured {
        0.0
    } else {
        2.0 / (sigma * sigma)
    }
}

/// Variable-side output in the kernel domain, `q_i`.
fn var_update(g: &DeGraph, sigma: f64, u: &[f64], kernel: PhiKernel, q: &mut [f64]) {
    q.iter_mut().for_each(|v| *v = 0.0);
    for t in &g.vars {
        let base = channel_mean(t.punctured, sigma)
            + t.degrees
                .iter()
                .zip(u)
                .map(|(&d, &ui)| f64::from(d) * ui)
                .sum::<f64>();
        for i in 0..g.edge_types {
            if t.weights[i] > 0.0 {
                q[i] += t.weights[i] * phi(kernel, base - u[i]);
            }
        }
    }
}

fn check_update(g: &DeGraph, q: &[f64], cfg: &DeConfig, u: &mut [f64], scratch: &mut [f64]) {
    for (s, &qi) in scratch.iter_mut().zip(q) {
        *s = 1.0 - qi.clamp(0.0, 1.0);
    }
    let mut acc = vec![0.0; g.edge_types];
    for t in &g.chks {
        for i in 0..g.edge_types {
            if t.weights[i] > 0.0 {
                acc[i] += t.weights[i] * (1.0 - leave_one_out(scratch, &t.degrees, i));
            }
        }
    }
    for i in 0..g.edge_types {
        u[i] = if g.chk_active[i] {
            phi_inv(cfg.kernel, acc[i], cfg.m_max)
        } else {
            0.0
        };
    }
}

/// Worst a-posteriori bit error probability `Q(sqrt(m / 2))`.
fn posterior(g: &DeGraph, sigma: f64, u: &[f64]) -> f64 {
    g.vars
        .iter()
        .map(|t| {
            let m = channel_mean(t.punctured, sigma)
                + t.degrees
                    .iter()
                    .zip(u)
                    .map(|(&d, &ui)| f64::from(d) * ui)
                    .sum::<f64>();
            0.5 * libm::erfc(m.max(0.0).sqrt() / 2.0)
        })
        .fold(0.0, f64::max)
}

pub(crate) fn run_graph(g: &DeGraph, sigma: f64, cfg: &DeConfig) -> DeOutcome {
    let me = g.edge_types;
    let mut u = vec![0.0; me];
    let mut q = vec![0.0; me];
    let mut scratch = vec![0.0; me];
    let mut stall = StallDetector::new(cfg.stall_window, cfg.rel_stall);
    let mut metric = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        var_update(g, sigma, &u, cfg.kernel, &mut q);
        check_update(g, &q, cfg, &mut u, &mut scratch);
        metric = posterior(g, sigma, &u);
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
    }
    DeOutcome {
        decodable: false,
        iterations: cfg.max_iter,
        metric,
    }
}

/// One full iteration on the BI-AWGN channel: check-to-variable means `u` in,
/// updated means out.
pub fn awgn_de_step(ens: &Ensemble, sigma: f64, u: &[f64], cfg: &DeConfig) -> Vec<f64> {
    let g = DeGraph::new(ens);
    let mut q = vec![0.0; g.edge_types];
    let mut scratch = vec![0.0; g.edge_types];
    var_update(&g, sigma, u, cfg.kernel, &mut q);
    let mut out = vec![0.0; g.edge_types];
    check_update(&g, &q, cfg, &mut out, &mut scratch);
    out
}

pub fn awgn_run(ens: &Ensemble, sigma: f64, cfg: &DeConfig) -> DeOutcome {
    run_graph(&DeGraph::new(ens), sigma, cfg)
}

pub fn awgn_decodable(ens: &Ensemble, sigma: f64, cfg: &DeConfig) -> bool {
    awgn_run(ens, sigma, cfg).decodable
}
