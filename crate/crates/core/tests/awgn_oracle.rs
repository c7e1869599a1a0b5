//! Gaussian-approximation density evolution for the regular (3,6) ensemble
//! against scalar implementations written from first principles.

use metldpc::density_evolution::{awgn_de_step, threshold, ChannelKind, DeConfig, PhiKernel};
use metldpc::{CheckClass, Ensemble, VariableClass};

fn regular_3_6() -> Ensemble {
    Ensemble::new(
        1,
        vec![VariableClass::transmitted(vec![3], 1.0)],
        vec![CheckClass::new(vec![6], 0.5)],
        0.5,
    )
    .unwrap()
}

/// `1 - E[tanh(v/2)]` for `v ~ N(m, 2m)` by the trapezoid rule.
fn phi_exact(m: f64) -> f64 {
    if m <= 0.0 {
        return 1.0;
    }
    let s = (2.0 * m).sqrt();
    let n = 600;
    let (lo, hi) = (m - 10.0 * s, m + 10.0 * s);
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let v = lo + k as f64 * h;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let pdf = (-(v - m).powi(2) / (4.0 * m)).exp() / (4.0 * std::f64::consts::PI * m).sqrt();
        acc += w * (v / 2.0).tanh() * pdf;
    }
    1.0 - acc * h
}

fn invert(f: impl Fn(f64) -> f64, p: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (0.0, hi);
    if f(b) >= p {
        return b;
    }
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if f(mid) > p {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Scalar mean-domain recursion for the (3,6) ensemble; decodable when the
/// check-to-variable mean passes `target`.
fn scalar_decodes(phi: &dyn Fn(f64) -> f64, sigma: f64, target: f64) -> bool {
    let mut u = 0.0;
    for _ in 0..2000 {
        let next = check_to_var(phi, sigma, u);
        if next >= target {
            return true;
        }
        if next <= u + 1e-12 {
            return false;
        }
        u = next;
    }
    false
}

fn check_to_var(phi: &dyn Fn(f64) -> f64, sigma: f64, u: f64) -> f64 {
    let p = phi(2.0 / (sigma * sigma) + 2.0 * u);
    invert(phi, 1.0 - (1.0 - p).powi(5), 200.0)
}

fn scalar_threshold(phi: &dyn Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.8, 0.95);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if scalar_decodes(phi, mid, 40.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn tanh_kernel_threshold_matches_exact_gaussian_approximation() {
    // The exact map has a fixed point near u = 1 just above the threshold
    // and none just below it.
    let gap = |sigma: f64| {
        (0..=120)
            .map(|k| {
                let u = 0.7 + k as f64 * 0.005;
                check_to_var(&phi_exact, sigma, u) - u
            })
            .fold(f64::INFINITY, f64::min)
    };
    assert!(gap(0.8715) > 0.0 && gap(0.8720) < 0.0);
    let oracle = scalar_threshold(&phi_exact);
    assert!((0.8715..0.8720).contains(&oracle), "oracle {oracle}");

    let cfg = DeConfig {
        kernel: PhiKernel::Tanh,
        ..DeConfig::default()
    };
    let met = threshold(&regular_3_6(), ChannelKind::BiAwgn, &cfg).unwrap().threshold;
    assert!((met - oracle).abs() < 3e-3, "library {met} vs oracle {oracle}");
}

#[test]
fn sign_error_step_matches_scalar_recursion() {
    let ens = regular_3_6();
    let cfg = DeConfig::default();
    let phi = |m: f64| libm::erfc(m.max(0.0).sqrt() / 2.0);
    for sigma in [0.7, 0.85, 0.95] {
        for u in [0.0, 0.3, 1.0, 2.5, 6.0] {
            let m_ch = 2.0 / (sigma * sigma);
            let p = phi(m_ch + 2.0 * u);
            let want = invert(phi, 1.0 - (1.0 - p).powi(5), cfg.m_max);
            let got = awgn_de_step(&ens, sigma, &[u], &cfg)[0];
            assert!(
                (got - want).abs() <= 1e-9 * want.max(1.0),
                "sigma {sigma} u {u}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn sign_error_threshold_matches_scalar_recursion() {
    let phi = |m: f64| libm::erfc(m.max(0.0).sqrt() / 2.0);
    let met = threshold(&regular_3_6(), ChannelKind::BiAwgn, &DeConfig::default())
        .unwrap()
        .threshold;
    let oracle = scalar_threshold(&phi);
    assert!((met - oracle).abs() < 5e-4, "library {met} vs oracle {oracle}");
}
