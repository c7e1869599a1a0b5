use super::ChannelKind;
use crate::error::{Error, Result};

const SIMPSON_INTERVALS: usize = 4000;
const Z_RANGE: f64 = 10.0;

/// `ln(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Capacity in bits of the binary-input AWGN channel with unit-energy
/// antipodal inputs and noise standard deviation `sigma`.
pub fn biawgn_capacity(sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let h = 2.0 * Z_RANGE / SIMPSON_INTERVALS as f64;
    let f = |z: f64| {
        let y = 1.0 + sigma * z;
        let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        density * softplus(-2.0 * y / s2)
    };
    let mut sum = f(-Z_RANGE) + f(Z_RANGE);
    for k in 1..SIMPSON_INTERVALS {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(-Z_RANGE + k as f64 * h);
    }
    1.0 - sum * h / 3.0 / std::f64::consts::LN_2
}

/// Worst channel parameter at which `rate` is achievable.
pub fn shannon_limit(kind: ChannelKind, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Shannon limit needs a rate in (0, 1), got {rate}"
        )));
    }
    Ok(match kind {
        ChannelKind::Bec => 1.0 - rate,
        ChannelKind::BiAwgn => {
            let (mut lo, mut hi) = (1e-3, 1e3);
            while hi - lo > 1e-12 * hi {
                let mid = 0.5 * (lo + hi);
                if biawgn_capacity(mid) > rate {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_limits() {
        assert!((biawgn_capacity(0.05) - 1.0).abs() < 1e-9);
        assert!(biawgn_capacity(50.0) < 1e-3);
    }

    #[test]
    fn capacity_matches_low_snr_expansion() {
        // For large sigma, C ~ snr / (2 ln 2) - snr^2 / (4 ln 2) with snr = 1/sigma^2.
        let sigma: f64 = 20.0;
        let snr = 1.0 / (sigma * sigma);
        let approx = (snr / 2.0 - snr * snr / 4.0) / std::f64::consts::LN_2;
        assert!((biawgn_capacity(sigma) - approx).abs() < 1e-8);
    }

    #[test]
    fn known_limits() {
        let half = shannon_limit(ChannelKind::BiAwgn, 0.5).unwrap();
        assert!((half - 0.9787).abs() < 2e-4, "{half}");
        let tenth = shannon_limit(ChannelKind::BiAwgn, 0.1).unwrap();
        assert!((tenth - 2.5926).abs() < 2e-4, "{tenth}");
        assert_eq!(shannon_limit(ChannelKind::Bec, 0.25).unwrap(), 0.75);
        assert!(shannon_limit(ChannelKind::Bec, 1.0).is_err());
    }
}
