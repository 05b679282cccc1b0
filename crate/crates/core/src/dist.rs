//! Distribution helpers shared by both engines.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub const LN_2PI: f64 = 1.8378770664093453;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

pub fn std_normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Quantile of the standard normal, e.g. 1.959963984540054 at p = 0.975.
pub fn std_normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Two-sided p-value for a Wald statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    (2.0 * std_normal_cdf(-z.abs())).min(1.0)
}

pub fn chi_squared_cdf(df: f64, x: f64) -> f64 {
    ChiSquared::new(df).expect("df > 0").cdf(x)
}

/// Upper-tail probability of a chi-squared statistic.
pub fn chi_squared_sf(df: f64, x: f64) -> f64 {
    ChiSquared::new(df).expect("df > 0").sf(x)
}

/// Quantile of the chi-squared distribution by bisection on its CDF.
///
/// statrs's generic `inverse_cdf` returns NaN in the lower tail for small
/// degrees of freedom, so the inversion is done here.
pub fn chi_squared_quantile(df: f64, p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "p must be in [0, 1)");
    if p == 0.0 {
        return 0.0;
    }
    let dist = ChiSquared::new(df).expect("df > 0");
    let mut lo = 0.0_f64;
    let mut hi = (df + 10.0 * (2.0 * df).sqrt()).max(1.0);
    while dist.cdf(hi) < p && hi < 1e300 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// log N(x; mean, sd)
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (LN_2PI + z * z) - sd.ln()
}

/// log density of the half-normal |N(0, sd^2)| at tau >= 0.
pub fn half_normal_logpdf(tau: f64, sd: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    std::f64::consts::LN_2 + normal_logpdf(tau, 0.0, sd)
}

/// Quantile of the half-normal |N(0, sd^2)|.
pub fn half_normal_quantile(p: f64, sd: f64) -> f64 {
    sd * std_normal_quantile(0.5 + 0.5 * p)
}
