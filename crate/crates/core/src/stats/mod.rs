//! Distribution functions and quadrature shared by every analytic error-rate
//! path: Rayleigh and Rice densities, the Marcum Q kernel, the order-statistic
//! density of the largest background bin, and log-domain CDF products.
//!
//! Scale conventions: all decision-metric work happens after normalizing DFT
//! bins so the background magnitude is Rayleigh with scale 1 and the signal
//! bin is Rice with scale 1. The general-scale forms are provided for
//! completeness and tests.

mod bessel;
mod marcum;
mod quad;

pub(crate) use marcum::ln1mexp;
pub use marcum::{ln_marcum_p1, marcum_q1};
pub use quad::{gauss_legendre, gauss_legendre_on, integrate, Quadrature};

use crate::error::{Error, Result};
use bessel::i0e;

/// Rayleigh density with scale `sigma`; zero for negative arguments.
pub fn rayleigh_pdf(y: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    if y < 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    y / s2 * (-y * y / (2.0 * s2)).exp()
}

/// Rayleigh CDF `1 - exp(-y^2 / (2 sigma^2))`; zero for negative arguments.
pub fn rayleigh_cdf(y: f64, sigma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    if y < 0.0 {
        return 0.0;
    }
    -((-y * y / (2.0 * sigma * sigma)).exp_m1())
}

fn check_rice_args(y: f64, v: f64, sigma: f64) -> Result<()> {
    if !y.is_finite() || !v.is_finite() || !sigma.is_finite() || v < 0.0 || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rice arguments out of domain: y={y}, v={v}, sigma={sigma}"
        )));
    }
    Ok(())
}

/// Rice density with location `v` and scale `sigma`.
///
/// Evaluated as `y/s^2 * exp(-(y-v)^2/(2 s^2)) * i0e(y v / s^2)` so the
/// Bessel factor never overflows, even for locations around 1e5.
pub fn rice_pdf(y: f64, v: f64, sigma: f64) -> Result<f64> {
    check_rice_args(y, v, sigma)?;
    if y < 0.0 {
        return Ok(0.0);
    }
    let s2 = sigma * sigma;
    Ok(y / s2 * (-(y - v) * (y - v) / (2.0 * s2)).exp() * i0e(y * v / s2))
}

/// Rice CDF, the complement of the Marcum Q function: `1 - Q1(v/s, y/s)`.
pub fn rice_cdf(y: f64, v: f64, sigma: f64) -> Result<f64> {
    check_rice_args(y, v, sigma)?;
    if y <= 0.0 {
        return Ok(0.0);
    }
    Ok(ln_marcum_p1(v / sigma, y / sigma).exp())
}

/// Scale-1 Rice density without validation; the hot-loop form.
#[inline]
pub(crate) fn rice_pdf_unit(y: f64, v: f64) -> f64 {
    debug_assert!(y >= 0.0 && v >= 0.0);
    y * (-(y - v) * (y - v) / 2.0).exp() * i0e(y * v)
}

/// Density of the largest of `n - 1` unit-scale Rayleigh background bins:
/// `(n-1) f_Ra(y; 1) F_Ra(y; 1)^(n-2)`, assembled in the log domain because
/// the CDF power underflows long before the density stops mattering.
pub fn max_background_pdf_awgn(y: f64, n: usize) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    ln_max_background_pdf_awgn(y, n).exp()
}

/// Log form of [`max_background_pdf_awgn`] for integrands built in log space.
pub(crate) fn ln_max_background_pdf_awgn(y: f64, n: usize) -> f64 {
    debug_assert!(n >= 2);
    if y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ln_pdf = y.ln() - y * y / 2.0;
    let ln_cdf = ln1mexp(y * y / 2.0);
    ((n - 1) as f64).ln() + ln_pdf + (n - 2) as f64 * ln_cdf
}

/// Sum of log Rice CDFs `sum_k ln F_Ri(y; v_k, 1)` over the given locations.
///
/// Returns negative infinity cleanly when any factor is exactly zero.
pub fn log_cdf_product(y: f64, locations: &[f64]) -> f64 {
    if y <= 0.0 {
        return if locations.is_empty() {
            0.0
        } else {
            f64::NEG_INFINITY
        };
    }
    let mut acc = 0.0;
    for &v in locations {
        acc += if v == 0.0 {
            ln1mexp(y * y / 2.0)
        } else {
            ln_marcum_p1(v, y)
        };
        if acc == f64::NEG_INFINITY {
            return acc;
        }
    }
    acc
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)` via the complementary
/// error function.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `H_n = sum_{k=1..n} 1/k`, summed smallest-first.
pub fn harmonic_number(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}
