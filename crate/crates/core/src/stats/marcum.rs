//! First-order Marcum Q function and its complement, stable across the whole
//! parameter range the error-rate integrals visit (locations up to ~2e4).
//!
//! `Q1(a, b) = P(|a + n| > b)` for circularly symmetric unit-per-component
//! Gaussian `n`, i.e. the upper tail of a scale-1 Rice distribution.
//!
//! Two regimes with a documented switchover at `a = 30`:
//!
//! * `a <= 30`: Poisson-mixture series. `Q1 = sum_n pois(n; a^2/2) *
//!   Q_gamma(n+1, b^2/2)`, summed outward from the Poisson mode with the
//!   incomplete-gamma terms advanced by recurrence. Exact to roundoff; the
//!   smallest complementary mass representable here (~exp(-450)) is still a
//!   normal double.
//! * `a > 30`: the Rice density collapses onto a Gaussian ridge of unit width
//!   around `t = a`, so the tail integral is evaluated by adaptive quadrature
//!   of `t * exp(-(t-a)^2/2) * i0e(a t)` over at most `TAIL_SIGMAS` widths.
//!   A plain normal approximation is nowhere near the 1e-10 target in the
//!   transition region, which is why the integral form is kept exact.
//!
//! Beyond `|a - b| > TAIL_SIGMAS` the minority tail is below 1e-380 and the
//! function saturates to exactly 0 or 1; the log forms keep the dominant
//! quadratic term so products of many factors still degrade gracefully.

use super::bessel::i0e;
use super::quad::{integrate, Quadrature};

/// Width, in unit standard deviations, beyond which a tail is treated as lost
/// to double-precision underflow (exp(-42^2/2) ~ 4e-384).
const TAIL_SIGMAS: f64 = 42.0;

/// Series/quadrature switchover.
const SERIES_LIMIT_A: f64 = 30.0;

/// Half-width of the `|b - a|` band handled by the series. Outside it the
/// minority tail drops below ~1e-16 and the Poisson sum cannot resolve it
/// against its absolute truncation threshold; the factored quadrature can.
const SERIES_BAND: f64 = 12.0;

/// First-order Marcum Q, clamped to [0, 1].
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    debug_assert!(
        a >= 0.0 && b >= 0.0,
        "marcum_q1 expects nonnegative arguments"
    );
    if a == 0.0 {
        return (-b * b / 2.0).exp();
    }
    if b == 0.0 {
        return 1.0;
    }
    if b >= a + TAIL_SIGMAS {
        return 0.0;
    }
    if b <= a - TAIL_SIGMAS {
        return 1.0;
    }
    // The series' lower side is exact for any gap (its down-sweep runs to
    // n = 0), so only the upper-tail minority needs the band restriction.
    if a <= SERIES_LIMIT_A && b - a <= SERIES_BAND {
        let (p, q) = series_pq(a, b);
        return if q <= p {
            q.clamp(0.0, 1.0)
        } else {
            (1.0 - p).clamp(0.0, 1.0)
        };
    }
    if b >= a {
        tail_integral(a, b, b, a + TAIL_SIGMAS).clamp(0.0, 1.0)
    } else {
        (1.0 - tail_integral(a, b, (a - TAIL_SIGMAS).max(0.0), b)).clamp(0.0, 1.0)
    }
}

/// `ln(1 - Q1(a, b))`, the log Rice CDF, stable when the CDF is tiny.
///
/// Once the true value falls below the representable range the leading
/// Gaussian exponent `-(a-b)^2/2` is returned; by then the factor has no
/// effect on any product except to drive it to zero, which it still does.
pub fn ln_marcum_p1(a: f64, b: f64) -> f64 {
    debug_assert!(a >= 0.0 && b >= 0.0);
    if b == 0.0 {
        return f64::NEG_INFINITY;
    }
    if a == 0.0 {
        // Rayleigh: ln(1 - exp(-b^2/2))
        return ln1mexp(b * b / 2.0);
    }
    if b >= a + SERIES_BAND {
        // the complement is below exp(-72); ln F = -Q1 rounds to zero
        return 0.0;
    }
    if b > a {
        let q = marcum_q1(a, b);
        return if q < 1e-3 {
            -q * (1.0 + q * (0.5 + q / 3.0))
        } else {
            (1.0 - q).ln()
        };
    }
    // b <= a: the CDF itself may be far below double range
    if a <= SERIES_LIMIT_A {
        let (p, _) = series_pq(a, b);
        if p > 0.0 {
            return p.ln();
        }
    }
    let lo = (a - TAIL_SIGMAS).max(0.0);
    if b <= lo {
        // keep the dominant quadratic decay; subleading factors are
        // irrelevant once the log is below -880
        return -(a - b) * (a - b) / 2.0;
    }
    // factor out the integrand peak at t = b so the quadrature stays scaled
    let shift = (b - a) * (b - a) / 2.0;
    let q = Quadrature::new(lo, b)
        .expect("lo < b by construction")
        .with_tolerance(1e-12, 1e-280);
    let scaled = integrate(
        |t| t * i0e(a * t) * (shift - (t - a) * (t - a) / 2.0).exp(),
        &q,
    )
    .unwrap_or_else(best_estimate);
    if scaled > 0.0 {
        -shift + scaled.ln()
    } else {
        -shift
    }
}

fn best_estimate(e: crate::error::Error) -> f64 {
    match e {
        crate::error::Error::QuadratureNonConvergence { best_estimate, .. } => best_estimate,
        _ => f64::NAN,
    }
}

/// `ln(1 - exp(-z))` for `z >= 0` without cancellation.
pub fn ln1mexp(z: f64) -> f64 {
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if z < std::f64::consts::LN_2 {
        (-(-z).exp_m1()).ln()
    } else {
        (-(-z).exp()).ln_1p()
    }
}

/// Poisson-mixture series, returning `(P1, Q1)` accumulated separately so the
/// smaller side keeps full relative accuracy.
fn series_pq(a: f64, b: f64) -> (f64, f64) {
    let x = a * a / 2.0; // Poisson intensity
    let y = b * b / 2.0; // gamma argument
    let n0 = x.floor().max(0.0);
    // w_n = e^-x x^n / n!, t_n = e^-y y^n / n!, g_n = P_gamma(n+1, y)
    let (w0, t0, g0) = if n0 == 0.0 {
        ((-x).exp(), (-y).exp(), -(-y).exp_m1())
    } else {
        (
            (-x + n0 * x.ln() - libm::lgamma(n0 + 1.0)).exp(),
            (-y + n0 * y.ln() - libm::lgamma(n0 + 1.0)).exp(),
            reg_lower_gamma(n0 + 1.0, y),
        )
    };
    let mut psum = 0.0;
    let mut qsum = 0.0;
    let mut mass = 0.0;

    // climb up from the mode
    let (mut w, mut t, mut g, mut n) = (w0, t0, g0, n0);
    loop {
        psum += w * g;
        qsum += w * (1.0 - g);
        mass += w;
        n += 1.0;
        w *= x / n;
        t *= y / n;
        g -= t;
        if g < 0.0 {
            g = 0.0;
        }
        if w < 1e-20 && n > x {
            break;
        }
    }
    // and down from just below it
    if n0 >= 1.0 {
        let (mut w, mut t, mut g, mut n) = (w0, t0, g0, n0);
        loop {
            // move from n to n-1 first, then accumulate
            w *= n / x;
            g += t;
            t *= n / y;
            n -= 1.0;
            if g > 1.0 {
                g = 1.0;
            }
            psum += w * g;
            qsum += w * (1.0 - g);
            mass += w;
            if n == 0.0 || (w < 1e-20 && mass > 0.999999) {
                break;
            }
        }
    }
    // the tiny unsummed Poisson mass belongs almost entirely to the majority side
    let missing = (1.0 - mass).max(0.0);
    if psum > qsum {
        (psum + missing, qsum)
    } else {
        (psum, qsum + missing)
    }
}

/// `int_lo^hi t exp(-(t-a)^2/2) i0e(a t) dt` with the peak factored out.
fn tail_integral(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    // peak of the restricted integrand sits at the end nearest t = a
    let t_peak = if b >= a { lo } else { hi };
    let shift = (t_peak - a) * (t_peak - a) / 2.0;
    let q = Quadrature::new(lo, hi)
        .expect("integration interval is ordered")
        .with_tolerance(1e-12, 1e-280);
    let scaled = integrate(
        |t| t * i0e(a * t) * (shift - (t - a) * (t - a) / 2.0).exp(),
        &q,
    )
    .unwrap_or_else(best_estimate);
    (-shift).exp() * scaled
}

/// Regularized lower incomplete gamma `P(s, x)` (series / continued fraction).
fn reg_lower_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_front = -x + s * x.ln() - libm::lgamma(s);
    if ln_front < -745.0 {
        // front factor underflows: P is 0 or 1 depending on which side of the
        // mean we are on
        return if x > s { 1.0 } else { 0.0 };
    }
    if x < s + 1.0 {
        // series for P
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs() {
            term *= x / (s + k);
            sum += term;
            k += 1.0;
            if k > 10_000.0 {
                break;
            }
        }
        (ln_front.exp() * sum).min(1.0) // sum already includes the 1/s factor
    } else {
        // Lentz continued fraction for Q, then complement
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / 1e-300;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut i = 1.0;
        loop {
            let an = -i * (i - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < 1e-300 {
                d = 1e-300;
            }
            c = b + an / c;
            if c.abs() < 1e-300 {
                c = 1e-300;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 || i > 10_000.0 {
                break;
            }
            i += 1.0;
        }
        1.0 - ln_front.exp() * h
    }
}
