//! Exponentially scaled modified Bessel function of order zero.
//!
//! `i0e(x) = exp(-x) * I0(x)` never overflows, which is what the Rice density
//! needs at large location parameters. Power series below the crossover,
//! asymptotic expansion above; both branches agree to ~1e-14 at x = 30.

/// Crossover between the power series and the asymptotic expansion.
const SERIES_LIMIT: f64 = 30.0;

/// `exp(-|x|) * I0(x)` for `x >= 0`, accurate to about 1e-13 relative.
pub fn i0e(x: f64) -> f64 {
    debug_assert!(x >= 0.0, "i0e expects x >= 0");
    if x < SERIES_LIMIT {
        // I0(x) = sum_k (x^2/4)^k / (k!)^2 ; all terms positive, no cancellation.
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-18 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // i0e(x) ~ (2*pi*x)^(-1/2) * sum_k c_k / (8x)^k with
        // c_k = (1^2 * 3^2 * ... * (2k-1)^2) / k!, truncated at the smallest term.
        let inv8x = 1.0 / (8.0 * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) * inv8x / k;
            if next >= term || next < 1e-17 * sum {
                sum += next * 0.5; // split the stopping term to center the truncation error
                break;
            }
            sum += next;
            term = next;
            k += 1.0;
            if k > 40.0 {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}
