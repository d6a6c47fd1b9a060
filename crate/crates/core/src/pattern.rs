//! Transmitted interference pattern: the DFT of the dechirped interferer.
//!
//! Each bin is the sum of two Dirichlet-kernel partial sums, one per
//! interferer symbol segment:
//!
//! ```text
//! R_k = A_{k,1} e^{-j theta_{k,1}} + A_{k,2} e^{-j theta_{k,2}}
//! A_{k,1} = sin(pi (s1 - k - tau) ceil(tau) / N)     / sin(pi (s1 - k - tau) / N)
//! A_{k,2} = sin(pi (s2 - k - tau) (N - ceil(tau)) / N) / sin(pi (s2 - k - tau) / N)
//! ```
//!
//! The sine ratios hit 0/0 whenever `s - k - tau` crosses a multiple of `N`
//! (always at integer `tau` for the two aligned bins); those points and a
//! guard band around them are evaluated through the exact shifted identity
//! `sin(M(m pi + d))/sin(m pi + d) = sign * sin(M d)/sin(d)`, which limits to
//! the coherent phasor count `+-M` without cancellation. [`pattern_dft`]
//! computes the same pattern through the full demodulation pipeline and is
//! the ground truth the closed form is tested against.

use num_complex::Complex64;

use crate::channel::{synthesize_interferer, InterfererState};
use crate::error::Result;
use crate::phy::{demod_spectrum, ModulationParams};

/// Per-bin decomposition of the pattern into the two segment kernels.
#[derive(Debug, Clone, Copy)]
pub struct PatternTerm {
    pub a1: f64,
    pub a2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl PatternTerm {
    /// Assemble the complex bin value.
    pub fn bin(&self) -> Complex64 {
        self.a1 * Complex64::from_polar(1.0, -self.theta1)
            + self.a2 * Complex64::from_polar(1.0, -self.theta2)
    }

    /// Bin magnitude through the explicit two-term cosine form.
    pub fn magnitude(&self) -> f64 {
        (self.a1 * self.a1
            + self.a2 * self.a2
            + 2.0 * self.a1 * self.a2 * (self.theta1 - self.theta2).cos())
        .max(0.0)
        .sqrt()
    }
}

/// The pattern over all `N` bins.
#[derive(Debug, Clone)]
pub struct InterferencePattern {
    bins: Vec<Complex64>,
}

impl InterferencePattern {
    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn magnitude(&self, k: usize) -> f64 {
        self.bins[k].norm()
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm()).collect()
    }

    /// `sum_k |R_k|^2`; equals `N^2` for any unit-modulus interferer.
    pub fn total_energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Ground-truth pattern: demodulation spectrum of the synthesized interferer.
pub fn pattern_dft(i: &InterfererState, p: &ModulationParams) -> Result<InterferencePattern> {
    let wave = synthesize_interferer(i, p)?;
    Ok(InterferencePattern {
        bins: demod_spectrum(&wave, p)?,
    })
}

/// Below this distance (radians) from a kernel singularity the shifted exact
/// identity takes over from the direct sine ratio.
const KERNEL_GUARD: f64 = 1e-6;

/// `sin(pi u m / n) / sin(pi u / n)` for `u = d - lambda` with integer `d`
/// and fractional `lambda`, exact near the singularities.
///
/// Both sine arguments are reduced with integer arithmetic modulo `2n`
/// before any floating-point trig, so precision is independent of how large
/// `u` or `m * u` grow.
fn dirichlet_kernel(d: i64, lambda: f64, m: i64, n: usize) -> f64 {
    debug_assert!((0.0..1.0).contains(&lambda));
    if m == 0 {
        return 0.0;
    }
    let two_n = 2 * n as i64;
    let nf = n as f64;
    // denominator position in half-turns, reduced to (-1, 1]
    let mut t_den = ((d.rem_euclid(two_n)) as f64 - lambda) / nf;
    if t_den > 1.0 {
        t_den -= 2.0;
    }
    let nearest = t_den.round(); // -1, 0, or 1
    let delta = std::f64::consts::PI * (t_den - nearest);
    if delta.abs() < KERNEL_GUARD {
        // sign carried by sin(M(m pi + d)) / sin(m pi + d) = (-1)^(m(M-1)) ...
        let sign = if (nearest as i64 * (m - 1)).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        if delta == 0.0 {
            return sign * m as f64;
        }
        return sign * (m as f64 * delta).sin() / delta.sin();
    }
    // numerator position, same exact reduction
    let mut t_num = ((m * d).rem_euclid(two_n) as f64 - m as f64 * lambda) / nf;
    t_num = t_num.rem_euclid(2.0);
    if t_num > 1.0 {
        t_num -= 2.0;
    }
    (std::f64::consts::PI * t_num).sin() / (std::f64::consts::PI * t_den).sin()
}

/// The two kernel amplitudes and phases for bin `k`.
pub fn pattern_term(i: &InterfererState, p: &ModulationParams, k: usize) -> PatternTerm {
    let n = p.n() as f64;
    let tau = i.tau();
    let l = i.tau_whole();
    let lambda = i.tau_frac();
    let ceil = tau.ceil();
    let m1 = ceil as i64;
    let m2 = p.n() as i64 - m1;
    let (s1, s2) = (i.s_i1().0 as f64, i.s_i2().0 as f64);
    let kf = k as f64;

    // u = s - k - tau split as (s - k - L) - lambda
    let a1 = dirichlet_kernel(i.s_i1().0 as i64 - k as i64 - l, lambda, m1, p.n());
    let a2 = dirichlet_kernel(i.s_i2().0 as i64 - k as i64 - l, lambda, m2, p.n());

    let pi_over_n = std::f64::consts::PI / n;
    let theta1 = pi_over_n
        * (-tau * tau
            + (lambda - l as f64) * n
            + s1 * (2.0 * tau - ceil + 1.0)
            + kf * (ceil - 1.0)
            + tau * (ceil - 1.0));
    let theta2 = pi_over_n
        * (-tau * tau
            + s2 * (2.0 * tau - ceil + 1.0 - n)
            + kf * (ceil - 1.0 + n)
            + tau * (ceil - 1.0));
    PatternTerm {
        a1,
        a2,
        theta1,
        theta2,
    }
}

/// Closed-form pattern over all bins.
pub fn pattern_closed_form(
    i: &InterfererState,
    p: &ModulationParams,
) -> Result<InterferencePattern> {
    let bins = (0..p.n()).map(|k| pattern_term(i, p, k).bin()).collect();
    Ok(InterferencePattern { bins })
}

/// Rounded offset `floor(tau + 1/2) mod N`: the nominal label of the
/// dominant interference bin. Halves round up, `N - 1/2` and above wrap to 0.
pub fn k_max_estimate(i: &InterfererState, p: &ModulationParams) -> u32 {
    let n = p.n() as i64;
    ((i.tau() + 0.5).floor() as i64).rem_euclid(n) as u32
}

/// Single-bin estimate of the largest pattern magnitude: the two-term bin
/// magnitude evaluated where a segment kernel actually peaks.
///
/// The second kernel peaks at bin `[s2 - round(tau)] mod N` and the first at
/// `[s1 - round(tau)] mod N`; the larger of the two candidate magnitudes
/// approximates `max_k |R_k|` while touching only two bins. Evaluating at
/// the bare rounded offset instead (the nominal [`k_max_estimate`] label)
/// lands on a generically weak bin and underestimates the maximum by roughly
/// the kernel count, which the DFT oracle rules out. The signed kernel sum
/// `|A_1 + A_2|` is avoided because the individual kernel signs flip with
/// the mod-N bin wrap; the full two-term magnitude is wrap-invariant, so the
/// estimate depends on the interfering symbols only through their
/// difference, matching the aggregate symbol sums built on top of it.
pub fn r_max_approx(i: &InterfererState, p: &ModulationParams) -> f64 {
    let n = p.n() as i64;
    let rt = (i.tau() + 0.5).floor() as i64;
    let mut best = 0.0f64;
    for s in [i.s_i1().0 as i64, i.s_i2().0 as i64] {
        let k = (s - rt).rem_euclid(n) as usize;
        best = best.max(pattern_term(i, p, k).magnitude());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::Symbol;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(sf: u32) -> ModulationParams {
        ModulationParams::new(sf).unwrap()
    }

    fn state(tau: f64, s1: u32, s2: u32, p: &ModulationParams) -> InterfererState {
        InterfererState::new(1.0, 0.0, tau, Symbol(s1), Symbol(s2), p).unwrap()
    }

    #[test]
    fn closed_form_matches_dft_oracle() {
        // the full-scale version of this sweep is an acceptance criterion;
        // this keeps a fast slice of it next to the implementation
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for sf in 2..=7 {
            let p = params(sf);
            let n = p.n() as f64;
            for trial in 0..60 {
                let tau = match trial % 4 {
                    1 => rng.random_range(0..p.n() as u32) as f64,
                    2 => (rng.random_range(0..p.n() as u32) as f64 + 1e-12).min(n - 1e-9),
                    3 => (rng.random_range(1..p.n() as u32) as f64 - 1e-12).max(0.0),
                    _ => rng.random_range(0.0..n),
                };
                let i = state(
                    tau,
                    rng.random_range(0..p.n() as u32),
                    rng.random_range(0..p.n() as u32),
                    &p,
                );
                let dft = pattern_dft(&i, &p).unwrap();
                let closed = pattern_closed_form(&i, &p).unwrap();
                for k in 0..p.n() {
                    let err = (closed.magnitude(k) - dft.magnitude(k)).abs();
                    assert!(
                        err <= 1e-9 * n,
                        "sf={sf} tau={tau} s1={} s2={} k={k}: err={err:e}",
                        i.s_i1().0,
                        i.s_i2().0
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_matches_dft_in_phase_too() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p = params(7);
        for _ in 0..40 {
            let i = state(
                rng.random_range(0.0..p.n() as f64),
                rng.random_range(0..p.n() as u32),
                rng.random_range(0..p.n() as u32),
                &p,
            );
            let dft = pattern_dft(&i, &p).unwrap();
            let closed = pattern_closed_form(&i, &p).unwrap();
            for k in 0..p.n() {
                assert!(
                    (closed.bins()[k] - dft.bins()[k]).norm() <= 1e-9 * p.n() as f64,
                    "k={k}"
                );
            }
        }
    }

    #[test]
    fn aligned_interferer_is_a_clean_symbol() {
        let p = params(6);
        let i = state(0.0, 17, 42, &p);
        let dft = pattern_dft(&i, &p).unwrap();
        for k in 0..p.n() {
            if k == 42 {
                assert!((dft.magnitude(k) - p.n() as f64).abs() < 1e-9 * p.n() as f64);
            } else {
                assert!(dft.magnitude(k) < 1e-9 * p.n() as f64);
            }
        }
    }

    #[test]
    fn integer_offset_splits_energy_between_two_bins() {
        let p = params(6);
        let n = p.n();
        // geometry chosen so each segment's kernel has a zero on the other
        // segment's aligned bin: the two bins then carry exactly L and N - L
        let l = 16u32;
        let (s1, s2) = (4u32, 40u32);
        let i = state(l as f64, s1, s2, &p);
        let dft = pattern_dft(&i, &p).unwrap();
        let k1 = ((s1 + n as u32 - l) % n as u32) as usize;
        let k2 = ((s2 + n as u32 - l) % n as u32) as usize;
        assert_ne!(k1, k2);
        assert_relative_eq!(dft.magnitude(k1), l as f64, epsilon = 1e-8);
        assert_relative_eq!(dft.magnitude(k2), (n as u32 - l) as f64, epsilon = 1e-8);
        assert_relative_eq!(dft.total_energy(), (n * n) as f64, max_relative = 1e-10);

        // generically the aligned bins dominate but carry kernel leakage from
        // the other segment, bounded by |A| <= 1/sin(pi u / N)
        let i = state(13.0, 5, 40, &p);
        let dft = pattern_dft(&i, &p).unwrap();
        let k1 = ((5 + n as u32 - 13) % n as u32) as usize;
        let k2 = ((40 + n as u32 - 13) % n as u32) as usize;
        assert!((dft.magnitude(k1) - 13.0).abs() < 1.5);
        assert!((dft.magnitude(k2) - 51.0).abs() < 1.5);
        assert_relative_eq!(dft.total_energy(), (n * n) as f64, max_relative = 1e-10);
    }

    #[test]
    fn closed_form_hits_lhopital_values_exactly() {
        let p = params(6);
        let n = p.n() as u32;
        let l = 9u32;
        let (s1, s2) = (20u32, 3u32);
        let i = state(l as f64, s1, s2, &p);
        let k1 = ((s1 + n - l) % n) as usize;
        let k2 = ((s2 + n - l) % n) as usize;
        let t1 = pattern_term(&i, &p, k1);
        assert_eq!(t1.a1.abs(), l as f64);
        let t2 = pattern_term(&i, &p, k2);
        assert_eq!(t2.a2.abs(), (n - l) as f64);
    }

    #[test]
    fn zero_offset_zeroes_first_kernel() {
        let p = params(5);
        let i = state(0.0, 7, 11, &p);
        for k in 0..p.n() {
            assert_eq!(pattern_term(&i, &p, k).a1, 0.0, "k={k}");
        }
    }

    #[test]
    fn parseval_on_closed_form() {
        let p = params(7);
        let i = state(19.71, 3, 100, &p);
        let closed = pattern_closed_form(&i, &p).unwrap();
        assert_relative_eq!(
            closed.total_energy(),
            (p.n() * p.n()) as f64,
            max_relative = 1e-6
        );
    }

    #[test]
    fn term_magnitude_matches_complex_norm() {
        let p = params(7);
        let i = state(55.37, 90, 17, &p);
        for k in (0..p.n()).step_by(11) {
            let t = pattern_term(&i, &p, k);
            assert_relative_eq!(t.magnitude(), t.bin().norm(), epsilon = 1e-9);
        }
    }

    #[test]
    fn bin_shift_symmetry() {
        // advancing both interferer symbols by one rotates the magnitudes
        let p = params(5);
        let n = p.n();
        for &tau in &[7.0, 12.34] {
            let base = pattern_closed_form(&state(tau, 9, 22, &p), &p).unwrap();
            let shifted = pattern_closed_form(&state(tau, 10, 23, &p), &p).unwrap();
            for k in 0..n {
                assert_relative_eq!(
                    shifted.magnitude((k + 1) % n),
                    base.magnitude(k),
                    epsilon = 1e-9,
                    max_relative = 1e-9
                );
            }
        }
        // the rotation survives a symbol wrapping past N only at whole-chip
        // offsets; a fractional offset rotates the wrapped segment's kernel
        // by e^(-j 2 pi tau) relative to the other and reshapes the pattern,
        // which the DFT oracle confirms (closed form and DFT agree on it)
        let base = pattern_closed_form(&state(7.0, 31, 22, &p), &p).unwrap();
        let wrapped = pattern_closed_form(&state(7.0, 0, 23, &p), &p).unwrap();
        for k in 0..n {
            assert_relative_eq!(
                wrapped.magnitude((k + 1) % n),
                base.magnitude(k),
                epsilon = 1e-9,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn continuity_toward_integer_offsets() {
        let p = params(6);
        let l = 21.0;
        for (s1, s2) in [(4u32, 50u32), (33, 33)] {
            let at = pattern_closed_form(&state(l, s1, s2, &p), &p).unwrap();
            for probe in [l - 1e-8, l + 1e-8] {
                let near = pattern_closed_form(&state(probe, s1, s2, &p), &p).unwrap();
                for k in 0..p.n() {
                    assert!(
                        (near.magnitude(k) - at.magnitude(k)).abs() < 1e-6 * p.n() as f64,
                        "k={k} probe={probe}"
                    );
                }
            }
        }
    }

    #[test]
    fn k_max_rounding() {
        let p = params(7);
        assert_eq!(k_max_estimate(&state(5.2, 0, 0, &p), &p), 5);
        assert_eq!(k_max_estimate(&state(5.5, 0, 0, &p), &p), 6);
        assert_eq!(k_max_estimate(&state(127.7, 0, 0, &p), &p), 0);
        assert_eq!(k_max_estimate(&state(127.5, 0, 0, &p), &p), 0);
    }

    #[test]
    fn k_max_wrap_points_at_dominant_bin() {
        // tau near N wraps to bin 0; with both symbols at 0 the pattern
        // maximum really is at that bin
        let p = params(7);
        let i = state(127.7, 0, 0, &p);
        assert_eq!(k_max_estimate(&i, &p), 0);
        let dft = pattern_dft(&i, &p).unwrap();
        let mags = dft.magnitudes();
        let argmax = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 0);
    }

    #[test]
    fn r_max_aligned_case_returns_n() {
        let p = params(5);
        let i = state(0.0, 12, 12, &p);
        assert_relative_eq!(r_max_approx(&i, &p), p.n() as f64, epsilon = 1e-9);
    }

    #[test]
    fn r_max_half_chip_same_symbols() {
        let p = params(5);
        let i = state(0.5, 9, 9, &p);
        let approx = r_max_approx(&i, &p);
        let brute = pattern_dft(&i, &p)
            .unwrap()
            .magnitudes()
            .into_iter()
            .fold(0.0f64, f64::max);
        assert!(
            (approx / brute - 1.0).abs() < 0.2,
            "approx={approx} brute={brute}"
        );
    }

    #[test]
    fn r_max_tracks_true_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let p = params(7);
        let mut ratios: Vec<f64> = (0..1000)
            .map(|_| {
                let i = state(
                    rng.random_range(0.0..p.n() as f64),
                    rng.random_range(0..p.n() as u32),
                    rng.random_range(0..p.n() as u32),
                    &p,
                );
                let approx = r_max_approx(&i, &p);
                let brute = pattern_dft(&i, &p)
                    .unwrap()
                    .magnitudes()
                    .into_iter()
                    .fold(0.0f64, f64::max);
                approx / brute
            })
            .collect();
        ratios.sort_by(f64::total_cmp);
        let inside = ratios.iter().filter(|r| (0.5..=1.5).contains(*r)).count();
        println!(
            "r_max/true ratio over 1000 draws: min={:.3} p1={:.3} median={:.3} p99={:.3} max={:.3} in [0.5,1.5]: {}",
            ratios[0],
            ratios[9],
            ratios[499],
            ratios[989],
            ratios[999],
            inside
        );
        assert!(
            ratios[9] >= 0.5 && ratios[989] <= 1.5,
            "1st/99th percentile outside [0.5, 1.5]"
        );
        assert!(inside >= 980, "only {inside}/1000 ratios inside [0.5, 1.5]");
    }
}
