//! Discrete-time baseband chirp-spread-spectrum modulation and demodulation.
//!
//! A symbol `s` out of `N = 2^SF` is transmitted as a cyclically shifted
//! upchirp spanning the whole band, one sample per chip. The receiver
//! multiplies by the conjugate reference upchirp (*dechirping*), which turns
//! each symbol into a pure tone, and picks the DFT bin with the largest
//! magnitude.

use std::f64::consts::PI;
use std::ops::Deref;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Modulation geometry: spreading factor and chips per symbol.
///
/// `sf` in `7..=12` is the standard LoRa range. Smaller factors down to 2
/// ("mini mode") run the identical mathematics with a small alphabet so that
/// exhaustive sums and brute-force oracles stay tractable; restricting to the
/// standard range is left to front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModulationParams {
    sf: u32,
    n: usize,
}

impl ModulationParams {
    pub const MIN_SF: u32 = 2;
    pub const MAX_SF: u32 = 12;

    pub fn new(sf: u32) -> Result<Self> {
        if !(Self::MIN_SF..=Self::MAX_SF).contains(&sf) {
            return Err(Error::InvalidParameter(format!(
                "spreading factor {sf} outside supported range {}..={}",
                Self::MIN_SF,
                Self::MAX_SF
            )));
        }
        Ok(Self {
            sf,
            n: 1usize << sf,
        })
    }

    pub fn sf(&self) -> u32 {
        self.sf
    }

    /// Chips per symbol, `N = 2^SF`. Also the DFT length and alphabet size.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_lora_mode(&self) -> bool {
        self.sf >= 7
    }

    pub fn symbol(&self, value: u32) -> Result<Symbol> {
        if (value as usize) < self.n {
            Ok(Symbol(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "symbol {value} out of range for N={}",
                self.n
            )))
        }
    }
}

/// A modulation symbol in `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(pub u32);

impl Symbol {
    pub fn value(&self) -> u32 {
        self.0
    }
}

/// A length-`N` complex baseband waveform (one sample per chip).
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<Complex64>,
}

impl Waveform {
    pub fn from_samples(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }
}

impl Deref for Waveform {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.samples
    }
}

/// `exp(j*pi*q/n)` with the integer numerator reduced modulo `2n` first, so
/// the trig argument never grows past one turn and keeps full precision even
/// for the largest alphabets.
#[inline]
fn unit_phasor_exact(q: i64, n: usize) -> Complex64 {
    let q = q.rem_euclid(2 * n as i64);
    Complex64::from_polar(1.0, PI * q as f64 / n as f64)
}

/// Modulate one symbol: `x_s[n] = exp(j*2*pi*(n^2/(2N) + (s/N - 1/2)*n))`.
///
/// The phase in turns is the rational `(n^2 + 2sn - nN) / (2N)`, which is
/// evaluated in integer arithmetic and reduced before the sine/cosine call.
pub fn modulate(s: Symbol, p: &ModulationParams) -> Result<Waveform> {
    let mut samples = Vec::new();
    modulate_into(s, p, &mut samples)?;
    Ok(Waveform { samples })
}

/// Buffer-reusing form of [`modulate`] for trial loops.
pub(crate) fn modulate_into(
    s: Symbol,
    p: &ModulationParams,
    out: &mut Vec<Complex64>,
) -> Result<()> {
    let n = p.n();
    if s.0 as usize >= n {
        return Err(Error::InvalidParameter(format!(
            "symbol {} out of range for N={n}",
            s.0
        )));
    }
    let (s, n_i) = (s.0 as i64, n as i64);
    out.clear();
    out.extend((0..n_i).map(|i| unit_phasor_exact(i * i + 2 * s * i - i * n_i, n)));
    Ok(())
}

/// The reference upchirp, i.e. the waveform of symbol 0.
pub fn reference_upchirp(p: &ModulationParams) -> Waveform {
    modulate(Symbol(0), p).expect("symbol 0 is always valid")
}

/// Multiply a received waveform by the conjugate reference upchirp.
///
/// A clean symbol `s` dechirps to the tone `exp(j*2*pi*s*n/N)`.
pub fn dechirp(y: &Waveform, p: &ModulationParams) -> Result<Waveform> {
    if y.len() != p.n() {
        return Err(Error::LengthMismatch {
            expected: p.n(),
            got: y.len(),
        });
    }
    let reference = reference_upchirp(p);
    let samples = y
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| a * b.conj())
        .collect();
    Ok(Waveform { samples })
}

/// Unnormalized DFT of the dechirped waveform (no `1/N` factor), so a clean
/// symbol concentrates into a single bin of magnitude `N`.
pub fn demod_spectrum(y: &Waveform, p: &ModulationParams) -> Result<Vec<Complex64>> {
    let mut demod = Demodulator::new(p);
    let mut out = vec![Complex64::default(); p.n()];
    demod.spectrum_into(y, &mut out)?;
    Ok(out)
}

/// Pick the DFT bin with the largest magnitude. Ties go to the lowest index.
pub fn demodulate(y: &Waveform, p: &ModulationParams) -> Result<Symbol> {
    let mut demod = Demodulator::new(p);
    demod.demodulate(y)
}

/// Reusable demodulator holding the FFT plan, the conjugate reference, and
/// scratch buffers. Use this in hot loops; the free functions above are
/// one-shot conveniences that build it internally.
pub struct Demodulator {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ref_conj: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Demodulator {
    pub fn new(p: &ModulationParams) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(p.n());
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let ref_conj = reference_upchirp(p).iter().map(|c| c.conj()).collect();
        Self {
            n: p.n(),
            fft,
            ref_conj,
            scratch,
        }
    }

    /// Dechirp `y` into `out` and transform in place.
    pub fn spectrum_into(&mut self, y: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        if y.len() != self.n || out.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: y.len(),
            });
        }
        for ((o, a), b) in out.iter_mut().zip(y).zip(&self.ref_conj) {
            *o = a * b;
        }
        self.fft.process_with_scratch(out, &mut self.scratch);
        Ok(())
    }

    pub fn demodulate(&mut self, y: &[Complex64]) -> Result<Symbol> {
        let mut spectrum = vec![Complex64::default(); self.n];
        self.demodulate_into(y, &mut spectrum)
    }

    /// Demodulate using a caller-provided spectrum buffer (no allocation).
    pub fn demodulate_into(
        &mut self,
        y: &[Complex64],
        spectrum: &mut [Complex64],
    ) -> Result<Symbol> {
        self.spectrum_into(y, spectrum)?;
        let mut best = 0usize;
        let mut best_power = spectrum[0].norm_sqr();
        for (k, c) in spectrum.iter().enumerate().skip(1) {
            let power = c.norm_sqr();
            if power > best_power {
                best = k;
                best_power = power;
            }
        }
        Ok(Symbol(best as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(sf: u32) -> ModulationParams {
        ModulationParams::new(sf).unwrap()
    }

    /// The folded two-branch form: frequency wraps at chip `N - s`, where the
    /// slope term switches from `s/N - 1/2` to `s/N - 3/2`. On the chip grid
    /// both forms must agree because they differ by `exp(-j*2*pi*n)`.
    fn modulate_two_branch(s: u32, p: &ModulationParams) -> Vec<Complex64> {
        let n = p.n() as f64;
        let fold = p.n() - s as usize;
        (0..p.n())
            .map(|i| {
                let t = i as f64;
                let slope = if i < fold {
                    s as f64 / n - 0.5
                } else {
                    s as f64 / n - 1.5
                };
                Complex64::from_polar(1.0, 2.0 * PI * (t * t / (2.0 * n) + slope * t))
            })
            .collect()
    }

    #[test]
    fn sample_zero_is_one() {
        for sf in [3, 7] {
            let p = params(sf);
            for s in 0..p.n() as u32 {
                let w = modulate(Symbol(s), &p).unwrap();
                assert_relative_eq!(w[0].re, 1.0, epsilon = 1e-12);
                assert_relative_eq!(w[0].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn modulate_matches_direct_evaluation() {
        // s=2, sf=3, n=1: exponent 2*pi*(1/16 + (2/8 - 1/2)) = -2*pi*3/16
        let p = params(3);
        let w = modulate(Symbol(2), &p).unwrap();
        let expected = Complex64::from_polar(1.0, -2.0 * PI * 3.0 / 16.0);
        assert_relative_eq!(w[1].re, expected.re, epsilon = 1e-14);
        assert_relative_eq!(w[1].im, expected.im, epsilon = 1e-14);
    }

    #[test]
    fn unit_modulus() {
        for sf in [2, 5, 12] {
            let p = params(sf);
            for s in [0, 1, p.n() as u32 / 2, p.n() as u32 - 1] {
                let w = modulate(Symbol(s), &p).unwrap();
                for c in w.iter() {
                    assert!((c.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_expression_equals_two_branch_form() {
        for sf in [2, 3, 7, 10] {
            let p = params(sf);
            for s in [0, 1, p.n() as u32 / 3, p.n() as u32 - 1] {
                let a = modulate(Symbol(s), &p).unwrap();
                let b = modulate_two_branch(s, &p);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).norm() < 1e-12, "sf={sf} s={s}");
                }
            }
        }
    }

    #[test]
    fn reference_is_symbol_zero() {
        let p = params(7);
        assert_eq!(reference_upchirp(&p), modulate(Symbol(0), &p).unwrap());
        // sf=3, sample N/2: exp(j*2*pi*(16/16 - 4/2)) = 1
        let r = reference_upchirp(&params(3));
        assert_relative_eq!(r[4].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r[4].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dechirp_of_reference_is_all_ones() {
        let p = params(7);
        let d = dechirp(&reference_upchirp(&p), &p).unwrap();
        for c in d.iter() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dechirp_produces_pure_tone() {
        let p = params(6);
        for s in [1u32, 17, 63] {
            let d = dechirp(&modulate(Symbol(s), &p).unwrap(), &p).unwrap();
            for (i, c) in d.iter().enumerate() {
                let tone =
                    Complex64::from_polar(1.0, 2.0 * PI * s as f64 * i as f64 / p.n() as f64);
                assert!((c - tone).norm() < 1e-12, "s={s} n={i}");
            }
        }
    }

    #[test]
    fn dechirp_of_zero_is_zero() {
        let p = params(4);
        let zero = Waveform::from_samples(vec![Complex64::default(); p.n()]);
        let d = dechirp(&zero, &p).unwrap();
        assert!(d.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn dechirp_rejects_length_mismatch() {
        let p = params(4);
        let bad = Waveform::from_samples(vec![Complex64::default(); 7]);
        assert!(matches!(
            dechirp(&bad, &p),
            Err(Error::LengthMismatch {
                expected: 16,
                got: 7
            })
        ));
    }

    #[test]
    fn spectrum_concentrates_in_one_bin() {
        for sf in [4, 7, 12] {
            let p = params(sf);
            let n = p.n() as f64;
            for s in [0u32, 3, p.n() as u32 - 1] {
                let spec = demod_spectrum(&modulate(Symbol(s), &p).unwrap(), &p).unwrap();
                for (k, c) in spec.iter().enumerate() {
                    if k == s as usize {
                        assert!((c.norm() - n).abs() < 1e-9 * n, "sf={sf} s={s}");
                    } else {
                        assert!(c.norm() < 1e-9 * n, "sf={sf} s={s} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn spectrum_is_linear() {
        let p = params(5);
        let y1 = modulate(Symbol(3), &p).unwrap();
        let y2 = modulate(Symbol(20), &p).unwrap();
        let a = Complex64::new(0.3, -1.2);
        let combo =
            Waveform::from_samples(y1.iter().zip(y2.iter()).map(|(u, v)| a * u + v).collect());
        let s1 = demod_spectrum(&y1, &p).unwrap();
        let s2 = demod_spectrum(&y2, &p).unwrap();
        let sc = demod_spectrum(&combo, &p).unwrap();
        for k in 0..p.n() {
            assert!((sc[k] - (a * s1[k] + s2[k])).norm() < 1e-9);
        }
    }

    #[test]
    fn spectrum_satisfies_parseval() {
        let p = params(6);
        let y = modulate(Symbol(11), &p).unwrap();
        let spec = demod_spectrum(&y, &p).unwrap();
        let spec_energy: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        let sample_energy: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        assert_relative_eq!(
            spec_energy,
            p.n() as f64 * sample_energy,
            max_relative = 1e-12
        );
    }

    #[test]
    fn noiseless_round_trip_all_symbols() {
        for sf in 2..=12 {
            let p = params(sf);
            for s in 0..p.n() as u32 {
                let got = demodulate(&modulate(Symbol(s), &p).unwrap(), &p).unwrap();
                assert_eq!(got, Symbol(s), "sf={sf}");
            }
        }
    }

    #[test]
    fn demodulation_ignores_global_phase() {
        let p = params(7);
        let h = Complex64::from_polar(1.0, 2.41);
        for s in [0u32, 64, 127] {
            let w = modulate(Symbol(s), &p).unwrap();
            let rotated = Waveform::from_samples(w.iter().map(|c| h * c).collect());
            assert_eq!(demodulate(&rotated, &p).unwrap(), Symbol(s));
        }
    }

    #[test]
    fn rejects_invalid_symbol_and_sf() {
        let p = params(3);
        assert!(modulate(Symbol(8), &p).is_err());
        assert!(p.symbol(8).is_err());
        assert!(ModulationParams::new(1).is_err());
        assert!(ModulationParams::new(13).is_err());
    }
}
