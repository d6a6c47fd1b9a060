//! Channel model: unit-gain phase-rotated user channel, additive white
//! Gaussian noise, and the time-offset same-spreading-factor interferer.
//!
//! # Signal-to-noise convention
//!
//! `snr` is defined so that, after dechirping and the unnormalized DFT, the
//! correct bin's magnitude normalized by the per-component bin noise
//! deviation is Rice-distributed with scale 1 and location `sqrt(2 * snr)`.
//! Concretely that means a per-sample complex noise variance of `N / snr`
//! (components `N / (2 snr)` each) and a per-component bin deviation of
//! `sigma = N / sqrt(2 * snr)`. All analytic paths normalize by this same
//! `sigma`, and the closed-form approximation for the noise-only error rate
//! is consistent with it; see [`bin_noise_sigma`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phy::{ModulationParams, Symbol, Waveform};

/// User-channel state: unit-magnitude gain `e^{j phi}` plus the noise level.
#[derive(Debug, Clone, Copy)]
pub struct ChannelState {
    phase_phi: f64,
    snr: f64,
    noise_variance: f64,
    n: usize,
}

impl ChannelState {
    /// Build from a linear SNR.
    pub fn new(phase_phi: f64, snr: f64, p: &ModulationParams) -> Result<Self> {
        if !snr.is_finite() || snr <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "snr must be positive and finite, got {snr}"
            )));
        }
        Ok(Self {
            phase_phi,
            snr,
            noise_variance: p.n() as f64 / snr,
            n: p.n(),
        })
    }

    pub fn from_snr_db(phase_phi: f64, snr_db: f64, p: &ModulationParams) -> Result<Self> {
        Self::new(phase_phi, 10f64.powf(snr_db / 10.0), p)
    }

    pub fn phase_phi(&self) -> f64 {
        self.phase_phi
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// Per-sample complex noise variance (both components together).
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
}

/// Per-component deviation of a DFT noise bin, the normalizer that makes the
/// background bins unit-scale Rayleigh: `sigma = N / sqrt(2 snr)`.
pub fn bin_noise_sigma(p: &ModulationParams, snr: f64) -> f64 {
    p.n() as f64 / (2.0 * snr).sqrt()
}

/// Interferer state: power, channel phase, and the two partially overlapping
/// symbols with their time offset.
///
/// `tau` is the offset, in chips, from the start of the observed symbol to
/// the start of the interferer's second symbol; samples before `ceil(tau)`
/// carry the tail of `s_i1`, the rest carry the head of `s_i2`.
#[derive(Debug, Clone, Copy)]
pub struct InterfererState {
    power_pi: f64,
    phase_theta: f64,
    tau: f64,
    s_i1: Symbol,
    s_i2: Symbol,
}

impl InterfererState {
    pub fn new(
        power_pi: f64,
        phase_theta: f64,
        tau: f64,
        s_i1: Symbol,
        s_i2: Symbol,
        p: &ModulationParams,
    ) -> Result<Self> {
        if !power_pi.is_finite() || power_pi <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "interferer power must be positive, got {power_pi}"
            )));
        }
        if !(0.0..p.n() as f64).contains(&tau) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in [0, {}), got {tau}",
                p.n()
            )));
        }
        if s_i1.0 as usize >= p.n() || s_i2.0 as usize >= p.n() {
            return Err(Error::InvalidParameter(format!(
                "interferer symbols ({}, {}) out of range for N={}",
                s_i1.0,
                s_i2.0,
                p.n()
            )));
        }
        Ok(Self {
            power_pi,
            phase_theta,
            tau,
            s_i1,
            s_i2,
        })
    }

    pub fn from_sir_db(
        sir_db: f64,
        phase_theta: f64,
        tau: f64,
        s_i1: Symbol,
        s_i2: Symbol,
        p: &ModulationParams,
    ) -> Result<Self> {
        Self::new(10f64.powf(-sir_db / 10.0), phase_theta, tau, s_i1, s_i2, p)
    }

    pub fn power_pi(&self) -> f64 {
        self.power_pi
    }

    /// Interferer amplitude `|h_I| = sqrt(P_I)`.
    pub fn amplitude(&self) -> f64 {
        self.power_pi.sqrt()
    }

    pub fn phase_theta(&self) -> f64 {
        self.phase_theta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Integer part of the offset.
    pub fn tau_whole(&self) -> i64 {
        self.tau.floor() as i64
    }

    /// Fractional part of the offset, in `[0, 1)`.
    pub fn tau_frac(&self) -> f64 {
        self.tau - self.tau.floor()
    }

    pub fn s_i1(&self) -> Symbol {
        self.s_i1
    }

    pub fn s_i2(&self) -> Symbol {
        self.s_i2
    }

    pub fn sir(&self) -> f64 {
        1.0 / self.power_pi
    }
}

/// `exp(j * (pi * q / n + 2 pi * frac))` with the integer cycles reduced
/// exactly; keeps the interferer phases accurate for the pattern oracle.
#[inline]
fn phasor_split(q: i64, frac: f64, n: usize) -> Complex64 {
    let q = q.rem_euclid(2 * n as i64);
    Complex64::from_polar(
        1.0,
        std::f64::consts::PI * q as f64 / n as f64 + 2.0 * std::f64::consts::PI * frac,
    )
}

/// Synthesize the interferer waveform seen during one observed symbol.
///
/// Samples `n < ceil(tau)` continue the first symbol shifted by `N - tau`;
/// samples `n >= ceil(tau)` start the second symbol shifted by `-tau`. At
/// `tau = 0` the first range is empty and the output is exactly the second
/// symbol's waveform.
pub fn synthesize_interferer(i: &InterfererState, p: &ModulationParams) -> Result<Waveform> {
    let mut samples = Vec::new();
    synthesize_interferer_into(i, p, &mut samples)?;
    Ok(Waveform::from_samples(samples))
}

/// Buffer-reusing form of [`synthesize_interferer`] for trial loops.
pub(crate) fn synthesize_interferer_into(
    i: &InterfererState,
    p: &ModulationParams,
    samples: &mut Vec<Complex64>,
) -> Result<()> {
    let n = p.n();
    if !(0.0..n as f64).contains(&i.tau) {
        return Err(Error::InvalidParameter(format!(
            "tau must lie in [0, {n}), got {}",
            i.tau
        )));
    }
    let big_n = n as i64;
    let l = i.tau_whole();
    let lambda = i.tau_frac();
    let cut = i.tau.ceil() as i64;
    let (s1, s2) = (i.s_i1.0 as i64, i.s_i2.0 as i64);
    samples.clear();
    samples.reserve(n);
    for idx in 0..big_n {
        // chirp phase in turns: m^2/(2N) + m*(s/N - 1/2) for m = idx +- shift,
        // split into an exactly reduced integer numerator and a small float
        let (whole, s) = if idx < cut {
            (idx + big_n - l, s1)
        } else {
            (idx - l, s2)
        };
        let q = whole * whole + 2 * whole * s - whole * big_n;
        let frac = (lambda * lambda - 2.0 * whole as f64 * lambda) / (2.0 * n as f64)
            - lambda * s as f64 / n as f64
            + lambda / 2.0;
        samples.push(phasor_split(q, frac, n));
    }
    Ok(())
}

/// Run the signal model: `y[n] = e^{j phi} x[n] + sqrt(P_I) e^{j theta}
/// x_I[n] + z[n]` with i.i.d. circular complex Gaussian noise of per-sample
/// variance [`ChannelState::noise_variance`].
pub fn apply_channel<R: Rng + ?Sized>(
    x: &Waveform,
    channel: &ChannelState,
    interferer: Option<(&Waveform, &InterfererState)>,
    rng: &mut R,
) -> Result<Waveform> {
    let mut samples = Vec::new();
    apply_channel_into(
        x,
        channel,
        interferer.map(|(w, s)| (w.samples(), s)),
        rng,
        &mut samples,
    )?;
    Ok(Waveform::from_samples(samples))
}

/// Buffer-reusing form of [`apply_channel`] for trial loops.
pub(crate) fn apply_channel_into<R: Rng + ?Sized>(
    x: &[Complex64],
    channel: &ChannelState,
    interferer: Option<(&[Complex64], &InterfererState)>,
    rng: &mut R,
    out: &mut Vec<Complex64>,
) -> Result<()> {
    if x.len() != channel.n {
        return Err(Error::LengthMismatch {
            expected: channel.n,
            got: x.len(),
        });
    }
    if let Some((x_i, _)) = interferer {
        if x_i.len() != channel.n {
            return Err(Error::LengthMismatch {
                expected: channel.n,
                got: x_i.len(),
            });
        }
    }
    let h = Complex64::from_polar(1.0, channel.phase_phi);
    let component_std = (channel.noise_variance / 2.0).sqrt();
    out.clear();
    out.extend(x.iter().map(|c| h * c));
    if let Some((x_i, state)) = interferer {
        let h_i = Complex64::from_polar(state.amplitude(), state.phase_theta);
        for (sample, c) in out.iter_mut().zip(x_i.iter()) {
            *sample += h_i * c;
        }
    }
    for sample in out.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *sample += Complex64::new(re * component_std, im * component_std);
    }
    Ok(())
}

/// How the interferer's time offset is drawn or discretized.
///
/// `ChipAligned` restricts `tau` to whole chips, reproducing the older
/// integer-offset interference model; `Fractional` is the general case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauMode {
    Fractional,
    ChipAligned,
}

/// Random collision geometry for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionGeometry {
    pub phase_phi: f64,
    pub phase_theta: f64,
    pub tau: f64,
    pub s_i1: Symbol,
    pub s_i2: Symbol,
}

/// Draw the user phase, interferer phase, offset, and interfering symbols.
pub fn draw_collision_geometry<R: Rng + ?Sized>(
    rng: &mut R,
    p: &ModulationParams,
    tau_mode: TauMode,
) -> CollisionGeometry {
    let n = p.n();
    let tau = match tau_mode {
        TauMode::ChipAligned => rng.random_range(0..n as u64) as f64,
        TauMode::Fractional => rng.random_range(0.0..n as f64),
    };
    CollisionGeometry {
        phase_phi: rng.random_range(0.0..std::f64::consts::TAU),
        phase_theta: rng.random_range(0.0..std::f64::consts::TAU),
        tau,
        s_i1: Symbol(rng.random_range(0..n as u32)),
        s_i2: Symbol(rng.random_range(0..n as u32)),
    }
}
