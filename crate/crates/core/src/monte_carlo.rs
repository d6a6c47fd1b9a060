//! Seeded, parallel Monte Carlo estimation of the symbol error rate.
//!
//! Every trial derives its own random stream from `(master_seed,
//! trial_index)`, so estimates are bit-identical regardless of how trials
//! are scheduled across threads; error counts aggregate as plain integers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    apply_channel_into, draw_collision_geometry, synthesize_interferer_into, ChannelState,
    InterfererState, TauMode,
};
use crate::error::{Error, Result};
use crate::phy::{modulate_into, Demodulator, ModulationParams, Symbol};
use crate::ser::{SerCurve, SerMethod, SerPoint};

/// Whether the trial keeps the interferer's channel phase independent of the
/// user's, or pins them together (zero relative phase).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaMode {
    Random,
    Ignored,
}

/// Configuration of one Monte Carlo experiment.
#[derive(Debug, Clone, Copy)]
pub struct TrialConfig {
    pub params: ModulationParams,
    pub snr_db: f64,
    /// Interference level; `None` runs noise-only trials (the offset and
    /// phase modes are then irrelevant).
    pub sir_db: Option<f64>,
    pub tau_mode: TauMode,
    pub omega_mode: OmegaMode,
    pub master_seed: u64,
}

impl TrialConfig {
    pub fn new(params: ModulationParams, snr_db: f64, master_seed: u64) -> Self {
        Self {
            params,
            snr_db,
            sir_db: None,
            tau_mode: TauMode::Fractional,
            omega_mode: OmegaMode::Random,
            master_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "snr_db must be finite, got {}",
                self.snr_db
            )));
        }
        if let Some(sir) = self.sir_db {
            if !sir.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sir_db must be finite, got {sir}"
                )));
            }
        }
        Ok(())
    }
}

/// Error-count estimate with a Wilson 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerEstimate {
    pub errors: u64,
    pub trials: u64,
    pub ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SerEstimate {
    fn from_counts(errors: u64, trials: u64) -> Self {
        // Wilson interval: valid down to the handful-of-errors regime where
        // the plain normal interval is not
        let z = 1.959963984540054_f64;
        let t = trials as f64;
        let p_hat = errors as f64 / t;
        let z2 = z * z;
        let denom = 1.0 + z2 / t;
        let center = (p_hat + z2 / (2.0 * t)) / denom;
        let half = z * (p_hat * (1.0 - p_hat) / t + z2 / (4.0 * t * t)).sqrt() / denom;
        SerEstimate {
            errors,
            trials,
            ser: p_hat,
            ci_low: (center - half).max(0.0),
            ci_high: (center + half).min(1.0),
        }
    }

    pub fn to_point(&self, config: &TrialConfig) -> SerPoint {
        SerPoint {
            snr_db: config.snr_db,
            sir_db: config.sir_db,
            ser: self.ser,
            method: SerMethod::MonteCarlo,
            ci_low: Some(self.ci_low),
            ci_high: Some(self.ci_high),
            trials: Some(self.trials),
        }
    }
}

/// The per-trial random stream: one keystream per `(master_seed, index)`.
fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial_index);
    rng
}

/// Reusable per-thread buffers for the trial pipeline.
struct TrialContext {
    demod: Demodulator,
    signal: Vec<num_complex::Complex64>,
    interferer: Vec<num_complex::Complex64>,
    received: Vec<num_complex::Complex64>,
    spectrum: Vec<num_complex::Complex64>,
}

impl TrialContext {
    fn new(p: &ModulationParams) -> Self {
        Self {
            demod: Demodulator::new(p),
            signal: Vec::with_capacity(p.n()),
            interferer: Vec::with_capacity(p.n()),
            received: Vec::with_capacity(p.n()),
            spectrum: vec![num_complex::Complex64::default(); p.n()],
        }
    }
}

/// One end-to-end trial; returns whether the demodulated symbol was wrong.
/// The outcome is fully determined by `(config, trial_index)`.
pub fn run_trial(config: &TrialConfig, trial_index: u64) -> Result<bool> {
    config.validate()?;
    let mut ctx = TrialContext::new(&config.params);
    run_trial_with(&mut ctx, config, trial_index)
}

fn run_trial_with(ctx: &mut TrialContext, config: &TrialConfig, trial_index: u64) -> Result<bool> {
    let p = &config.params;
    let n = p.n() as u32;
    let snr = 10f64.powf(config.snr_db / 10.0);
    let mut rng = trial_rng(config.master_seed, trial_index);

    let sent = Symbol(rng.random_range(0..n));
    modulate_into(sent, p, &mut ctx.signal)?;

    match config.sir_db {
        None => {
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let channel = ChannelState::new(phi, snr, p)?;
            apply_channel_into(&ctx.signal, &channel, None, &mut rng, &mut ctx.received)?;
        }
        Some(sir_db) => {
            let g = draw_collision_geometry(&mut rng, p, config.tau_mode);
            let theta = match config.omega_mode {
                OmegaMode::Random => g.phase_theta,
                OmegaMode::Ignored => g.phase_phi, // zero relative phase
            };
            let interferer = InterfererState::from_sir_db(sir_db, theta, g.tau, g.s_i1, g.s_i2, p)?;
            synthesize_interferer_into(&interferer, p, &mut ctx.interferer)?;
            let channel = ChannelState::new(g.phase_phi, snr, p)?;
            apply_channel_into(
                &ctx.signal,
                &channel,
                Some((&ctx.interferer, &interferer)),
                &mut rng,
                &mut ctx.received,
            )?;
        }
    }
    let decided = ctx
        .demod
        .demodulate_into(&ctx.received, &mut ctx.spectrum)?;
    Ok(decided != sent)
}

/// Estimate the symbol error rate from `n_trials` independent trials run in
/// parallel over disjoint random streams.
pub fn estimate_ser(config: &TrialConfig, n_trials: u64) -> Result<SerEstimate> {
    if n_trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    config.validate()?;
    // config was validated and buffers are sized by construction, so trial
    // errors past this point are bugs, not inputs
    let errors: u64 = (0..n_trials)
        .into_par_iter()
        .map_init(
            || TrialContext::new(&config.params),
            |ctx, index| {
                run_trial_with(ctx, config, index).expect("validated trial cannot fail") as u64
            },
        )
        .sum();
    Ok(SerEstimate::from_counts(errors, n_trials))
}

/// Per-point master seed for sweeps: point 0 reuses the master seed (so a
/// single-point sweep reproduces [`estimate_ser`] exactly); later points mix
/// the index through a bijective finalizer.
fn point_seed(master: u64, index: usize) -> u64 {
    if index == 0 {
        master
    } else {
        splitmix64(master ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sweep the SNR axis, running `trials_per_point` trials at each grid point.
pub fn sweep(config: &TrialConfig, snr_db_grid: &[f64], trials_per_point: u64) -> Result<SerCurve> {
    if snr_db_grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let mut curve = SerCurve::default();
    for (index, &snr_db) in snr_db_grid.iter().enumerate() {
        let mut point_config = *config;
        point_config.snr_db = snr_db;
        point_config.master_seed = point_seed(config.master_seed, index);
        let estimate = estimate_ser(&point_config, trials_per_point)?;
        curve.points.push(estimate.to_point(&point_config));
    }
    Ok(curve)
}
