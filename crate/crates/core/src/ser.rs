//! Closed-form and semi-analytic symbol-error-rate evaluation.
//!
//! Four analytic routes cover the noise-only and interference cases:
//!
//! * [`ser_awgn_exact`]: the order-statistic integral `int F_Ri(y; v, 1) *
//!   f_max(y) dy` with `v = sqrt(2 snr)`, where `f_max` is the density of the
//!   largest background bin. Exact up to quadrature error.
//! * [`ser_awgn_approx`]: the closed-form Gaussian/harmonic-number tail
//!   `Q((sqrt(snr) - (H^2 - pi^2/12)^(1/4)) / sqrt(H - sqrt(H^2 - pi^2/12) +
//!   1/2))` with `H = H_(N-1)`.
//! * [`ser_full`]: the complete interference expression, averaging the
//!   conditional error probability over both interfering symbols, the
//!   fractional offset, the relative phase, and the observed symbol.
//! * [`ser_interference_approx`] / [`ser_combined`]: the low-complexity
//!   route that replaces the per-bin product by a single Gaussian tail at the
//!   dominant interference bin, then splices the noise-only rate back in via
//!   `P = P_N + (1 - P_N) P_I`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{bin_noise_sigma, InterfererState, TauMode};
use crate::error::{Error, Result};
use crate::pattern::{pattern_term, r_max_approx};
use crate::phy::{ModulationParams, Symbol};
use crate::stats::{
    gauss_legendre_on, harmonic_number, integrate, ln1mexp, ln_marcum_p1,
    ln_max_background_pdf_awgn, q_function, rice_pdf_unit, Quadrature,
};

/// Which symbols the full expression averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolSelection {
    /// Exact triple sum over all `(s, s_i1, s_i2)`; mini-mode scale only.
    All,
    /// This many uniformly drawn `(s, s_i1, s_i2)` triples, with a sampling
    /// confidence interval on the result.
    Sample(usize),
}

/// Evaluation method tag carried by every result point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerMethod {
    AwgnExact,
    AwgnApprox,
    Full,
    InterferenceApprox,
    Combined,
    MonteCarlo,
}

impl SerMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SerMethod::AwgnExact => "awgn_exact",
            SerMethod::AwgnApprox => "awgn_approx",
            SerMethod::Full => "full",
            SerMethod::InterferenceApprox => "approx_interf",
            SerMethod::Combined => "combined",
            SerMethod::MonteCarlo => "monte_carlo",
        }
    }
}

/// One evaluated operating point.
#[derive(Debug, Clone, Copy)]
pub struct SerPoint {
    pub snr_db: f64,
    pub sir_db: Option<f64>,
    pub ser: f64,
    pub method: SerMethod,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub trials: Option<u64>,
}

/// An ordered sweep of points.
#[derive(Debug, Clone, Default)]
pub struct SerCurve {
    pub points: Vec<SerPoint>,
}

/// Everything an analytic evaluation needs to know.
#[derive(Debug, Clone, Copy)]
pub struct SerQuery {
    pub params: ModulationParams,
    pub snr_db: f64,
    /// Interference level; `None` means noise only.
    pub sir_db: Option<f64>,
    /// Offset-integral step `eps`; the grid uses midpoints of `N/eps` cells.
    pub tau_step: f64,
    /// Trapezoid nodes for the relative-phase average in the full expression.
    pub omega_nodes: usize,
    pub symbol_selection: SymbolSelection,
    /// Offset model for the approximate interference route: the fractional
    /// midpoint grid, or whole chips only (the older aligned model).
    pub tau_mode: TauMode,
    /// Use the closed-form noise approximation instead of the exact integral
    /// as the noise term of [`ser_combined`].
    pub combined_uses_approx_awgn: bool,
    /// Diagnostics: keep the cases where the dominant interference bin lands
    /// on the observed symbol instead of weighting them out by `(N-1)/N`.
    pub include_bin_collision: bool,
    /// Seed for `SymbolSelection::Sample`.
    pub subsample_seed: u64,
    /// Refusal threshold for the full expression, in `(triple, tau, omega)`
    /// integration cells.
    pub budget: u64,
}

impl SerQuery {
    pub fn new(params: ModulationParams, snr_db: f64) -> Self {
        Self {
            params,
            snr_db,
            sir_db: None,
            tau_step: 0.1,
            omega_nodes: 16,
            symbol_selection: SymbolSelection::All,
            tau_mode: TauMode::Fractional,
            combined_uses_approx_awgn: false,
            include_bin_collision: false,
            subsample_seed: 0,
            budget: 1_000_000_000,
        }
    }

    pub fn with_sir_db(mut self, sir_db: f64) -> Self {
        self.sir_db = Some(sir_db);
        self
    }

    fn snr(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    fn interferer_amplitude(&self) -> Option<f64> {
        self.sir_db.map(|sir| 10f64.powf(-sir / 20.0))
    }

    fn point(&self, ser: f64, method: SerMethod) -> SerPoint {
        SerPoint {
            snr_db: self.snr_db,
            sir_db: self.sir_db,
            ser,
            method,
            ci_low: None,
            ci_high: None,
            trials: None,
        }
    }
}

/// Saturation level: with all bins exchangeable the error rate cannot exceed
/// `(N-1)/N`.
fn ser_ceiling(n: usize) -> f64 {
    (n - 1) as f64 / n as f64
}

/// The noise-only error probability by the exact order-statistic integral.
pub(crate) fn awgn_exact_prob(p: &ModulationParams, snr: f64) -> Result<f64> {
    let n = p.n();
    let v = (2.0 * snr).sqrt();
    let upper = v.max((2.0 * (n as f64).ln()).sqrt()) + 16.0;
    let q = Quadrature::new(0.0, upper)?.with_tolerance(1e-11, 1e-15);
    let value = integrate(
        |y| (ln_marcum_p1(v, y) + ln_max_background_pdf_awgn(y, n)).exp(),
        &q,
    )?;
    Ok(value.clamp(0.0, 1.0))
}

/// Exact noise-only symbol error rate. The rate is the same for every
/// transmitted symbol, so no symbol average appears.
pub fn ser_awgn_exact(q: &SerQuery) -> Result<SerPoint> {
    if q.sir_db.is_some() {
        return Err(Error::InvalidParameter(
            "noise-only evaluation cannot take an interference level".into(),
        ));
    }
    let ser = awgn_exact_prob(&q.params, q.snr())?;
    Ok(q.point(ser, SerMethod::AwgnExact))
}

/// Closed-form Gaussian/harmonic-number approximation of the noise-only
/// rate, clamped at the `(N-1)/N` saturation level.
pub fn ser_awgn_approx(q: &SerQuery) -> Result<SerPoint> {
    if q.sir_db.is_some() {
        return Err(Error::InvalidParameter(
            "noise-only evaluation cannot take an interference level".into(),
        ));
    }
    let ser = awgn_approx_prob(q.params.n(), q.snr());
    Ok(q.point(ser, SerMethod::AwgnApprox))
}

fn awgn_approx_prob(n: usize, snr: f64) -> f64 {
    let h = harmonic_number(n - 1);
    let spread = (h * h - std::f64::consts::PI * std::f64::consts::PI / 12.0).sqrt();
    let arg = (snr.sqrt() - spread.sqrt()) / (h - spread + 0.5).sqrt();
    q_function(arg).min(ser_ceiling(n))
}

/// Midpoint grid over `[0, N)` with approximately the requested step, or the
/// whole-chip grid for the aligned model.
fn tau_grid(p: &ModulationParams, step: f64, mode: TauMode) -> Result<Vec<f64>> {
    let n = p.n() as f64;
    match mode {
        TauMode::ChipAligned => Ok((0..p.n()).map(|t| t as f64).collect()),
        TauMode::Fractional => {
            if !step.is_finite() || step <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "tau step must be positive, got {step}"
                )));
            }
            let count = (n / step).round() as usize;
            if count < 10 {
                return Err(Error::InvalidParameter(format!(
                    "tau step {step} yields {count} cells over [0, {n}); need at least 10"
                )));
            }
            let actual = n / count as f64;
            Ok((0..count).map(|i| (i as f64 + 0.5) * actual).collect())
        }
    }
}

/// Low-complexity interference-only error term: a single Gaussian tail at
/// the dominant interference bin, averaged over both interfering symbols and
/// the offset grid.
///
/// The dominant-bin magnitude depends on the interfering symbols only
/// through their difference `d = s2 - s1 mod N` and on whether that
/// difference wraps past `N` (wrapping rotates one segment kernel by
/// `e^(-j 2 pi tau)` relative to the other, which changes the two-term
/// magnitude whenever the offset is fractional). The `N^2` symbol pairs
/// therefore collapse to `N - d` unwrapped and `d` wrapped representatives
/// per difference. The `(N-1)/N` factor removes the cases where the
/// dominant bin coincides with the observed symbol, whose contribution the
/// single-bin model cannot represent; set `include_bin_collision` to inspect
/// the unweighted value.
pub fn ser_interference_approx(q: &SerQuery) -> Result<SerPoint> {
    let h_i = q
        .interferer_amplitude()
        .ok_or_else(|| Error::InvalidParameter("interference level required".into()))?;
    let p = q.params;
    let n = p.n();
    let nf = n as f64;
    let taus = tau_grid(&p, q.tau_step, q.tau_mode)?;
    // Q((N - h_i r) / sqrt(2 sigma^2)) = Q(sqrt(snr) (1 - h_i r / N))
    let root_snr = q.snr().sqrt();
    let tail = |tau: f64, s1: u32, s2: u32| {
        let i = InterfererState::new(1.0, 0.0, tau, Symbol(s1), Symbol(s2), &p)
            .expect("representative state is valid");
        q_function(root_snr * (1.0 - h_i * r_max_approx(&i, &p) / nf))
    };
    let per_tau: Vec<f64> = taus
        .par_iter()
        .map(|&tau| {
            let mut acc = 0.0;
            for d in 0..n as u32 {
                // unwrapped representative (s1, s1 + d), weight N - d
                acc += (n as u32 - d) as f64 * tail(tau, 0, d);
                if d > 0 {
                    // wrapped representative (s1, s1 + d - N), weight d
                    acc += d as f64 * tail(tau, n as u32 - 1, d - 1);
                }
            }
            acc / (nf * nf)
        })
        .collect();
    let mut ser = per_tau.iter().sum::<f64>() / taus.len() as f64;
    if !q.include_bin_collision {
        ser *= ser_ceiling(n);
    }
    Ok(q.point(ser.clamp(0.0, 1.0), SerMethod::InterferenceApprox))
}

/// Final low-complexity estimate: `P = P_N + (1 - P_N) P_I`, clamped at the
/// `(N-1)/N` saturation level the splice can overshoot in the deep-noise
/// regime where both terms are already near it.
pub fn ser_combined(q: &SerQuery) -> Result<SerPoint> {
    if q.sir_db.is_none() {
        return Err(Error::InvalidParameter(
            "interference level required".into(),
        ));
    }
    let p_n = if q.combined_uses_approx_awgn {
        awgn_approx_prob(q.params.n(), q.snr())
    } else {
        awgn_exact_prob(&q.params, q.snr())?
    };
    let p_i = ser_interference_approx(q)?.ser;
    let ser = (p_n + (1.0 - p_n) * p_i).min(ser_ceiling(q.params.n()));
    Ok(q.point(ser.clamp(0.0, 1.0), SerMethod::Combined))
}

/// Work assigned to one `(s_i1, s_i2)` pair of the full expression.
enum PairSymbols {
    /// Average over every observed symbol with weight one.
    All,
    /// Explicit `(symbol, multiplicity)` list from subsampling.
    Listed(Vec<(u32, u32)>),
}

struct PairTask {
    s1: u32,
    s2: u32,
    symbols: PairSymbols,
}

/// Log CDF of one background bin with interference offset `b`.
#[inline]
fn ln_background_cdf(b: f64, y: f64) -> f64 {
    if b == 0.0 {
        ln1mexp(y * y / 2.0)
    } else {
        ln_marcum_p1(b, y)
    }
}

/// Correct-detection probabilities for one pair task: one `(value,
/// multiplicity)` entry per observed symbol in the task, each the mean over
/// the offset grid and the relative-phase nodes of `int f_Ri(y; v_s, 1)
/// prod_(k != s) F_Ri(y; v_k, 1) dy`.
fn pair_correct_probs(
    task: &PairTask,
    p: &ModulationParams,
    snr: f64,
    h_i: f64,
    taus: &[f64],
    omega_nodes: usize,
) -> Vec<(f64, u32)> {
    let n = p.n();
    let nf = n as f64;
    let sigma = bin_noise_sigma(p, snr);
    let symbol_list: Vec<(u32, u32)> = match &task.symbols {
        PairSymbols::All => (0..n as u32).map(|s| (s, 1)).collect(),
        PairSymbols::Listed(list) => list.clone(),
    };
    let mut acc = vec![0.0f64; symbol_list.len()];

    let mut amplitudes = vec![0.0f64; n];
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    let mut ln_bg_sum: Vec<f64> = Vec::new();
    let mut coef: Vec<f64> = Vec::new();

    for &tau in taus {
        let i = InterfererState::new(1.0, 0.0, tau, Symbol(task.s1), Symbol(task.s2), p)
            .expect("pair task state is valid");
        let mut x_max = 0.0f64;
        for (k, a) in amplitudes.iter_mut().enumerate() {
            *a = h_i * pattern_term(&i, p, k).magnitude();
            x_max = x_max.max(*a);
        }
        // one grid wide enough for every symbol's signal location at any
        // relative phase, padded past the +-12-deviation truncation rule
        let lo = ((nf - x_max) / sigma - 14.0).max(0.0);
        let hi = (nf + x_max) / sigma + 14.0;
        let nodes = (((hi - lo) * 4.0).ceil() as usize).clamp(64, 384);
        gauss_legendre_on(lo, hi, nodes, &mut ys, &mut ws);

        ln_bg_sum.clear();
        ln_bg_sum.resize(ys.len(), 0.0);
        for &a in amplitudes.iter() {
            let b = a / sigma;
            for (j, &y) in ys.iter().enumerate() {
                ln_bg_sum[j] += ln_background_cdf(b, y);
            }
        }

        for (slot, &(s, _)) in symbol_list.iter().enumerate() {
            let x_s = amplitudes[s as usize];
            let b_s = x_s / sigma;
            coef.clear();
            coef.extend(
                ys.iter()
                    .zip(ws.iter())
                    .enumerate()
                    .map(|(j, (&y, &w))| w * (ln_bg_sum[j] - ln_background_cdf(b_s, y)).exp()),
            );
            let mut s_acc = 0.0;
            for widx in 0..omega_nodes {
                let omega = std::f64::consts::TAU * widx as f64 / omega_nodes as f64;
                let v_s = (nf * nf + x_s * x_s + 2.0 * nf * x_s * omega.cos()).sqrt() / sigma;
                let mut inner = 0.0;
                for (j, &y) in ys.iter().enumerate() {
                    inner += coef[j] * rice_pdf_unit(y, v_s);
                }
                s_acc += inner;
            }
            acc[slot] += s_acc / omega_nodes as f64;
        }
    }
    symbol_list
        .iter()
        .zip(acc)
        .map(|(&(_, count), total)| (total / taus.len() as f64, count))
        .collect()
}

/// The complete interference error expression: one minus the average correct
/// probability over symbols, interferer symbols, offset, and relative phase.
///
/// Exact (up to discretization) in mini mode with `SymbolSelection::All`;
/// for large alphabets, subsampled triples provide an estimate with a
/// sampling confidence interval. Refuses outright when the requested grid
/// exceeds the evaluation budget rather than silently truncating.
pub fn ser_full(q: &SerQuery) -> Result<SerPoint> {
    let h_i = q
        .interferer_amplitude()
        .ok_or_else(|| Error::InvalidParameter("interference level required".into()))?;
    if q.omega_nodes == 0 {
        return Err(Error::InvalidParameter(
            "need at least one omega node".into(),
        ));
    }
    let p = q.params;
    let n = p.n();
    let snr = q.snr();
    let taus = tau_grid(&p, q.tau_step, TauMode::Fractional)?;

    let (tasks, total_triples) = build_tasks(q, n)?;
    let cells = total_triples as u128 * taus.len() as u128 * q.omega_nodes as u128;
    if cells > q.budget as u128 {
        return Err(Error::BudgetExceeded {
            required: cells,
            budget: q.budget as u128,
        });
    }

    // deterministic partition: one task per (s_i1, s_i2) pair, combined in
    // task order afterwards so the result does not depend on thread count
    let per_task: Vec<Vec<(f64, u32)>> = tasks
        .par_iter()
        .map(|task| pair_correct_probs(task, &p, snr, h_i, &taus, q.omega_nodes))
        .collect();

    let mut weighted_sum = 0.0;
    let mut count_sum = 0u64;
    for entries in &per_task {
        for &(value, count) in entries {
            weighted_sum += value * count as f64;
            count_sum += count as u64;
        }
    }
    let mean_correct = weighted_sum / count_sum as f64;
    let ser = (1.0 - mean_correct).clamp(0.0, 1.0);

    let mut point = q.point(ser, SerMethod::Full);
    if let SymbolSelection::Sample(_) = q.symbol_selection {
        point.trials = Some(count_sum);
        if count_sum >= 2 {
            // sampling variance over the drawn triples
            let m = count_sum as f64;
            let mut var_acc = 0.0;
            for entries in &per_task {
                for &(value, count) in entries {
                    let d = value - mean_correct;
                    var_acc += count as f64 * d * d;
                }
            }
            let se = (var_acc / (m - 1.0) / m).sqrt();
            point.ci_low = Some((ser - 1.96 * se).max(0.0));
            point.ci_high = Some((ser + 1.96 * se).min(1.0));
        }
    }
    Ok(point)
}

/// Group the requested triples by interferer pair.
fn build_tasks(q: &SerQuery, n: usize) -> Result<(Vec<PairTask>, u64)> {
    match q.symbol_selection {
        SymbolSelection::All => {
            let mut tasks = Vec::with_capacity(n * n);
            for s1 in 0..n as u32 {
                for s2 in 0..n as u32 {
                    tasks.push(PairTask {
                        s1,
                        s2,
                        symbols: PairSymbols::All,
                    });
                }
            }
            Ok((tasks, (n as u64).pow(3)))
        }
        SymbolSelection::Sample(m) => {
            if m == 0 {
                return Err(Error::InvalidParameter(
                    "symbol subsample must draw at least one triple".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(q.subsample_seed);
            let mut grouped: BTreeMap<(u32, u32), BTreeMap<u32, u32>> = BTreeMap::new();
            for _ in 0..m {
                let s = rng.random_range(0..n as u32);
                let s1 = rng.random_range(0..n as u32);
                let s2 = rng.random_range(0..n as u32);
                *grouped.entry((s1, s2)).or_default().entry(s).or_default() += 1;
            }
            let tasks = grouped
                .into_iter()
                .map(|((s1, s2), by_symbol)| PairTask {
                    s1,
                    s2,
                    symbols: PairSymbols::Listed(by_symbol.into_iter().collect()),
                })
                .collect();
            Ok((tasks, m as u64))
        }
    }
}
