//! Property tests over randomized geometries: the invariants that must hold
//! for every spreading factor, symbol, and collision configuration.

use lorasym::channel::{synthesize_interferer, InterfererState};
use lorasym::pattern::{pattern_closed_form, pattern_dft};
use lorasym::phy::{demod_spectrum, demodulate, modulate, ModulationParams, Symbol, Waveform};
use lorasym::stats::{marcum_q1, rice_cdf};

use num_complex::Complex64;
use proptest::prelude::*;

fn arb_sf() -> impl Strategy<Value = u32> {
    2u32..=12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modulation_round_trip(sf in arb_sf(), raw in 0u32..4096) {
        let p = ModulationParams::new(sf).unwrap();
        let s = Symbol(raw % p.n() as u32);
        let got = demodulate(&modulate(s, &p).unwrap(), &p).unwrap();
        prop_assert_eq!(got, s);
    }

    #[test]
    fn modulated_samples_have_unit_magnitude(sf in arb_sf(), raw in 0u32..4096) {
        let p = ModulationParams::new(sf).unwrap();
        let s = Symbol(raw % p.n() as u32);
        for c in modulate(s, &p).unwrap().iter() {
            prop_assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn demodulation_is_phase_invariant(sf in 2u32..=10, raw in 0u32..4096, phase in 0.0..std::f64::consts::TAU) {
        let p = ModulationParams::new(sf).unwrap();
        let s = Symbol(raw % p.n() as u32);
        let h = Complex64::from_polar(1.0, phase);
        let w = modulate(s, &p).unwrap();
        let rotated = Waveform::from_samples(w.iter().map(|c| h * c).collect());
        prop_assert_eq!(demodulate(&rotated, &p).unwrap(), s);
    }

    #[test]
    fn interferer_spectrum_matches_closed_form(
        sf in 2u32..=9,
        tau_frac in 0.0f64..1.0,
        raw1 in 0u32..4096,
        raw2 in 0u32..4096,
        whole in 0u32..4096,
    ) {
        // the central cross-module oracle: the synthesized waveform's
        // demodulation spectrum equals the closed-form pattern bin by bin
        let p = ModulationParams::new(sf).unwrap();
        let n = p.n() as u32;
        let tau = (f64::from(whole % n) + tau_frac).min(p.n() as f64 - 1e-9);
        let i = InterfererState::new(
            1.0, 0.0, tau,
            Symbol(raw1 % n), Symbol(raw2 % n), &p,
        ).unwrap();
        let spectrum = demod_spectrum(&synthesize_interferer(&i, &p).unwrap(), &p).unwrap();
        let closed = pattern_closed_form(&i, &p).unwrap();
        for (k, bin) in spectrum.iter().enumerate() {
            prop_assert!(
                (bin - closed.bins()[k]).norm() <= 1e-9 * p.n() as f64,
                "bin {} differs: {} vs {}", k, bin, closed.bins()[k]
            );
        }
    }

    #[test]
    fn pattern_energy_is_conserved(
        sf in 2u32..=9,
        tau_frac in 0.0f64..1.0,
        raw1 in 0u32..4096,
        raw2 in 0u32..4096,
        whole in 0u32..4096,
    ) {
        let p = ModulationParams::new(sf).unwrap();
        let n = p.n() as u32;
        let tau = (f64::from(whole % n) + tau_frac).min(p.n() as f64 - 1e-9);
        let i = InterfererState::new(1.0, 0.0, tau, Symbol(raw1 % n), Symbol(raw2 % n), &p).unwrap();
        let dft = pattern_dft(&i, &p).unwrap();
        let energy = dft.total_energy();
        let want = (p.n() * p.n()) as f64;
        prop_assert!((energy - want).abs() <= 1e-6 * want);
    }

    #[test]
    fn rice_cdf_is_a_cdf(v in 0.0f64..40.0, y1 in 0.0f64..45.0, y2 in 0.0f64..45.0) {
        let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        let f_lo = rice_cdf(lo, v, 1.0).unwrap();
        let f_hi = rice_cdf(hi, v, 1.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&f_lo));
        prop_assert!((0.0..=1.0).contains(&f_hi));
        prop_assert!(f_lo <= f_hi + 1e-12);
        // complement identity against the Marcum kernel
        let q = marcum_q1(v, hi);
        prop_assert!((f_hi + q - 1.0).abs() < 1e-12);
    }
}
