//! # lorasym
//!
//! Symbol-level simulator and analytic calculator for the LoRa
//! chirp-spread-spectrum physical layer under additive white Gaussian noise
//! and interference from one colliding same-spreading-factor transmission
//! that is aligned to the receiver neither in time (fractional-chip offset)
//! nor in phase.
//!
//! The crate provides:
//! - baseband modulation, dechirping, and DFT-argmax demodulation ([`phy`])
//! - the channel and time-offset interferer model ([`channel`])
//! - Rice/Rayleigh/Marcum-Q numerics and quadrature ([`stats`])
//! - closed-form interference patterns with their DFT oracle ([`pattern`])
//! - exact and approximate symbol-error-rate evaluation ([`ser`])
//! - seeded, reproducible parallel Monte Carlo estimation ([`monte_carlo`])

pub mod channel;
pub mod error;
pub mod pattern;
pub mod phy;
pub mod ser;
pub mod stats;

pub mod monte_carlo;

pub use error::{Error, Result};
pub use phy::{ModulationParams, Symbol, Waveform};
pub use ser::{SerCurve, SerMethod, SerPoint, SerQuery, SymbolSelection};
