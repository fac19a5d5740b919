//! Deterministic Monte-Carlo simulator for a 5G NR high-speed-train deployment.
//!
//! The library models the full network-side pipeline:
//!
//! - [`scenario`] — track geometry, train kinematics, and the trackside
//!   RRH deployment with dual 45°-rotated antenna panels.
//! - [`channel`] — UMi LOS path loss, spatially correlated shadowing,
//!   Ricean LOS-dominated fading, Doppler, and link budgets.
//! - [`measurements`] — uplink SRS beam sweeps, per-RRH TOA observations
//!   with CRLB-scaled noise, and TDOA batch formation.
//! - [`tracking`] — the EKF position/velocity engine that consumes TDOA
//!   batches and feeds beam steering and Doppler precompensation.
//! - [`beam`] — location-based RRH beam pointing and train beam selection.
//! - [`link`] — SFN downlink OFDM slots with oscillator phase noise,
//!   residual Doppler, PTRS-based CPE/ICI compensation, and an
//!   EESM throughput abstraction.
//! - [`campaign`] — seeded campaign orchestration, CDF metrics, and CSV
//!   output for the positioning and link studies.
//!
//! All randomness flows from a single master seed through counter-based
//! sub-seeds, so campaigns are reproducible byte-for-byte regardless of
//! worker scheduling.

pub mod beam;
pub mod campaign;
pub mod channel;
pub mod link;
pub mod measurements;
pub mod rng;
pub mod scenario;
pub mod tracking;

/// 2D position / velocity vector in meters or meters per second.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(rad: f64) -> f64 {
    let mut a = rad.rem_euclid(std::f64::consts::TAU);
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}
