//! Large-scale and small-scale propagation: UMi LOS path loss, spatially
//! correlated shadowing, Ricean LOS-dominated fading, Doppler, and link
//! budgets.

use crate::rng::{stream_rng, Stream};
use crate::{Vec2, SPEED_OF_LIGHT, THERMAL_NOISE_DBM_PER_HZ};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("path loss model valid for distances >= 1 m, got {0}")]
    DistanceTooSmall(f64),
    #[error("delay spread must be positive, got {0}")]
    NonPositiveDelaySpread(f64),
    #[error("K-factor must be finite, got {0}")]
    NonFiniteKFactor(f64),
}

/// 3GPP urban-micro street-canyon LOS path loss, dB.
///
/// 32.4 + 21*log10(d_m) + 20*log10(f_GHz).
pub fn path_loss_db(distance_m: f64, carrier_hz: f64) -> Result<f64, ChannelError> {
    if distance_m < 1.0 {
        return Err(ChannelError::DistanceTooSmall(distance_m));
    }
    Ok(32.4 + 21.0 * distance_m.log10() + 20.0 * (carrier_hz / 1e9).log10())
}

/// Doppler shift of a link, Hz: (v . u) * f_c / c, positive when closing.
///
/// `unit_toward_peer` must be unit length (checked in debug builds).
pub fn doppler_shift_hz(velocity_mps: Vec2, unit_toward_peer: Vec2, carrier_hz: f64) -> f64 {
    debug_assert!((unit_toward_peer.norm() - 1.0).abs() < 1e-9);
    velocity_mps.dot(&unit_toward_peer) * carrier_hz / SPEED_OF_LIGHT
}

// ---------------------------------------------------------------------------
// Shadowing
// ---------------------------------------------------------------------------

/// Zero-mean Gaussian shadowing along the track with exponential
/// autocorrelation; deterministic for a given seed.
#[derive(Debug, Clone)]
pub struct ShadowingField {
    grid: Vec<f64>,
    grid_step_m: f64,
    pub sigma_db: f64,
    pub decorrelation_m: f64,
}

impl ShadowingField {
    /// Builds the field over `[0, length_m]` on a 1 m grid.
    pub fn new(seed: u64, length_m: f64, sigma_db: f64, decorrelation_m: f64) -> Self {
        let grid_step_m = 1.0;
        let n = (length_m / grid_step_m).ceil() as usize + 2;
        let rho = (-grid_step_m / decorrelation_m).exp();
        let mut rng = stream_rng(seed, Stream::Shadowing, 0, 0, 0);
        let mut grid = Vec::with_capacity(n);
        let mut state: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_db;
        grid.push(state);
        let innovation = sigma_db * (1.0 - rho * rho).sqrt();
        for _ in 1..n {
            let w: f64 = rng.sample(StandardNormal);
            state = rho * state + innovation * w;
            grid.push(state);
        }
        Self { grid, grid_step_m, sigma_db, decorrelation_m }
    }

    /// Shadowing in dB at the given along-track position (linear interpolation).
    pub fn sample(&self, arc_position_m: f64) -> f64 {
        let x = (arc_position_m / self.grid_step_m).clamp(0.0, (self.grid.len() - 2) as f64);
        let i = x.floor() as usize;
        let frac = x - i as f64;
        self.grid[i] * (1.0 - frac) + self.grid[i + 1] * frac
    }
}

/// Convenience wrapper matching the one-shot call shape: a fresh field is
/// built per seed and sampled once.
pub fn shadowing_db(arc_position_m: f64, seed: u64, sigma_db: f64, decorrelation_m: f64) -> f64 {
    ShadowingField::new(seed, arc_position_m + 1.0, sigma_db, decorrelation_m).sample(arc_position_m)
}

// ---------------------------------------------------------------------------
// Ricean channel
// ---------------------------------------------------------------------------

/// Tapped delay line: one deterministic LOS tap plus exponentially decaying
/// Rayleigh diffuse taps. Tap powers sum to exactly one.
#[derive(Debug, Clone)]
pub struct ChannelResponse {
    /// (delay in seconds, complex gain) per tap; the first tap is the LOS.
    pub taps: Vec<(f64, Complex64)>,
    pub k_factor_db: f64,
    pub rms_delay_spread_s: f64,
}

impl ChannelResponse {
    /// Total tap power (should be 1 within 1e-9).
    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|(_, g)| g.norm_sqr()).sum()
    }

    /// Realized RMS delay spread of this tap set, s.
    pub fn realized_rms_delay_spread(&self) -> f64 {
        let p: f64 = self.total_power();
        let mean: f64 = self.taps.iter().map(|(d, g)| d * g.norm_sqr()).sum::<f64>() / p;
        let m2: f64 = self.taps.iter().map(|(d, g)| d * d * g.norm_sqr()).sum::<f64>() / p;
        (m2 - mean * mean).max(0.0).sqrt()
    }
}

/// Diffuse tap spacing, s.
const TAP_SPACING_S: f64 = 20e-9;
/// Last diffuse tap delay relative to the LOS, s.
const TAP_SUPPORT_S: f64 = 1.0e-6;

/// Solves for the exponential decay constant that gives the requested RMS
/// delay spread on the discrete tap grid.
fn solve_decay_constant(k_linear: f64, target_rms_s: f64) -> f64 {
    let p_diffuse = 1.0 / (k_linear + 1.0);
    let n_taps = (TAP_SUPPORT_S / TAP_SPACING_S).round() as usize;
    let rms_for = |tau_e: f64| -> f64 {
        let mut w_sum = 0.0;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for i in 1..=n_taps {
            let d = i as f64 * TAP_SPACING_S;
            let w = (-d / tau_e).exp();
            w_sum += w;
            mean += w * d;
            m2 += w * d * d;
        }
        // LOS at delay 0 carries power 1 - p_diffuse.
        mean *= p_diffuse / w_sum;
        m2 *= p_diffuse / w_sum;
        (m2 - mean * mean).max(0.0).sqrt()
    };
    let (mut lo, mut hi) = (1e-9, 20e-6);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if rms_for(mid) < target_rms_s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Draws a Ricean channel realization.
///
/// The LOS tap sits at `base_delay_s` with power K/(K+1) and a deterministic
/// unit phase; diffuse Rayleigh taps follow an exponential profile whose
/// decay is sized so the designed RMS delay spread equals `delay_spread_s`.
/// The diffuse power is renormalized per realization so the K-factor and the
/// unit total power hold exactly. K-factors above 60 dB collapse to a pure
/// LOS tap.
pub fn ricean_channel(
    base_delay_s: f64,
    k_factor_db: f64,
    delay_spread_s: f64,
    seed: u64,
) -> Result<ChannelResponse, ChannelError> {
    if !k_factor_db.is_finite() {
        return Err(ChannelError::NonFiniteKFactor(k_factor_db));
    }
    if !(delay_spread_s > 0.0) {
        return Err(ChannelError::NonPositiveDelaySpread(delay_spread_s));
    }

    if k_factor_db > 60.0 {
        return Ok(ChannelResponse {
            taps: vec![(base_delay_s, Complex64::new(1.0, 0.0))],
            k_factor_db,
            rms_delay_spread_s: 0.0,
        });
    }

    let k_linear = 10.0_f64.powf(k_factor_db / 10.0);
    let p_diffuse = 1.0 / (k_linear + 1.0);
    let p_los = 1.0 - p_diffuse;
    let scale = delay_spread_s / 100e-9;
    let tau_e = solve_decay_constant(k_linear, 100e-9) * scale;

    let mut rng = stream_rng(seed, Stream::ChannelTaps, 0, 0, 0);
    let n_taps = (TAP_SUPPORT_S * scale / (TAP_SPACING_S * scale)).round() as usize;
    let mut taps = Vec::with_capacity(n_taps + 1);
    taps.push((base_delay_s, Complex64::new(p_los.sqrt(), 0.0)));

    let mut diffuse_power = 0.0;
    for i in 1..=n_taps {
        let d = i as f64 * TAP_SPACING_S * scale;
        let sigma = (-d / tau_e).exp().sqrt();
        let g = Complex64::new(
            sigma * rng.sample::<f64, _>(StandardNormal),
            sigma * rng.sample::<f64, _>(StandardNormal),
        );
        diffuse_power += g.norm_sqr();
        taps.push((base_delay_s + d, g));
    }
    let norm = (p_diffuse / diffuse_power).sqrt();
    for (_, g) in taps.iter_mut().skip(1) {
        *g *= norm;
    }

    let rms = {
        let mean: f64 = taps.iter().map(|(d, g)| (d - base_delay_s) * g.norm_sqr()).sum();
        let m2: f64 = taps.iter().map(|(d, g)| (d - base_delay_s).powi(2) * g.norm_sqr()).sum();
        (m2 - mean * mean).max(0.0).sqrt()
    };

    Ok(ChannelResponse { taps, k_factor_db, rms_delay_spread_s: rms })
}

// ---------------------------------------------------------------------------
// Link budget
// ---------------------------------------------------------------------------

/// Radio parameters shared by every link of a campaign.
#[derive(Debug, Clone, Copy)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

/// One link's budget; `snr_db` is fully determined by the other fields.
#[derive(Debug, Clone, Copy)]
pub struct LinkBudget {
    pub distance_m: f64,
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub snr_db: f64,
}

impl LinkBudget {
    /// Recomputes the SNR from the stored fields (budget-closure invariant).
    pub fn recompute_snr_db(&self) -> f64 {
        let noise_dbm =
            THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db;
        self.tx_power_dbm + self.tx_gain_db + self.rx_gain_db
            - self.path_loss_db
            - self.shadowing_db
            - noise_dbm
    }
}

/// Assembles the link budget for one train-RRH link.
pub fn link_snr_db(
    distance_m: f64,
    tx_gain_db: f64,
    rx_gain_db: f64,
    shadowing_db: f64,
    radio: &RadioParams,
) -> Result<LinkBudget, ChannelError> {
    let path_loss = path_loss_db(distance_m.max(1.0), radio.carrier_hz)?;
    let mut budget = LinkBudget {
        distance_m,
        path_loss_db: path_loss,
        shadowing_db,
        tx_power_dbm: radio.tx_power_dbm,
        tx_gain_db,
        rx_gain_db,
        noise_figure_db: radio.noise_figure_db,
        bandwidth_hz: radio.bandwidth_hz,
        snr_db: 0.0,
    };
    budget.snr_db = budget.recompute_snr_db();
    Ok(budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn umi_los_closed_form() {
        // 32.4 + 21*log10(d) + 20*log10(f_GHz) evaluated directly.
        assert_abs_diff_eq!(path_loss_db(100.0, 30e9).unwrap(), 103.9424, epsilon = 1e-3);
        assert_abs_diff_eq!(path_loss_db(5.0, 30e9).unwrap(), 76.6208, epsilon = 1e-3);
        assert_abs_diff_eq!(path_loss_db(1.0, 1e9).unwrap(), 32.4, epsilon = 1e-12);
    }

    #[test]
    fn path_loss_rejects_near_field() {
        assert!(path_loss_db(0.5, 30e9).is_err());
    }

    #[test]
    fn doppler_closed_form_500kmh() {
        let v = Vec2::new(500.0 / 3.6, 0.0);
        let u = Vec2::new(1.0, 0.0);
        let f = doppler_shift_hz(v, u, 30e9);
        assert_abs_diff_eq!(f, 13_898.5, epsilon = 1.0);
        // Perpendicular geometry has no radial rate.
        assert_eq!(doppler_shift_hz(v, Vec2::new(0.0, 1.0), 30e9), 0.0);
        // Sign antisymmetry.
        assert_abs_diff_eq!(doppler_shift_hz(v, -u, 30e9), -f, epsilon = 1e-9);
    }

    #[test]
    fn doppler_bounded_by_radial_limit() {
        let mut rng = stream_rng(5, Stream::ErrorDraw, 0, 0, 0);
        for _ in 0..1000 {
            let v = Vec2::new(rng.gen::<f64>() * 280.0 - 140.0, rng.gen::<f64>() * 280.0 - 140.0);
            let az = rng.gen::<f64>() * std::f64::consts::TAU;
            let u = Vec2::new(az.cos(), az.sin());
            let f = doppler_shift_hz(v, u, 30e9);
            assert!(f.abs() <= v.norm() * 30e9 / SPEED_OF_LIGHT + 1e-9);
        }
    }

    #[test]
    fn shadowing_statistics() {
        let field = ShadowingField::new(3, 100_000.0, 4.0, 10.0);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|i| field.sample(i as f64)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.5, "mean {mean} dB");

        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(var, 16.0, epsilon = 1.5);

        // Autocorrelation at one decorrelation distance is var/e.
        let lag = 10;
        let mut acf = 0.0;
        for i in 0..n - lag {
            acf += (samples[i] - mean) * (samples[i + lag] - mean);
        }
        acf /= (n - lag) as f64;
        assert_abs_diff_eq!(acf / var, (-1.0_f64).exp(), epsilon = 0.05);
    }

    #[test]
    fn shadowing_is_deterministic() {
        let a = ShadowingField::new(9, 1000.0, 4.0, 10.0);
        let b = ShadowingField::new(9, 1000.0, 4.0, 10.0);
        for i in 0..1000 {
            assert_eq!(a.sample(i as f64), b.sample(i as f64));
        }
    }

    #[test]
    fn pure_los_limit() {
        let ch = ricean_channel(1e-6, 80.0, 100e-9, 0).unwrap();
        assert_eq!(ch.taps.len(), 1);
        assert_abs_diff_eq!(ch.taps[0].1.norm(), 1.0, epsilon = 1e-12);
        assert_eq!(ch.taps[0].0, 1e-6);
    }

    #[test]
    fn k_factor_power_split_is_exact() {
        let ch = ricean_channel(0.0, 13.3, 100e-9, 42).unwrap();
        let los = ch.taps[0].1.norm_sqr();
        let diffuse: f64 = ch.taps.iter().skip(1).map(|(_, g)| g.norm_sqr()).sum();
        let ratio_db = 10.0 * (los / diffuse).log10();
        assert_abs_diff_eq!(ratio_db, 13.3, epsilon = 0.1);
        assert_abs_diff_eq!(ch.total_power(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn channel_power_normalized_for_every_seed() {
        for seed in 0..200 {
            let ch = ricean_channel(0.0, 13.3, 100e-9, seed).unwrap();
            assert_abs_diff_eq!(ch.total_power(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn ensemble_rms_delay_spread() {
        let n = 10_000;
        let mut acc = 0.0;
        for seed in 0..n {
            acc += ricean_channel(0.0, 13.3, 100e-9, seed).unwrap().realized_rms_delay_spread();
        }
        let mean_ns = acc / n as f64 * 1e9;
        assert!((mean_ns - 100.0).abs() < 5.0, "ensemble RMS delay spread {mean_ns} ns");
    }

    #[test]
    fn budget_closure_is_exact() {
        let radio = RadioParams {
            tx_power_dbm: 30.0,
            carrier_hz: 30e9,
            bandwidth_hz: 400e6,
            noise_figure_db: 9.0,
        };
        let b = link_snr_db(100.0, 0.0, 0.0, 0.0, &radio).unwrap();
        assert_eq!(b.snr_db, b.recompute_snr_db());
        // 30 - 103.94 - (-174 + 86.02 + 9)
        assert_abs_diff_eq!(b.snr_db, 5.04, epsilon = 0.01);
    }

    #[test]
    fn halving_bandwidth_gains_3db() {
        let mk = |bw: f64| {
            link_snr_db(
                100.0,
                0.0,
                0.0,
                0.0,
                &RadioParams {
                    tx_power_dbm: 30.0,
                    carrier_hz: 30e9,
                    bandwidth_hz: bw,
                    noise_figure_db: 9.0,
                },
            )
            .unwrap()
            .snr_db
        };
        assert_abs_diff_eq!(mk(200e6) - mk(400e6), 3.0103, epsilon = 1e-3);
    }

    #[test]
    fn matched_beams_add_array_gains() {
        use crate::scenario::{beam_gain_db, ArrayGeometry};
        let radio = RadioParams {
            tx_power_dbm: 30.0,
            carrier_hz: 30e9,
            bandwidth_hz: 400e6,
            noise_figure_db: 9.0,
        };
        let base = link_snr_db(100.0, 0.0, 0.0, 0.0, &radio).unwrap().snr_db;
        let g_rrh = beam_gain_db(&ArrayGeometry::new(8, 4), 0.2, 0.2);
        let g_train = beam_gain_db(&ArrayGeometry::new(4, 4), -0.4, -0.4);
        let with = link_snr_db(100.0, g_rrh, g_train, 0.0, &radio).unwrap().snr_db;
        assert_abs_diff_eq!(with - base, 15.051 + 12.041, epsilon = 1e-2);
    }

    #[test]
    fn reciprocity_under_role_swap() {
        // Path loss, shadowing and |f_d| depend only on the geometry.
        let d = 137.0;
        let pl = path_loss_db(d, 30e9).unwrap();
        assert_eq!(pl, path_loss_db(d, 30e9).unwrap());
        let v = Vec2::new(100.0, 13.0);
        let u = Vec2::new(0.6, 0.8);
        assert_abs_diff_eq!(
            doppler_shift_hz(v, u, 30e9).abs(),
            doppler_shift_hz(-v, -u, 30e9).abs(),
            epsilon = 1e-12
        );
    }
}
