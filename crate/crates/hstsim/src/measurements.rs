//! Uplink SRS epoch simulation: train-side beam sweeping, per-RRH TOA
//! observation with CRLB-scaled noise, and TDOA batch formation.
//!
//! TOAs are quantized to a 2^-64 s timestamp grid. At that resolution the
//! quantization is ~11 orders of magnitude below the measurement noise, and
//! it makes the train clock offset cancel *exactly* in floating point when
//! TDOAs are formed.

use crate::channel::{path_loss_db, RadioParams};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{beam_gain_db, ArrayGeometry, Deployment, TrainState};
use crate::{wrap_angle, SPEED_OF_LIGHT};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasurementError {
    #[error("SNR and bandwidth must be positive (snr={snr}, bandwidth={bandwidth})")]
    NonPositiveCrlbInput { snr: f64, bandwidth: f64 },
    #[error("TDOA needs at least 3 observations, got {0}")]
    InsufficientAnchors(usize),
}

/// Timestamp resolution of reported TOAs, s.
pub const TOA_QUANTUM_S: f64 = 1.0 / 18_446_744_073_709_551_616.0; // 2^-64

/// Rounds a time value to the timestamp grid.
pub fn quantize_toa(t_s: f64) -> f64 {
    (t_s / TOA_QUANTUM_S).round() * TOA_QUANTUM_S
}

/// Cramer-Rao lower bound for delay estimation with a flat spectrum of
/// bandwidth B: 1 / (8 pi^2 (B^2/12) SNR), in s^2. `snr_linear` is the
/// integrated correlation SNR (E/N0).
pub fn toa_variance(snr_linear: f64, bandwidth_hz: f64) -> Result<f64, MeasurementError> {
    if !(snr_linear > 0.0) || !(bandwidth_hz > 0.0) {
        return Err(MeasurementError::NonPositiveCrlbInput { snr: snr_linear, bandwidth: bandwidth_hz });
    }
    let beta_sq = bandwidth_hz * bandwidth_hz / 12.0;
    Ok(1.0 / (8.0 * PI * PI * beta_sq * snr_linear))
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// One RRH's timing observation for an SRS epoch.
#[derive(Debug, Clone, Copy)]
pub struct ToaObservation {
    pub rrh_id: u32,
    /// Arrival time including the unknown train clock offset, s.
    pub toa_s: f64,
    pub snr_db: f64,
    pub train_beam_index: usize,
    /// Reported TOA variance from the coarsely estimated SNR, s^2.
    pub variance_s2: f64,
}

/// One train-side beam of the sweep: a global steering azimuth through one
/// of the two train panels (0 = nose, 1 = tail).
#[derive(Debug, Clone, Copy)]
pub struct TrainBeam {
    pub azimuth: f64,
    pub panel: usize,
}

/// Builds the global beam list for an epoch. Sweep mode lays a codebook
/// grid over both panels; fixed mode uses only the nose and tail boresights.
pub fn build_train_beams(heading: f64, codebook_offsets: &[f64], sweep: bool) -> Vec<TrainBeam> {
    let nose = heading;
    let tail = heading + PI;
    if sweep {
        let mut beams = Vec::with_capacity(codebook_offsets.len() * 2);
        for &off in codebook_offsets {
            beams.push(TrainBeam { azimuth: wrap_angle(nose + off), panel: 0 });
        }
        for &off in codebook_offsets {
            beams.push(TrainBeam { azimuth: wrap_angle(tail + off), panel: 1 });
        }
        beams
    } else {
        vec![
            TrainBeam { azimuth: wrap_angle(nose), panel: 0 },
            TrainBeam { azimuth: wrap_angle(tail), panel: 1 },
        ]
    }
}

/// Where one serving RRH is pointing during the epoch, plus its link
/// shadowing.
#[derive(Debug, Clone, Copy)]
pub struct SrsLink {
    pub rrh_index: usize,
    /// RRH steering azimuth (from the location-based beamformer), rad.
    pub steer_azimuth: f64,
    /// Panel used for that steering direction.
    pub panel: usize,
    pub shadowing_db: f64,
}

/// Parameters of the uplink measurement process.
#[derive(Debug, Clone, Copy)]
pub struct SrsParams {
    pub radio: RadioParams,
    /// Observations below this SNR are dropped, dB.
    pub snr_floor_db: f64,
    /// Log-normal sigma of the coarse SNR estimate, dB.
    pub snr_estimate_sigma_db: f64,
    /// SNR cap feeding the CRLB: timing estimators saturate at high SNR
    /// (timestamp granularity, residual multipath), dB.
    pub crlb_snr_cap_db: f64,
    /// Disable measurement noise (debug mode).
    pub noise_enabled: bool,
}

/// Seeding key for one epoch's random draws.
#[derive(Debug, Clone, Copy)]
pub struct EpochKey {
    pub master_seed: u64,
    pub replication: u64,
    pub epoch_index: u64,
}

/// Received uplink SNR for one (beam, RRH) pair, dB.
fn uplink_snr_db(
    train: &TrainState,
    beam: &TrainBeam,
    train_array: &ArrayGeometry,
    deployment: &Deployment,
    link: &SrsLink,
    radio: &RadioParams,
) -> f64 {
    let rrh = &deployment.rrhs[link.rrh_index];
    let to_rrh = rrh.position - train.position;
    let distance = to_rrh.norm().max(1.0);
    let bearing_train_to_rrh = to_rrh.y.atan2(to_rrh.x);
    let panel_boresight = if beam.panel == 0 { train.heading } else { train.heading + PI };

    // The panel only sees its front hemisphere.
    let rel_bearing = wrap_angle(bearing_train_to_rrh - panel_boresight);
    if rel_bearing.abs() > FRAC_PI_2 {
        return f64::NEG_INFINITY;
    }
    let rel_steer = wrap_angle(beam.azimuth - panel_boresight);
    let tx_gain = beam_gain_db(train_array, rel_steer, rel_bearing);

    let bearing_rrh_to_train = rrh.bearing_to(train.position);
    let rrh_boresight = rrh.panels[link.panel];
    let rel_bearing_rrh = wrap_angle(bearing_rrh_to_train - rrh_boresight);
    if rel_bearing_rrh.abs() > FRAC_PI_2 {
        return f64::NEG_INFINITY;
    }
    let rel_steer_rrh = wrap_angle(link.steer_azimuth - rrh_boresight);
    let rx_gain = beam_gain_db(&rrh.array, rel_steer_rrh, rel_bearing_rrh);

    let pl = path_loss_db(distance, radio.carrier_hz).expect("distance clamped to >= 1 m");
    let noise_dbm = crate::THERMAL_NOISE_DBM_PER_HZ
        + 10.0 * radio.bandwidth_hz.log10()
        + radio.noise_figure_db;
    radio.tx_power_dbm + tx_gain + rx_gain - pl - link.shadowing_db - noise_dbm
}

/// Simulates one SRS epoch: for each serving RRH the best train beam is
/// selected, and a TOA observation with CRLB-scaled Gaussian noise is
/// produced. RRHs whose best-beam SNR is below the floor are dropped.
pub fn sweep_srs(
    train: &TrainState,
    deployment: &Deployment,
    links: &[SrsLink],
    train_array: &ArrayGeometry,
    beams: &[TrainBeam],
    params: &SrsParams,
    clock_offset_s: f64,
    key: &EpochKey,
) -> Vec<ToaObservation> {
    let offset_q = quantize_toa(clock_offset_s);
    let mut observations = Vec::new();
    for link in links {
        let rrh = &deployment.rrhs[link.rrh_index];
        let (best_beam, best_snr) = beams
            .iter()
            .enumerate()
            .map(|(i, b)| (i, uplink_snr_db(train, b, train_array, deployment, link, &params.radio)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("non-empty codebook");

        if best_snr < params.snr_floor_db {
            continue;
        }

        let distance = (rrh.position - train.position).norm();
        let geometric_toa = distance / SPEED_OF_LIGHT;
        let capped_snr = best_snr.min(params.crlb_snr_cap_db);
        let snr_linear = 10.0_f64.powf(capped_snr / 10.0);
        let true_variance = toa_variance(snr_linear, params.radio.bandwidth_hz)
            .expect("positive SNR and bandwidth");

        let (noise, reported_variance) = if params.noise_enabled {
            let mut noise_rng = stream_rng(
                key.master_seed,
                Stream::ToaNoise,
                key.replication,
                key.epoch_index,
                u64::from(rrh.id),
            );
            let n: f64 = noise_rng.sample::<f64, _>(StandardNormal) * true_variance.sqrt();
            let mut est_rng = stream_rng(
                key.master_seed,
                Stream::SnrEstimate,
                key.replication,
                key.epoch_index,
                u64::from(rrh.id),
            );
            let est_snr_db = (capped_snr
                + est_rng.sample::<f64, _>(StandardNormal) * params.snr_estimate_sigma_db)
                .min(params.crlb_snr_cap_db);
            let reported =
                toa_variance(10.0_f64.powf(est_snr_db / 10.0), params.radio.bandwidth_hz).unwrap();
            (n, reported)
        } else {
            // Debug mode: measurements are exact, and the reported variance
            // says so (a tiny floor keeps covariances positive definite).
            (0.0, true_variance * 1e-12)
        };

        observations.push(ToaObservation {
            rrh_id: rrh.id,
            toa_s: quantize_toa(geometric_toa + noise) + offset_q,
            snr_db: best_snr,
            train_beam_index: best_beam,
            variance_s2: reported_variance,
        });
    }
    observations
}

// ---------------------------------------------------------------------------
// TDOA formation
// ---------------------------------------------------------------------------

/// One differenced timing measurement against the reference RRH.
#[derive(Debug, Clone, Copy)]
pub struct TdoaPair {
    pub rrh_id: u32,
    pub tdoa_s: f64,
    pub variance_s2: f64,
}

/// One positioning epoch's TDOA set. The covariance is full: differencing
/// against a shared reference correlates every pair through the reference
/// TOA variance.
#[derive(Debug, Clone)]
pub struct TdoaBatch {
    pub epoch_time: f64,
    pub reference_rrh_id: u32,
    pub pairs: Vec<TdoaPair>,
    pub covariance: DMatrix<f64>,
}

/// Differences TOAs against the highest-SNR observation. The shared train
/// clock offset cancels exactly (see the module-level quantization note).
pub fn form_tdoa(observations: &[ToaObservation], epoch_time: f64) -> Result<TdoaBatch, MeasurementError> {
    if observations.len() < 3 {
        return Err(MeasurementError::InsufficientAnchors(observations.len()));
    }
    let ref_idx = observations
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.snr_db.partial_cmp(&b.1.snr_db).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let reference = observations[ref_idx];

    let pairs: Vec<TdoaPair> = observations
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != ref_idx)
        .map(|(_, o)| TdoaPair {
            rrh_id: o.rrh_id,
            tdoa_s: o.toa_s - reference.toa_s,
            variance_s2: o.variance_s2,
        })
        .collect();

    let n = pairs.len();
    let mut covariance = DMatrix::from_element(n, n, reference.variance_s2);
    for (i, p) in pairs.iter().enumerate() {
        covariance[(i, i)] += p.variance_s2;
    }

    Ok(TdoaBatch { epoch_time, reference_rrh_id: reference.rrh_id, pairs, covariance })
}

// ---------------------------------------------------------------------------
// Offline CRLB-attainment validation
// ---------------------------------------------------------------------------

/// Offline check that an explicit cross-correlation TOA estimator on a
/// synthetic flat-spectrum SRS attains the CRLB used as the noise model.
pub mod crlb_validation {
    use super::*;
    use num_complex::Complex64;
    use rustfft::FftPlanner;

    /// Result of one SNR point of the validation experiment.
    #[derive(Debug, Clone, Copy)]
    pub struct CrlbPoint {
        pub snr_db: f64,
        pub empirical_std_s: f64,
        pub crlb_std_s: f64,
    }

    impl CrlbPoint {
        pub fn ratio(&self) -> f64 {
            self.empirical_std_s / self.crlb_std_s
        }
    }

    /// Number of samples of the synthetic SRS.
    const SRS_SAMPLES: usize = 256;
    /// Correlation search oversampling relative to the sample grid.
    const OVERSAMPLE: usize = 128;

    /// Runs `trials` delay estimations at each SNR and compares the empirical
    /// standard deviation against the CRLB. The estimator cross-correlates
    /// with the known SRS on a fine grid within one sample of the coarse
    /// peak and refines with a parabolic fit, mirroring tracking operation
    /// where the search window is already narrowed.
    pub fn run(snr_db_points: &[f64], bandwidth_hz: f64, trials: usize, seed: u64) -> Vec<CrlbPoint> {
        let n = SRS_SAMPLES;
        let mut planner = FftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(n);
        let fft = planner.plan_fft_forward(n);

        snr_db_points
            .iter()
            .map(|&snr_db| {
                let snr = 10.0_f64.powf(snr_db / 10.0);
                let noise_var = n as f64 / snr; // E/N0 = snr with unit-power signal
                let mut errors = Vec::with_capacity(trials);

                for trial in 0..trials {
                    let mut rng =
                        stream_rng(seed, Stream::ToaNoise, snr_db.to_bits(), trial as u64, 0);
                    // Flat spectrum: QPSK on every bin.
                    let spectrum: Vec<Complex64> = (0..n)
                        .map(|_| {
                            let re = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                            let im = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                            Complex64::new(re, im) / 2.0_f64.sqrt()
                        })
                        .collect();

                    let true_delay_samples = rng.gen::<f64>() * 0.8 - 0.4;
                    let delayed: Vec<Complex64> = spectrum
                        .iter()
                        .enumerate()
                        .map(|(k, x)| {
                            let f = signed_bin(k, n);
                            x * Complex64::from_polar(
                                1.0,
                                -std::f64::consts::TAU * f * true_delay_samples / n as f64,
                            )
                        })
                        .collect();

                    let mut rx = delayed.clone();
                    ifft.process(&mut rx);
                    // Unit per-sample signal power, so E = N and sigma^2 = N/snr.
                    let sigma = (noise_var / 2.0).sqrt();
                    for v in rx.iter_mut() {
                        *v /= (n as f64).sqrt();
                        *v += Complex64::new(
                            sigma * rng.sample::<f64, _>(StandardNormal),
                            sigma * rng.sample::<f64, _>(StandardNormal),
                        );
                    }

                    // Cross-spectrum against the known SRS.
                    let mut fwd = rx;
                    fft.process(&mut fwd);
                    let cross: Vec<Complex64> = fwd
                        .iter()
                        .zip(&spectrum)
                        .map(|(y, x)| y * x.conj())
                        .collect();

                    let est = fine_peak(&cross, n);
                    errors.push((est - true_delay_samples) / bandwidth_hz);
                }

                let mean = errors.iter().sum::<f64>() / errors.len() as f64;
                let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                    / (errors.len() - 1) as f64;
                CrlbPoint {
                    snr_db,
                    empirical_std_s: var.sqrt(),
                    crlb_std_s: toa_variance(snr, bandwidth_hz).unwrap().sqrt(),
                }
            })
            .collect()
    }

    fn signed_bin(k: usize, n: usize) -> f64 {
        if k < n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        }
    }

    /// Grid search of the correlation magnitude within +-1 sample of zero
    /// lag, followed by a parabolic refinement. Returns the delay in samples.
    fn fine_peak(cross: &[Complex64], n: usize) -> f64 {
        let corr = |tau: f64| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, c) in cross.iter().enumerate() {
                let f = signed_bin(k, n);
                acc += c * Complex64::from_polar(1.0, std::f64::consts::TAU * f * tau / n as f64);
            }
            acc.norm_sqr()
        };
        let step = 1.0 / OVERSAMPLE as f64;
        let mut best = (0.0, f64::NEG_INFINITY);
        let mut tau = -1.0;
        while tau <= 1.0 {
            let v = corr(tau);
            if v > best.1 {
                best = (tau, v);
            }
            tau += step;
        }
        // Parabolic interpolation around the best grid point.
        let (t0, v0) = best;
        let (vm, vp) = (corr(t0 - step), corr(t0 + step));
        let denom = vm - 2.0 * v0 + vp;
        if denom.abs() > 1e-30 {
            t0 + 0.5 * (vm - vp) / denom * step
        } else {
            t0
        }
    }
}
