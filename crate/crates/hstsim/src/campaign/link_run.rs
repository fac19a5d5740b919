//! The downlink throughput campaign: SFN slots at fixed distances from the
//! closest RRH, with estimate-error-driven residual impairments, swept over
//! SNR and compensation modes.

use super::config::CampaignConfig;
use super::positioning::PositioningOutcome;
use super::CampaignError;
use crate::beam::point_beam;
use crate::channel::{doppler_shift_hz, path_loss_db, ricean_channel, ChannelResponse};
use crate::link::{
    phase_noise_trace, sfn_ofdm_slot, Compensation, LinkCalibration, Mcs, OfdmNumerology,
    PhaseNoiseTrace, PnMask, PtrsKind, PtrsLayout, RrhSignal, SlotParams,
};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scenario::{beam_gain_db, train_codebook, ArrayGeometry, Rrh};
use crate::{wrap_angle, Vec2, SPEED_OF_LIGHT};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::io::Write;

/// Position/velocity estimate error statistics feeding the link campaign.
#[derive(Debug, Clone, Copy)]
pub struct ErrorStatistics {
    pub position_sigma_m: f64,
    pub velocity_sigma_mps: f64,
}

impl ErrorStatistics {
    /// The "Ideal" reference: no phase noise, no estimation errors.
    pub fn ideal() -> Self {
        Self { position_sigma_m: 0.0, velocity_sigma_mps: 0.0 }
    }

    /// Per-axis sigmas recovered from a positioning campaign's error-norm
    /// series (the norm of an isotropic 2D Gaussian is Rayleigh with
    /// median sigma*sqrt(2 ln 2)).
    pub fn from_positioning(outcome: &PositioningOutcome) -> Self {
        let factor = (2.0 * 2.0_f64.ln()).sqrt();
        Self {
            position_sigma_m: outcome.position_error_m.percentile(50.0) / factor,
            velocity_sigma_mps: outcome.velocity_error_mps.percentile(50.0) / factor,
        }
    }

    pub fn from_config(cfg: &CampaignConfig) -> Self {
        if cfg.link.error_mode == "ideal" {
            Self::ideal()
        } else {
            Self {
                position_sigma_m: cfg.link.position_error_sigma_m,
                velocity_sigma_mps: cfg.link.velocity_error_sigma_mps,
            }
        }
    }
}

/// One output row of the link campaign.
#[derive(Debug, Clone)]
pub struct LinkRow {
    pub snr_db: f64,
    pub mode: String,
    pub mcs: u32,
    pub distance_m: f64,
    pub throughput_gbps: f64,
    /// Mean post-compensation effective SINR over the realizations, dB
    /// (diagnostic; not part of the CSV schema).
    pub mean_effective_sinr_db: f64,
}

/// The full throughput-vs-SNR table.
#[derive(Debug, Clone, Default)]
pub struct LinkTable {
    pub rows: Vec<LinkRow>,
}

impl LinkTable {
    /// Maximum throughput a (mode, mcs, distance) reaches over the sweep.
    pub fn plateau_gbps(&self, mode: &str, mcs: u32, distance_m: f64) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.mode == mode && r.mcs == mcs && r.distance_m == distance_m)
            .map(|r| r.throughput_gbps)
            .fold(0.0, f64::max)
    }

    pub fn throughput_at(&self, mode: &str, mcs: u32, distance_m: f64, snr_db: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.mode == mode && r.mcs == mcs && r.distance_m == distance_m && r.snr_db == snr_db
            })
            .map(|r| r.throughput_gbps)
    }

    /// Writes the campaign CSV plus a gnuplot script per (mcs, distance).
    pub fn write_outputs(&self, dir: &std::path::Path) -> Result<(), CampaignError> {
        std::fs::create_dir_all(dir)?;
        let mut out =
            std::io::BufWriter::new(std::fs::File::create(dir.join("link_throughput.csv"))?);
        writeln!(out, "snr_db,mode,mcs,distance_m,throughput_gbps")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.snr_db, r.mode, r.mcs, r.distance_m, r.throughput_gbps
            )?;
        }
        drop(out);

        let mut keys: Vec<(u32, u64)> = self
            .rows
            .iter()
            .map(|r| (r.mcs, r.distance_m.to_bits()))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        for (mcs, dist_bits) in keys {
            let dist = f64::from_bits(dist_bits);
            let modes: Vec<String> = {
                let mut m: Vec<String> = self
                    .rows
                    .iter()
                    .filter(|r| r.mcs == mcs && r.distance_m == dist)
                    .map(|r| r.mode.clone())
                    .collect();
                m.sort();
                m.dedup();
                m
            };
            let name = format!("link_mcs{mcs}_{dist:.0}m");
            let mut pivot =
                std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{name}.csv")))?);
            let mut snrs: Vec<u64> = self
                .rows
                .iter()
                .filter(|r| r.mcs == mcs && r.distance_m == dist)
                .map(|r| r.snr_db.to_bits())
                .collect();
            snrs.sort_unstable_by(|a, b| {
                f64::from_bits(*a).partial_cmp(&f64::from_bits(*b)).unwrap()
            });
            snrs.dedup();
            writeln!(pivot, "snr_db,{}", modes.join(","))?;
            for s in snrs {
                let snr = f64::from_bits(s);
                let cells: Vec<String> = modes
                    .iter()
                    .map(|m| {
                        self.throughput_at(m, mcs, dist, snr)
                            .map(|v| v.to_string())
                            .unwrap_or_default()
                    })
                    .collect();
                writeln!(pivot, "{},{}", snr, cells.join(","))?;
            }
            drop(pivot);

            let mut gp = std::io::BufWriter::new(
                std::fs::File::create(dir.join(format!("{name}.gp")))?,
            );
            writeln!(gp, "set datafile separator comma")?;
            writeln!(gp, "set key bottom right")?;
            writeln!(gp, "set xlabel \"SNR [dB]\"")?;
            writeln!(gp, "set ylabel \"Throughput [Gbps]\"")?;
            writeln!(gp, "set title \"MCS {mcs}, {dist:.0} m from the closest RRH\"")?;
            writeln!(gp, "set grid")?;
            let plots: Vec<String> = modes
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    format!("\"{name}.csv\" using 1:{} with linespoints title \"{m}\"", i + 2)
                })
                .collect();
            writeln!(gp, "plot {}", plots.join(", \\\n     "))?;
        }
        Ok(())
    }
}

/// Two-RRH straight-track geometry for one evaluation distance.
struct LinkGeometry {
    rrhs: [Rrh; 2],
    train_position: Vec2,
    velocity: Vec2,
}

fn link_geometry(cfg: &CampaignConfig, distance_m: f64) -> Result<LinkGeometry, CampaignError> {
    let off = cfg.scenario.lateral_offset_m;
    if distance_m <= off {
        return Err(CampaignError::Config(super::config::ConfigError::Invalid(format!(
            "link distance {distance_m} m must exceed the lateral offset {off} m"
        ))));
    }
    let isd = cfg.scenario.inter_site_distance_m;
    let rrh_array =
        ArrayGeometry::new(cfg.scenario.rrh_array_horizontal, cfg.scenario.rrh_array_vertical);
    // Straight +x track; RRH A on the left, RRH B one site ahead on the right.
    let a = Rrh {
        id: 0,
        position: Vec2::new(0.0, off),
        arc_m: 0.0,
        panels: [wrap_angle(-FRAC_PI_2 - FRAC_PI_4), wrap_angle(-FRAC_PI_2 + FRAC_PI_4)],
        array: rrh_array,
    };
    let b = Rrh {
        id: 1,
        position: Vec2::new(isd, -off),
        arc_m: isd,
        panels: [wrap_angle(FRAC_PI_2 - FRAC_PI_4), wrap_angle(FRAC_PI_2 + FRAC_PI_4)],
        array: rrh_array,
    };
    // Train behind RRH A's abeam point at the 3D evaluation distance, moving
    // toward RRH B at cruise speed.
    let x0 = (distance_m * distance_m - off * off).sqrt();
    Ok(LinkGeometry {
        rrhs: [a, b],
        train_position: Vec2::new(x0, 0.0),
        velocity: Vec2::new(cfg.scenario.max_speed_kmh / 3.6, 0.0),
    })
}

/// Per-realization residual impairments derived from one estimate-error draw.
struct Residuals {
    doppler_hz: [f64; 2],
    delay_s: [f64; 2],
    /// Linear amplitude factor per link from beam-pointing losses.
    beam_loss: [f64; 2],
}

fn draw_residuals(
    geo: &LinkGeometry,
    cfg: &CampaignConfig,
    stats: &ErrorStatistics,
    train_array: &ArrayGeometry,
    codebook: &[f64],
    rng: &mut impl Rng,
) -> Residuals {
    let carrier = cfg.channel.carrier_ghz * 1e9;
    let interval = cfg.measurement.srs_interval_ms / 1e3;

    // The EKF estimate is one epoch old (age tau); the network recomputes
    // the per-slot Doppler and timing factors from the constant-velocity
    // prediction at the transmission time, so the factor errors are driven
    // by the estimate errors (the position error amplified by the velocity
    // error over the prediction lead).
    let tau: f64 = rng.gen::<f64>() * interval;
    let p_true = geo.train_position;
    let v_true = geo.velocity;
    let p_epoch = p_true - v_true * tau;
    let ep = Vec2::new(
        stats.position_sigma_m * rng.sample::<f64, _>(StandardNormal),
        stats.position_sigma_m * rng.sample::<f64, _>(StandardNormal),
    );
    let ev = Vec2::new(
        stats.velocity_sigma_mps * rng.sample::<f64, _>(StandardNormal),
        stats.velocity_sigma_mps * rng.sample::<f64, _>(StandardNormal),
    );
    // Epoch-time estimate (used by the held beams) and its constant-velocity
    // prediction to the slot time (used by the Doppler/timing factors).
    let p_est = p_epoch + ep;
    let v_est = v_true + ev;
    let p_pred = p_est + v_est * tau;

    let mut doppler = [0.0; 2];
    let mut arrival_offset = [0.0; 2];
    let mut beam_loss = [0.0; 2];
    for (i, rrh) in geo.rrhs.iter().enumerate() {
        let u_true = (rrh.position - p_true).normalize();
        let u_pred = (rrh.position - p_pred).normalize();
        let f_true = doppler_shift_hz(v_true, u_true, carrier);
        let f_est = doppler_shift_hz(v_est, u_pred, carrier);
        doppler[i] = f_true - f_est;

        let tau_true = (rrh.position - p_true).norm() / SPEED_OF_LIGHT;
        let tau_est = (rrh.position - p_pred).norm() / SPEED_OF_LIGHT;
        arrival_offset[i] = tau_true - tau_est;

        // RRH beam held at the epoch estimate; loss against the slot-time
        // bearing.
        let assignment = point_beam(rrh, p_est, 0.0);
        let boresight = rrh.panels[assignment.panel_index];
        let bearing_now = rrh.bearing_to(p_true);
        let gain = beam_gain_db(
            &rrh.array,
            wrap_angle(assignment.steer_azimuth - boresight),
            wrap_angle(bearing_now - boresight),
        );
        let peak = 10.0 * (rrh.array.elements() as f64).log10();
        let mut loss_db = (peak - gain).max(0.0);

        // Train beam: codebook argmax toward the epoch-time bearing, losses
        // evaluated against the slot-time bearing through the same panel.
        let bearing_epoch = (rrh.position - p_epoch).y.atan2((rrh.position - p_epoch).x);
        let panel_boresight = if bearing_epoch.abs() <= FRAC_PI_2 { 0.0 } else { PI };
        let rel_epoch = wrap_angle(bearing_epoch - panel_boresight);
        let best = codebook
            .iter()
            .map(|&o| beam_gain_db(train_array, o, rel_epoch))
            .zip(codebook)
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .map(|(_, &o)| o)
            .unwrap_or(0.0);
        let bearing_now_train = (rrh.position - p_true).y.atan2((rrh.position - p_true).x);
        let rel_now = wrap_angle(bearing_now_train - panel_boresight);
        let train_gain = beam_gain_db(train_array, best, rel_now);
        let train_peak = 10.0 * (train_array.elements() as f64).log10();
        loss_db += (train_peak - train_gain).max(0.0);

        beam_loss[i] = 10f64.powf(-loss_db / 20.0);
    }

    Residuals {
        doppler_hz: doppler,
        delay_s: [0.0, arrival_offset[1] - arrival_offset[0]],
        beam_loss,
    }
}

/// Runs the link campaign and returns the throughput table. Ideal reference
/// rows (no phase noise, no estimate errors) are always included.
pub fn run_link_campaign(
    cfg: &CampaignConfig,
    stats: &ErrorStatistics,
) -> Result<LinkTable, CampaignError> {
    cfg.validate()?;
    let master = cfg.campaign.master_seed;
    let numerology = OfdmNumerology::for_prbs(cfg.link.prbs)
        .map_err(|e| CampaignError::Config(super::config::ConfigError::Invalid(e.to_string())))?;
    let calib: LinkCalibration = cfg.link.calibration();
    let mask = cfg.link.pn_mask();
    let train_array =
        ArrayGeometry::new(cfg.scenario.train_array_horizontal, cfg.scenario.train_array_vertical);
    let codebook = train_codebook(&train_array);

    let modes: Vec<Compensation> = cfg
        .link
        .modes
        .iter()
        .map(|m| match m.as_str() {
            "none" => Compensation::None,
            "cpe" => Compensation::Cpe,
            _ => Compensation::Ici { half_width: cfg.link.deici_half_width },
        })
        .collect();

    // One task per (mcs, distance, snr) point.
    struct Point {
        mcs: Mcs,
        distance: f64,
        snr_db: f64,
        index: u64,
    }
    let mut points = Vec::new();
    let mut index = 0u64;
    for &mcs_index in &cfg.link.mcs_indices {
        let mcs = Mcs::from_index(mcs_index)
            .map_err(|e| CampaignError::Config(super::config::ConfigError::Invalid(e.to_string())))?;
        for &distance in &cfg.link.distances_m {
            for &snr_db in &cfg.link.snr_sweep_db {
                points.push(Point { mcs, distance, snr_db, index });
                index += 1;
            }
        }
    }

    let results: Vec<Vec<LinkRow>> = points
        .par_iter()
        .map(|point| -> Result<Vec<LinkRow>, CampaignError> {
            let geo = link_geometry(cfg, point.distance)?;
            let carrier = cfg.channel.carrier_ghz * 1e9;

            // Ideal relative link amplitudes (unit total composite power).
            let pl: Vec<f64> = geo
                .rrhs
                .iter()
                .map(|r| {
                    path_loss_db((r.position - geo.train_position).norm().max(1.0), carrier)
                        .expect("distance above 1 m")
                })
                .collect();
            let norm: f64 = pl.iter().map(|p| 10f64.powf(-p / 10.0)).sum::<f64>().sqrt();
            let ideal_amp: Vec<f64> =
                pl.iter().map(|p| 10f64.powf(-p / 20.0) / norm).collect();

            let n_samples = numerology.slot_samples();
            let fs = numerology.sample_rate_hz();
            let silent = PhaseNoiseTrace::silent(n_samples, fs);
            let k_factor = cfg.channel.k_factor_db;
            let delay_spread = cfg.channel.delay_spread_ns * 1e-9;

            let ptrs_for = |mode: &Compensation| match mode {
                Compensation::None => PtrsLayout::new(PtrsKind::None, numerology.subcarriers()),
                Compensation::Cpe => {
                    PtrsLayout::new(PtrsKind::Distributed, numerology.subcarriers())
                }
                Compensation::Ici { .. } => {
                    PtrsLayout::new(PtrsKind::Block, numerology.subcarriers())
                }
            };

            let mut mode_bits: Vec<f64> = vec![0.0; modes.len()];
            let mut mode_sinr: Vec<f64> = vec![0.0; modes.len()];
            for realization in 0..cfg.link.realizations_per_point as u64 {
                let mut err_rng =
                    stream_rng(master, Stream::ErrorDraw, point.index, realization, 0);
                let residuals = draw_residuals(
                    &geo,
                    cfg,
                    stats,
                    &train_array,
                    &codebook,
                    &mut err_rng,
                );

                let channels: Vec<Vec<ChannelResponse>> = (0..2)
                    .map(|r| {
                        (0..cfg.link.rank)
                            .map(|l| {
                                ricean_channel(
                                    0.0,
                                    k_factor,
                                    delay_spread,
                                    derive_seed(
                                        master,
                                        Stream::ChannelTaps,
                                        point.index,
                                        realization,
                                        (r * 4 + l) as u64,
                                    ),
                                )
                                .expect("valid channel parameters")
                            })
                            .collect()
                    })
                    .collect();
                let tx_pn: Vec<PhaseNoiseTrace> = (0..2)
                    .map(|r| {
                        pn_trace_or_silent(
                            &mask,
                            n_samples,
                            fs,
                            derive_seed(master, Stream::PhaseNoise, point.index, realization, r),
                        )
                    })
                    .collect();
                let rx_pn = pn_trace_or_silent(
                    &mask,
                    n_samples,
                    fs,
                    derive_seed(master, Stream::PhaseNoise, point.index, realization, 9),
                );

                // Evaluate every mode against its own PTRS layout but the
                // same impairment realization (channels, PN, residuals).
                for (mi, mode) in modes.iter().enumerate() {
                    let ptrs = ptrs_for(mode);
                    let params = SlotParams {
                        numerology: &numerology,
                        mcs: point.mcs,
                        ptrs: &ptrs,
                        snr_db: point.snr_db,
                        rank: cfg.link.rank,
                        calib: &calib,
                    };
                    let rrh_signals: Vec<RrhSignal> = (0..2)
                        .map(|r| RrhSignal {
                            channels: channels[r].iter().collect(),
                            amplitude: ideal_amp[r] * residuals.beam_loss[r],
                            residual_doppler_hz: residuals.doppler_hz[r],
                            residual_delay_s: residuals.delay_s[r],
                            tx_pn: &tx_pn[r],
                        })
                        .collect();
                    let out = sfn_ofdm_slot(
                        &params,
                        &rrh_signals,
                        &rx_pn,
                        &[*mode],
                        derive_seed(master, Stream::LinkSlot, point.index, realization, 0),
                    );
                    mode_bits[mi] += out[0].throughput_bits;
                    mode_sinr[mi] += out[0].effective_sinr_db;
                }
            }

            // Ideal reference: no PN, no errors, no beam losses.
            let mut ideal_bits = 0.0;
            let mut ideal_sinr = 0.0;
            let ideal_ptrs = PtrsLayout::new(PtrsKind::None, numerology.subcarriers());
            for realization in 0..cfg.link.ideal_realizations_per_point as u64 {
                let channels: Vec<Vec<ChannelResponse>> = (0..2)
                    .map(|r| {
                        (0..cfg.link.rank)
                            .map(|l| {
                                ricean_channel(
                                    0.0,
                                    k_factor,
                                    delay_spread,
                                    derive_seed(
                                        master,
                                        Stream::ChannelTaps,
                                        point.index,
                                        realization,
                                        (r * 4 + l) as u64,
                                    ),
                                )
                                .expect("valid channel parameters")
                            })
                            .collect()
                    })
                    .collect();
                let params = SlotParams {
                    numerology: &numerology,
                    mcs: point.mcs,
                    ptrs: &ideal_ptrs,
                    snr_db: point.snr_db,
                    rank: cfg.link.rank,
                    calib: &calib,
                };
                let rrh_signals: Vec<RrhSignal> = (0..2)
                    .map(|r| RrhSignal {
                        channels: channels[r].iter().collect(),
                        amplitude: ideal_amp[r],
                        residual_doppler_hz: 0.0,
                        residual_delay_s: 0.0,
                        tx_pn: &silent,
                    })
                    .collect();
                let out = sfn_ofdm_slot(
                    &params,
                    &rrh_signals,
                    &silent,
                    &[Compensation::None],
                    derive_seed(master, Stream::LinkSlot, point.index, realization, 1),
                );
                ideal_bits += out[0].throughput_bits;
                ideal_sinr += out[0].effective_sinr_db;
            }

            let slot_s = numerology.slot_duration_s();
            let mut rows = Vec::new();
            rows.push(LinkRow {
                snr_db: point.snr_db,
                mode: "ideal".into(),
                mcs: point.mcs.index(),
                distance_m: point.distance,
                throughput_gbps: ideal_bits
                    / cfg.link.ideal_realizations_per_point as f64
                    / slot_s
                    / 1e9,
                mean_effective_sinr_db: ideal_sinr / cfg.link.ideal_realizations_per_point as f64,
            });
            for (mi, mode) in modes.iter().enumerate() {
                rows.push(LinkRow {
                    snr_db: point.snr_db,
                    mode: mode.label().into(),
                    mcs: point.mcs.index(),
                    distance_m: point.distance,
                    throughput_gbps: mode_bits[mi]
                        / cfg.link.realizations_per_point as f64
                        / slot_s
                        / 1e9,
                    mean_effective_sinr_db: mode_sinr[mi]
                        / cfg.link.realizations_per_point as f64,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(LinkTable { rows: results.into_iter().flatten().collect() })
}

fn pn_trace_or_silent(mask: &PnMask, n: usize, fs: f64, seed: u64) -> PhaseNoiseTrace {
    if mask.is_disabled() {
        PhaseNoiseTrace::silent(n, fs)
    } else {
        phase_noise_trace(mask, n, fs, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> CampaignConfig {
        let mut cfg = CampaignConfig::default();
        cfg.link.snr_sweep_db = vec![30.0];
        cfg.link.realizations_per_point = 3;
        cfg.link.ideal_realizations_per_point = 2;
        cfg.link.distances_m = vec![290.0];
        cfg
    }

    #[test]
    fn table_contains_all_modes_and_ideal() {
        let cfg = tiny_cfg();
        let table = run_link_campaign(&cfg, &ErrorStatistics::from_config(&cfg)).unwrap();
        for mode in ["ideal", "none", "cpe", "ici"] {
            assert!(
                table.rows.iter().any(|r| r.mode == mode),
                "mode {mode} missing from the table"
            );
        }
    }

    #[test]
    fn ideal_mode_reaches_plateau_at_high_snr() {
        let mut cfg = tiny_cfg();
        cfg.link.snr_sweep_db = vec![40.0];
        let table = run_link_campaign(&cfg, &ErrorStatistics::ideal()).unwrap();
        let t = table.plateau_gbps("ideal", 24, 290.0);
        assert!((t - 3.497).abs() < 0.2, "ideal plateau {t} Gbps");
    }

    #[test]
    fn campaign_is_deterministic() {
        let cfg = tiny_cfg();
        let stats = ErrorStatistics::from_config(&cfg);
        let a = run_link_campaign(&cfg, &stats).unwrap();
        let b = run_link_campaign(&cfg, &stats).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.throughput_gbps.to_bits(), rb.throughput_gbps.to_bits());
        }
    }

    #[test]
    fn distance_must_exceed_lateral_offset() {
        let mut cfg = tiny_cfg();
        cfg.link.distances_m = vec![3.0];
        assert!(run_link_campaign(&cfg, &ErrorStatistics::ideal()).is_err());
    }

    #[test]
    fn csv_written_with_expected_columns() {
        let cfg = tiny_cfg();
        let table = run_link_campaign(&cfg, &ErrorStatistics::from_config(&cfg)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        table.write_outputs(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("link_throughput.csv")).unwrap();
        assert!(text.starts_with("snr_db,mode,mcs,distance_m,throughput_gbps\n"));
        assert!(dir.path().join("link_mcs24_290m.gp").exists());
    }
}
