//! The positioning campaign: seeded Monte-Carlo journeys over the track,
//! one EKF per replication, with per-epoch error metrics.

use super::config::CampaignConfig;
use super::metrics::MetricSeries;
use super::CampaignError;
use crate::beam::{beam_direction_error_deg, point_beam};
use crate::channel::ShadowingField;
use crate::measurements::{
    build_train_beams, form_tdoa, quantize_toa, sweep_srs, EpochKey, SrsLink, SrsParams,
};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scenario::{
    build_track, deploy_rrhs, train_codebook, ArrayGeometry, CurvatureSpec, Deployment,
    SpeedProfile, Track,
};
use crate::tracking::{
    ekf_init, ekf_predict, ekf_update, EkfEstimate, InitParams, ProcessModel, UpdateOutcome,
};
use crate::Vec2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Everything a positioning campaign produces.
#[derive(Debug, Clone)]
pub struct PositioningOutcome {
    pub position_error_m: MetricSeries,
    pub velocity_error_mps: MetricSeries,
    pub beam_error_deg: MetricSeries,
    pub prediction_lead_error_m: MetricSeries,
    pub epochs_total: usize,
    pub epochs_without_fix: usize,
    pub divergences: usize,
}

#[derive(Debug, Default)]
struct ReplicationResult {
    pos_errors: Vec<f64>,
    vel_errors: Vec<f64>,
    beam_errors: Vec<f64>,
    lead_errors: Vec<f64>,
    epochs: usize,
    without_fix: usize,
    divergences: usize,
}

/// The static world shared by every replication.
struct World {
    track: Track,
    profile: SpeedProfile,
    /// Journey arc offset from the line start, m.
    margin_m: f64,
    deployment: Deployment,
    positions: Vec<Vec2>,
    train_array: ArrayGeometry,
    codebook: Vec<f64>,
    srs: SrsParams,
    interval_s: f64,
    sweep_mode: bool,
}

/// Train state with the journey shifted `margin` meters into the line.
fn journey_state(world: &World, t: f64) -> crate::scenario::TrainState {
    let (s, speed) = world.profile.sample(t).expect("t within journey");
    let arc = world.margin_m + s;
    let heading = world.track.heading_at(arc);
    crate::scenario::TrainState {
        time: t,
        arc_position: arc,
        position: world.track.position_at(arc),
        velocity: Vec2::new(heading.cos(), heading.sin()) * speed,
        heading,
    }
}

fn build_world(cfg: &CampaignConfig) -> Result<World, CampaignError> {
    let sc = &cfg.scenario;
    let spec = CurvatureSpec {
        segments: sc.curvature_segments,
        max_curvature: sc.max_curvature_per_m,
        correlation_m: sc.curvature_correlation_m,
    };
    let track = build_track(sc.track_length_m, &spec, sc.track_seed)?;
    let profile = SpeedProfile::plan(
        sc.track_length_m - 2.0 * sc.journey_margin_m,
        sc.max_speed_kmh / 3.6,
        sc.acceleration_mps2,
        sc.slowdown_speed_kmh / 3.6,
    )?;
    let rrh_array = ArrayGeometry::new(sc.rrh_array_horizontal, sc.rrh_array_vertical);
    let deployment = deploy_rrhs(&track, sc.inter_site_distance_m, sc.lateral_offset_m, rrh_array)?;
    let positions: Vec<Vec2> = deployment.rrhs.iter().map(|r| r.position).collect();
    let train_array = ArrayGeometry::new(sc.train_array_horizontal, sc.train_array_vertical);
    let codebook = train_codebook(&train_array);
    let srs = SrsParams {
        radio: cfg.uplink_radio(),
        snr_floor_db: cfg.measurement.snr_floor_db,
        snr_estimate_sigma_db: cfg.measurement.snr_estimate_sigma_db,
        crlb_snr_cap_db: cfg.measurement.crlb_snr_cap_db,
        noise_enabled: cfg.measurement.noise_enabled,
    };
    Ok(World {
        track,
        profile,
        margin_m: sc.journey_margin_m,
        deployment,
        positions,
        train_array,
        codebook,
        srs,
        interval_s: cfg.measurement.srs_interval_ms / 1e3,
        sweep_mode: cfg.beam.train_beam_mode == "sweep",
    })
}

fn run_replication(cfg: &CampaignConfig, world: &World, replication: u64) -> ReplicationResult {
    let master = cfg.campaign.master_seed;
    let mut out = ReplicationResult::default();

    // Per-link shadowing fields, frozen for the journey.
    let shadowing: Vec<ShadowingField> = world
        .deployment
        .rrhs
        .iter()
        .map(|r| {
            ShadowingField::new(
                derive_seed(master, Stream::Shadowing, replication, u64::from(r.id), 0),
                world.track.length() + 1.0,
                cfg.channel.shadowing_sigma_db,
                cfg.channel.shadowing_decorrelation_m,
            )
        })
        .collect();

    // Train clock: microsecond-scale initial offset plus a random walk.
    let mut clock_rng = stream_rng(master, Stream::ClockOffset, replication, 0, 0);
    let mut clock_offset = quantize_toa((clock_rng.gen::<f64>() * 2.0 - 1.0) * 1e-6);
    let drift = cfg.measurement.clock_drift_s_per_sqrt_s;

    let model = ProcessModel { q: cfg.tracking.process_noise_q };
    let init_params = InitParams::default();
    // With exact measurements there are no outliers to gate.
    let gate_probability =
        if cfg.measurement.noise_enabled { cfg.tracking.gate_probability } else { 1.0 };
    let mut filter: Option<EkfEstimate> = None;
    let mut consecutive_failures = 0usize;

    let duration = world.profile.duration();
    let mut epoch: u64 = 0;
    loop {
        let t = epoch as f64 * world.interval_s;
        if t > duration {
            break;
        }
        out.epochs += 1;
        let truth = journey_state(world, t);

        clock_offset = quantize_toa(
            clock_offset
                + drift * world.interval_s.sqrt() * clock_rng.sample::<f64, _>(StandardNormal),
        );

        // Location-based RRH beams: predicted position when tracking, true
        // position during initial acquisition (conventional beam training).
        let predicted = filter
            .as_ref()
            .map(|est| crate::tracking::predict_position(est, t - est.epoch_time));
        let aim = predicted.unwrap_or(truth.position);
        if let Some(p) = predicted {
            out.lead_errors.push((p - truth.position).norm());
        }

        let serving = world.deployment.nearest(truth.position, cfg.measurement.rrh_count);
        let links: Vec<SrsLink> = serving
            .iter()
            .map(|&i| {
                let rrh = &world.deployment.rrhs[i];
                let assignment = point_beam(rrh, aim, t);
                SrsLink {
                    rrh_index: i,
                    steer_azimuth: assignment.steer_azimuth,
                    panel: assignment.panel_index,
                    shadowing_db: shadowing[i].sample(truth.arc_position),
                }
            })
            .collect();

        // Beam-direction metric: closest RRH only, and only when the beam
        // came from a prediction.
        if predicted.is_some() {
            let closest = serving[0];
            let rrh = &world.deployment.rrhs[closest];
            let assignment = point_beam(rrh, aim, t);
            out.beam_errors.push(beam_direction_error_deg(rrh, &assignment, truth.position));
        }

        let beams = build_train_beams(truth.heading, &world.codebook, world.sweep_mode);
        let key = EpochKey { master_seed: master, replication, epoch_index: epoch };
        let observations = sweep_srs(
            &truth,
            &world.deployment,
            &links,
            &world.train_array,
            &beams,
            &world.srs,
            clock_offset,
            &key,
        );

        if observations.len() < 3 {
            out.without_fix += 1;
            epoch += 1;
            continue;
        }
        let batch = form_tdoa(&observations, t).expect("at least 3 observations");

        filter = match filter.take() {
            None => match ekf_init(&batch, &world.positions, &init_params) {
                Ok(est) => {
                    consecutive_failures = 0;
                    Some(est)
                }
                Err(_) => {
                    out.without_fix += 1;
                    None
                }
            },
            Some(est) => {
                let predicted_est = ekf_predict(&est, t - est.epoch_time, &model);
                match ekf_update(&predicted_est, &batch, &world.positions, gate_probability)
                {
                    Ok(UpdateOutcome::Updated(updated)) => {
                        consecutive_failures = 0;
                        Some(updated)
                    }
                    Ok(UpdateOutcome::Gated { .. }) => {
                        consecutive_failures += 1;
                        if consecutive_failures >= cfg.tracking.reinit_after_failures {
                            out.divergences += 1;
                            consecutive_failures = 0;
                            None
                        } else {
                            Some(predicted_est)
                        }
                    }
                    Err(_) => {
                        // Numerical failure: log and re-initialize.
                        out.divergences += 1;
                        consecutive_failures = 0;
                        None
                    }
                }
            }
        };

        match &filter {
            Some(est) => {
                out.pos_errors.push((est.position() - truth.position).norm());
                out.vel_errors.push((est.velocity() - truth.velocity).norm());
            }
            None => out.without_fix += 1,
        }
        epoch += 1;
    }
    out
}

/// Runs the positioning campaign over all replications (in parallel) and
/// aggregates the per-epoch error series.
pub fn run_positioning_campaign(cfg: &CampaignConfig) -> Result<PositioningOutcome, CampaignError> {
    cfg.validate()?;
    let world = build_world(cfg)?;

    let results: Vec<ReplicationResult> = (0..cfg.campaign.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(cfg, &world, rep))
        .collect();

    let mut pos = Vec::new();
    let mut vel = Vec::new();
    let mut beam = Vec::new();
    let mut lead = Vec::new();
    let mut epochs_total = 0;
    let mut without_fix = 0;
    let mut divergences = 0;
    for r in results {
        pos.extend(r.pos_errors);
        vel.extend(r.vel_errors);
        beam.extend(r.beam_errors);
        lead.extend(r.lead_errors);
        epochs_total += r.epochs;
        without_fix += r.without_fix;
        divergences += r.divergences;
    }
    if pos.is_empty() {
        return Err(CampaignError::Numerical(
            "campaign produced no position estimates".into(),
        ));
    }

    Ok(PositioningOutcome {
        position_error_m: MetricSeries::new("position_error_m", pos),
        velocity_error_mps: MetricSeries::new("velocity_error_mps", vel),
        beam_error_deg: MetricSeries::new("beam_error_deg", beam),
        prediction_lead_error_m: MetricSeries::new("prediction_lead_error_m", lead),
        epochs_total,
        epochs_without_fix: without_fix,
        divergences,
    })
}

impl PositioningOutcome {
    pub fn series(&self) -> [&MetricSeries; 4] {
        [
            &self.position_error_m,
            &self.velocity_error_mps,
            &self.beam_error_deg,
            &self.prediction_lead_error_m,
        ]
    }

    /// Writes one CDF CSV per metric plus a gnuplot script per figure.
    pub fn write_outputs(&self, dir: &std::path::Path) -> Result<(), CampaignError> {
        std::fs::create_dir_all(dir)?;
        for s in self.series() {
            super::metrics::emit_cdf(s, &dir.join(format!("{}.csv", s.name)))?;
        }
        super::metrics::emit_cdf_plot_script(
            &["position_error_m", "velocity_error_mps"],
            "error",
            "Train position and velocity estimation error",
            &dir.join("position_velocity_cdf.gp"),
        )?;
        super::metrics::emit_cdf_plot_script(
            &["beam_error_deg"],
            "beam direction error [deg]",
            "RRH beam direction error (closest RRH)",
            &dir.join("beam_error_cdf.gp"),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> CampaignConfig {
        let mut cfg = CampaignConfig::default();
        cfg.campaign.replications = 1;
        cfg.scenario.track_length_m = 2_320.0;
        cfg.scenario.curvature_segments = 4;
        cfg.measurement.srs_interval_ms = 100.0;
        cfg
    }

    #[test]
    fn noiseless_campaign_is_near_exact() {
        let mut cfg = tiny_config();
        cfg.measurement.noise_enabled = false;
        let out = run_positioning_campaign(&cfg).unwrap();
        assert!(out.position_error_m.max() < 1e-3, "max {}", out.position_error_m.max());
    }

    #[test]
    fn campaign_is_deterministic() {
        let cfg = tiny_config();
        let a = run_positioning_campaign(&cfg).unwrap();
        let b = run_positioning_campaign(&cfg).unwrap();
        assert_eq!(a.position_error_m.values(), b.position_error_m.values());
        assert_eq!(a.beam_error_deg.values(), b.beam_error_deg.values());
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = tiny_config();
        let mut cfg2 = tiny_config();
        cfg2.campaign.master_seed = 2;
        let a = run_positioning_campaign(&cfg).unwrap();
        let b = run_positioning_campaign(&cfg2).unwrap();
        assert_ne!(a.position_error_m.values(), b.position_error_m.values());
    }

    #[test]
    fn outputs_are_written() {
        let cfg = tiny_config();
        let out = run_positioning_campaign(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        out.write_outputs(dir.path()).unwrap();
        for name in
            ["position_error_m.csv", "velocity_error_mps.csv", "beam_error_deg.csv", "beam_error_cdf.gp"]
        {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
    }
}
