//! Campaign configuration: a TOML key/value tree with defaults for every
//! field and rejection of unknown keys. Dotted-path overrides support the
//! CLI's `--override key=value` flag.

use crate::link::{LinkCalibration, PnMask};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("override path '{0}' does not name a config entry")]
    BadOverridePath(String),
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub replications: usize,
    pub master_seed: u64,
    pub output_dir: String,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self { replications: 10, master_seed: 1, output_dir: "out".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub track_length_m: f64,
    pub track_seed: u64,
    pub curvature_segments: usize,
    pub max_curvature_per_m: f64,
    pub curvature_correlation_m: f64,
    pub inter_site_distance_m: f64,
    pub lateral_offset_m: f64,
    pub rrh_array_horizontal: usize,
    pub rrh_array_vertical: usize,
    pub train_array_horizontal: usize,
    pub train_array_vertical: usize,
    pub max_speed_kmh: f64,
    pub acceleration_mps2: f64,
    pub slowdown_speed_kmh: f64,
    /// Journeys start and stop this far inside the deployed line, keeping
    /// terminal stations within network coverage, m.
    pub journey_margin_m: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            track_length_m: 20_300.0,
            track_seed: 7,
            curvature_segments: 41,
            max_curvature_per_m: 1.5e-4,
            curvature_correlation_m: 5_000.0,
            inter_site_distance_m: 580.0,
            lateral_offset_m: 5.0,
            rrh_array_horizontal: 8,
            rrh_array_vertical: 4,
            train_array_horizontal: 4,
            train_array_vertical: 4,
            max_speed_kmh: 500.0,
            acceleration_mps2: 0.5,
            slowdown_speed_kmh: 290.0,
            journey_margin_m: 580.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub carrier_ghz: f64,
    pub k_factor_db: f64,
    pub delay_spread_ns: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_decorrelation_m: f64,
    pub train_noise_figure_db: f64,
    pub rrh_noise_figure_db: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            carrier_ghz: 30.0,
            k_factor_db: 13.3,
            delay_spread_ns: 100.0,
            shadowing_sigma_db: 4.0,
            shadowing_decorrelation_m: 10.0,
            train_noise_figure_db: 9.0,
            rrh_noise_figure_db: 7.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeasurementSection {
    pub bandwidth_mhz: f64,
    pub tx_power_dbm: f64,
    pub srs_interval_ms: f64,
    pub rrh_count: usize,
    pub snr_floor_db: f64,
    pub snr_estimate_sigma_db: f64,
    /// Timing-estimator saturation: SNR above this carries no further
    /// CRLB benefit, dB.
    pub crlb_snr_cap_db: f64,
    pub clock_drift_s_per_sqrt_s: f64,
    #[serde(default = "default_true")]
    pub noise_enabled: bool,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self {
            bandwidth_mhz: 400.0,
            tx_power_dbm: 30.0,
            srs_interval_ms: 10.0,
            rrh_count: 5,
            snr_floor_db: -5.0,
            snr_estimate_sigma_db: 1.0,
            crlb_snr_cap_db: 30.0,
            clock_drift_s_per_sqrt_s: 1e-9,
            noise_enabled: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingSection {
    /// White-noise acceleration spectral density, m^2/s^3.
    pub process_noise_q: f64,
    pub gate_probability: f64,
    /// Consecutive gated/failed epochs before the filter re-initializes.
    pub reinit_after_failures: usize,
}

impl Default for TrackingSection {
    fn default() -> Self {
        Self { process_noise_q: 1.0, gate_probability: 0.997, reinit_after_failures: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    /// "sweep" or "fixed".
    pub train_beam_mode: String,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self { train_beam_mode: "sweep".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub prbs: usize,
    pub rank: usize,
    pub mcs_indices: Vec<u32>,
    pub snr_sweep_db: Vec<f64>,
    pub realizations_per_point: usize,
    pub ideal_realizations_per_point: usize,
    pub distances_m: Vec<f64>,
    /// Compensation modes to evaluate: subset of "none", "cpe", "ici".
    pub modes: Vec<String>,
    pub deici_half_width: usize,
    /// Phase-noise mask (pole/zero form), dBc/Hz corners in Hz.
    pub pn_psd0_dbc: f64,
    pub pn_zeros: Vec<(f64, f64)>,
    pub pn_poles: Vec<(f64, f64)>,
    pub pn_floor_dbc: f64,
    /// EESM/BLER calibration constants.
    pub eesm_beta_mcs18: f64,
    pub eesm_beta_mcs24: f64,
    pub bler_threshold_db_mcs18: f64,
    pub bler_threshold_db_mcs24: f64,
    pub bler_slope_db: f64,
    /// Estimate-error statistics driving the residual impairments:
    /// "ideal" (zero errors) or "gaussian" (the sigmas below, typically
    /// filled from a positioning campaign).
    pub error_mode: String,
    pub position_error_sigma_m: f64,
    pub velocity_error_sigma_mps: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let calib = LinkCalibration::default();
        Self {
            prbs: 264,
            rank: 2,
            mcs_indices: vec![24],
            snr_sweep_db: vec![6.0, 12.0, 18.0, 22.0, 26.0, 30.0, 34.0, 38.0],
            realizations_per_point: 200,
            ideal_realizations_per_point: 50,
            distances_m: vec![10.0, 290.0],
            modes: vec!["none".into(), "cpe".into(), "ici".into()],
            deici_half_width: 1,
            pn_psd0_dbc: -60.0,
            pn_zeros: vec![(4.4e4, 2.0)],
            pn_poles: vec![(3e3, 2.0), (2.0e5, 4.0)],
            pn_floor_dbc: -125.0,
            eesm_beta_mcs18: calib.eesm_beta_mcs18,
            eesm_beta_mcs24: calib.eesm_beta_mcs24,
            bler_threshold_db_mcs18: calib.bler_threshold_db_mcs18,
            bler_threshold_db_mcs24: calib.bler_threshold_db_mcs24,
            bler_slope_db: calib.bler_slope_db,
            error_mode: "gaussian".into(),
            position_error_sigma_m: 0.07,
            velocity_error_sigma_mps: 0.25,
        }
    }
}

impl LinkSection {
    pub fn pn_mask(&self) -> PnMask {
        if self.pn_psd0_dbc == f64::NEG_INFINITY {
            return PnMask::disabled();
        }
        PnMask {
            psd0: 10f64.powf(self.pn_psd0_dbc / 10.0),
            zeros: self.pn_zeros.clone(),
            poles: self.pn_poles.clone(),
            floor: if self.pn_floor_dbc == f64::NEG_INFINITY {
                0.0
            } else {
                10f64.powf(self.pn_floor_dbc / 10.0)
            },
        }
    }

    pub fn calibration(&self) -> LinkCalibration {
        LinkCalibration {
            eesm_beta_mcs18: self.eesm_beta_mcs18,
            eesm_beta_mcs24: self.eesm_beta_mcs24,
            bler_threshold_db_mcs18: self.bler_threshold_db_mcs18,
            bler_threshold_db_mcs24: self.bler_threshold_db_mcs24,
            bler_slope_db: self.bler_slope_db,
        }
    }
}

/// The full campaign configuration tree.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub campaign: CampaignSection,
    pub scenario: ScenarioSection,
    pub channel: ChannelSection,
    pub measurement: MeasurementSection,
    pub tracking: TrackingSection,
    pub beam: BeamSection,
    pub link: LinkSection,
}

impl CampaignConfig {
    pub fn from_str_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (path, raw) in overrides {
            apply_override(&mut value, path, raw)?;
        }
        let cfg: CampaignConfig =
            value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_with_overrides(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::Invalid(m));
        if self.scenario.track_length_m <= 0.0 {
            return err(format!("scenario.track_length_m = {}", self.scenario.track_length_m));
        }
        if self.scenario.track_length_m <= 2.0 * self.scenario.journey_margin_m + 100.0 {
            return err(format!(
                "scenario.track_length_m = {} leaves no room inside 2 x journey_margin_m = {}",
                self.scenario.track_length_m,
                2.0 * self.scenario.journey_margin_m
            ));
        }
        if self.scenario.max_curvature_per_m.abs() > crate::scenario::MAX_CURVATURE_BOUND {
            return err(format!(
                "scenario.max_curvature_per_m = {} exceeds {}",
                self.scenario.max_curvature_per_m,
                crate::scenario::MAX_CURVATURE_BOUND
            ));
        }
        if self.measurement.bandwidth_mhz <= 0.0 {
            return err(format!("measurement.bandwidth_mhz = {}", self.measurement.bandwidth_mhz));
        }
        if self.measurement.srs_interval_ms <= 0.0 {
            return err(format!("measurement.srs_interval_ms = {}", self.measurement.srs_interval_ms));
        }
        if self.measurement.rrh_count < 3 {
            return err(format!(
                "measurement.rrh_count = {} (TDOA needs at least 3 anchors)",
                self.measurement.rrh_count
            ));
        }
        if self.tracking.process_noise_q <= 0.0 {
            return err(format!("tracking.process_noise_q = {}", self.tracking.process_noise_q));
        }
        if !(0.5..1.0).contains(&self.tracking.gate_probability) {
            return err(format!("tracking.gate_probability = {}", self.tracking.gate_probability));
        }
        match self.beam.train_beam_mode.as_str() {
            "sweep" | "fixed" => {}
            other => return err(format!("beam.train_beam_mode = '{other}' (sweep|fixed)")),
        }
        match self.link.error_mode.as_str() {
            "ideal" | "gaussian" => {}
            other => return err(format!("link.error_mode = '{other}' (ideal|gaussian)")),
        }
        for &m in &self.link.mcs_indices {
            crate::link::Mcs::from_index(m).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        for mode in &self.link.modes {
            match mode.as_str() {
                "none" | "cpe" | "ici" => {}
                other => return err(format!("link.modes entry '{other}' (none|cpe|ici)")),
            }
        }
        if self.link.prbs != 132 && self.link.prbs != 264 {
            return err(format!("link.prbs = {} (132|264)", self.link.prbs));
        }
        Ok(())
    }

    /// Uplink radio parameters (reception at the RRHs).
    pub fn uplink_radio(&self) -> crate::channel::RadioParams {
        crate::channel::RadioParams {
            tx_power_dbm: self.measurement.tx_power_dbm,
            carrier_hz: self.channel.carrier_ghz * 1e9,
            bandwidth_hz: self.measurement.bandwidth_mhz * 1e6,
            noise_figure_db: self.channel.rrh_noise_figure_db,
        }
    }
}

/// Applies one dotted-path override; the raw value is parsed as a TOML
/// literal, falling back to a string.
fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.is_empty() {
        return Err(ConfigError::BadOverridePath(path.into()));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::BadOverridePath(path.into()))?
            .entry(*part)
            .or_insert(toml::Value::Table(Default::default()));
    }
    let table = node.as_table_mut().ok_or_else(|| ConfigError::BadOverridePath(path.into()))?;
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = CampaignConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string();
        let back = CampaignConfig::from_str_with_overrides(&text, &[]).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn defaults_match_parameterization() {
        let cfg = CampaignConfig::default();
        assert_eq!(cfg.channel.carrier_ghz, 30.0);
        assert_eq!(cfg.measurement.bandwidth_mhz, 400.0);
        assert_eq!(cfg.scenario.inter_site_distance_m, 580.0);
        assert_eq!(cfg.measurement.tx_power_dbm, 30.0);
        assert_eq!(cfg.channel.k_factor_db, 13.3);
        assert_eq!(cfg.channel.delay_spread_ns, 100.0);
        assert_eq!(cfg.scenario.max_speed_kmh, 500.0);
        assert_eq!(cfg.link.rank, 2);
        assert_eq!(cfg.link.prbs, 264);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[campaign]\nreplications = 3\nbogus_key = 1\n";
        assert!(CampaignConfig::from_str_with_overrides(text, &[]).is_err());
        let text2 = "[nonexistent_section]\nx = 1\n";
        assert!(CampaignConfig::from_str_with_overrides(text2, &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = CampaignConfig::from_str_with_overrides(
            "",
            &[
                ("measurement.bandwidth_mhz".into(), "200".into()),
                ("campaign.master_seed".into(), "99".into()),
                ("beam.train_beam_mode".into(), "\"fixed\"".into()),
                ("link.snr_sweep_db".into(), "[10.0, 20.0]".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.measurement.bandwidth_mhz, 200.0);
        assert_eq!(cfg.campaign.master_seed, 99);
        assert_eq!(cfg.beam.train_beam_mode, "fixed");
        assert_eq!(cfg.link.snr_sweep_db, vec![10.0, 20.0]);
    }

    #[test]
    fn bare_string_override_is_accepted() {
        let cfg = CampaignConfig::from_str_with_overrides(
            "",
            &[("beam.train_beam_mode".into(), "fixed".into())],
        )
        .unwrap();
        assert_eq!(cfg.beam.train_beam_mode, "fixed");
    }

    #[test]
    fn invalid_values_rejected() {
        for (k, v) in [
            ("measurement.rrh_count", "2"),
            ("beam.train_beam_mode", "\"diagonal\""),
            ("link.mcs_indices", "[13]"),
            ("tracking.gate_probability", "1.5"),
            ("link.prbs", "100"),
        ] {
            let r = CampaignConfig::from_str_with_overrides("", &[(k.into(), v.into())]);
            assert!(r.is_err(), "{k}={v} should be rejected");
        }
    }

    #[test]
    fn pn_mask_conversion() {
        let cfg = CampaignConfig::default();
        let mask = cfg.link.pn_mask();
        assert!((10.0 * mask.psd0.log10() - -57.0).abs() < 1e-9);
        let disabled = CampaignConfig::from_str_with_overrides(
            "",
            &[("link.pn_psd0_dbc".into(), "-inf".into()), ("link.pn_floor_dbc".into(), "-inf".into())],
        )
        .unwrap();
        assert!(disabled.link.pn_mask().is_disabled());
    }
}
