//! Campaign orchestration: configuration, seeded Monte-Carlo execution,
//! metric aggregation, and CSV emission.

pub mod config;
pub mod link_run;
pub mod metrics;
pub mod positioning;

pub use config::{CampaignConfig, ConfigError};
pub use link_run::{run_link_campaign, ErrorStatistics, LinkRow, LinkTable};
pub use metrics::{emit_cdf, MetricSeries};
pub use positioning::{run_positioning_campaign, PositioningOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
