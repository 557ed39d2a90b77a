//! Signal model, channel generation and closed-form performance metrics.

mod channels;
mod design;
mod empirical;
mod metrics;
mod params;

pub use channels::{generate_channels, ChannelSet, Link};
pub use design::{BsDesign, IrsDesign};
pub use empirical::{empirical_sinr, EmpiricalSinr};
pub use metrics::{
    equivalent_eve_channel, equivalent_user_channels, irs_eve_covariance, irs_user_noise,
    leakage_forms_raw,
    check_feasibility, effective_channels, eve_capacity, leakage_forms, leakage_lmi,
    secrecy_rate, total_power, user_rate, user_sinr, C2Slack, EffectiveChannels,
    FeasibilityReport, LeakageForms,
};
pub use params::{
    db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm, LinkValues, Point, Positions,
    SystemParams, SPEED_OF_LIGHT,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("nodes {0} and {1} coincide")]
    ZeroDistance(&'static str, &'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("leakage covariance Q is singular (no jamming, no AN, no IRS noise)")]
    SingularQ,
}
