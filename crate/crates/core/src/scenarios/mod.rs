//! Generative models for the two experiments: estimating a multipath
//! channel from a known training sequence, and recovering the eigenvalues of
//! a covariance matrix from quantized samples.

mod channel;
mod covariance;
mod eig;

pub use channel::{build_channel_scenario, ChannelScenario};
pub use covariance::{
    build_covariance_plan, combined_covariance, quantized_covariance, CovariancePlan,
};
pub use eig::{build_eig_scenario, EigPreset, EigScenario, EstimatorVariant};
