//! Distances between particle sets and targets.

mod assignment;
mod energy;
mod ksd;
mod wasserstein;

use serde::{Deserialize, Serialize};

pub use assignment::min_cost_assignment;
pub use energy::energy_distance_squared;
pub use ksd::{ksd_squared_imq, ksd_squared_potential, ImqKernel};
pub use wasserstein::{
    corrected_w2_squared, empirical_w2_squared, gaussian_w2_squared, GaussianParams, W2Components,
    W2Report,
};

/// One metric evaluation, as emitted in JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    pub value: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w2: Option<W2Report>,
}
