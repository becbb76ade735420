//! Experiment drivers: coupled error runs, order fits, stationary sweeps and
//! scheme comparisons.

mod comparison;
mod coupling;
mod order;
mod stationary;
mod sweep;

pub use comparison::{scheme_comparison, tail_average, ComparisonMetric, ComparisonPlan};
pub use coupling::{
    coupled_mse, reconstruct_srk_ld_noise, CouplingPlan, MseSeries, PsiQuadrature,
    DEFAULT_REFINEMENT,
};
pub use order::{fit_log_log, strong_order_fit, MsePoint, OrderFit, OrderOptions, OrderStudy};
pub use stationary::{
    default_burn_in, ou_bias_fit, ou_exact_coefficients, stationary_bias_sweep, BiasTarget,
    StationaryOptions, MIN_RUN_STEPS,
};
pub use sweep::{
    content_hash, metric_at, write_sweep, SweepMetadata, SweepResult, SweepRow, CSV_HEADER,
    DIVERGED,
};
