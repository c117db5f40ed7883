//! Monte Carlo studies: `L^q` errors of realized volatilities, estimator error
//! studies, and log-log slope regression.

mod estimation;
mod lq;
mod regression;
mod report;

use serde::{Deserialize, Serialize};

pub use estimation::{
    estimator_error_study, estimator_error_study_with, l2_error, EpsPlan, ErrorStat, EstimatorEntry,
    EstimatorPlan, EstimatorReport, EstimatorStudyConfig, QuantitySlope, ReplicateSource,
    SimulatedReplicates,
};
pub use lq::{
    block_lq, lq_error_study, lq_error_study_with, BlockEstimate, Combo, ErrorReport, LqEntry, LqPlan,
    LqSlope, LqStudyConfig, ObservationSource, SimulatedObservations,
};
pub use regression::{fit_subset, slope_fit, SlopeFit};
pub use report::{estimator_rows, lq_rows, write_rows_csv, ResultRow, CSV_HEADER, ESTIMATOR_STUDY, LQ_STUDY};

/// Simulation settings shared by the studies; the horizon is derived per study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimTemplate {
    pub dt: f64,
    /// Initial variance; defaults to `theta`.
    #[serde(default)]
    pub v0: Option<f64>,
    #[serde(default)]
    pub r0: f64,
    pub seed: u64,
}

impl SimTemplate {
    pub fn v0_for(&self, theta: f64) -> f64 {
        self.v0.unwrap_or(theta)
    }
}
