//! Domain types of the aggregate thermal dynamic model: datasets, lagged
//! design matrices, aggregation, free-run prediction, synthetic data, and
//! error metrics.

mod csv_io;
mod dataset;
mod design;
mod metrics;
mod params;
mod predict;
mod split;
mod synthetic;

pub use csv_io::{default_start, read_dataset_csv, write_dataset_csv};
pub use dataset::{ClusterDataset, LaggedViews};
pub use design::{
    aggregate_state, build_design, mass_fractions, occupancy_map, DesignMatrices, RegressorBlock, TailCoefficients,
};
pub use metrics::{evaluate_metrics, mape, r_squared, rmse, Metrics, MAPE_GUARD};
pub use params::{check_simplex, AtdmParameters, SIMPLEX_TOL};
pub use predict::{ar_spectral_radius, predict_aggregate};
pub use split::split_dataset;
pub use synthetic::{default_true_params, generate_synthetic, SyntheticConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected shape {expected:?}, found {found:?}")]
    Shape { what: &'static str, expected: (usize, usize), found: (usize, usize) },
    #[error("lag {lag} outside 0..={order}")]
    LagOutOfRange { lag: usize, order: usize },
    #[error("non-finite value in {what} at ({row}, {col})")]
    NonFinite { what: &'static str, row: usize, col: usize },
    #[error("segment has {periods} periods, at least {required} required")]
    TooShort { periods: usize, required: usize },
    #[error("aggregation coefficients off the simplex (sum {sum}, min {min})")]
    NotOnSimplex { sum: f64, min: f64 },
    #[error("prediction diverged at period {period}")]
    Unstable { period: usize },
    #[error("autoregressive dynamics unstable: spectral radius {radius} >= 1")]
    UnstableDynamics { radius: f64 },
    #[error("MAPE undefined: measured value at index {index} is zero")]
    MapeZeroDenominator { index: usize },
    #[error("R² undefined: measured series is constant")]
    ConstantSeries,
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("{0}")]
    InvalidArgument(String),
}

/// Real aggregate state of a dataset under the given weights, for the
/// estimation periods (`c0 ξ`) and the `M` history periods before them.
pub fn measured_aggregate(dataset: &ClusterDataset, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let all = aggregate_state(xi, dataset.tau_in())?;
    let m = dataset.order();
    Ok((all.as_slice()[..m].to_vec(), all.as_slice()[m..].to_vec()))
}

/// Free-run prediction over a dataset, seeded with its measured history, and
/// the metrics against the measured aggregate.
pub fn evaluate_on(
    dataset: &ClusterDataset,
    params: &AtdmParameters,
) -> Result<(Vec<f64>, Vec<f64>, Metrics), ModelError> {
    let design = build_design(dataset, params.t_occ())?;
    let (history, real) = measured_aggregate(dataset, &params.xi)?;
    let pred = predict_aggregate(params, &design, &history)?;
    let metrics = evaluate_metrics(pred.as_slice(), &real)?;
    Ok((pred.as_slice().to_vec(), real, metrics))
}
