use nalgebra::{DMatrix, DVector};

use super::ModelError;

/// Measured series of a building cluster.
///
/// Every series carries `T + M` rows ordered chronologically, so row `r` holds
/// period `r + 1 - M`. The first `M` rows are lag history; rows `M..T+M` are the
/// estimation periods `1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDataset {
    order: usize,
    dt_minutes: f64,
    /// Index of the first estimation period within the originating series.
    /// Keeps the occupancy phase aligned across chronological splits.
    period_offset: usize,
    tau_in: DMatrix<f64>,
    h_load: DMatrix<f64>,
    tau_out: DVector<f64>,
    h_rad: DVector<f64>,
}

impl ClusterDataset {
    pub fn new(
        order: usize,
        dt_minutes: f64,
        tau_in: DMatrix<f64>,
        h_load: DMatrix<f64>,
        tau_out: DVector<f64>,
        h_rad: DVector<f64>,
    ) -> Result<Self, ModelError> {
        if order == 0 {
            return Err(ModelError::InvalidArgument("model order M must be at least 1".into()));
        }
        let rows = tau_in.nrows();
        let zones = tau_in.ncols();
        if zones == 0 {
            return Err(ModelError::InvalidArgument("dataset needs at least one zone".into()));
        }
        if rows < order + 1 {
            return Err(ModelError::TooShort { periods: rows.saturating_sub(order), required: 1 });
        }
        if h_load.shape() != (rows, zones) {
            return Err(ModelError::Shape {
                what: "h_load",
                expected: (rows, zones),
                found: h_load.shape(),
            });
        }
        for (what, len) in [("tau_out", tau_out.len()), ("h_rad", h_rad.len())] {
            if len != rows {
                return Err(ModelError::Shape { what, expected: (rows, 1), found: (len, 1) });
            }
        }
        check_finite("tau_in", &tau_in)?;
        check_finite("h_load", &h_load)?;
        check_finite("tau_out", &DMatrix::from_column_slice(rows, 1, tau_out.as_slice()))?;
        check_finite("h_rad", &DMatrix::from_column_slice(rows, 1, h_rad.as_slice()))?;
        Ok(Self { order, dt_minutes, period_offset: 0, tau_in, h_load, tau_out, h_rad })
    }

    pub fn with_period_offset(mut self, offset: usize) -> Self {
        self.period_offset = offset;
        self
    }

    /// Zone count `K`.
    pub fn zones(&self) -> usize {
        self.tau_in.ncols()
    }

    /// Estimation horizon `T`.
    pub fn horizon(&self) -> usize {
        self.tau_in.nrows() - self.order
    }

    /// Model order `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dt_minutes(&self) -> f64 {
        self.dt_minutes
    }

    pub fn period_offset(&self) -> usize {
        self.period_offset
    }

    pub fn tau_in(&self) -> &DMatrix<f64> {
        &self.tau_in
    }

    pub fn h_load(&self) -> &DMatrix<f64> {
        &self.h_load
    }

    pub fn tau_out(&self) -> &DVector<f64> {
        &self.tau_out
    }

    pub fn h_rad(&self) -> &DVector<f64> {
        &self.h_rad
    }

    /// First row of the lag-`m` window.
    fn lag_start(&self, lag: usize) -> Result<usize, ModelError> {
        if lag > self.order {
            return Err(ModelError::LagOutOfRange { lag, order: self.order });
        }
        Ok(self.order - lag)
    }

    /// Row `t` of each output is the stored row for period `t - m`.
    pub fn lagged_views(&self, lag: usize) -> Result<LaggedViews, ModelError> {
        let start = self.lag_start(lag)?;
        let t = self.horizon();
        Ok(LaggedViews {
            tau_in: self.tau_in.rows(start, t).into_owned(),
            h_load: self.h_load.rows(start, t).into_owned(),
            tau_out: self.tau_out.rows(start, t).into_owned(),
            h_rad: self.h_rad.rows(start, t).into_owned(),
        })
    }

    /// Lag-`m` window of one zone's indoor temperature.
    pub fn zone_tau_lag(&self, zone: usize, lag: usize) -> Result<DVector<f64>, ModelError> {
        let start = self.lag_start(lag)?;
        Ok(self.tau_in.view((start, zone), (self.horizon(), 1)).column(0).into_owned())
    }

    /// Rows `[start, start + len)` (in stored row coordinates) as a new dataset.
    pub(crate) fn slice_rows(&self, start: usize, len: usize, period_offset: usize) -> Self {
        Self {
            order: self.order,
            dt_minutes: self.dt_minutes,
            period_offset,
            tau_in: self.tau_in.rows(start, len).into_owned(),
            h_load: self.h_load.rows(start, len).into_owned(),
            tau_out: self.tau_out.rows(start, len).into_owned(),
            h_rad: self.h_rad.rows(start, len).into_owned(),
        }
    }

    /// Restriction to a subset of zones, in the given order.
    pub fn select_zones(&self, zones: &[usize]) -> Result<Self, ModelError> {
        if zones.is_empty() || zones.iter().any(|&z| z >= self.zones()) {
            return Err(ModelError::InvalidArgument(format!(
                "zone selection {zones:?} invalid for {} zones",
                self.zones()
            )));
        }
        Ok(Self {
            tau_in: self.tau_in.select_columns(zones.iter()),
            h_load: self.h_load.select_columns(zones.iter()),
            ..self.clone()
        })
    }
}

fn check_finite(what: &'static str, m: &DMatrix<f64>) -> Result<(), ModelError> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(ModelError::NonFinite { what, row: r, col: c });
            }
        }
    }
    Ok(())
}

/// The four lagged windows for a single lag index.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedViews {
    pub tau_in: DMatrix<f64>,
    pub h_load: DMatrix<f64>,
    pub tau_out: DVector<f64>,
    pub h_rad: DVector<f64>,
}
