use nalgebra::{DMatrix, DVector};

use super::{ClusterDataset, ModelError};

/// Constant matrices of the regularized least-squares objective.
///
/// * `c0`: zone temperatures at lag 0 (T×K)
/// * `c1`: `[τ^{-1}, …, τ^{-M}]` (T×KM)
/// * `c2`: column `m` is the cluster load at lag `m` (T×(M+1))
/// * `c3`, `c4`: outdoor temperature / solar radiation at lags `0..=M`
/// * `p_occ`: T×T_occ tiling map for the periodic occupancy term
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    pub c0: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub c3: DMatrix<f64>,
    pub c4: DMatrix<f64>,
    pub p_occ: DMatrix<f64>,
    pub t_occ: usize,
    pub order: usize,
}

/// The ξ-independent regressors `[c2, c3, c4, P_occ]`.
///
/// This is everything the aggregator needs besides the ξ-weighted temperature
/// terms; in the private protocol `c2` arrives through secure aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorBlock {
    pub c2: DMatrix<f64>,
    pub c3: DMatrix<f64>,
    pub c4: DMatrix<f64>,
    pub p_occ: DMatrix<f64>,
}

impl RegressorBlock {
    pub fn horizon(&self) -> usize {
        self.c3.nrows()
    }

    pub fn order(&self) -> usize {
        self.c3.ncols() - 1
    }

    pub fn t_occ(&self) -> usize {
        self.p_occ.ncols()
    }

    /// Number of stacked coefficients `3(M+1) + T_occ`.
    pub fn width(&self) -> usize {
        self.c2.ncols() + self.c3.ncols() + self.c4.ncols() + self.p_occ.ncols()
    }

    /// `[c2 | c3 | c4 | P_occ]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let t = self.horizon();
        let mut z = DMatrix::zeros(t, self.width());
        let mut col = 0;
        for block in [&self.c2, &self.c3, &self.c4, &self.p_occ] {
            z.view_mut((0, col), block.shape()).copy_from(block);
            col += block.ncols();
        }
        z
    }

    /// Splits a stacked coefficient vector into (β, γ, θ, τ_occ).
    pub fn split(&self, coef: &DVector<f64>) -> TailCoefficients {
        let w = self.order() + 1;
        let take = |start: usize, len: usize| coef.rows(start, len).iter().copied().collect();
        TailCoefficients {
            beta: take(0, w),
            gamma: take(w, w),
            theta: take(2 * w, w),
            tau_occ_free: take(3 * w, self.t_occ()),
        }
    }

    /// `c2 β + c3 γ + c4 θ + P_occ τ_occ`.
    pub fn apply(&self, tail: &TailCoefficients) -> DVector<f64> {
        &self.c2 * DVector::from_column_slice(&tail.beta)
            + &self.c3 * DVector::from_column_slice(&tail.gamma)
            + &self.c4 * DVector::from_column_slice(&tail.theta)
            + &self.p_occ * DVector::from_column_slice(&tail.tau_occ_free)
    }
}

/// The ξ-independent coefficient groups.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCoefficients {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub tau_occ_free: Vec<f64>,
}

impl DesignMatrices {
    pub fn horizon(&self) -> usize {
        self.c0.nrows()
    }

    pub fn zones(&self) -> usize {
        self.c0.ncols()
    }

    /// Lag-`m` zone temperature block of `c1` (`m` in `1..=M`).
    pub fn c1_lag(&self, lag: usize) -> DMatrix<f64> {
        let k = self.zones();
        self.c1.columns((lag - 1) * k, k).into_owned()
    }

    /// `c1 (I_M ⊗ ξ)`: column `m-1` is `τ^{-m} ξ`.
    pub fn c1_xi(&self, xi: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.horizon(), self.order);
        for lag in 1..=self.order {
            out.set_column(lag - 1, &(self.c1_lag(lag) * xi));
        }
        out
    }

    /// `τ^{-0} - Σ_m α_m τ^{-m}` (T×K).
    pub fn hat_tau(&self, alpha: &[f64]) -> DMatrix<f64> {
        let mut out = self.c0.clone();
        for (lag, a) in (1..=self.order).zip(alpha) {
            out -= self.c1_lag(lag) * *a;
        }
        out
    }

    pub fn regressors(&self) -> RegressorBlock {
        RegressorBlock {
            c2: self.c2.clone(),
            c3: self.c3.clone(),
            c4: self.c4.clone(),
            p_occ: self.p_occ.clone(),
        }
    }
}

/// Binary T×T_occ map with a single 1 per row at column `(offset + t) mod T_occ`.
pub fn occupancy_map(horizon: usize, t_occ: usize, offset: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(horizon, t_occ);
    for t in 0..horizon {
        p[(t, (offset + t) % t_occ)] = 1.0;
    }
    p
}

/// Builds the constant matrices from a dataset.
pub fn build_design(dataset: &ClusterDataset, t_occ: usize) -> Result<DesignMatrices, ModelError> {
    if t_occ == 0 {
        return Err(ModelError::InvalidArgument("T_occ must be at least 1".into()));
    }
    let k = dataset.zones();
    let t = dataset.horizon();
    let m = dataset.order();
    let mut c1 = DMatrix::zeros(t, k * m);
    let mut c2 = DMatrix::zeros(t, m + 1);
    let mut c3 = DMatrix::zeros(t, m + 1);
    let mut c4 = DMatrix::zeros(t, m + 1);
    let mut c0 = DMatrix::zeros(t, k);
    for lag in 0..=m {
        let views = dataset.lagged_views(lag)?;
        if lag == 0 {
            c0 = views.tau_in.clone();
        } else {
            c1.view_mut((0, (lag - 1) * k), (t, k)).copy_from(&views.tau_in);
        }
        c2.set_column(lag, &views.h_load.column_sum());
        c3.set_column(lag, &views.tau_out);
        c4.set_column(lag, &views.h_rad);
    }
    Ok(DesignMatrices {
        c0,
        c1,
        c2,
        c3,
        c4,
        p_occ: occupancy_map(t, t_occ, dataset.period_offset()),
        t_occ,
        order: m,
    })
}

/// Aggregate state `Σ_i ξ_i τ[t, i]` for every row.
pub fn aggregate_state(xi: &[f64], tau_rows: &DMatrix<f64>) -> Result<DVector<f64>, ModelError> {
    if xi.len() != tau_rows.ncols() {
        return Err(ModelError::Shape {
            what: "xi",
            expected: (tau_rows.ncols(), 1),
            found: (xi.len(), 1),
        });
    }
    Ok(DVector::from_iterator(
        tau_rows.nrows(),
        tau_rows.row_iter().map(|row| row.iter().zip(xi).map(|(a, b)| a * b).sum()),
    ))
}

/// Aggregation coefficients from zone air masses: `ξ_i = m_i / Σ m`.
pub fn mass_fractions(masses: &[f64]) -> Result<Vec<f64>, ModelError> {
    let total: f64 = masses.iter().sum();
    if masses.is_empty() || masses.iter().any(|m| *m < 0.0 || !m.is_finite()) || total <= 0.0 {
        return Err(ModelError::InvalidArgument("air masses must be non-negative with a positive sum".into()));
    }
    Ok(masses.iter().map(|m| m / total).collect())
}
