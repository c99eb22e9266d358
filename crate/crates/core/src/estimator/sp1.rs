use nalgebra::{DMatrix, DVector};

use super::EstimatorError;
use crate::linalg::lstsq_min_norm;
use crate::model::{DesignMatrices, RegressorBlock, TailCoefficients};

/// Solution of the ξ-fixed subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct Sp1Solution {
    pub alpha: Vec<f64>,
    pub tail: TailCoefficients,
    /// Objective value, including the constant `λ‖ξ‖²`.
    pub f1: f64,
}

/// SP_I from ξ-weighted aggregates only.
///
/// `target` is `c0ξ`, column `m-1` of `lagged` is `τ^{-m}ξ`, and `xi_sq_norm`
/// is `‖ξ‖²`. This is all the aggregator sees in the private protocol.
pub fn solve_sp1_aggregated(
    target: &DVector<f64>,
    lagged: &DMatrix<f64>,
    regressors: &RegressorBlock,
    lambda: f64,
    xi_sq_norm: f64,
) -> Result<Sp1Solution, EstimatorError> {
    let t = target.len();
    let m = lagged.ncols();
    if lagged.nrows() != t || regressors.horizon() != t || regressors.order() != m {
        return Err(crate::model::ModelError::Shape {
            what: "sp1 regressors",
            expected: (t, m),
            found: lagged.shape(),
        }
        .into());
    }
    if target.iter().chain(lagged.iter()).any(|v| !v.is_finite()) {
        return Err(EstimatorError::InvalidArgument("non-finite SP_I input".into()));
    }
    let z = regressors.stacked();
    let mut full = DMatrix::zeros(t, m + z.ncols());
    full.columns_mut(0, m).copy_from(lagged);
    full.columns_mut(m, z.ncols()).copy_from(&z);
    let (coef, _) = lstsq_min_norm(&full, target).ok_or(EstimatorError::Singular("SP_I design"))?;
    let res = target - &full * &coef;
    let tail = regressors.split(&coef.rows(m, z.ncols()).into_owned());
    Ok(Sp1Solution {
        alpha: coef.rows(0, m).iter().copied().collect(),
        tail,
        f1: res.norm_squared() + lambda * xi_sq_norm,
    })
}

/// Minimizes the objective over (α, β, γ, θ, τ_occ) with ξ fixed.
pub fn solve_sp1(xi: &[f64], design: &DesignMatrices, lambda: f64) -> Result<Sp1Solution, EstimatorError> {
    if xi.len() != design.zones() {
        return Err(crate::model::ModelError::Shape {
            what: "xi",
            expected: (design.zones(), 1),
            found: (xi.len(), 1),
        }
        .into());
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(EstimatorError::InvalidArgument("non-finite xi".into()));
    }
    let x = DVector::from_column_slice(xi);
    solve_sp1_aggregated(&(&design.c0 * &x), &design.c1_xi(&x), &design.regressors(), lambda, x.norm_squared())
}
