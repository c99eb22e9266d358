use nalgebra::DVector;

use super::EstimatorError;
use crate::model::{AtdmParameters, DesignMatrices, TailCoefficients};

/// Residual `c0ξ − c1(I_M⊗ξ)α − c2β − c3γ − c4θ − P_occ τ_occ`.
pub fn residual(params: &AtdmParameters, design: &DesignMatrices) -> Result<DVector<f64>, EstimatorError> {
    let (k, m) = (design.zones(), design.order);
    for (what, found, expected) in [
        ("xi", params.xi.len(), k),
        ("alpha", params.alpha.len(), m),
        ("beta", params.beta.len(), m + 1),
        ("gamma", params.gamma.len(), m + 1),
        ("theta", params.theta.len(), m + 1),
        ("tau_occ_free", params.tau_occ_free.len(), design.t_occ),
    ] {
        if found != expected {
            return Err(crate::model::ModelError::Shape { what, expected: (expected, 1), found: (found, 1) }.into());
        }
    }
    let xi = DVector::from_column_slice(&params.xi);
    let alpha = DVector::from_column_slice(&params.alpha);
    let tail = TailCoefficients {
        beta: params.beta.clone(),
        gamma: params.gamma.clone(),
        theta: params.theta.clone(),
        tau_occ_free: params.tau_occ_free.clone(),
    };
    Ok(&design.c0 * &xi - design.c1_xi(&xi) * alpha - design.regressors().apply(&tail))
}

/// Regularized sum of squared residuals.
pub fn objective(params: &AtdmParameters, design: &DesignMatrices, lambda: f64) -> Result<f64, EstimatorError> {
    if !(lambda >= 0.0) {
        return Err(EstimatorError::InvalidArgument(format!("lambda must be non-negative, got {lambda}")));
    }
    let r = residual(params, design)?;
    let reg: f64 = params.xi.iter().map(|x| x * x).sum();
    Ok(r.norm_squared() + lambda * reg)
}
