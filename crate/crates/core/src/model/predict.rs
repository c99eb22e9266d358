use nalgebra::DVector;

use super::{AtdmParameters, DesignMatrices, ModelError};

/// Free-run simulation of the aggregate model over the design horizon.
///
/// `init_history` holds the aggregate state for periods `1-M ..= 0` in
/// chronological order. Predicted values, not measurements, feed later lags.
pub fn predict_aggregate(
    params: &AtdmParameters,
    design: &DesignMatrices,
    init_history: &[f64],
) -> Result<DVector<f64>, ModelError> {
    let m = design.order;
    params.validate(design.zones(), m, design.t_occ)?;
    if init_history.len() != m {
        return Err(ModelError::Shape { what: "init_history", expected: (m, 1), found: (init_history.len(), 1) });
    }
    let t_len = design.horizon();
    // Exogenous drive per period, computed once.
    let drive = design.regressors().apply(&super::TailCoefficients {
        beta: params.beta.clone(),
        gamma: params.gamma.clone(),
        theta: params.theta.clone(),
        tau_occ_free: params.tau_occ_free.clone(),
    });

    let mut state: Vec<f64> = init_history.to_vec();
    state.reserve(t_len);
    for t in 0..t_len {
        let now = m + t;
        let ar: f64 = params.alpha.iter().enumerate().map(|(i, a)| a * state[now - 1 - i]).sum();
        let value = ar + drive[t];
        if !value.is_finite() {
            return Err(ModelError::Unstable { period: t + 1 });
        }
        state.push(value);
    }
    Ok(DVector::from_column_slice(&state[m..]))
}

/// Spectral radius of the autoregressive part `x_t = Σ α_m x_{t-m}`.
pub fn ar_spectral_radius(alpha: &[f64]) -> f64 {
    let m = alpha.len();
    if m == 0 {
        return 0.0;
    }
    let mut companion = nalgebra::DMatrix::zeros(m, m);
    for (j, a) in alpha.iter().enumerate() {
        companion[(0, j)] = *a;
    }
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
