use serde::{Deserialize, Serialize};

use super::ModelError;

/// Below this magnitude a measured value cannot serve as a MAPE denominator.
pub const MAPE_GUARD: f64 = 1e-6;

/// Goodness-of-fit of a predicted aggregate state against the measured one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Root-mean-square error, same unit as the series (°C).
    pub rmse: f64,
    /// Mean absolute percentage error, in percent.
    pub mape: f64,
    pub r2: f64,
}

pub fn rmse(pred: &[f64], real: &[f64]) -> Result<f64, ModelError> {
    check_lengths(pred, real)?;
    Ok((sse(pred, real) / real.len() as f64).sqrt())
}

pub fn mape(pred: &[f64], real: &[f64]) -> Result<f64, ModelError> {
    check_lengths(pred, real)?;
    let mut acc = 0.0;
    for (i, (p, r)) in pred.iter().zip(real).enumerate() {
        if r.abs() < MAPE_GUARD {
            return Err(ModelError::MapeZeroDenominator { index: i });
        }
        acc += ((p - r) / r).abs();
    }
    Ok(100.0 * acc / real.len() as f64)
}

pub fn r_squared(pred: &[f64], real: &[f64]) -> Result<f64, ModelError> {
    check_lengths(pred, real)?;
    let mean = real.iter().sum::<f64>() / real.len() as f64;
    let sst: f64 = real.iter().map(|r| (r - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(ModelError::ConstantSeries);
    }
    Ok(1.0 - sse(pred, real) / sst)
}

pub fn evaluate_metrics(pred: &[f64], real: &[f64]) -> Result<Metrics, ModelError> {
    Ok(Metrics { rmse: rmse(pred, real)?, mape: mape(pred, real)?, r2: r_squared(pred, real)? })
}

fn sse(pred: &[f64], real: &[f64]) -> f64 {
    pred.iter().zip(real).map(|(p, r)| (p - r).powi(2)).sum()
}

fn check_lengths(pred: &[f64], real: &[f64]) -> Result<(), ModelError> {
    if pred.len() != real.len() || real.is_empty() {
        return Err(ModelError::Shape { what: "prediction", expected: (real.len(), 1), found: (pred.len(), 1) });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_fit() {
        let a = [20.0, 21.0, 22.5];
        let m = evaluate_metrics(&a, &a).unwrap();
        assert_eq!((m.rmse, m.mape, m.r2), (0.0, 0.0, 1.0));
    }

    #[test]
    fn constant_real_series() {
        let pred = [2.0, 2.0];
        let real = [1.0, 1.0];
        assert_eq!(rmse(&pred, &real).unwrap(), 1.0);
        assert_eq!(mape(&pred, &real).unwrap(), 100.0);
        assert!(matches!(r_squared(&pred, &real), Err(ModelError::ConstantSeries)));
        assert!(matches!(evaluate_metrics(&pred, &real), Err(ModelError::ConstantSeries)));
    }

    #[test]
    fn zero_denominator() {
        assert!(matches!(mape(&[1.0, 1.0], &[1.0, 0.0]), Err(ModelError::MapeZeroDenominator { index: 1 })));
    }

    #[test]
    fn mean_prediction_scores_zero() {
        let real = [18.0, 20.0, 25.0, 21.0];
        let mean = real.iter().sum::<f64>() / 4.0;
        assert!(r_squared(&[mean; 4], &real).unwrap().abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rmse_symmetric_and_bounded(pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            let ab = rmse(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - rmse(&b, &a).unwrap()).abs() < 1e-12);
            if let Ok(r2) = r_squared(&a, &b) {
                prop_assert!(r2 <= 1.0);
            }
        }
    }
}
