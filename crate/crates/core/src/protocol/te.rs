use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::estimator::{solve_reduced_qp, ReducedQp, RegressorSpace, Sp2Solution};
use crate::linalg::asymmetry;

/// Largest tolerated `|A − Aᵀ|` entry of the aggregated Gram matrix.
pub const GRAM_ASYMMETRY_TOL: f64 = 1e-9;

/// Distribution of the entries of each agent's encryption vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncryptionDistribution {
    pub mean: f64,
    pub sd: f64,
}

impl Default for EncryptionDistribution {
    fn default() -> Self {
        Self { mean: 0.1, sd: 0.1 }
    }
}

/// `s_i^{-m} = ξ_i τ_i^{-m}` for every lag column.
pub fn compute_share_s(xi_i: f64, lag_columns: &[DVector<f64>]) -> Vec<DVector<f64>> {
    lag_columns.iter().map(|c| c * xi_i).collect()
}

/// `τ̂_t = τ_t − Σ_m α_m τ_{t−m}` from a zone's `(T+M)`-long series.
pub fn compute_hat_tau_col(alpha: &[f64], series: &DVector<f64>) -> DVector<f64> {
    let m = alpha.len();
    let t_len = series.len() - m;
    DVector::from_fn(t_len, |t, _| {
        let now = t + m;
        series[now] - alpha.iter().enumerate().map(|(j, a)| a * series[now - 1 - j]).sum::<f64>()
    })
}

/// One agent's encryption vector `w_i` (a column of `W`).
pub fn gen_encryption_col<R: Rng + ?Sized>(zones: usize, rng: &mut R, dist: EncryptionDistribution) -> DVector<f64> {
    let normal = Normal::new(dist.mean, dist.sd).expect("finite encryption distribution");
    DVector::from_fn(zones, |_, _| normal.sample(rng))
}

/// `(τ̂_i w_iᵀ, w_i w_iᵀ)`.
pub fn compute_te_uploads(hat_tau: &DVector<f64>, w: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (hat_tau * w.transpose(), w * w.transpose())
}

/// `ξ_i = w_iᵀ ξ̄`.
pub fn te_recover(w: &DVector<f64>, xi_bar: &DVector<f64>) -> f64 {
    w.dot(xi_bar)
}

/// SP_II in the transformed variable `ξ̄`, built from aggregated uploads only.
///
/// The non-negativity of ξ is not imposed; it cannot be expressed without `W`.
pub fn solve_sp2_masked(
    a1_sum: &DMatrix<f64>,
    a2_sum: &DMatrix<f64>,
    w_sum: &DVector<f64>,
    space: &RegressorSpace,
    lambda: f64,
) -> Result<Sp2Solution, ProtocolError> {
    let asym = asymmetry(a2_sum);
    if !(asym <= GRAM_ASYMMETRY_TOL) {
        return Err(ProtocolError::AsymmetricGram { asymmetry: asym });
    }
    if w_sum.amax() == 0.0 {
        return Err(ProtocolError::InvalidConfig("aggregated encryption vector is zero".into()));
    }
    Ok(solve_reduced_qp(space, ReducedQp { a1: a1_sum, reg: a2_sum, c: w_sum, lambda, nonnegative: false })?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{solve_reduced_qp, RegressorSpace};
    use crate::model::{build_design, generate_synthetic, SyntheticConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn share_examples() {
        let col = DVector::from_vec(vec![20.0, 24.0]);
        assert_eq!(compute_share_s(0.25, std::slice::from_ref(&col))[0].as_slice(), &[5.0, 6.0]);
        assert_eq!(compute_share_s(1.0, std::slice::from_ref(&col))[0], col);
        assert!(compute_share_s(0.0, &[col])[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hat_tau_examples() {
        let series = DVector::from_vec(vec![20.0, 20.0, 20.0, 20.0]);
        assert!(compute_hat_tau_col(&[1.0], &series).iter().all(|v| *v == 0.0));
        let ramp = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(compute_hat_tau_col(&[0.0, 0.0], &ramp).as_slice(), &[3.0, 4.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = DVector::from_fn(8, |_, _| rng.random_range(15.0..25.0));
        let alpha = [0.7, -0.2];
        let got = compute_hat_tau_col(&alpha, &s);
        for t in 0..6 {
            let want = s[t + 2] - 0.7 * s[t + 1] + 0.2 * s[t];
            assert!((got[t] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn encryption_draws() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let d = EncryptionDistribution::default();
        assert_eq!(gen_encryption_col(7, &mut a, d), gen_encryption_col(7, &mut b, d));
        assert_eq!(gen_encryption_col(7, &mut a, d).len(), 7);
        let big = gen_encryption_col(100_000, &mut a, d);
        let mean = big.mean();
        let sd = (big.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99_999.0).sqrt();
        assert!((mean - 0.1).abs() < 0.005 && (sd - 0.1).abs() < 0.005, "mean {mean}, sd {sd}");
    }

    #[test]
    fn upload_examples() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(compute_te_uploads(&e1, &e1).1, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let (a1, _) = compute_te_uploads(&DVector::from_vec(vec![1.0, 2.0]), &DVector::from_vec(vec![3.0, 4.0]));
        assert_eq!(a1, DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 6.0, 8.0]));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let sum: DMatrix<f64> = (0..4).map(|i| compute_te_uploads(&DVector::zeros(1), &w.column(i).into_owned()).1).sum();
        assert!((sum - &w * w.transpose()).amax() < 1e-14);
    }

    #[test]
    fn recover_examples() {
        let bar = DVector::from_vec(vec![0.3, 0.7]);
        let eye = DMatrix::<f64>::identity(2, 2);
        assert_eq!(te_recover(&eye.column(0).into_owned(), &bar), 0.3);
        assert_eq!(te_recover(&eye.column(1).into_owned(), &bar), 0.7);
        assert_eq!(te_recover(&DVector::from_vec(vec![1.0, 1.0]), &DVector::from_vec(vec![0.2, 0.3])), 0.5);
    }

    fn instance(seed: u64) -> (crate::model::DesignMatrices, Vec<f64>) {
        let mut cfg = SyntheticConfig::new(5, 300, 2, seed);
        cfg.t_occ = 24;
        let (ds, truth) = generate_synthetic(&cfg).unwrap();
        (build_design(&ds, 24).unwrap(), truth.alpha)
    }

    #[test]
    fn identity_transform_matches_plain_path() {
        let (design, alpha) = instance(3);
        let space = RegressorSpace::new(design.regressors());
        let hat = design.hat_tau(&alpha);
        let eye = DMatrix::identity(5, 5);
        let ones = DVector::from_element(5, 1.0);
        let masked = solve_sp2_masked(&hat, &eye, &ones, &space, 100.0).unwrap();
        let plain =
            solve_reduced_qp(&space, ReducedQp { a1: &hat, reg: &eye, c: &ones, lambda: 100.0, nonnegative: false }).unwrap();
        assert_eq!(masked, plain);
    }

    #[test]
    fn random_transform_preserves_optimum() {
        let (design, alpha) = instance(4);
        let space = RegressorSpace::new(design.regressors());
        let hat = design.hat_tau(&alpha);
        let eye = DMatrix::identity(5, 5);
        let ones = DVector::from_element(5, 1.0);
        let plain =
            solve_reduced_qp(&space, ReducedQp { a1: &hat, reg: &eye, c: &ones, lambda: 100.0, nonnegative: false }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = DMatrix::from_fn(5, 5, |_, _| 0.1 + 0.1 * rng.random_range(-1.7..1.7));
        let a1 = &hat * w.transpose();
        let a2 = &w * w.transpose();
        let c = w.column_sum();
        let masked = solve_sp2_masked(&a1, &a2, &c, &space, 100.0).unwrap();
        assert!((masked.f2 - plain.f2).abs() <= 1e-6 * plain.f2);
        let xi = w.transpose() * DVector::from_column_slice(&masked.z);
        assert!((xi.sum() - 1.0).abs() < 1e-8);
        assert!((xi - DVector::from_column_slice(&plain.z)).amax() < 1e-5);
    }

    #[test]
    fn asymmetric_gram_rejected() {
        let (design, alpha) = instance(5);
        let space = RegressorSpace::new(design.regressors());
        let mut a2 = DMatrix::identity(5, 5);
        a2[(0, 1)] = 1e-6;
        let err = solve_sp2_masked(&design.hat_tau(&alpha), &a2, &DVector::from_element(5, 1.0), &space, 1.0).unwrap_err();
        assert!(matches!(err, ProtocolError::AsymmetricGram { .. }));
    }
}
