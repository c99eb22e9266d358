use nalgebra::{DMatrix, DVector, SVD};

use super::AdversaryError;
use crate::linalg::lstsq_min_norm;

/// Rebuilds zone temperatures from filtered temperatures seen in the clear.
///
/// For each zone, iteration `l` gives `T` equations
/// `x_{t} − Σ_m α^{(l)}_m x_{t−m} = τ̂^{(l)}_t` in the `T+M` unknowns
/// `x_{1−M} … x_T`. Two iterations with different α are enough.
pub fn recover_tau_from_hat(hat_per_iter: &[DMatrix<f64>], alpha_per_iter: &[Vec<f64>]) -> Result<DMatrix<f64>, AdversaryError> {
    let l = hat_per_iter.len();
    if l < 2 || alpha_per_iter.len() != l {
        return Err(AdversaryError::Precondition {
            needed: "at least two iterations, one α per filtered matrix",
            got: format!("{l} matrices, {} α vectors", alpha_per_iter.len()),
        });
    }
    let (t, k) = hat_per_iter[0].shape();
    let m = alpha_per_iter[0].len();
    for (h, a) in hat_per_iter.iter().zip(alpha_per_iter) {
        if h.shape() != (t, k) || a.len() != m {
            return Err(AdversaryError::Shape { what: "filtered temperatures", expected: (t, k), found: h.shape() });
        }
    }
    let n = t + m;
    let mut a = DMatrix::zeros(t * l, n);
    for (it, alpha) in alpha_per_iter.iter().enumerate() {
        for row in 0..t {
            let r = it * t + row;
            a[(r, row + m)] = 1.0;
            for (j, al) in alpha.iter().enumerate() {
                a[(r, row + m - 1 - j)] -= al;
            }
        }
    }
    let svd = SVD::new(a.clone(), false, false);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|s| **s > smax * 1e-10).count();
    if rank < n {
        return Err(AdversaryError::RankDeficient { zone: 0, rank, needed: n });
    }
    let mut out = DMatrix::zeros(n, k);
    for zone in 0..k {
        let b = DVector::from_iterator(t * l, hat_per_iter.iter().flat_map(|h| h.column(zone).iter().copied().collect::<Vec<_>>()));
        let (x, _) = lstsq_min_norm(&a, &b).ok_or(AdversaryError::RankDeficient { zone, rank, needed: n })?;
        out.set_column(zone, &x);
    }
    Ok(out)
}

/// Rebuilds the encryption matrix from unmasked Gram uploads `w_i w_iᵀ`.
///
/// Each upload fixes `w_i` up to sign: magnitudes from the diagonal, relative
/// signs from the row of the largest diagonal entry. The returned weight
/// `ξ_i = w_iᵀ ξ̄` then fixes the sign (and any residual scale). Column `i` of
/// the result is agent `i`'s vector.
pub fn recover_w_from_gram(a2_set: &[DMatrix<f64>], xi: &DVector<f64>, xi_bar: &DVector<f64>) -> Result<DMatrix<f64>, AdversaryError> {
    let k = xi.len();
    if a2_set.len() != k || xi_bar.len() != k {
        return Err(AdversaryError::Precondition {
            needed: "one Gram upload and one weight per agent",
            got: format!("{} uploads, {k} weights, {} broadcast entries", a2_set.len(), xi_bar.len()),
        });
    }
    let mut w = DMatrix::zeros(k, k);
    for (agent, g) in a2_set.iter().enumerate() {
        if g.shape() != (k, k) {
            return Err(AdversaryError::Shape { what: "Gram upload", expected: (k, k), found: g.shape() });
        }
        let scale = g.amax();
        if scale == 0.0 {
            return Err(AdversaryError::ZeroGram { agent });
        }
        let diag = g.diagonal();
        if diag.iter().any(|d| *d < -1e-12 * scale) {
            return Err(AdversaryError::NotRankOne { agent, misfit: -diag.min() / scale });
        }
        let pivot = diag.imax();
        let v = DVector::from_fn(k, |a, _| {
            let mag = diag[a].max(0.0).sqrt();
            if g[(a, pivot)] < 0.0 {
                -mag
            } else {
                mag
            }
        });
        let misfit = (g - &v * v.transpose()).amax() / scale;
        if !(misfit <= 1e-8) {
            return Err(AdversaryError::NotRankOne { agent, misfit });
        }
        let proj = v.dot(xi_bar);
        if proj.abs() <= 1e-14 * v.norm() * xi_bar.norm() {
            return Err(AdversaryError::ScaleUnrecoverable { agent });
        }
        w.set_column(agent, &(v * (xi[agent] / proj)));
    }
    Ok(w)
}
