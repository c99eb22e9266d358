//! Dense least-squares and equality-constrained QP kernels shared by the
//! plain estimator and the masked protocol solvers.

use nalgebra::{DMatrix, DVector, SVD};

/// Relative singular-value cutoff, as a multiple of `eps * max(rows, cols)`.
fn cutoff(svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>, rows: usize, cols: usize) -> f64 {
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    smax * f64::EPSILON * rows.max(cols).max(1) as f64
}

/// Minimum-norm least-squares solution of `a x ≈ b`, with the numerical rank.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, usize)> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Some((DVector::zeros(0), 0));
    }
    let svd = SVD::new(a.clone(), true, true);
    let eps = cutoff(&svd, rows, cols);
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    if rank == 0 {
        return Some((DVector::zeros(cols), 0));
    }
    let mut x = svd.solve(b, eps).ok()?;
    // the SVD only reconstructs `a` to ~1e-9 relative; refinement recovers
    // the remaining digits without leaving the row space
    for _ in 0..2 {
        x += svd.solve(&(b - a * &x), eps).ok()?;
    }
    Some((x, rank))
}

/// Orthonormal basis of the column space of `a` (thin, rank-revealing).
pub fn range_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = SVD::new(a.clone(), true, false);
    let eps = cutoff(&svd, rows, cols);
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > eps)
        .map(|(i, _)| i)
        .collect();
    u.select_columns(keep.iter())
}

/// `x - Q (Qᵀ x)` for an orthonormal `Q`: the component of `x` orthogonal to range(Q).
pub fn project_out(basis: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return x.clone();
    }
    let coeff = basis.transpose() * x;
    x - basis * coeff
}

/// Solution of `min zᵀ H z  s.t.  cᵀ z = 1` from its KKT system.
#[derive(Debug, Clone)]
pub struct EqQpSolution {
    pub z: DVector<f64>,
    pub multiplier: f64,
    /// ∞-norm of the KKT residual.
    pub kkt_residual: f64,
}

/// Solves `[2H c; cᵀ 0] [z; ν] = [0; 1]`. Falls back to a pseudo-inverse when
/// the LU factorization is singular or inaccurate. Returns `None` when even the
/// least-squares solution fails to satisfy the constraint.
pub fn solve_eq_qp(h: &DMatrix<f64>, c: &DVector<f64>) -> Option<EqQpSolution> {
    let n = c.len();
    assert_eq!(h.shape(), (n, n));
    let mut kkt = DMatrix::zeros(n + 1, n + 1);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(h * 2.0));
    kkt.view_mut((0, n), (n, 1)).copy_from(c);
    kkt.view_mut((n, 0), (1, n)).copy_from(&c.transpose());
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;

    let scale = kkt.amax().max(1.0);
    let residual = |sol: &DVector<f64>| (&kkt * sol - &rhs).amax() / scale;

    let mut best = kkt.clone().lu().solve(&rhs).filter(|s| s.iter().all(|v| v.is_finite()));
    let needs_fallback = match &best {
        Some(s) => residual(s) > 1e-10,
        None => true,
    };
    if needs_fallback {
        if let Some((s, _)) = lstsq_min_norm(&kkt, &rhs) {
            let better = match &best {
                Some(b) => residual(&s) < residual(b),
                None => true,
            };
            if better {
                best = Some(s);
            }
        }
    }
    let sol = best?;
    let z = sol.rows(0, n).into_owned();
    if (c.dot(&z) - 1.0).abs() > 1e-8 {
        return None;
    }
    Some(EqQpSolution {
        kkt_residual: residual(&sol),
        multiplier: sol[n],
        z,
    })
}

/// Max-abs asymmetry `|A - Aᵀ|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).amax()
}
