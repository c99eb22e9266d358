use nalgebra::{DMatrix, DVector};

use super::EstimatorError;
use crate::linalg::{lstsq_min_norm, project_out, range_basis, solve_eq_qp};
use crate::model::{DesignMatrices, RegressorBlock, TailCoefficients};

/// Coordinates below this are treated as violating `ξ ≥ 0`.
pub const ACTIVE_SET_TOL: f64 = -1e-9;

/// The stacked ξ-independent regressors and an orthonormal basis of their span.
#[derive(Debug, Clone)]
pub struct RegressorSpace {
    block: RegressorBlock,
    z: DMatrix<f64>,
    basis: DMatrix<f64>,
}

impl RegressorSpace {
    pub fn new(block: RegressorBlock) -> Self {
        let z = block.stacked();
        let basis = range_basis(&z);
        Self { block, z, basis }
    }

    pub fn block(&self) -> &RegressorBlock {
        &self.block
    }

    pub fn horizon(&self) -> usize {
        self.z.nrows()
    }
}

/// `min ‖A1 z − Z b‖² + λ zᵀ R z  s.t.  cᵀ z = 1`, optionally with `z ≥ 0`.
///
/// In the clear `A1 = τ̂`, `R = I`, `c = 1` and `z = ξ`. Under the
/// transformation `ξ = Wᵀ ξ̄` the same problem is posed in `ξ̄` with
/// `A1 = τ̂ Wᵀ`, `R = W Wᵀ` and `c = W 1`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedQp<'a> {
    pub a1: &'a DMatrix<f64>,
    pub reg: &'a DMatrix<f64>,
    pub c: &'a DVector<f64>,
    pub lambda: f64,
    pub nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sp2Solution {
    /// ξ for the plain problem, ξ̄ for the transformed one.
    pub z: Vec<f64>,
    pub tail: TailCoefficients,
    pub f2: f64,
    pub kkt_residual: f64,
    /// Indices held at zero by the active-set loop.
    pub active: Vec<usize>,
}

/// Solves a [`ReducedQp`] by eliminating the tail coefficients.
///
/// For fixed `z` the optimal `b` is the projection of `A1 z` on span(Z), so the
/// problem reduces to `min zᵀ(GᵀG + λR)z` with `G = (I − UUᵀ)A1`, solved from
/// its KKT system. With `nonnegative`, the most negative coordinate is pinned
/// to zero and released again when its multiplier turns negative.
pub fn solve_reduced_qp(space: &RegressorSpace, qp: ReducedQp<'_>) -> Result<Sp2Solution, EstimatorError> {
    let k = qp.c.len();
    if qp.a1.shape() != (space.horizon(), k) || qp.reg.shape() != (k, k) {
        return Err(crate::model::ModelError::Shape { what: "sp2 system", expected: (space.horizon(), k), found: qp.a1.shape() }.into());
    }
    if qp.a1.iter().chain(qp.reg.iter()).chain(qp.c.iter()).any(|v| !v.is_finite()) {
        return Err(EstimatorError::InvalidArgument("non-finite SP_II input".into()));
    }
    let g = project_out(&space.basis, qp.a1);
    let mut h = g.transpose() * &g + qp.reg * qp.lambda;
    h = (&h + h.transpose()) * 0.5;

    let mut fixed = vec![false; k];
    let max_cycles = 2 * k;
    let mut cycles = 0;
    let (z, kkt_residual) = loop {
        let free: Vec<usize> = (0..k).filter(|i| !fixed[*i]).collect();
        if free.is_empty() {
            return Err(EstimatorError::Singular("SP_II KKT system (no free coordinates)"));
        }
        let h_ff = h.select_rows(free.iter()).select_columns(free.iter());
        let c_f = qp.c.select_rows(free.iter());
        let sol = solve_eq_qp(&h_ff, &c_f).ok_or(EstimatorError::Singular("SP_II KKT system"))?;
        let mut z = DVector::zeros(k);
        for (j, &i) in free.iter().enumerate() {
            z[i] = sol.z[j];
        }
        if !qp.nonnegative {
            break (z, sol.kkt_residual);
        }

        let worst_free = free.iter().copied().filter(|i| z[*i] < ACTIVE_SET_TOL).min_by(|a, b| z[*a].total_cmp(&z[*b]));
        let change = if let Some(i) = worst_free {
            fixed[i] = true;
            true
        } else {
            let grad = &h * &z * 2.0 + qp.c * sol.multiplier;
            let tol = 1e-9 * sol.multiplier.abs().max(1.0);
            let worst_fixed =
                (0..k).filter(|i| fixed[*i] && grad[*i] < -tol).min_by(|a, b| grad[*a].total_cmp(&grad[*b]));
            match worst_fixed {
                Some(i) => {
                    fixed[i] = false;
                    true
                }
                None => false,
            }
        };
        if !change {
            break (z, sol.kkt_residual);
        }
        cycles += 1;
        if cycles > max_cycles {
            return Err(EstimatorError::ActiveSetCycles { cycles: max_cycles });
        }
    };

    let fitted = qp.a1 * &z;
    let (coef, _) = lstsq_min_norm(&space.z, &fitted).ok_or(EstimatorError::Singular("SP_II regressors"))?;
    let res = fitted - &space.z * &coef;
    let f2 = res.norm_squared() + qp.lambda * z.dot(&(qp.reg * &z));
    Ok(Sp2Solution {
        z: z.iter().copied().collect(),
        tail: space.block.split(&coef),
        f2,
        kkt_residual,
        active: (0..k).filter(|i| fixed[*i]).collect(),
    })
}

pub(crate) fn solve_sp2_in(
    space: &RegressorSpace,
    alpha: &[f64],
    design: &DesignMatrices,
    lambda: f64,
) -> Result<Sp2Solution, EstimatorError> {
    if alpha.len() != design.order {
        return Err(crate::model::ModelError::Shape { what: "alpha", expected: (design.order, 1), found: (alpha.len(), 1) }.into());
    }
    let k = design.zones();
    let hat = design.hat_tau(alpha);
    let eye = DMatrix::identity(k, k);
    let ones = DVector::from_element(k, 1.0);
    solve_reduced_qp(space, ReducedQp { a1: &hat, reg: &eye, c: &ones, lambda, nonnegative: true })
}

/// Minimizes the objective over (ξ, β, γ, θ, τ_occ) with α fixed, subject to
/// `1ᵀξ = 1` and `ξ ≥ 0`.
pub fn solve_sp2_plain(alpha: &[f64], design: &DesignMatrices, lambda: f64) -> Result<Sp2Solution, EstimatorError> {
    solve_sp2_in(&RegressorSpace::new(design.regressors()), alpha, design, lambda)
}
