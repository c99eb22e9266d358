use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AdversaryError, MqsInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop once `‖Jᵀr‖∞` falls below this.
    pub grad_tol: f64,
    /// Stop once a step changes `x` by less than this, relative to `‖x‖`.
    pub step_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-8, step_tol: 1e-15 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackResult {
    pub x: Vec<f64>,
    /// `‖τ_est − τ_true‖ / ‖τ_true‖`, when ground truth is attached.
    pub relative_error: Option<f64>,
    /// Final `‖r‖₂`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

fn normal_equations(n: usize, rows: &[Vec<(usize, f64)>], r: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut jtj = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    for (row, ri) in rows.iter().zip(r.iter()) {
        for &(p, vp) in row {
            g[p] += vp * ri;
            for &(q, vq) in row {
                jtj[(p, q)] += vp * vq;
            }
        }
    }
    (jtj, g)
}

/// Levenberg–Marquardt on `½‖r(x)‖²` from `x0`, with Nielsen's damping
/// update. Runs on the calling thread.
pub fn solve_mqs(inst: &MqsInstance, x0: &DVector<f64>, opts: &LmOptions) -> Result<AttackResult, AdversaryError> {
    let start = Instant::now();
    let n = inst.unknowns();
    if x0.len() != n {
        return Err(AdversaryError::Shape { what: "initial point", expected: (n, 1), found: (x0.len(), 1) });
    }
    let mut x = x0.clone();
    let mut rows = Vec::new();
    let mut r = inst.evaluate(&x, Some(&mut rows));
    let mut cost = 0.5 * r.norm_squared();
    if !cost.is_finite() {
        return Err(AdversaryError::NonFinite { iteration: 0 });
    }
    let (mut jtj, mut g) = normal_equations(n, &rows, &r);
    let mut mu = 1e-3 * jtj.diagonal().max().max(1e-12);
    let mut nu = 2.0;
    let mut converged = g.amax() <= opts.grad_tol;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut a = jtj.clone();
        for i in 0..n {
            a[(i, i)] += mu;
        }
        let Some(chol) = a.cholesky() else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let step = -chol.solve(&g);
        if step.norm() <= opts.step_tol * (x.norm() + opts.step_tol) {
            break;
        }
        let trial = &x + &step;
        let r_trial = inst.residual(&trial);
        let cost_trial = 0.5 * r_trial.norm_squared();
        let predicted = 0.5 * step.dot(&(&step * mu - &g));
        let rho = if predicted > 0.0 { (cost - cost_trial) / predicted } else { -1.0 };
        if cost_trial.is_finite() && rho > 0.0 {
            x = trial;
            r = inst.evaluate(&x, Some(&mut rows));
            cost = 0.5 * r.norm_squared();
            (jtj, g) = normal_equations(n, &rows, &r);
            mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
            converged = g.amax() <= opts.grad_tol;
        } else {
            mu *= nu;
            nu *= 2.0;
        }
    }
    Ok(AttackResult {
        relative_error: inst.relative_error(&x),
        x: x.as_slice().to_vec(),
        residual: r.norm(),
        iterations,
        converged,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{build_mqs, synthetic_knowns, WReading};

    #[test]
    fn truth_start_stays_put() {
        let inst = build_mqs(&synthetic_knowns(4, 2, 6, 2, WReading::PerQuantity, [1; 32])).unwrap();
        let res = solve_mqs(&inst, inst.truth.as_ref().unwrap(), &LmOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.relative_error.unwrap() < 1e-10);
    }

    #[test]
    fn drives_residual_down_from_perturbed_start() {
        let inst = build_mqs(&synthetic_knowns(3, 2, 4, 1, WReading::PerQuantity, [2; 32])).unwrap();
        let x0 = inst.perturbed_truth(0.05, [4; 32]).unwrap();
        let r0 = inst.residual(&x0).norm();
        let res = solve_mqs(&inst, &x0, &LmOptions::default()).unwrap();
        assert!(res.residual < 1e-3 * r0, "{} vs {}", res.residual, r0);
    }

    #[test]
    fn rejects_wrong_length() {
        let inst = build_mqs(&synthetic_knowns(2, 1, 2, 1, WReading::PerQuantity, [0; 32])).unwrap();
        assert!(solve_mqs(&inst, &DVector::zeros(3), &LmOptions::default()).is_err());
    }
}
