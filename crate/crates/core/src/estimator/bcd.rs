use serde::{Deserialize, Serialize};

use super::sp2::{solve_sp2_in, RegressorSpace};
use super::{objective, solve_sp1, EstimatorError};
use crate::model::{check_simplex, AtdmParameters, DesignMatrices};

/// Relative slack allowed on block-descent monotonicity: `1e-9 · max(1, f)`.
pub const DESCENT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapValue {
    pub value: f64,
    /// `f1 < f2`, which makes the gap negative and stops the loop at once.
    pub negative: bool,
    /// `f2 == 0`: the relative branch is undefined and only `f1 − f2` is used.
    pub absolute_only: bool,
}

/// `min(f1 − f2, (f1 − f2)/f2)`, without absolute values.
pub fn gap(f1: f64, f2: f64) -> GapValue {
    let diff = f1 - f2;
    let absolute_only = f2 == 0.0;
    let value = if absolute_only { diff } else { diff.min(diff / f2) };
    GapValue { value, negative: value < 0.0, absolute_only }
}

/// Errors unless `after ≤ before` within [`DESCENT_SLACK`].
pub fn check_descent(iteration: usize, stage: &'static str, before: f64, after: f64) -> Result<(), EstimatorError> {
    if after > before + DESCENT_SLACK * before.abs().max(1.0) {
        return Err(EstimatorError::Divergence { iteration, stage, before, after });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub iteration: usize,
    pub f1: f64,
    pub f2: f64,
    pub gap: f64,
    pub negative: bool,
    pub absolute_only: bool,
}

impl GapRecord {
    pub fn new(iteration: usize, f1: f64, f2: f64) -> Self {
        let g = gap(f1, f2);
        Self { iteration, f1, f2, gap: g.value, negative: g.negative, absolute_only: g.absolute_only }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: AtdmParameters,
    pub objective: f64,
    pub iterations: usize,
    pub gap_trace: Vec<GapRecord>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting weights; uniform `1/K` when `None`.
    pub xi0: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { lambda: 100.0, tol: 1e-6, max_iter: 20, xi0: None }
    }
}

impl FitOptions {
    pub(crate) fn initial_xi(&self, zones: usize) -> Result<Vec<f64>, EstimatorError> {
        if !(self.lambda >= 0.0) || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(EstimatorError::InvalidArgument("need lambda >= 0, tol > 0 and max_iter >= 1".into()));
        }
        let xi = self.xi0.clone().unwrap_or_else(|| vec![1.0 / zones as f64; zones]);
        if xi.len() != zones {
            return Err(EstimatorError::InvalidArgument(format!("xi0 has {} entries for {zones} zones", xi.len())));
        }
        check_simplex(&xi)?;
        Ok(xi)
    }
}

/// Alternates SP_I and SP_II until the gap falls below `tol`.
pub fn bcd_fit(design: &DesignMatrices, opts: &FitOptions) -> Result<FitResult, EstimatorError> {
    let mut xi = opts.initial_xi(design.zones())?;
    let space = RegressorSpace::new(design.regressors());
    let mut trace = Vec::new();
    let mut prev_f2: Option<f64> = None;
    let mut best = None;
    let mut converged = false;

    for iteration in 1..=opts.max_iter {
        let sp1 = solve_sp1(&xi, design, opts.lambda)?;
        if let Some(f2) = prev_f2 {
            check_descent(iteration, "SP_I", f2, sp1.f1)?;
        }
        let sp2 = solve_sp2_in(&space, &sp1.alpha, design, opts.lambda)?;
        check_descent(iteration, "SP_II", sp1.f1, sp2.f2)?;

        let record = GapRecord::new(iteration, sp1.f1, sp2.f2);
        let done = record.gap < opts.tol;
        trace.push(record);
        xi = sp2.z.clone();
        prev_f2 = Some(sp2.f2);
        best = Some(AtdmParameters {
            xi: sp2.z,
            alpha: sp1.alpha,
            beta: sp2.tail.beta,
            gamma: sp2.tail.gamma,
            theta: sp2.tail.theta,
            tau_occ_free: sp2.tail.tau_occ_free,
        });
        if done {
            converged = true;
            break;
        }
    }

    let params = best.expect("max_iter >= 1");
    Ok(FitResult {
        objective: objective(&params, design, opts.lambda)?,
        iterations: trace.len(),
        gap_trace: trace,
        converged,
        params,
    })
}
