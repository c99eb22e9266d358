//! Non-private estimation of the aggregate model by block coordinate descent.
//!
//! The objective is
//! `f = ‖c0ξ − c1(I_M⊗ξ)α − c2β − c3γ − c4θ − P_occ τ_occ‖² + λ‖ξ‖²`,
//! minimized over ξ on the simplex. With ξ fixed it is a linear least-squares
//! problem (SP_I); with α fixed it is a convex QP in ξ (SP_II).

mod bcd;
mod objective;
mod sp1;
mod sp2;

pub use bcd::{bcd_fit, check_descent, gap, FitOptions, FitResult, GapRecord, GapValue, DESCENT_SLACK};
pub use objective::{objective, residual};
pub use sp1::{solve_sp1, solve_sp1_aggregated, Sp1Solution};
pub use sp2::{solve_reduced_qp, solve_sp2_plain, ReducedQp, RegressorSpace, Sp2Solution, ACTIVE_SET_TOL};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} is singular beyond the least-squares fallback")]
    Singular(&'static str),
    #[error("active-set loop exceeded {cycles} cycles")]
    ActiveSetCycles { cycles: usize },
    #[error("objective increased at iteration {iteration} ({stage}): {before} -> {after}")]
    Divergence { iteration: usize, stage: &'static str, before: f64, after: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}
