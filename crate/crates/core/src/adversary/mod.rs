//! What an honest-but-curious aggregator can and cannot infer.
//!
//! * [`counting_report`]: equations vs unknowns for each class of
//!   information the aggregator collects.
//! * [`recover_tau_from_hat`], [`recover_w_from_gram`]: the leaks that would
//!   occur without encryption or without masking.
//! * [`MqsInstance`] and [`solve_mqs`]: the joint quadratic system the
//!   aggregator must solve, attacked with Levenberg–Marquardt.

mod counting;
mod leakage;
mod mqs;
mod solver;
mod sweep;

pub use counting::{counting_report, CountingReport};
pub use leakage::{recover_tau_from_hat, recover_w_from_gram};
pub use mqs::{build_mqs, mqs_from_protocol, synthetic_knowns, MqsIteration, MqsInstance, SyntheticKnowns, TauStart, WReading};
pub use solver::{solve_mqs, AttackResult, LmOptions};
pub use sweep::{attack_sweep, spearman, write_sweep_csv, AttackRow, CaseSummary, SweepConfig, SweepReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("need {needed}, got {got}")]
    Precondition { needed: &'static str, got: String },
    #[error("system for zone {zone} has rank {rank}, {needed} needed")]
    RankDeficient { zone: usize, rank: usize, needed: usize },
    #[error("Gram upload of agent {agent} is not a rank-one PSD matrix (misfit {misfit:e})")]
    NotRankOne { agent: usize, misfit: f64 },
    #[error("Gram upload of agent {agent} is zero; sign and scale unrecoverable")]
    ZeroGram { agent: usize },
    #[error("scale of agent {agent}'s column unrecoverable: direction is orthogonal to the broadcast vector")]
    ScaleUnrecoverable { agent: usize },
    #[error("shape mismatch in {what}: expected {expected:?}, found {found:?}")]
    Shape { what: &'static str, expected: (usize, usize), found: (usize, usize) },
    #[error("non-finite residual at solver iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
