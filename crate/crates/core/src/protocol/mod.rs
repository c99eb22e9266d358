//! Multi-party fitting of the aggregate model.
//!
//! Each agent holds one zone's indoor temperature and load series; the
//! aggregator (BLA) holds the public outdoor temperature and solar series.
//! Aggregates the BLA needs for SP_I arrive through pairwise-masked secure
//! aggregation (SAP). For SP_II every agent multiplies its filtered
//! temperature column by a private random vector (TE) and SAP-masks the result,
//! so the BLA solves a transformed problem and never sees a single zone's data.

mod agent;
mod run;
mod sap;
mod seeds;
mod te;
mod transcript;
mod transport;
mod wire;

pub use agent::{lag_matrix, Agent};
pub use run::{run_protocol, run_protocol_with, ProtocolConfig, ProtocolRun, PublicData};
pub use sap::{sap_aggregate, sap_mask, MaskField, PairwiseMaskSet, SAP_MASK_SD};
pub use seeds::derive_seed;
pub use te::{
    compute_hat_tau_col, compute_share_s, compute_te_uploads, gen_encryption_col, solve_sp2_masked, te_recover,
    EncryptionDistribution, GRAM_ASYMMETRY_TOL,
};
pub use transcript::{
    collinear, scan_payload, IterationView, MessageRecord, PrivateVectors, ProtocolTranscript, SimulationOracle,
    XiViolation, COLLINEAR_TOL, XI_NEGATIVE_TOL,
};
pub use transport::{DropRule, InProcessBus, Transport};
pub use wire::{Envelope, Phase, WireError, AGGREGATOR_ID, PROTOCOL_VERSION};

use thiserror::Error;

use crate::estimator::EstimatorError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("iteration {iteration}, phase {phase:?}: missing shares from agents {missing:?}")]
    MissingShare { phase: Phase, iteration: u32, missing: Vec<u32> },
    #[error("iteration {iteration}, phase {phase:?}: duplicate share from agent {sender}")]
    DuplicateShare { phase: Phase, iteration: u32, sender: u32 },
    #[error("unexpected {phase:?} message from {sender} to {receiver}")]
    UnexpectedMessage { phase: Phase, sender: u32, receiver: u32 },
    #[error("iteration {iteration}, phase {phase:?}: agent {sender} sent unmasked private data ({detail})")]
    PrivacyViolation { phase: Phase, iteration: u32, sender: u32, detail: String },
    #[error("aggregated Gram matrix is asymmetric by {asymmetry:e}")]
    AsymmetricGram { asymmetry: f64 },
    #[error("recovered aggregation weights sum to {sum}, not 1")]
    RecoveredSum { sum: f64 },
    #[error("shape mismatch in {what}: expected {expected:?}, found {found:?}")]
    Shape { what: &'static str, expected: (usize, usize), found: (usize, usize) },
    #[error("{0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
