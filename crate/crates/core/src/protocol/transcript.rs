use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Envelope, Phase, ProtocolError};
use crate::estimator::{FitResult, GapRecord};

/// Two vectors count as revealing each other when `|cos| ≥ 1 − COLLINEAR_TOL`.
pub const COLLINEAR_TOL: f64 = 1e-9;

/// Recovered weights below this are reported as non-negativity violations.
pub const XI_NEGATIVE_TOL: f64 = -1e-6;

/// One logged message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub iteration: u32,
    pub phase: Phase,
    pub sender: u32,
    pub receiver: u32,
    pub rows: usize,
    pub cols: usize,
    /// SHA-256 of the payload bytes, hex.
    pub digest: String,
}

impl MessageRecord {
    pub fn of(env: &Envelope) -> Self {
        let digest = Sha256::digest(env.payload_bytes());
        Self {
            iteration: env.iteration,
            phase: env.phase,
            sender: env.sender,
            receiver: env.receiver,
            rows: env.payload.nrows(),
            cols: env.payload.ncols(),
            digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

/// What the aggregator knows after one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationView {
    pub iteration: u32,
    /// ξ used by the agents this iteration.
    pub xi: Vec<f64>,
    /// `c0 ξ`.
    pub c0_xi: DVector<f64>,
    /// `c1 (I_M ⊗ ξ)`: column `m-1` is `τ^{-m} ξ`.
    pub c1_xi: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub a1_sum: DMatrix<f64>,
    pub a2_sum: DMatrix<f64>,
    pub w_sum: DVector<f64>,
    pub xi_bar: DVector<f64>,
    pub xi_recovered: Vec<f64>,
    pub gap: GapRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiViolation {
    pub iteration: u32,
    pub agent: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ProtocolTranscript {
    pub messages: Vec<MessageRecord>,
    pub iterations: Vec<IterationView>,
    pub xi_violations: Vec<XiViolation>,
    pub result: Option<FitResult>,
}

impl ProtocolTranscript {
    /// One JSON object per message.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), ProtocolError> {
        for m in &self.messages {
            serde_json::to_writer(&mut w, m).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Messages the aggregator received.
    pub fn received_by_aggregator(&self) -> impl Iterator<Item = &MessageRecord> {
        self.messages.iter().filter(|m| m.receiver == super::AGGREGATOR_ID)
    }
}

/// Ground truth kept by the simulation for attack replay; no participant sees it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationOracle {
    /// `W` per iteration; column `i` is agent `i`'s encryption vector.
    pub w: Vec<DMatrix<f64>>,
}

/// A sender's secrets, grouped by length: `long` vectors have `T` entries,
/// `short` ones `K`.
#[derive(Debug, Clone, Default)]
pub struct PrivateVectors {
    pub long: Vec<DVector<f64>>,
    pub short: Vec<DVector<f64>>,
}

pub fn collinear(a: &[f64], b: &[f64]) -> bool {
    if a.len() != b.len() || a.is_empty() {
        return false;
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return false;
    }
    ab.abs() >= (1.0 - COLLINEAR_TOL) * (aa * bb).sqrt()
}

/// Looks for a payload slice that is a multiple of one of the sender's secrets.
/// Returns a description of the first hit.
pub fn scan_payload(phase: Phase, payload: &DMatrix<f64>, zones: usize, secrets: &PrivateVectors) -> Option<String> {
    let check = |v: &[f64], pool: &[DVector<f64>], what: &str| {
        pool.iter().position(|s| collinear(v, s.as_slice())).map(|i| format!("{what} matches secret #{i}"))
    };
    let cols = |m: &DMatrix<f64>, pool: &[DVector<f64>], what: &str| {
        m.column_iter().enumerate().find_map(|(j, c)| check(c.as_slice(), pool, &format!("{what} column {j}")))
    };
    let rows = |m: &DMatrix<f64>, pool: &[DVector<f64>], what: &str| {
        m.row_iter().enumerate().find_map(|(j, r)| {
            let r: Vec<f64> = r.iter().copied().collect();
            check(&r, pool, &format!("{what} row {j}"))
        })
    };
    match phase {
        Phase::SapS | Phase::SapLoad => cols(payload, &secrets.long, "share"),
        Phase::TeUpload => {
            let t = payload.nrows().checked_sub(zones + 1)?;
            let a1 = payload.rows(0, t).into_owned();
            let a2 = payload.rows(t, zones).into_owned();
            let w = payload.rows(t + zones, 1).into_owned();
            cols(&a1, &secrets.long, "A1")
                .or_else(|| rows(&a1, &secrets.short, "A1"))
                .or_else(|| cols(&a2, &secrets.short, "A2"))
                .or_else(|| rows(&w, &secrets.short, "w"))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinearity() {
        assert!(collinear(&[1.0, 2.0], &[-3.0, -6.0]));
        assert!(!collinear(&[1.0, 2.0], &[2.0, 1.0]));
        assert!(!collinear(&[0.0, 0.0], &[1.0, 1.0]));
        assert!(!collinear(&[1.0], &[1.0, 2.0]));
    }

    #[test]
    fn finds_scaled_copies() {
        let tau = DVector::from_vec(vec![20.0, 21.0, 19.5]);
        let w = DVector::from_vec(vec![0.1, 0.3]);
        let secrets = PrivateVectors { long: vec![tau.clone()], short: vec![w.clone()] };
        let share = DMatrix::from_columns(&[tau.clone() * 0.3]);
        assert!(scan_payload(Phase::SapS, &share, 2, &secrets).is_some());
        let noise = DMatrix::from_vec(3, 1, vec![1.0, -4.0, 2.0]);
        assert!(scan_payload(Phase::SapS, &noise, 2, &secrets).is_none());

        let mut up = DMatrix::zeros(3 + 2 + 1, 2);
        up.view_mut((0, 0), (3, 2)).copy_from(&(&tau * w.transpose()));
        assert!(scan_payload(Phase::TeUpload, &up, 2, &secrets).unwrap().starts_with("A1 column"));
        assert!(scan_payload(Phase::XiReturn, &up, 2, &secrets).is_none());
    }

    #[test]
    fn jsonl_lines() {
        let env = Envelope::new(1, Phase::SapS, 0, super::super::AGGREGATOR_ID, DMatrix::zeros(2, 1));
        let t = ProtocolTranscript { messages: vec![MessageRecord::of(&env); 3], ..Default::default() };
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        let back: MessageRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back.digest.len(), 64);
    }
}
