//! Binary message envelope.
//!
//! ```text
//! u16 version | u32 iteration | u8 phase | u32 sender | u32 receiver
//! u32 payload byte length | u32 rows | u32 cols | rows·cols f64 (column-major)
//! ```
//!
//! All integers and floats are little-endian.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u16 = 1;

/// Participant id of the aggregator; agents use their zone index.
pub const AGGREGATOR_ID: u32 = u32::MAX;

const HEADER_LEN: usize = 2 + 4 + 1 + 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Phase {
    /// BLA → agent: current aggregation weight `ξ_i`; opens an iteration.
    XiAssign = 0,
    /// Agent → BLA: masked `ξ_i τ_i^{-m}` for `m = 0..=M` (T×(M+1)).
    SapS = 1,
    /// Agent → BLA: masked load lag columns (T×(M+1)).
    SapLoad = 2,
    /// BLA → agent: α (M×1).
    AlphaBroadcast = 3,
    /// Agent → BLA: masked `[τ̂_i w_iᵀ; w_i w_iᵀ; w_iᵀ]` ((T+K+1)×K).
    TeUpload = 4,
    /// BLA → agent: ξ̄ (K×1).
    XiBarBroadcast = 5,
    /// Agent → BLA: recovered `ξ_i` (1×1).
    XiReturn = 6,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::XiAssign,
        Phase::SapS,
        Phase::SapLoad,
        Phase::AlphaBroadcast,
        Phase::TeUpload,
        Phase::XiBarBroadcast,
        Phase::XiReturn,
    ];

    fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("message truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported protocol version {0}")]
    Version(u16),
    #[error("unknown phase code {0}")]
    Phase(u8),
    #[error("payload length {declared} does not match {rows}×{cols} tensor")]
    Length { declared: u32, rows: u32, cols: u32 },
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub version: u16,
    pub iteration: u32,
    pub phase: Phase,
    pub sender: u32,
    pub receiver: u32,
    pub payload: DMatrix<f64>,
}

impl Envelope {
    pub fn new(iteration: u32, phase: Phase, sender: u32, receiver: u32, payload: DMatrix<f64>) -> Self {
        Self { version: PROTOCOL_VERSION, iteration, phase, sender, receiver, payload }
    }

    /// Payload bytes as they appear on the wire, for digests.
    pub fn payload_bytes(&self) -> Vec<u8> {
        let (r, c) = self.payload.shape();
        let mut out = Vec::with_capacity(12 + 8 * r * c);
        out.extend_from_slice(&((8 + 8 * r * c) as u32).to_le_bytes());
        out.extend_from_slice(&(r as u32).to_le_bytes());
        out.extend_from_slice(&(c as u32).to_le_bytes());
        for v in self.payload.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload_bytes();
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.iteration.to_le_bytes());
        out.push(self.phase as u8);
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.receiver.to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let version = u16::from_le_bytes(cur.take()?);
        if version != PROTOCOL_VERSION {
            return Err(WireError::Version(version));
        }
        let iteration = u32::from_le_bytes(cur.take()?);
        let [code] = cur.take::<1>()?;
        let phase = Phase::from_u8(code).ok_or(WireError::Phase(code))?;
        let sender = u32::from_le_bytes(cur.take()?);
        let receiver = u32::from_le_bytes(cur.take()?);
        let declared = u32::from_le_bytes(cur.take()?);
        let rows = u32::from_le_bytes(cur.take()?);
        let cols = u32::from_le_bytes(cur.take()?);
        let n = (rows as u64) * (cols as u64);
        if declared as u64 != 8 + 8 * n {
            return Err(WireError::Length { declared, rows, cols });
        }
        let mut values = Vec::with_capacity(n as usize);
        for _ in 0..n {
            values.push(f64::from_le_bytes(cur.take()?));
        }
        if cur.pos != bytes.len() {
            return Err(WireError::Trailing(bytes.len() - cur.pos));
        }
        Ok(Self {
            version,
            iteration,
            phase,
            sender,
            receiver,
            payload: DMatrix::from_vec(rows as usize, cols as usize, values),
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or(WireError::Truncated { needed: end, available: self.bytes.len() })?;
        self.pos = end;
        Ok(slice.try_into().expect("slice of length N"))
    }
}
