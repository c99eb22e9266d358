use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{derive_seed, ProtocolError};

/// Standard deviation of pairwise mask entries.
pub const SAP_MASK_SD: f64 = 10.0;

/// Which uploaded quantity a mask protects. Each field gets its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskField {
    /// `ξ_i τ^{-m}` share for lag `m`.
    S(usize),
    /// Load column for lag `m`.
    Load(usize),
    /// Outer product `τ̂_i w_iᵀ`.
    U,
    /// Gram term `w_i w_iᵀ`.
    P,
    /// Encryption vector `w_i`.
    Q,
}

impl MaskField {
    fn code(self) -> (u64, u64) {
        match self {
            MaskField::S(m) => (0, m as u64),
            MaskField::Load(m) => (1, m as u64),
            MaskField::U => (2, 0),
            MaskField::P => (3, 0),
            MaskField::Q => (4, 0),
        }
    }
}

/// The pairwise masks of one iteration.
///
/// Mask `s_{i,j}` (for `i < j`) is known to agents `i` and `j` only; here both
/// derive it from a shared seed, standing in for a key agreement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseMaskSet {
    pub seed: u64,
    pub iteration: u32,
    pub agents: usize,
    pub sd: f64,
}

impl PairwiseMaskSet {
    pub fn new(seed: u64, iteration: u32, agents: usize) -> Self {
        Self { seed, iteration, agents, sd: SAP_MASK_SD }
    }

    /// `s_{i,j}` for `i < j`, shaped `rows × cols`.
    pub fn pair_mask(&self, i: usize, j: usize, field: MaskField, rows: usize, cols: usize) -> DMatrix<f64> {
        assert!(i < j && j < self.agents, "pair ({i}, {j}) out of order or range");
        let (kind, lag) = field.code();
        let seed = derive_seed("sap-mask", &[self.seed, self.iteration as u64, i as u64, j as u64, kind, lag]);
        let mut rng = ChaCha8Rng::from_seed(seed);
        let normal = Normal::new(0.0, self.sd).expect("finite mask sd");
        DMatrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng))
    }

    /// Masks `x` as agent `me` for the given field.
    pub fn mask(&self, x: &DMatrix<f64>, me: usize, field: MaskField) -> Result<DMatrix<f64>, ProtocolError> {
        let (r, c) = x.shape();
        sap_mask(x, me, self.agents, |i, j| self.pair_mask(i, j, field, r, c))
    }
}

/// `x̃_i = x_i + Σ_{j>i} s_{i,j} − Σ_{j<i} s_{j,i}`.
pub fn sap_mask<F>(x: &DMatrix<f64>, me: usize, agents: usize, pair: F) -> Result<DMatrix<f64>, ProtocolError>
where
    F: Fn(usize, usize) -> DMatrix<f64>,
{
    if me >= agents {
        return Err(ProtocolError::InvalidConfig(format!("agent {me} outside 0..{agents}")));
    }
    let mut out = x.clone();
    for other in 0..agents {
        if other == me {
            continue;
        }
        let (lo, hi) = if me < other { (me, other) } else { (other, me) };
        let s = pair(lo, hi);
        if s.shape() != x.shape() {
            return Err(ProtocolError::Shape { what: "pair mask", expected: x.shape(), found: s.shape() });
        }
        if me < other {
            out += s;
        } else {
            out -= s;
        }
    }
    Ok(out)
}

/// Elementwise sum of all shares, in the given (agent-index) order.
pub fn sap_aggregate(shares: &[DMatrix<f64>]) -> Result<DMatrix<f64>, ProtocolError> {
    let first = shares.first().ok_or_else(|| ProtocolError::InvalidConfig("no shares to aggregate".into()))?;
    let mut acc = first.clone();
    for s in &shares[1..] {
        if s.shape() != acc.shape() {
            return Err(ProtocolError::Shape { what: "share", expected: acc.shape(), found: s.shape() });
        }
        acc += s;
    }
    Ok(acc)
}
