use serde::{Deserialize, Serialize};

/// Scalar equation and unknown counts for `K` zones, `L` observed iterations,
/// `T` periods and model order `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingReport {
    pub k: usize,
    pub l: usize,
    pub t: usize,
    pub m: usize,
    /// Temperature-only information `τ^{-m} ξ = d_{1,m}`.
    pub type1_unknowns: usize,
    pub type1_equations: usize,
    pub type1_underdetermined: bool,
    /// Encryption-only information `WWᵀ`, `W1`, `Wᵀξ̄ = ξ` (one iteration).
    pub type2_unknowns: usize,
    pub type2_equations: usize,
    pub type2_underdetermined: bool,
    /// The joint quadratic system over all iterations.
    pub type3_equations: usize,
    pub type3_unknowns: usize,
    pub type3_overdetermined: bool,
}

pub fn counting_report(k: usize, l: usize, t: usize, m: usize) -> CountingReport {
    let periods = t + m;
    let type1_unknowns = periods * k;
    let type1_equations = periods * l;
    let type2_unknowns = k * k;
    let type2_equations = k * (k + 1) / 2 + 2 * k;
    let type3_equations = periods * l + k * (k + 1) / 2 * l + 2 * k * l + t * k * l;
    let type3_unknowns = periods * k + k * k * l;
    CountingReport {
        k,
        l,
        t,
        m,
        type1_unknowns,
        type1_equations,
        type1_underdetermined: type1_unknowns > type1_equations,
        type2_unknowns,
        type2_equations,
        type2_underdetermined: type2_unknowns > type2_equations,
        type3_equations,
        type3_unknowns,
        type3_overdetermined: type3_equations > type3_unknowns,
    }
}
