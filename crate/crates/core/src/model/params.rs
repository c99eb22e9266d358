use serde::{Deserialize, Serialize};

use super::ModelError;

/// Simplex tolerance on the aggregation coefficients.
pub const SIMPLEX_TOL: f64 = 1e-8;

/// Parameters of the aggregate thermal dynamic model.
///
/// `alpha` has length `M`; `beta`, `gamma`, `theta` have length `M + 1` and are
/// indexed by lag starting at 0; `tau_occ_free` holds one occupancy value per
/// slot of the occupancy period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtdmParameters {
    pub xi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub tau_occ_free: Vec<f64>,
}

impl AtdmParameters {
    /// All-zero coefficients with uniform aggregation weights.
    pub fn uniform(zones: usize, order: usize, t_occ: usize) -> Self {
        Self {
            xi: vec![1.0 / zones as f64; zones],
            alpha: vec![0.0; order],
            beta: vec![0.0; order + 1],
            gamma: vec![0.0; order + 1],
            theta: vec![0.0; order + 1],
            tau_occ_free: vec![0.0; t_occ],
        }
    }

    pub fn zones(&self) -> usize {
        self.xi.len()
    }

    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    pub fn t_occ(&self) -> usize {
        self.tau_occ_free.len()
    }

    /// Checks dimensions, finiteness and the simplex constraint on ξ.
    pub fn validate(&self, zones: usize, order: usize, t_occ: usize) -> Result<(), ModelError> {
        let expect = [
            ("xi", self.xi.len(), zones),
            ("alpha", self.alpha.len(), order),
            ("beta", self.beta.len(), order + 1),
            ("gamma", self.gamma.len(), order + 1),
            ("theta", self.theta.len(), order + 1),
            ("tau_occ_free", self.tau_occ_free.len(), t_occ),
        ];
        for (what, found, expected) in expect {
            if found != expected {
                return Err(ModelError::Shape { what, expected: (expected, 1), found: (found, 1) });
            }
        }
        self.check_finite()?;
        check_simplex(&self.xi)
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        for (what, v) in self.groups() {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(ModelError::NonFinite { what, row: i, col: 0 });
            }
        }
        Ok(())
    }

    /// Named coefficient groups, ξ first.
    pub fn groups(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("xi", &self.xi),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("theta", &self.theta),
            ("tau_occ_free", &self.tau_occ_free),
        ]
    }
}

/// `Σ ξ = 1` and `ξ ≥ 0`, both within [`SIMPLEX_TOL`].
pub fn check_simplex(xi: &[f64]) -> Result<(), ModelError> {
    let sum: f64 = xi.iter().sum();
    let min = xi.iter().cloned().fold(f64::INFINITY, f64::min);
    if (sum - 1.0).abs() > SIMPLEX_TOL || min < -SIMPLEX_TOL {
        return Err(ModelError::NotOnSimplex { sum, min });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_valid() {
        AtdmParameters::uniform(4, 2, 3).validate(4, 2, 3).unwrap();
    }

    #[test]
    fn simplex_violations() {
        assert!(check_simplex(&[0.5, 0.6]).is_err());
        assert!(check_simplex(&[1.1, -0.1]).is_err());
        check_simplex(&[0.3, 0.7]).unwrap();
    }

    #[test]
    fn wrong_length_reported() {
        let mut p = AtdmParameters::uniform(2, 2, 3);
        p.beta.pop();
        assert!(matches!(p.validate(2, 2, 3), Err(ModelError::Shape { what: "beta", .. })));
    }
}
