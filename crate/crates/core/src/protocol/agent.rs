use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    compute_hat_tau_col, compute_te_uploads, derive_seed, gen_encryption_col, te_recover, EncryptionDistribution,
    Envelope, MaskField, PairwiseMaskSet, Phase, PrivateVectors, ProtocolError, AGGREGATOR_ID,
};

/// Columns `m = 0..=M` of a `(T+M)`-long series: column `m` is the lag-`m` view.
pub fn lag_matrix(series: &DVector<f64>, order: usize) -> DMatrix<f64> {
    let t = series.len() - order;
    let mut out = DMatrix::zeros(t, order + 1);
    for m in 0..=order {
        out.set_column(m, &series.rows(order - m, t));
    }
    out
}

/// A building zone: owns its temperature and load series and never sends them
/// in the clear.
#[derive(Debug, Clone)]
pub struct Agent {
    index: usize,
    agents: usize,
    order: usize,
    tau: DVector<f64>,
    load: DVector<f64>,
    seed: u64,
    encryption: EncryptionDistribution,
    mask: bool,
    xi: Option<f64>,
    alpha: Option<Vec<f64>>,
    w: Option<DVector<f64>>,
}

impl Agent {
    /// `tau` and `load` are `(T+M)`-long, oldest first. `mask = false` sends
    /// shares in the clear; it exists only to exercise the privacy scanner.
    pub fn new(
        index: usize,
        agents: usize,
        order: usize,
        tau: DVector<f64>,
        load: DVector<f64>,
        seed: u64,
        encryption: EncryptionDistribution,
        mask: bool,
    ) -> Result<Self, ProtocolError> {
        if tau.len() != load.len() || tau.len() <= order || index >= agents {
            return Err(ProtocolError::InvalidConfig(format!("agent {index}: inconsistent series or index")));
        }
        Ok(Self { index, agents, order, tau, load, seed, encryption, mask, xi: None, alpha: None, w: None })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    fn id(&self) -> u32 {
        self.index as u32
    }

    fn horizon(&self) -> usize {
        self.tau.len() - self.order
    }

    fn masked(&self, x: &DMatrix<f64>, iteration: u32, field: MaskField) -> Result<DMatrix<f64>, ProtocolError> {
        if !self.mask {
            return Ok(x.clone());
        }
        PairwiseMaskSet::new(self.seed, iteration, self.agents).mask(x, self.index, field)
    }

    /// Masks each column of `x` under its own lag field.
    fn masked_lags(
        &self,
        x: &DMatrix<f64>,
        iteration: u32,
        field: fn(usize) -> MaskField,
    ) -> Result<DMatrix<f64>, ProtocolError> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for m in 0..x.ncols() {
            let col = x.columns(m, 1).into_owned();
            out.set_column(m, &self.masked(&col, iteration, field(m))?.column(0));
        }
        Ok(out)
    }

    fn encryption_vector(&self, iteration: u32) -> DVector<f64> {
        let seed = derive_seed("encryption", &[self.seed, iteration as u64, self.index as u64]);
        gen_encryption_col(self.agents, &mut ChaCha8Rng::from_seed(seed), self.encryption)
    }

    /// Current iteration's encryption vector, once drawn.
    pub fn current_w(&self) -> Option<&DVector<f64>> {
        self.w.as_ref()
    }

    /// Reacts to one message; returns the messages to send.
    pub fn handle(&mut self, env: &Envelope) -> Result<Vec<Envelope>, ProtocolError> {
        if env.receiver != self.id() || env.sender != AGGREGATOR_ID {
            return Err(ProtocolError::UnexpectedMessage { phase: env.phase, sender: env.sender, receiver: env.receiver });
        }
        let it = env.iteration;
        let me = self.id();
        let reply = move |phase, payload| Envelope::new(it, phase, me, AGGREGATOR_ID, payload);
        match env.phase {
            Phase::XiAssign => {
                expect_shape(&env.payload, (1, 1), "xi assignment")?;
                let xi = env.payload[(0, 0)];
                self.xi = Some(xi);
                self.alpha = None;
                self.w = None;
                let s = lag_matrix(&self.tau, self.order) * xi;
                let load = lag_matrix(&self.load, self.order);
                Ok(vec![
                    reply(Phase::SapS, self.masked_lags(&s, it, MaskField::S)?),
                    reply(Phase::SapLoad, self.masked_lags(&load, it, MaskField::Load)?),
                ])
            }
            Phase::AlphaBroadcast => {
                expect_shape(&env.payload, (self.order, 1), "alpha")?;
                let alpha: Vec<f64> = env.payload.iter().copied().collect();
                let hat = compute_hat_tau_col(&alpha, &self.tau);
                let w = self.encryption_vector(it);
                let (a1, a2) = compute_te_uploads(&hat, &w);
                let (t, k) = (self.horizon(), self.agents);
                let mut up = DMatrix::zeros(t + k + 1, k);
                up.view_mut((0, 0), (t, k)).copy_from(&self.masked(&a1, it, MaskField::U)?);
                up.view_mut((t, 0), (k, k)).copy_from(&self.masked(&a2, it, MaskField::P)?);
                let wt = DMatrix::from_row_slice(1, k, w.as_slice());
                up.view_mut((t + k, 0), (1, k)).copy_from(&self.masked(&wt, it, MaskField::Q)?);
                self.alpha = Some(alpha);
                self.w = Some(w);
                Ok(vec![reply(Phase::TeUpload, up)])
            }
            Phase::XiBarBroadcast => {
                expect_shape(&env.payload, (self.agents, 1), "xi bar")?;
                let w = self.w.as_ref().ok_or(ProtocolError::UnexpectedMessage {
                    phase: env.phase,
                    sender: env.sender,
                    receiver: env.receiver,
                })?;
                let xi = te_recover(w, &env.payload.column(0).into_owned());
                self.xi = Some(xi);
                Ok(vec![reply(Phase::XiReturn, DMatrix::from_element(1, 1, xi))])
            }
            _ => Err(ProtocolError::UnexpectedMessage { phase: env.phase, sender: env.sender, receiver: env.receiver }),
        }
    }

    /// Everything this agent must never reveal individually in the current
    /// iteration: temperature and load lag columns, the filtered temperature
    /// column once α is known, and the encryption vector once drawn.
    pub fn private_vectors(&self) -> PrivateVectors {
        let mut long: Vec<DVector<f64>> = Vec::new();
        for series in [&self.tau, &self.load] {
            let lags = lag_matrix(series, self.order);
            long.extend(lags.column_iter().map(|c| c.into_owned()));
        }
        if let Some(alpha) = &self.alpha {
            long.push(compute_hat_tau_col(alpha, &self.tau));
        }
        PrivateVectors { long, short: self.w.iter().cloned().collect() }
    }
}

fn expect_shape(m: &DMatrix<f64>, shape: (usize, usize), what: &'static str) -> Result<(), ProtocolError> {
    if m.shape() != shape {
        return Err(ProtocolError::Shape { what, expected: shape, found: m.shape() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lag_views() {
        let s = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let l = lag_matrix(&s, 2);
        assert_eq!(l.column(0).as_slice(), &[3.0, 4.0, 5.0]);
        assert_eq!(l.column(2).as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_foreign_messages() {
        let s = DVector::from_element(5, 20.0);
        let mut a = Agent::new(0, 2, 2, s.clone(), s, 1, EncryptionDistribution::default(), true).unwrap();
        let wrong = Envelope::new(1, Phase::XiAssign, 1, 0, DMatrix::from_element(1, 1, 0.5));
        assert!(a.handle(&wrong).is_err());
        let early = Envelope::new(1, Phase::XiBarBroadcast, AGGREGATOR_ID, 0, DMatrix::zeros(2, 1));
        assert!(a.handle(&early).is_err());
    }

    #[test]
    fn unmasked_shares_are_plain() {
        let tau = DVector::from_vec(vec![19.0, 20.0, 21.0, 22.0]);
        let load = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let mut a = Agent::new(1, 3, 1, tau, load, 1, EncryptionDistribution::default(), false).unwrap();
        let out = a.handle(&Envelope::new(1, Phase::XiAssign, AGGREGATOR_ID, 1, DMatrix::from_element(1, 1, 0.5))).unwrap();
        assert_eq!(out[0].payload.column(0).as_slice(), &[10.0, 10.5, 11.0]);
        assert_eq!(out[1].payload.column(1).as_slice(), &[1.0, 2.0, 3.0]);
    }
}
