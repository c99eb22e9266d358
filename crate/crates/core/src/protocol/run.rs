use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{
    lag_matrix, sap_aggregate, scan_payload, solve_sp2_masked, Agent, EncryptionDistribution, Envelope,
    InProcessBus, IterationView, MessageRecord, Phase, ProtocolError, ProtocolTranscript, SimulationOracle,
    Transport, XiViolation, AGGREGATOR_ID, XI_NEGATIVE_TOL,
};
use crate::estimator::{
    check_descent, solve_sp1_aggregated, FitOptions, FitResult, GapRecord, RegressorSpace,
};
use crate::model::{occupancy_map, AtdmParameters, ClusterDataset, RegressorBlock};

/// Tolerance on `Σ ξ_i = 1` for the weights returned by the agents.
const RECOVERED_SUM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub t_occ: usize,
    /// Root of every pairwise-mask and encryption stream.
    pub seed: u64,
    pub encryption: EncryptionDistribution,
    pub xi0: Option<Vec<f64>>,
    /// Agents mask their uploads. Turning this off must trip the scanner.
    pub mask: bool,
    /// Scan every upload against the sender's secrets and abort on a match.
    pub scan: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            tol: 1e-6,
            max_iter: 20,
            t_occ: 48,
            seed: 0,
            encryption: EncryptionDistribution::default(),
            xi0: None,
            mask: true,
            scan: true,
        }
    }
}

/// The aggregator's own data: weather series and calendar.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicData {
    pub tau_out: DVector<f64>,
    pub h_rad: DVector<f64>,
    pub order: usize,
    pub t_occ: usize,
    pub period_offset: usize,
}

impl PublicData {
    pub fn from_dataset(dataset: &ClusterDataset, t_occ: usize) -> Self {
        Self {
            tau_out: dataset.tau_out().clone(),
            h_rad: dataset.h_rad().clone(),
            order: dataset.order(),
            t_occ,
            period_offset: dataset.period_offset(),
        }
    }

    /// Regressor block with the load columns supplied by secure aggregation.
    fn regressors(&self, c2: DMatrix<f64>) -> RegressorBlock {
        let c3 = lag_matrix(&self.tau_out, self.order);
        RegressorBlock {
            c2,
            c4: lag_matrix(&self.h_rad, self.order),
            p_occ: occupancy_map(c3.nrows(), self.t_occ, self.period_offset),
            c3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub fit: FitResult,
    pub transcript: ProtocolTranscript,
    pub oracle: SimulationOracle,
}

/// Runs the protocol over an [`InProcessBus`].
pub fn run_protocol(dataset: &ClusterDataset, cfg: &ProtocolConfig) -> Result<ProtocolRun, ProtocolError> {
    run_protocol_with(dataset, cfg, &mut InProcessBus::new())
}

struct Session<'a> {
    bus: &'a mut dyn Transport,
    agents: Vec<Agent>,
    transcript: ProtocolTranscript,
    scan: bool,
}

impl Session<'_> {
    fn post(&mut self, env: Envelope) -> Result<(), ProtocolError> {
        self.transcript.messages.push(MessageRecord::of(&env));
        self.bus.send(&env)
    }

    /// Sends one payload to every agent and lets each agent respond.
    fn broadcast(&mut self, phase: Phase, iteration: u32, payload: impl Fn(usize) -> DMatrix<f64>) -> Result<(), ProtocolError> {
        for i in 0..self.agents.len() {
            self.post(Envelope::new(iteration, phase, AGGREGATOR_ID, i as u32, payload(i)))?;
        }
        let mut inbox = Vec::with_capacity(self.agents.len());
        for i in 0..self.agents.len() {
            let mut got = self.bus.collect(i as u32, phase, iteration)?;
            if got.len() != 1 {
                return Err(ProtocolError::MissingShare { phase, iteration, missing: vec![i as u32] });
            }
            inbox.push(got.remove(0));
        }
        let replies: Vec<Result<Vec<Envelope>, ProtocolError>> =
            self.agents.par_iter_mut().zip(inbox.par_iter()).map(|(a, env)| a.handle(env)).collect();
        for r in replies {
            for env in r? {
                self.post(env)?;
            }
        }
        Ok(())
    }

    /// Phase barrier: one share per agent, returned in agent-index order.
    fn gather(&mut self, phase: Phase, iteration: u32) -> Result<Vec<DMatrix<f64>>, ProtocolError> {
        let k = self.agents.len();
        let mut slots: Vec<Option<DMatrix<f64>>> = vec![None; k];
        for env in self.bus.collect(AGGREGATOR_ID, phase, iteration)? {
            let i = env.sender as usize;
            if i >= k {
                return Err(ProtocolError::UnexpectedMessage { phase, sender: env.sender, receiver: env.receiver });
            }
            if slots[i].is_some() {
                return Err(ProtocolError::DuplicateShare { phase, iteration, sender: env.sender });
            }
            if self.scan {
                if let Some(detail) = scan_payload(phase, &env.payload, k, &self.agents[i].private_vectors()) {
                    return Err(ProtocolError::PrivacyViolation { phase, iteration, sender: env.sender, detail });
                }
            }
            slots[i] = Some(env.payload);
        }
        let missing: Vec<u32> = (0..k).filter(|i| slots[*i].is_none()).map(|i| i as u32).collect();
        if !missing.is_empty() {
            return Err(ProtocolError::MissingShare { phase, iteration, missing });
        }
        Ok(slots.into_iter().flatten().collect())
    }
}

/// Runs the protocol with each zone's data held by its own [`Agent`] and only
/// weather data at the aggregator. Messages travel over `bus`.
pub fn run_protocol_with(
    dataset: &ClusterDataset,
    cfg: &ProtocolConfig,
    bus: &mut dyn Transport,
) -> Result<ProtocolRun, ProtocolError> {
    let k = dataset.zones();
    let m = dataset.order();
    let t = dataset.horizon();
    if k < 2 {
        return Err(ProtocolError::InvalidConfig("secure aggregation needs at least two agents".into()));
    }
    if cfg.t_occ == 0 {
        return Err(ProtocolError::InvalidConfig("T_occ must be at least 1".into()));
    }
    let opts = FitOptions { lambda: cfg.lambda, tol: cfg.tol, max_iter: cfg.max_iter, xi0: cfg.xi0.clone() };
    let mut xi = opts.initial_xi(k)?;

    let agents = (0..k)
        .map(|i| {
            Agent::new(
                i,
                k,
                m,
                dataset.tau_in().column(i).into_owned(),
                dataset.h_load().column(i).into_owned(),
                cfg.seed,
                cfg.encryption,
                cfg.mask,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let public = PublicData::from_dataset(dataset, cfg.t_occ);
    let mut session = Session { bus, agents, transcript: ProtocolTranscript::default(), scan: cfg.scan };
    let mut oracle = SimulationOracle::default();

    let mut prev_f2: Option<f64> = None;
    let mut params = None;
    let mut converged = false;
    let mut trace = Vec::new();
    let mut objective = f64::NAN;

    for l in 1..=cfg.max_iter {
        let it = l as u32;

        // ξ_i to each agent; agents answer with masked S and load shares.
        let xi_now = xi.clone();
        session.broadcast(Phase::XiAssign, it, |i| DMatrix::from_element(1, 1, xi_now[i]))?;
        let s_sum = sap_aggregate(&session.gather(Phase::SapS, it)?)?;
        let c2 = sap_aggregate(&session.gather(Phase::SapLoad, it)?)?;
        expect(&s_sum, (t, m + 1), "aggregated S")?;
        expect(&c2, (t, m + 1), "aggregated load")?;
        let c0_xi = s_sum.column(0).into_owned();
        let c1_xi = s_sum.columns(1, m).into_owned();
        let block = public.regressors(c2.clone());
        let xi_sq: f64 = xi.iter().map(|v| v * v).sum();
        let sp1 = solve_sp1_aggregated(&c0_xi, &c1_xi, &block, cfg.lambda, xi_sq)?;
        if let Some(f2) = prev_f2 {
            check_descent(l, "SP_I", f2, sp1.f1)?;
        }

        // α to each agent; agents answer with masked transformation uploads.
        let alpha_col = DMatrix::from_column_slice(m, 1, &sp1.alpha);
        session.broadcast(Phase::AlphaBroadcast, it, |_| alpha_col.clone())?;
        let up = sap_aggregate(&session.gather(Phase::TeUpload, it)?)?;
        expect(&up, (t + k + 1, k), "aggregated TE upload")?;
        let a1_sum = up.rows(0, t).into_owned();
        let a2_sum = up.rows(t, k).into_owned();
        let w_sum = up.row(t + k).transpose();
        let space = RegressorSpace::new(block);
        let sp2 = solve_sp2_masked(&a1_sum, &a2_sum, &w_sum, &space, cfg.lambda)?;
        check_descent(l, "SP_II", sp1.f1, sp2.f2)?;

        // ξ̄ to each agent; agents return their recovered weight.
        let xi_bar = DVector::from_column_slice(&sp2.z);
        let xi_bar_col = DMatrix::from_column_slice(k, 1, &sp2.z);
        session.broadcast(Phase::XiBarBroadcast, it, |_| xi_bar_col.clone())?;
        let returned: Vec<f64> = session.gather(Phase::XiReturn, it)?.iter().map(|p| p[(0, 0)]).collect();

        let w = DMatrix::from_columns(
            &session.agents.iter().map(|a| a.current_w().cloned().expect("drawn this iteration")).collect::<Vec<_>>(),
        );
        oracle.w.push(w);

        let sum: f64 = returned.iter().sum();
        if (sum - 1.0).abs() > RECOVERED_SUM_TOL {
            return Err(ProtocolError::RecoveredSum { sum });
        }
        for (i, v) in returned.iter().enumerate() {
            if *v < XI_NEGATIVE_TOL {
                session.transcript.xi_violations.push(XiViolation { iteration: it, agent: i as u32, value: *v });
            }
        }

        let record = GapRecord::new(l, sp1.f1, sp2.f2);
        let done = record.gap < cfg.tol;
        session.transcript.iterations.push(IterationView {
            iteration: it,
            xi: xi.clone(),
            c0_xi,
            c1_xi,
            c2,
            alpha: sp1.alpha.clone(),
            a1_sum,
            a2_sum,
            w_sum,
            xi_bar,
            xi_recovered: returned.clone(),
            gap: record.clone(),
        });
        trace.push(record);
        prev_f2 = Some(sp2.f2);
        objective = sp2.f2;
        xi = returned.clone();
        params = Some(AtdmParameters {
            xi: returned,
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

    let fit = FitResult {
        params: params.ok_or_else(|| ProtocolError::InvalidConfig("max_iter must be at least 1".into()))?,
        objective,
        iterations: trace.len(),
        gap_trace: trace,
        converged,
    };
    let mut transcript = session.transcript;
    transcript.result = Some(fit.clone());
    Ok(ProtocolRun { fit, transcript, oracle })
}

fn expect(m: &DMatrix<f64>, shape: (usize, usize), what: &'static str) -> Result<(), ProtocolError> {
    if m.shape() != shape {
        return Err(ProtocolError::Shape { what, expected: shape, found: m.shape() });
    }
    Ok(())
}
