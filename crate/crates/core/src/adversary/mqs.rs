use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::AdversaryError;
use crate::model::ClusterDataset;
use crate::protocol::{compute_hat_tau_col, derive_seed, ProtocolRun};

/// What the aggregator learns in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MqsIteration {
    /// Weights the agents were assigned for this iteration.
    pub xi: DVector<f64>,
    pub xi_bar: DVector<f64>,
    /// Weights the agents recover from `ξ̄`, so `Wᵀξ̄ = ξ_recovered`.
    pub xi_recovered: DVector<f64>,
    pub alpha: Vec<f64>,
    /// `T × (M+1)`; column `m` is `τ^{-m} ξ`.
    pub d1: DMatrix<f64>,
    /// `W Wᵀ`.
    pub gram: DMatrix<f64>,
    /// `W 1`.
    pub w_sum: DVector<f64>,
    /// `τ̂ Wᵀ`, `T × K`.
    pub hat_w: DMatrix<f64>,
}

/// The joint quadratic system in the unknown temperatures and per-iteration
/// encryption matrices.
///
/// Unknown layout: `τ` at `p·K + i` for period row `p ∈ 0..T+M` (row 0 is the
/// oldest lag) and zone `i`, then `W^{(l)}_{ab}` at `(T+M)K + l·K² + a·K + b`.
/// Column `b` of `W^{(l)}` is agent `b`'s encryption vector.
#[derive(Debug, Clone)]
pub struct MqsInstance {
    pub k: usize,
    pub t: usize,
    pub m: usize,
    pub iterations: Vec<MqsIteration>,
    /// Ground truth in the same layout. Evaluation only; the solver never
    /// reads it.
    pub truth: Option<DVector<f64>>,
}

/// How the synthetic encryption matrices are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WReading {
    /// `τ ~ N(20, 1)`, `W ~ N(0.1, 0.1)`: each quantity at its own scale.
    #[default]
    PerQuantity,
    /// Both `τ` and `W` drawn from `N(20, 1)`.
    Literal,
}

/// Ground truth for a standalone attack instance.
#[derive(Debug, Clone)]
pub struct SyntheticKnowns {
    /// `(T+M) × K`, oldest row first.
    pub tau: DMatrix<f64>,
    pub w: Vec<DMatrix<f64>>,
    pub xi: Vec<DVector<f64>>,
    pub alpha: Vec<Vec<f64>>,
}

/// Draws temperatures, `L` encryption matrices, weights and model
/// coefficients for an attack experiment.
pub fn synthetic_knowns(k: usize, l: usize, t: usize, m: usize, reading: WReading, seed: [u8; 32]) -> SyntheticKnowns {
    let mut rng = ChaCha8Rng::from_seed(seed);
    let tau_dist = Normal::new(20.0, 1.0).expect("valid");
    let w_dist = match reading {
        WReading::PerQuantity => Normal::new(0.1, 0.1).expect("valid"),
        WReading::Literal => Normal::new(20.0, 1.0).expect("valid"),
    };
    let tau = DMatrix::from_fn(t + m, k, |_, _| tau_dist.sample(&mut rng));
    let mut w = Vec::with_capacity(l);
    let mut xi = Vec::with_capacity(l);
    let mut alpha = Vec::with_capacity(l);
    while w.len() < l {
        let cand = DMatrix::from_fn(k, k, |_, _| w_dist.sample(&mut rng));
        let x = DVector::from_fn(k, |_, _| rng.random_range(0.5..1.5));
        let x = &x / x.sum();
        let a: Vec<f64> = (0..m).map(|j| if j == 0 { rng.random_range(0.5..1.0) } else { rng.random_range(-0.3..0.1) }).collect();
        // keep W comfortably invertible so that ξ̄ exists
        let svd = cand.clone().svd(false, false);
        if svd.singular_values.min() < 1e-3 * svd.singular_values.max() {
            continue;
        }
        w.push(cand);
        xi.push(x);
        alpha.push(a);
    }
    SyntheticKnowns { tau, w, xi, alpha }
}

fn lag_view(tau: &DMatrix<f64>, t: usize, m: usize, lag: usize) -> DMatrix<f64> {
    tau.rows(m - lag, t).into_owned()
}

fn iteration_from_truth(tau: &DMatrix<f64>, w: &DMatrix<f64>, xi: &DVector<f64>, xi_bar: DVector<f64>, alpha: &[f64]) -> MqsIteration {
    let m = alpha.len();
    let t = tau.nrows() - m;
    let k = tau.ncols();
    let mut d1 = DMatrix::zeros(t, m + 1);
    for lag in 0..=m {
        d1.set_column(lag, &(lag_view(tau, t, m, lag) * xi));
    }
    let hat = DMatrix::from_columns(&(0..k).map(|i| compute_hat_tau_col(alpha, &tau.column(i).into_owned())).collect::<Vec<_>>());
    MqsIteration {
        xi: xi.clone(),
        xi_bar,
        xi_recovered: xi.clone(),
        alpha: alpha.to_vec(),
        d1,
        gram: w * w.transpose(),
        w_sum: w.column_sum(),
        hat_w: hat * w.transpose(),
    }
}

fn pack(tau: &DMatrix<f64>, ws: &[DMatrix<f64>]) -> DVector<f64> {
    let (rows, k) = tau.shape();
    let mut x = DVector::zeros(rows * k + ws.len() * k * k);
    for p in 0..rows {
        for i in 0..k {
            x[p * k + i] = tau[(p, i)];
        }
    }
    let base = rows * k;
    for (l, w) in ws.iter().enumerate() {
        for a in 0..k {
            for b in 0..k {
                x[base + l * k * k + a * k + b] = w[(a, b)];
            }
        }
    }
    x
}

/// Knowns of every iteration computed from ground truth, with `ξ̄ = W^{-T} ξ`.
pub fn build_mqs(known: &SyntheticKnowns) -> Result<MqsInstance, AdversaryError> {
    let (rows, k) = known.tau.shape();
    let l = known.w.len();
    if l == 0 || known.xi.len() != l || known.alpha.len() != l {
        return Err(AdversaryError::Precondition {
            needed: "matching, non-empty per-iteration W, ξ and α",
            got: format!("{l} W, {} ξ, {} α", known.xi.len(), known.alpha.len()),
        });
    }
    let m = known.alpha[0].len();
    if rows <= m {
        return Err(AdversaryError::Shape { what: "temperatures", expected: (m + 1, k), found: (rows, k) });
    }
    let mut iterations = Vec::with_capacity(l);
    for ((w, xi), alpha) in known.w.iter().zip(&known.xi).zip(&known.alpha) {
        if w.shape() != (k, k) || xi.len() != k || alpha.len() != m {
            return Err(AdversaryError::Shape { what: "encryption matrix", expected: (k, k), found: w.shape() });
        }
        let xi_bar = w.transpose().lu().solve(xi).ok_or(AdversaryError::Precondition {
            needed: "invertible encryption matrix",
            got: "singular W".into(),
        })?;
        iterations.push(iteration_from_truth(&known.tau, w, xi, xi_bar, alpha));
    }
    Ok(MqsInstance { k, t: rows - m, m, iterations, truth: Some(pack(&known.tau, &known.w)) })
}

/// The system an aggregator assembles from a protocol transcript, using the
/// first `l` iterations (all of them when `None`). Ground truth comes from
/// the dataset and the simulation oracle.
pub fn mqs_from_protocol(run: &ProtocolRun, dataset: &ClusterDataset, l: Option<usize>) -> Result<MqsInstance, AdversaryError> {
    let views = &run.transcript.iterations;
    let l = l.unwrap_or(views.len()).min(views.len());
    if l == 0 {
        return Err(AdversaryError::Precondition { needed: "at least one iteration", got: "empty transcript".into() });
    }
    let (k, t, m) = (dataset.zones(), dataset.horizon(), dataset.order());
    let mut iterations = Vec::with_capacity(l);
    for v in &views[..l] {
        let mut d1 = DMatrix::zeros(t, m + 1);
        d1.set_column(0, &v.c0_xi);
        for lag in 1..=m {
            d1.set_column(lag, &v.c1_xi.column(lag - 1));
        }
        iterations.push(MqsIteration {
            xi: DVector::from_vec(v.xi.clone()),
            xi_bar: v.xi_bar.clone(),
            xi_recovered: DVector::from_vec(v.xi_recovered.clone()),
            alpha: v.alpha.clone(),
            d1,
            gram: v.a2_sum.clone(),
            w_sum: v.w_sum.clone(),
            hat_w: v.a1_sum.clone(),
        });
    }
    let truth = (run.oracle.w.len() >= l).then(|| pack(dataset.tau_in(), &run.oracle.w[..l]));
    Ok(MqsInstance { k, t, m, iterations, truth })
}

impl MqsInstance {
    pub fn periods(&self) -> usize {
        self.t + self.m
    }

    pub fn unknowns(&self) -> usize {
        self.periods() * self.k + self.k * self.k * self.iterations.len()
    }

    /// Scalar equations: one per period for the weighted-temperature sums,
    /// the upper triangle of each Gram matrix, `W1`, `Wᵀξ̄ = ξ` and `τ̂Wᵀ`.
    pub fn equations(&self) -> usize {
        let k = self.k;
        self.iterations.len() * (self.periods() + k * (k + 1) / 2 + 2 * k + self.t * k)
    }

    pub fn tau_index(&self, period_row: usize, zone: usize) -> usize {
        period_row * self.k + zone
    }

    pub fn w_index(&self, l: usize, a: usize, b: usize) -> usize {
        self.periods() * self.k + l * self.k * self.k + a * self.k + b
    }

    /// Temperature block of `x` as a `(T+M) × K` matrix.
    pub fn tau_of(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.periods(), self.k, |p, i| x[self.tau_index(p, i)])
    }

    /// Residual vector, and the sparse Jacobian rows when `jac` is given.
    pub fn evaluate(&self, x: &DVector<f64>, mut jac: Option<&mut Vec<Vec<(usize, f64)>>>) -> DVector<f64> {
        let (k, t, m) = (self.k, self.t, self.m);
        let mut r = Vec::with_capacity(self.equations());
        if let Some(j) = jac.as_deref_mut() {
            j.clear();
        }
        let mut push = |value: f64, row: Vec<(usize, f64)>, jac: &mut Option<&mut Vec<Vec<(usize, f64)>>>| {
            r.push(value);
            if let Some(j) = jac.as_deref_mut() {
                j.push(row);
            }
        };
        let want = jac.is_some();
        let tau = |p: usize, i: usize| x[p * k + i];
        for (l, it) in self.iterations.iter().enumerate() {
            let w = |a: usize, b: usize| x[self.w_index(l, a, b)];
            // weighted temperature per period, read at the smallest lag that covers it
            for p in 0..self.periods() {
                let lag = m.saturating_sub(p);
                let row = p + lag - m;
                let v: f64 = (0..k).map(|i| it.xi[i] * tau(p, i)).sum::<f64>() - it.d1[(row, lag)];
                let g = if want { (0..k).map(|i| (self.tau_index(p, i), it.xi[i])).collect() } else { Vec::new() };
                push(v, g, &mut jac);
            }
            for a in 0..k {
                for b in a..k {
                    let v: f64 = (0..k).map(|c| w(a, c) * w(b, c)).sum::<f64>() - it.gram[(a, b)];
                    let mut g = Vec::new();
                    if want {
                        for c in 0..k {
                            if a == b {
                                g.push((self.w_index(l, a, c), 2.0 * w(a, c)));
                            } else {
                                g.push((self.w_index(l, a, c), w(b, c)));
                                g.push((self.w_index(l, b, c), w(a, c)));
                            }
                        }
                    }
                    push(v, g, &mut jac);
                }
            }
            for a in 0..k {
                let v: f64 = (0..k).map(|c| w(a, c)).sum::<f64>() - it.w_sum[a];
                let g = if want { (0..k).map(|c| (self.w_index(l, a, c), 1.0)).collect() } else { Vec::new() };
                push(v, g, &mut jac);
            }
            for i in 0..k {
                let v: f64 = (0..k).map(|a| w(a, i) * it.xi_bar[a]).sum::<f64>() - it.xi_recovered[i];
                let g = if want { (0..k).map(|a| (self.w_index(l, a, i), it.xi_bar[a])).collect() } else { Vec::new() };
                push(v, g, &mut jac);
            }
            // filtered temperatures of this iteration's α
            let hat = DMatrix::from_fn(t, k, |row, i| {
                let now = row + m;
                tau(now, i) - (1..=m).map(|j| it.alpha[j - 1] * tau(now - j, i)).sum::<f64>()
            });
            for row in 0..t {
                for j in 0..k {
                    let v: f64 = (0..k).map(|i| hat[(row, i)] * w(j, i)).sum::<f64>() - it.hat_w[(row, j)];
                    let mut g = Vec::new();
                    if want {
                        for i in 0..k {
                            g.push((self.w_index(l, j, i), hat[(row, i)]));
                            let wji = w(j, i);
                            g.push((self.tau_index(row + m, i), wji));
                            for lag in 1..=m {
                                g.push((self.tau_index(row + m - lag, i), -it.alpha[lag - 1] * wji));
                            }
                        }
                    }
                    push(v, g, &mut jac);
                }
            }
        }
        DVector::from_vec(r)
    }

    pub fn residual(&self, x: &DVector<f64>) -> DVector<f64> {
        self.evaluate(x, None)
    }

    /// `‖τ_est − τ_true‖ / ‖τ_true‖` over the temperature block.
    pub fn relative_error(&self, x: &DVector<f64>) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        let n = self.periods() * self.k;
        let diff = (x.rows(0, n) - truth.rows(0, n)).norm();
        Some(diff / truth.rows(0, n).norm())
    }

    /// Truth plus i.i.d. `Uniform(−s, s)` noise on every unknown.
    pub fn perturbed_truth(&self, scale: f64, seed: [u8; 32]) -> Option<DVector<f64>> {
        let truth = self.truth.as_ref()?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        Some(truth.map(|v| if scale > 0.0 { v + rng.random_range(-scale..scale) } else { v }))
    }
}

/// Where the temperature block of an attack starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TauStart {
    /// Every zone starts at the aggregate temperature the aggregator already
    /// holds (`τξ` of the first iteration).
    #[default]
    Aggregate,
    /// True temperatures plus the same perturbation as `W`.
    PerturbedTruth,
}

impl MqsInstance {
    /// Aggregate temperature per period row, read from the first iteration.
    pub fn aggregate_tau(&self) -> DVector<f64> {
        let it = &self.iterations[0];
        DVector::from_fn(self.periods(), |p, _| {
            let lag = self.m.saturating_sub(p);
            it.d1[(p + lag - self.m, lag)]
        })
    }

    /// Initial point of an attack: true `W` plus `Uniform(−s, s)` noise, and
    /// temperatures chosen by `tau`.
    pub fn attack_start(&self, tau: TauStart, scale: f64, seed: [u8; 32]) -> Option<DVector<f64>> {
        let mut x = self.perturbed_truth(scale, seed)?;
        if tau == TauStart::Aggregate {
            let agg = self.aggregate_tau();
            for p in 0..self.periods() {
                for i in 0..self.k {
                    x[self.tau_index(p, i)] = agg[p];
                }
            }
        }
        Some(x)
    }
}

/// Seed for scenario `scenario` of case `t`.
pub(crate) fn scenario_seed(seed: u64, t: usize, scenario: usize, purpose: &str) -> [u8; 32] {
    derive_seed(purpose, &[seed, t as u64, scenario as u64])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(k: usize, l: usize, t: usize, m: usize) -> MqsInstance {
        build_mqs(&synthetic_knowns(k, l, t, m, WReading::PerQuantity, [3; 32])).unwrap()
    }

    #[test]
    fn sizes_match_counts() {
        let inst = instance(6, 3, 48, 2);
        assert_eq!(inst.unknowns(), 408);
        assert_eq!(inst.residual(inst.truth.as_ref().unwrap()).len(), inst.equations());
        let r = super::super::counting_report(6, 3, 48, 2);
        assert_eq!((inst.equations(), inst.unknowns()), (r.type3_equations, r.type3_unknowns));
    }

    #[test]
    fn protocol_replay_has_truth_as_root() {
        use crate::model::{generate_synthetic, SyntheticConfig};
        use crate::protocol::{run_protocol, ProtocolConfig};
        let mut cfg = SyntheticConfig::new(3, 60, 2, 4);
        cfg.t_occ = 12;
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        let run = run_protocol(&ds, &ProtocolConfig { t_occ: 12, ..ProtocolConfig::default() }).unwrap();
        let inst = mqs_from_protocol(&run, &ds, Some(2)).unwrap();
        assert_eq!(inst.iterations.len(), 2);
        let truth = inst.truth.clone().unwrap();
        let r = inst.residual(&truth);
        assert!(r.amax() < 1e-8 * truth.amax(), "residual {:e}", r.amax());
        assert!(mqs_from_protocol(&run, &ds, Some(0)).is_err());
    }

    #[test]
    fn truth_is_a_root() {
        for reading in [WReading::PerQuantity, WReading::Literal] {
            let inst = build_mqs(&synthetic_knowns(4, 2, 5, 2, reading, [8; 32])).unwrap();
            assert!(inst.residual(inst.truth.as_ref().unwrap()).amax() < 1e-9);
        }
    }

    #[test]
    fn perturbation_leaves_residual() {
        let inst = instance(3, 2, 4, 1);
        for s in 0..20u8 {
            let x = inst.perturbed_truth(1e-3, [s; 32]).unwrap();
            assert!(inst.residual(&x).norm() > 0.0);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let inst = instance(3, 2, 4, 2);
        let x = inst.perturbed_truth(0.3, [5; 32]).unwrap();
        let mut rows = Vec::new();
        let r0 = inst.evaluate(&x, Some(&mut rows));
        let mut dense = DMatrix::zeros(r0.len(), x.len());
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                dense[(i, j)] += v;
            }
        }
        let h = 1e-6;
        for j in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (inst.residual(&xp) - inst.residual(&xm)) / (2.0 * h);
            assert!((fd - dense.column(j)).amax() < 1e-6, "column {j}");
        }
    }

    #[test]
    fn weighted_sum_rows_use_smallest_lag() {
        let inst = instance(2, 1, 3, 2);
        let it = &inst.iterations[0];
        let tau = inst.tau_of(inst.truth.as_ref().unwrap());
        // oldest period only appears at lag 2, newest only at lag 0
        assert!((it.d1[(0, 2)] - tau.row(0).dot(&it.xi.transpose())).abs() < 1e-12);
        assert!((it.d1[(2, 0)] - tau.row(4).dot(&it.xi.transpose())).abs() < 1e-12);
        let agg = inst.aggregate_tau();
        for p in 0..inst.periods() {
            assert!((agg[p] - tau.row(p).dot(&it.xi.transpose())).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_start_hides_zone_detail() {
        let inst = instance(3, 2, 4, 2);
        let x = inst.attack_start(TauStart::Aggregate, 1.0, [1; 32]).unwrap();
        let tau = inst.tau_of(&x);
        for p in 0..inst.periods() {
            assert!(tau.row(p).iter().all(|v| *v == tau[(p, 0)]));
        }
        let y = inst.attack_start(TauStart::PerturbedTruth, 1.0, [1; 32]).unwrap();
        assert_eq!(y, inst.perturbed_truth(1.0, [1; 32]).unwrap());
    }
}
