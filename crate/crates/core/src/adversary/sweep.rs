use std::io::Write;

use serde::{Deserialize, Serialize};

use super::mqs::scenario_seed;
use super::{build_mqs, solve_mqs, synthetic_knowns, AdversaryError, LmOptions, TauStart, WReading};
use crate::fmt17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub t_list: Vec<usize>,
    pub scenarios: usize,
    pub seed: u64,
    pub reading: WReading,
    /// Half-width of the uniform perturbation added to the true `W`.
    pub perturbation: f64,
    pub tau_start: TauStart,
    pub lm: LmOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k: 6,
            l: 3,
            m: 2,
            t_list: vec![1, 2, 3, 4, 6, 12, 24, 48],
            scenarios: 20,
            seed: 0,
            reading: WReading::PerQuantity,
            perturbation: 1.0,
            tau_start: TauStart::Aggregate,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub case_t: usize,
    pub scenario: usize,
    pub relative_error: f64,
    pub residual: f64,
    pub time_seconds: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub t: usize,
    pub median_error: f64,
    pub min_error: f64,
    pub max_error: f64,
    pub median_time: f64,
    pub converged: usize,
    /// Error when started exactly at the truth.
    pub control_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<AttackRow>,
    pub cases: Vec<CaseSummary>,
    /// Rank correlation between `T` and median solve time.
    pub time_trend: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            out[p] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation, ties given their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Perturbed-start attacks over every `T` in the configuration, one scenario
/// at a time so that timings are not skewed by contention.
pub fn attack_sweep(cfg: &SweepConfig) -> Result<SweepReport, AdversaryError> {
    let mut rows = Vec::new();
    let mut cases = Vec::new();
    for &t in &cfg.t_list {
        let mut errors = Vec::with_capacity(cfg.scenarios);
        let mut times = Vec::with_capacity(cfg.scenarios);
        let mut converged = 0;
        let mut control_error = f64::NAN;
        for s in 0..cfg.scenarios {
            let known = synthetic_knowns(cfg.k, cfg.l, t, cfg.m, cfg.reading, scenario_seed(cfg.seed, t, s, "attack-knowns"));
            let inst = build_mqs(&known)?;
            if s == 0 {
                let truth = inst.truth.clone().expect("synthetic instances carry truth");
                control_error = solve_mqs(&inst, &truth, &cfg.lm)?.relative_error.unwrap_or(f64::NAN);
            }
            let x0 = inst
                .attack_start(cfg.tau_start, cfg.perturbation, scenario_seed(cfg.seed, t, s, "attack-start"))
                .expect("synthetic instances carry truth");
            let res = solve_mqs(&inst, &x0, &cfg.lm)?;
            let err = res.relative_error.unwrap_or(f64::NAN);
            errors.push(err);
            times.push(res.seconds);
            converged += res.converged as usize;
            rows.push(AttackRow {
                case_t: t,
                scenario: s,
                relative_error: err,
                residual: res.residual,
                time_seconds: res.seconds,
                converged: res.converged,
            });
        }
        let min_error = errors.iter().copied().fold(f64::INFINITY, f64::min);
        let max_error = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        cases.push(CaseSummary {
            t,
            median_error: median(&mut errors),
            min_error,
            max_error,
            median_time: median(&mut times),
            converged,
            control_error,
        });
    }
    let ts: Vec<f64> = cases.iter().map(|c| c.t as f64).collect();
    let tm: Vec<f64> = cases.iter().map(|c| c.median_time).collect();
    let time_trend = spearman(&ts, &tm);
    Ok(SweepReport { rows, cases, time_trend })
}

pub fn write_sweep_csv<W: Write>(rows: &[AttackRow], out: W) -> Result<(), AdversaryError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| AdversaryError::Io(e.into());
    w.write_record(["case_T", "scenario", "relative_error", "residual", "time_seconds", "converged"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.case_t.to_string(),
            r.scenario.to_string(),
            fmt17(r.relative_error),
            fmt17(r.residual),
            fmt17(r.time_seconds),
            r.converged.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // one adjacent swap among five: 1 − 6·2/(5·24) = 0.9
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 4.0, 3.0, 5.0]) - 0.9).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn small_sweep_and_csv() {
        let cfg = SweepConfig { t_list: vec![1, 2], scenarios: 2, k: 3, l: 2, ..Default::default() };
        let rep = attack_sweep(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.cases.iter().all(|c| c.control_error < 1e-10));
        let mut buf = Vec::new();
        write_sweep_csv(&rep.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case_T,scenario,relative_error,residual,time_seconds,converged\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
