//! End-to-end acceptance checks. Prints one PASS/FAIL/SKIPPED line per
//! criterion and exits nonzero if any criterion fails.

use std::collections::HashSet;
use std::time::Instant;

use atdm_core::adversary::{
    attack_sweep, build_mqs, counting_report, recover_tau_from_hat, recover_w_from_gram, synthetic_knowns,
    AdversaryError, SweepConfig, WReading,
};
use atdm_core::estimator::{bcd_fit, solve_sp2_plain, FitOptions, RegressorSpace};
use atdm_core::model::{build_design, evaluate_on, generate_synthetic, read_dataset_csv, split_dataset, SyntheticConfig};
use atdm_core::protocol::{
    compute_hat_tau_col, gen_encryption_col, run_protocol, sap_aggregate, solve_sp2_masked, te_recover,
    EncryptionDistribution, MaskField, PairwiseMaskSet, ProtocolConfig, ProtocolError,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `|a − b| / |b|`, with the denominator floored at 1e-12.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (ds, _) = generate_synthetic(&SyntheticConfig::new(7, 1440, 2, 2024)).map_err(|e| e.to_string())?;
    let run = run_protocol(&ds, &ProtocolConfig::default()).map_err(|e| e.to_string())?;
    let design = build_design(&ds, 48).map_err(|e| e.to_string())?;
    let plain = bcd_fit(&design, &FitOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut worst: (f64, &str) = (0.0, "");
    let (a, b) = (run.fit.params.groups(), plain.params.groups());
    for ((name, x), (_, y)) in a.iter().zip(b.iter()).take(5) {
        for (u, v) in x.iter().zip(y.iter()) {
            let r = rel(*u, *v);
            if r > worst.0 {
                worst = (r, name);
            }
        }
    }
    check(worst.0 < 1e-3, || format!("max relative difference {:.3e} in {}", worst.0, worst.1))?;
    check(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("max relative difference {:.3e} ({}), {secs:.1} s", worst.0, worst.1))
}

fn criterion_2() -> Outcome {
    let zones = [10, 16, 22, 28, 34, 40, 46, 52, 58, 64];
    let mut max_iter = 0;
    for (i, &k) in zones.iter().enumerate() {
        let (ds, _) = generate_synthetic(&SyntheticConfig::new(k, 1440, 2, 100 + i as u64)).map_err(|e| e.to_string())?;
        let design = build_design(&ds, 48).map_err(|e| e.to_string())?;
        let fit = bcd_fit(&design, &FitOptions::default()).map_err(|e| e.to_string())?;
        let last = fit.gap_trace.last().ok_or("empty GAP trace")?;
        check(fit.converged && last.gap < 1e-6 && fit.iterations <= 5, || {
            format!("K={k}: converged={} after {} iterations, final GAP {:.3e}", fit.converged, fit.iterations, last.gap)
        })?;
        for w in fit.gap_trace.windows(2) {
            check(w[1].f2 <= w[0].f2 + 1e-9, || format!("K={k}: f2 rose from {} to {}", w[0].f2, w[1].f2))?;
        }
        max_iter = max_iter.max(fit.iterations);
    }
    Ok(format!("10 instances, K=10..64, at most {max_iter} iterations"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut worst: f64 = 0.0;
    for n in 0..100u32 {
        let k = rng.random_range(2..=8usize);
        let t = rng.random_range(1..=50usize);
        let (field, rows, cols) = match n % 5 {
            0 => (MaskField::S(rng.random_range(0..3)), t, 1),
            1 => (MaskField::Load(rng.random_range(0..3)), t, 1),
            2 => (MaskField::U, t, k),
            3 => (MaskField::P, k, k),
            _ => (MaskField::Q, 1, k),
        };
        let xs: Vec<DMatrix<f64>> = (0..k).map(|_| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-100.0..100.0))).collect();
        let set = PairwiseMaskSet::new(rng.random(), n, k);
        let masked: Vec<_> = xs.iter().enumerate().map(|(i, x)| set.mask(x, i, field)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let got = sap_aggregate(&masked).map_err(|e| e.to_string())?;
        let want: DMatrix<f64> = xs.iter().sum();
        let r = (got - &want).amax() / want.amax();
        worst = worst.max(r);
    }
    check(worst <= 1e-9, || format!("masked sum off by {worst:.3e} relative"))?;

    let mut cfg = SyntheticConfig::new(4, 300, 2, 5);
    cfg.t_occ = 24;
    let (ds, _) = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let pc = ProtocolConfig { t_occ: 24, ..ProtocolConfig::default() };
    let run = run_protocol(&ds, &pc).map_err(|e| format!("scanner flagged masked run: {e}"))?;
    let scanned = run.transcript.messages.len();
    // control: the same run without masks must be caught
    let leak = run_protocol(&ds, &ProtocolConfig { mask: false, ..pc });
    check(matches!(leak, Err(ProtocolError::PrivacyViolation { .. })), || "unmasked run was not flagged".into())?;
    Ok(format!("100 tensors, worst relative error {worst:.2e}; {scanned} messages scanned, 0 violations"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut done = 0;
    let mut attempts = 0;
    let (mut worst_obj, mut worst_sum, mut min_xi): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
    while done < 50 {
        attempts += 1;
        check(attempts < 500, || format!("only {done} instances with inactive ξ ≥ 0 in 500 draws"))?;
        let k = rng.random_range(2..=8usize);
        let mut cfg = SyntheticConfig::new(k, rng.random_range(150..=400), 2, rng.random());
        cfg.t_occ = 24;
        let (ds, truth) = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
        let design = build_design(&ds, 24).map_err(|e| e.to_string())?;
        let plain = solve_sp2_plain(&truth.alpha, &design, 100.0).map_err(|e| e.to_string())?;
        if !plain.active.is_empty() {
            continue;
        }
        let cols: Vec<DVector<f64>> = (0..k).map(|_| gen_encryption_col(k, &mut rng, EncryptionDistribution::default())).collect();
        let w = DMatrix::from_columns(&cols);
        let sv = w.clone().svd(false, false).singular_values;
        if sv.min() < 1e-6 * sv.max() {
            continue;
        }
        let hat = design.hat_tau(&truth.alpha);
        let space = RegressorSpace::new(design.regressors());
        let masked = solve_sp2_masked(&(&hat * w.transpose()), &(&w * w.transpose()), &w.column_sum(), &space, 100.0)
            .map_err(|e| e.to_string())?;
        let xi_bar = DVector::from_column_slice(&masked.z);
        let xi: Vec<f64> = cols.iter().map(|c| te_recover(c, &xi_bar)).collect();
        worst_obj = worst_obj.max(rel(masked.f2, plain.f2));
        worst_sum = worst_sum.max((xi.iter().sum::<f64>() - 1.0).abs());
        min_xi = xi.iter().copied().fold(min_xi, f64::min);
        done += 1;
    }
    check(worst_obj <= 1e-6, || format!("objective differs by {worst_obj:.3e} relative"))?;
    check(worst_sum <= 1e-8, || format!("recovered weights sum off by {worst_sum:.3e}"))?;
    check(min_xi >= -1e-6, || format!("recovered weight {min_xi:.3e} below zero"))?;
    Ok(format!("50 instances: objective {worst_obj:.2e}, sum {worst_sum:.2e}, min weight {min_xi:.3e}"))
}

/// Counts distinct scalar equations and unknowns by walking every index of
/// the aggregator's system.
struct Enumerated {
    t1_eq: usize,
    t1_unk: usize,
    t2_eq: usize,
    t2_unk: usize,
    t3_eq: usize,
    t3_unk: usize,
}

fn enumerate(k: usize, l: usize, t: usize, m: usize) -> Enumerated {
    let mut t1 = HashSet::new();
    let mut tau = HashSet::new();
    // τ^{-m}ξ at estimation period t refers to absolute period t − m
    for it in 0..l {
        for lag in 0..=m {
            for p in 1..=t as i64 {
                t1.insert((it, p - lag as i64));
                for z in 0..k {
                    tau.insert((z, p - lag as i64));
                }
            }
        }
    }
    let mut t2 = HashSet::new();
    let mut t3 = HashSet::new();
    for it in 0..l {
        for a in 0..k {
            for b in 0..k {
                t2.insert(("gram", it, a.min(b), a.max(b)));
            }
            t2.insert(("sum", it, a, 0));
            t2.insert(("weight", it, a, 0));
            for p in 0..t {
                t3.insert(("filtered", it, p, a));
            }
        }
    }
    let w: HashSet<_> = (0..l).flat_map(|it| (0..k * k).map(move |e| (it, e))).collect();
    let per_iter = t2.len() / l;
    Enumerated {
        t1_eq: t1.len(),
        t1_unk: tau.len(),
        t2_eq: per_iter,
        t2_unk: k * k,
        t3_eq: t1.len() + t2.len() + t3.len(),
        t3_unk: tau.len() + w.len(),
    }
}

fn criterion_5() -> Outcome {
    let mut cases = 0;
    for k in 1..=3 {
        for l in 1..=2 {
            for t in 1..=3 {
                for m in 1..=2 {
                    let r = counting_report(k, l, t, m);
                    let e = enumerate(k, l, t, m);
                    let got = (r.type1_equations, r.type1_unknowns, r.type2_equations, r.type2_unknowns, r.type3_equations, r.type3_unknowns);
                    let want = (e.t1_eq, e.t1_unk, e.t2_eq, e.t2_unk, e.t3_eq, e.t3_unk);
                    check(got == want, || format!("K={k} L={l} T={t} M={m}: report {got:?}, enumeration {want:?}"))?;
                    check(
                        r.type1_underdetermined == (e.t1_unk > e.t1_eq)
                            && r.type2_underdetermined == (e.t2_unk > e.t2_eq)
                            && r.type3_overdetermined == (e.t3_eq > e.t3_unk),
                        || format!("K={k} L={l} T={t} M={m}: verdict mismatch"),
                    )?;
                    // the assembled system has exactly one residual per counted equation
                    let inst = build_mqs(&synthetic_knowns(k, l, t, m, WReading::PerQuantity, [k as u8 + 7; 32])).map_err(|e| e.to_string())?;
                    let res = inst.residual(inst.truth.as_ref().unwrap());
                    check(res.len() == e.t3_eq && inst.unknowns() == e.t3_unk, || format!("K={k} L={l} T={t} M={m}: residual length {}", res.len()))?;
                    cases += 1;
                }
            }
        }
    }
    let (five, six) = (counting_report(5, 3, 48, 2), counting_report(6, 3, 48, 2));
    check(!five.type2_underdetermined && six.type2_underdetermined, || "K=5/K=6 boundary does not flip".into())?;
    check(five.type2_unknowns == five.type2_equations && six.type2_unknowns == six.type2_equations + 3, || {
        "boundary counts wrong".into()
    })?;
    Ok(format!("{cases} tiny configurations agree; K=5 determined (25 = 25), K=6 under-determined (36 > 33)"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst_tau: f64 = 0.0;
    for _ in 0..30 {
        let (k, t, m, l) = (rng.random_range(1..=5usize), rng.random_range(3..=40usize), rng.random_range(1..=3usize), rng.random_range(2..=4usize));
        let tau = DMatrix::from_fn(t + m, k, |_, _| 20.0 + rng.random_range(-2.0..2.0));
        let alphas: Vec<Vec<f64>> = (0..l).map(|_| (0..m).map(|_| rng.random_range(-0.5..0.9)).collect()).collect();
        let hats: Vec<DMatrix<f64>> = alphas
            .iter()
            .map(|a| DMatrix::from_columns(&(0..k).map(|z| compute_hat_tau_col(a, &tau.column(z).into_owned())).collect::<Vec<_>>()))
            .collect();
        let got = recover_tau_from_hat(&hats, &alphas).map_err(|e| e.to_string())?;
        worst_tau = worst_tau.max((got - &tau).amax());
    }
    check(worst_tau < 1e-8, || format!("temperature recovery error {worst_tau:.3e}"))?;

    let mut worst_w: f64 = 0.0;
    for n in 0..30u32 {
        let k = rng.random_range(2..=7usize);
        let w = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.05..1.0));
        let xi = DVector::from_fn(k, |_, _| rng.random_range(0.5..1.5));
        let xi = &xi / xi.sum();
        let xi_bar = w.transpose().lu().solve(&xi).ok_or("singular draw")?;
        let grams: Vec<DMatrix<f64>> = (0..k).map(|i| w.column(i) * w.column(i).transpose()).collect();
        let got = recover_w_from_gram(&grams, &xi, &xi_bar).map_err(|e| e.to_string())?;
        worst_w = worst_w.max((got - &w).amax());
        let set = PairwiseMaskSet::new(n as u64, n, k);
        let masked: Vec<_> = grams.iter().enumerate().map(|(i, g)| set.mask(g, i, MaskField::P)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        check(matches!(recover_w_from_gram(&masked, &xi, &xi_bar), Err(AdversaryError::NotRankOne { .. })), || {
            format!("masked uploads of draw {n} were not rejected")
        })?;
    }
    check(worst_w < 1e-8, || format!("W recovery error {worst_w:.3e}"))?;
    Ok(format!("temperatures to {worst_tau:.2e}, W to {worst_w:.2e}; all 30 masked sets rejected"))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let report = attack_sweep(&SweepConfig::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    for c in &report.cases {
        println!(
            "    T={:>2}: median error {:.4}, min {:.2e}, max {:.3e}, median time {:.4} s, converged {}/20, control {:.1e}",
            c.t, c.median_error, c.min_error, c.max_error, c.median_time, c.converged, c.control_error
        );
    }
    let mut failures = Vec::new();
    if let Some(c) = report.cases.iter().find(|c| !(c.median_error > 0.01)) {
        failures.push(format!("median error {:.4} at T={} not above 1%", c.median_error, c.t));
    }
    if let Some(c) = report.cases.iter().find(|c| !(c.control_error < 1e-8)) {
        failures.push(format!("control error {:.2e} at T={}", c.control_error, c.t));
    }
    if !(report.time_trend > 0.9) {
        failures.push(format!("time trend Spearman {:.3} not above 0.9", report.time_trend));
    }
    if !(secs < 600.0) {
        failures.push(format!("sweep took {secs:.0} s"));
    }
    if failures.is_empty() {
        Ok(format!("Spearman {:.3}, {secs:.1} s", report.time_trend))
    } else {
        Err(failures.join("; "))
    }
}

/// `None` when the dataset is not supplied.
fn criterion_8() -> Option<Outcome> {
    let path = std::env::var_os("ATDM_REFIT_CSV")?;
    Some((|| {
        let file = std::fs::File::open(&path).map_err(|e| e.to_string())?;
        let ds = read_dataset_csv(file, 2).map_err(|e| e.to_string())?;
        let (train, test) = split_dataset(&ds, 0.75).map_err(|e| e.to_string())?;
        let run = run_protocol(&train, &ProtocolConfig::default()).map_err(|e| e.to_string())?;
        let (_, _, m) = evaluate_on(&test, &run.fit.params).map_err(|e| e.to_string())?;
        let within = |got: f64, want: f64| (got - want).abs() <= 0.15 * want;
        let detail = format!("RMSE {:.4} °C, MAPE {:.4} %, R² {:.4}", m.rmse, m.mape, m.r2);
        check(within(m.rmse, 0.2944) && within(m.mape, 1.3103) && within(m.r2, 0.8613), || detail.clone())?;
        Ok(detail)
    })())
}

fn main() {
    let mut failed = 0;
    let criteria: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "masked vs plain parameters", criterion_1),
        (2, "BCD convergence", criterion_2),
        (3, "secure aggregation", criterion_3),
        (4, "transformation encryption", criterion_4),
        (5, "counting", criterion_5),
        (6, "leakage demos", criterion_6),
        (7, "attack sweep", criterion_7),
    ];
    for (n, name, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("criterion {n} ({name}): PASS: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: panicked");
            }
        }
    }
    match criterion_8() {
        None => println!("criterion 8 (REFIT metrics): SKIPPED: set ATDM_REFIT_CSV to a 7-house 30-minute CSV to run it"),
        Some(Ok(detail)) => println!("criterion 8 (REFIT metrics): PASS: {detail}"),
        Some(Err(detail)) => {
            failed += 1;
            println!("criterion 8 (REFIT metrics): FAIL: {detail}");
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
