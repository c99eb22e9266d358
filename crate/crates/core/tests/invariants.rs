use atdm_core::adversary::{build_mqs, counting_report, spearman, synthetic_knowns, WReading};
use atdm_core::estimator::{bcd_fit, FitOptions};
use atdm_core::model::{build_design, generate_synthetic, SyntheticConfig};
use atdm_core::protocol::{compute_hat_tau_col, te_recover};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn counts_match_the_assembled_system(k in 1usize..5, l in 1usize..4, t in 1usize..8, m in 1usize..3, seed in any::<u8>()) {
        let inst = build_mqs(&synthetic_knowns(k, l, t, m, WReading::PerQuantity, [seed; 32])).unwrap();
        let r = counting_report(k, l, t, m);
        prop_assert_eq!(inst.unknowns(), r.type3_unknowns);
        prop_assert_eq!(inst.equations(), r.type3_equations);
        prop_assert_eq!(r.type1_unknowns, (t + m) * k);
        prop_assert_eq!(r.type1_equations, (t + m) * l);
    }

    #[test]
    fn truth_solves_the_system_and_noise_does_not(k in 2usize..5, l in 1usize..3, t in 1usize..6, seed in any::<u8>()) {
        let inst = build_mqs(&synthetic_knowns(k, l, t, 2, WReading::PerQuantity, [seed; 32])).unwrap();
        let truth = inst.truth.clone().unwrap();
        prop_assert!(inst.residual(&truth).amax() < 1e-9);
        let noisy = inst.perturbed_truth(0.5, [seed.wrapping_add(1); 32]).unwrap();
        prop_assert!(inst.residual(&noisy).norm() > 1e-6);
    }

    #[test]
    fn encryption_round_trip(k in 2usize..8, entries in prop::collection::vec(-1.0f64..1.0, 64), raw in prop::collection::vec(0.05f64..1.0, 8)) {
        let w = DMatrix::from_fn(k, k, |a, b| entries[a * k + b] + if a == b { 3.0 } else { 0.0 });
        let total: f64 = raw[..k].iter().sum();
        let xi = DVector::from_iterator(k, raw[..k].iter().map(|v| v / total));
        let xi_bar = w.transpose().lu().solve(&xi).unwrap();
        for i in 0..k {
            let got = te_recover(&w.column(i).into_owned(), &xi_bar);
            prop_assert!((got - xi[i]).abs() < 1e-12, "agent {}: {} vs {}", i, got, xi[i]);
        }
    }

    #[test]
    fn filtered_temperature_is_linear(alpha in prop::collection::vec(-0.5f64..1.0, 1..4), a in prop::collection::vec(10.0f64..30.0, 12), b in prop::collection::vec(10.0f64..30.0, 12), s in -3.0f64..3.0) {
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let lhs = compute_hat_tau_col(&alpha, &(&a * s + &b));
        let rhs = compute_hat_tau_col(&alpha, &a) * s + compute_hat_tau_col(&alpha, &b);
        prop_assert_eq!(lhs.len(), 12 - alpha.len());
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn spearman_is_bounded_and_rank_invariant(x in prop::collection::vec(-100.0f64..100.0, 3..20), shift in -5.0f64..5.0) {
        let y: Vec<f64> = x.iter().map(|v| v.powi(3) + shift).collect();
        let rho = spearman(&x, &y);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        let distinct = x.iter().enumerate().all(|(i, a)| x[..i].iter().all(|b| b != a));
        if distinct {
            prop_assert!((rho - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn bcd_objective_descends_and_weights_stay_normalised(zones in 2usize..6, seed in 0u64..1000) {
        let mut cfg = SyntheticConfig::new(zones, 300, 2, seed);
        cfg.t_occ = 24;
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        let fit = bcd_fit(&build_design(&ds, 24).unwrap(), &FitOptions::default()).unwrap();
        for pair in fit.gap_trace.windows(2) {
            prop_assert!(pair[1].f2 <= pair[0].f2 + 1e-9 * pair[0].f2.abs().max(1.0));
        }
        for rec in &fit.gap_trace {
            prop_assert!(rec.f2 <= rec.f1 + 1e-9 * rec.f1.abs().max(1.0));
        }
        let sum: f64 = fit.params.xi.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-8);
    }
}
