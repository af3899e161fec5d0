//! Structural properties of the envelopes, the mapping and its fixed points.

use phi4_core::combinatorics::{for_each_triple, triple_coefficient_exact, factorial_exact};
use phi4_core::dynamics::{
    contraction_estimate, equation_residual, iterate_from, map_star, IterateSettings, Setup, StartLabel,
};
use phi4_core::experiment::perturbative_series;
use phi4_core::experiment::sweep::{run_sweep, SweepConfig};
use phi4_core::experiment::render_csv;
use phi4_core::logval::LogValue;
use phi4_core::membership::{check_phi, DEFAULT_K0};
use phi4_core::sequences::{
    build_h0, build_h_max, build_h_min, delta_max, delta_min, expected_sign, norm_weights,
    seq_distance, GreenSequence, ModelParams, DEFAULT_D0,
};
use proptest::prelude::*;

fn odd(max_k: usize) -> impl Strategy<Value = usize> {
    (1..=max_k).prop_map(|k| 2 * k + 1)
}

fn settings(nu_max: usize) -> IterateSettings {
    IterateSettings { nu_max, ..IterateSettings::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn envelope_band_is_strict(n in odd(100), e in -6.0f64..0.0) {
        let lambda = 10f64.powf(e);
        prop_assert!(delta_max(n, lambda, DEFAULT_D0).unwrap() > delta_min(n, lambda).unwrap());
    }

    #[test]
    fn h0_is_bracketed(lambda in 1e-4f64..0.05) {
        let params = ModelParams::default();
        let h0 = build_h0(lambda, 25, &params).unwrap();
        let hi = build_h_max(lambda, 25, DEFAULT_D0).unwrap();
        let lo = build_h_min(lambda, 25).unwrap();
        for ((n, v), ((_, a), (_, b))) in h0.iter().zip(hi.iter().zip(lo.iter())) {
            prop_assert!(v.ln_abs() <= a.ln_abs() + 1e-12, "n={}", n);
            prop_assert!(v.ln_abs() >= b.ln_abs() - 1e-12, "n={}", n);
            prop_assert_eq!(v.sign(), expected_sign(n));
        }
    }

    #[test]
    fn map_output_ignores_inputs_more_than_two_levels_up(lambda in 1e-3f64..0.05, m in 3usize..=10, bump in 0.5f64..1.5) {
        let m = 2 * m + 1;
        let h = build_h0(lambda, 21, &ModelParams::default()).unwrap();
        let pad = LogValue::ZERO;
        let (base, _) = map_star(&h, pad, &ModelParams::default()).unwrap();
        let bumped = h.map_values(|n, v| if n == m { v.scale(bump) } else { v });
        let (out, _) = map_star(&bumped, pad, &ModelParams::default()).unwrap();
        for n in (1..m.saturating_sub(2)).step_by(2) {
            prop_assert_eq!(out.get(n), base.get(n));
        }
    }

    #[test]
    fn distance_is_a_metric(lambda in 1e-3f64..0.1, s1 in 0.5f64..2.0, s2 in 0.5f64..2.0) {
        let h = build_h0(lambda, 15, &ModelParams::default()).unwrap();
        let w = norm_weights(lambda, 15, DEFAULT_D0).unwrap();
        let (a, b) = (h.scaled(s1), h.scaled(s2));
        prop_assert_eq!(seq_distance(&a, &a, &w).unwrap(), 0.0);
        let ab = seq_distance(&a, &b, &w).unwrap();
        prop_assert!((ab - seq_distance(&b, &a, &w).unwrap()).abs() <= 1e-15 * ab.max(1.0));
        prop_assert!(ab <= seq_distance(&a, &h, &w).unwrap() + seq_distance(&h, &b, &w).unwrap() + 1e-12);
    }

    #[test]
    fn contraction_estimate_is_reproducible(seed in any::<u64>()) {
        let setup = Setup::new(0.01, 13);
        let a = contraction_estimate(&setup, 1e-4, 3, seed).unwrap();
        let b = contraction_estimate(&setup, 1e-4, 3, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn orbit_identity_to_33(n in odd(16)) {
        let f = |k: usize| factorial_exact(k).unwrap();
        let mut ordered = 0u128;
        for i1 in (1..n).step_by(2) {
            for i2 in (1..n - i1).step_by(2) {
                if (n - i1 - i2) % 2 == 1 {
                    ordered += f(n) / (f(i1) * f(i2) * f(n - i1 - i2));
                }
            }
        }
        let mut canonical = 0u128;
        for_each_triple(n, |t| canonical += 6 * triple_coefficient_exact(n, &t).unwrap());
        prop_assert_eq!(ordered, canonical);
    }
}

#[test]
fn converged_runs_solve_the_equations() {
    for lambda in [0.001, 0.01] {
        for start in [StartLabel::Max, StartLabel::Min] {
            let setup = Setup::new(lambda, 25);
            let trace = iterate_from(&setup, start, &settings(60)).unwrap();
            assert!(trace.status.is_converged(), "{lambda} {start}: {}", trace.status);
            let pad = setup.pad(start).unwrap();
            for n in (1..=setup.n_max - 4).step_by(2) {
                let r = equation_residual(&trace.last().h, n, Some(pad), &setup.params).unwrap();
                assert!(r <= 10.0 * 1e-10, "{lambda} {start} n={n}: {r:e}");
            }
        }
    }
}

#[test]
fn convergent_runs_keep_signs_and_positive_deltas() {
    for lambda in [0.001, 0.01] {
        for start in [StartLabel::Max, StartLabel::Min] {
            let trace = iterate_from(&Setup::new(lambda, 25), start, &settings(60)).unwrap();
            for snap in &trace.snapshots {
                // entries above n_max only feed the top A-terms
                assert!(snap.h.truncated(25).is_sign_alternating());
                assert!(snap.delta.iter().filter(|(n, _)| (3..=25).contains(n)).all(|(_, d)| d > 0.0));
            }
        }
    }
}

#[test]
fn both_starts_share_the_fixed_point() {
    for lambda in [0.001, 0.01] {
        let setup = Setup::new(lambda, 25);
        let hi = iterate_from(&setup, StartLabel::Max, &settings(60)).unwrap();
        let lo = iterate_from(&setup, StartLabel::Min, &settings(60)).unwrap();
        for n in (1..=25).step_by(2) {
            let (a, b) = (hi.last().delta.get(n).unwrap(), lo.last().delta.get(n).unwrap());
            assert!((a - b).abs() <= 1e-8 * a.abs(), "{lambda} n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn starts_approach_monotonically_at_weak_coupling() {
    for lambda in [0.001, 0.01] {
        let setup = Setup::new(lambda, 25);
        let hi = iterate_from(&setup, StartLabel::Max, &settings(20)).unwrap();
        let lo = iterate_from(&setup, StartLabel::Min, &settings(20)).unwrap();
        for n in (7..=25).step_by(2) {
            for w in hi.snapshots.windows(2) {
                assert!(w[1].delta.get(n).unwrap() <= w[0].delta.get(n).unwrap() + 1e-9);
            }
            for w in lo.snapshots.windows(2) {
                assert!(w[1].delta.get(n).unwrap() >= w[0].delta.get(n).unwrap() - 1e-9);
            }
        }
    }
}

#[test]
fn fixed_point_matches_series_and_order_six_error_is_seventh_order() {
    let lambda = 1e-3;
    let trace = iterate_from(&Setup::new(lambda, 25), StartLabel::Max, &settings(60)).unwrap();
    let deep = perturbative_series(9, 20, false).unwrap();
    let short = perturbative_series(9, 6, false).unwrap();
    for n in (1..=9).step_by(2) {
        let h = trace.last().h.get(n).unwrap().to_f64();
        let exact = deep.eval(n, lambda).unwrap();
        assert!((h - exact).abs() <= 1e-12 * exact.abs(), "n={n}");
        // the first dropped term fixes the order-6 error
        let c7 = deep.coefficient(n, 7).unwrap().to_string().parse::<f64>().unwrap();
        let predicted = (c7 * lambda.powi(7)).abs();
        let err = (h - short.eval(n, lambda).unwrap()).abs();
        assert!(err <= 1.1 * predicted && err >= 0.9 * predicted, "n={n}: {err:e} vs {predicted:e}");
    }
}

#[test]
fn series_truncation_solves_interior_equations() {
    // a truncation at order k leaves an absolute residual of order lambda^(k+1)
    let lambda = 1e-3;
    let deep = perturbative_series(15, 10, false).unwrap();
    for k in [4, 8] {
        let table = perturbative_series(15, k, false).unwrap();
        let values: Vec<f64> = (1..=15).step_by(2).map(|n| table.eval(n, lambda).unwrap()).collect();
        let h = GreenSequence::from_f64(lambda, &values).unwrap();
        for n in (1..=11).step_by(2) {
            let r = equation_residual(&h, n, None, &ModelParams::default()).unwrap();
            let abs = r * h.get(n).unwrap().to_f64().abs();
            let c_next = (1..=n + 2)
                .step_by(2)
                .map(|m| deep.coefficient(m, k + 1).unwrap().to_string().parse::<f64>().unwrap().abs())
                .fold(0.0, f64::max);
            let bound = 10.0 * c_next * lambda.powi(k as i32 + 1) + 1e-15 * h.get(n).unwrap().to_f64().abs();
            assert!(abs <= bound, "k={k} n={n}: {abs:e} > {bound:e}");
        }
    }
}

#[test]
fn h0_membership_at_weak_coupling() {
    let h0 = build_h0(1e-3, 25, &ModelParams::default()).unwrap();
    assert!(check_phi(&h0, DEFAULT_K0, DEFAULT_D0).unwrap().phi0_member);
}

#[test]
fn sweep_csv_is_deterministic_and_matches_golden() {
    let cfg = SweepConfig { lambdas: vec![0.01], formats: vec![], ..SweepConfig::default() };
    let a = render_csv(&run_sweep(&cfg).unwrap().rows);
    let b = render_csv(&run_sweep(&cfg).unwrap().rows);
    assert_eq!(a, b);
    assert_eq!(a, include_str!("golden/sweep_lambda_0.01.csv"));
}
