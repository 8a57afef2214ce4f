//! Randomized invariants. Inputs are generated from proptest-chosen seeds so
//! failures shrink to a reproducible seed.

use proptest::prelude::*;
use tomoforge::estimators::{maxent_estimate, pvqt_estimate, MaxEntOptions};
use tomoforge::harness::{histogram, quantile_sorted, summarize};
use tomoforge::measure::{add_uniform_noise, expectations};
use tomoforge::metrics::{kl_from_uniform, unmeasured_vector};
use tomoforge::povm::{select_subset, sic_product};
use tomoforge::states::{fidelity, haar_pure, random_rank_r, trace_distance, vn_entropy};
use tomoforge::{DensityMatrix, PvqtParams, RngSeed, SdpOptions, SdpStatus};

fn state(n_qubits: usize, rank: usize, seed: u64) -> DensityMatrix {
    let mut rng = RngSeed(seed).rng();
    if rank == 1 {
        haar_pure(n_qubits, &mut rng).unwrap()
    } else {
        random_rank_r(1 << n_qubits, rank.min(1 << n_qubits), &mut rng).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fidelity_is_a_symmetric_unit_interval_quantity(
        n in 1usize..=3, ra in 1usize..=8, rb in 1usize..=8, sa: u64, sb: u64,
    ) {
        let (a, b) = (state(n, ra, sa), state(n, rb, sb));
        let ab = fidelity(&a, &b).unwrap();
        let ba = fidelity(&b, &a).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-9, "{} vs {}", ab, ba);
        prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trace_distance_is_a_metric_bounded_by_fidelity(
        n in 1usize..=3, ranks in (1usize..=8, 1usize..=8, 1usize..=8), seeds: (u64, u64, u64),
    ) {
        let a = state(n, ranks.0, seeds.0);
        let b = state(n, ranks.1, seeds.1);
        let c = state(n, ranks.2, seeds.2);
        let ab = trace_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - trace_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(ab <= trace_distance(&a, &c).unwrap() + trace_distance(&c, &b).unwrap() + 1e-12);
        let f = fidelity(&a, &b).unwrap();
        prop_assert!(1.0 - f.sqrt() <= ab + 1e-9);
        prop_assert!(ab <= (1.0 - f).max(0.0).sqrt() + 1e-9);
    }

    #[test]
    fn entropy_lies_between_zero_and_log_dimension(n in 1usize..=3, r in 1usize..=8, s: u64) {
        let rho = state(n, r, s);
        let e = vn_entropy(&rho);
        let d = (1usize << n) as f64;
        prop_assert!(e >= -1e-12 && e <= d.ln() + 1e-12);
        if r == 1 {
            prop_assert!(e.abs() < 1e-8);
        }
    }

    #[test]
    fn subset_plans_partition_the_povm(n_eff in 1usize..=64, frac in 0.0f64..=1.0, s: u64) {
        let k = ((n_eff as f64 * frac).round() as usize).max(1);
        let plan = select_subset(n_eff, k, &mut RngSeed(s).rng()).unwrap();
        let mut all: Vec<usize> = plan.measured().iter().chain(plan.unmeasured()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n_eff).collect::<Vec<_>>());
        prop_assert_eq!(plan.k(), k);
    }

    #[test]
    fn measured_and_unmeasured_probabilities_sum_to_one(k in 1usize..64, s: u64) {
        let povm = sic_product(3).unwrap();
        let rho = state(3, 1 + (s % 8) as usize, s);
        let plan = select_subset(64, k, &mut RngSeed(s ^ 1).rng()).unwrap();
        let f = expectations(&rho, &povm, &plan).unwrap();
        let u = unmeasured_vector(&rho, &povm, &plan).unwrap();
        let total = f.values.iter().sum::<f64>() + u.total_mass;
        prop_assert!((total - 1.0).abs() < 1e-12);
        if u.total_mass > 1e-12 {
            prop_assert!(kl_from_uniform(&u).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn uniform_noise_stays_within_its_band(level in 0.0f64..0.5, k in 1usize..=64, s: u64) {
        let povm = sic_product(3).unwrap();
        let rho = state(3, 2, s);
        let plan = select_subset(64, k, &mut RngSeed(s).rng()).unwrap();
        let f = expectations(&rho, &povm, &plan).unwrap();
        let g = add_uniform_noise(&f, level, &mut RngSeed(s ^ 7).rng());
        for (p, q) in f.values.iter().zip(&g.values) {
            prop_assert!((0.0..=1.0).contains(q));
            prop_assert!((q - p).abs() <= level * p + 1e-15);
        }
    }

    #[test]
    fn quartiles_are_ordered(mut v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let (mean, median, q1, q3, min, max) = summarize(&v).unwrap();
        prop_assert!(min <= q1 && q1 <= median && median <= q3 && q3 <= max);
        prop_assert!(min <= mean + 1e-9 * mean.abs() && mean <= max + 1e-9 * mean.abs());
        v.sort_by(f64::total_cmp);
        prop_assert_eq!(quantile_sorted(&v, 0.0), min);
        prop_assert_eq!(quantile_sorted(&v, 1.0), max);
    }

    #[test]
    fn histogram_counts_everything_in_range(
        v in prop::collection::vec(-0.5f64..1.5, 0..300), bins in 1usize..50,
    ) {
        let h = histogram(&v, bins, (0.0, 1.0)).unwrap();
        prop_assert_eq!(h.edges.len(), bins + 1);
        let inside = v.iter().filter(|x| (0.0..=1.0).contains(*x)).count();
        prop_assert_eq!(h.counts.iter().sum::<usize>(), inside);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tomography_solutions_fit_within_tolerances_and_beat_the_target(
        k in 4usize..=16, s: u64, beta in 0.0f64..=1.0,
    ) {
        let povm = sic_product(2).unwrap();
        let rho = state(2, 1 + (s % 4) as usize, s);
        let plan = select_subset(16, k, &mut RngSeed(s ^ 3).rng()).unwrap();
        let f = expectations(&rho, &povm, &plan).unwrap().values;
        let params = PvqtParams::new(1.0 - beta / 2.0, beta).unwrap();
        let (measured, unmeasured) = (povm.select(plan.measured()), povm.select(plan.unmeasured()));
        let compiled = tomoforge::estimators::compile_pvqt(&measured, &unmeasured, &f, params).unwrap();
        let sol = tomoforge::sdp::solve(&compiled.problem, &SdpOptions::default()).unwrap();
        prop_assume!(sol.status == SdpStatus::Optimal);
        prop_assert!(sol.dual_objective <= sol.objective + 1e-7 * (1.0 + sol.objective.abs()));
        prop_assert!((sol.objective - compiled.problem.objective_at(&sol.x, &sol.s)).abs()
            <= 1e-8 * (1.0 + sol.objective.abs()));

        // The optimum may relax the data, but only within its own tolerances.
        let r = pvqt_estimate(&povm, &plan, &f, params, &SdpOptions::default()).unwrap();
        prop_assume!(!r.diagnostics.status.is_failure());
        for ((e, &fi), &d) in measured.iter().zip(&f).zip(&r.deltas) {
            prop_assert!(d > -1e-8);
            let width = fi.max(tomoforge::estimators::ZERO_FREQUENCY_FLOOR);
            prop_assert!((r.rho.expectation(e) - fi).abs() <= d * width + 1e-6);
        }

        // The target is feasible with zero tolerances, so it bounds the optimum.
        let u: Vec<f64> = unmeasured.iter().map(|e| rho.expectation(e)).collect();
        let at_target = params.alpha * u.iter().sum::<f64>()
            + params.beta * u.iter().copied().fold(0.0, f64::max);
        prop_assert!(sol.objective <= at_target + 1e-6, "{} > {}", sol.objective, at_target);
    }

    #[test]
    fn maxent_fits_full_rank_data(k in 1usize..=16, s: u64) {
        let povm = sic_product(2).unwrap();
        let rho = state(2, 4, s);
        let plan = select_subset(16, k, &mut RngSeed(s ^ 5).rng()).unwrap();
        let f = expectations(&rho, &povm, &plan).unwrap().values;
        let r = maxent_estimate(4, &povm.select(plan.measured()), &f, &MaxEntOptions::default()).unwrap();
        prop_assert!(r.diagnostics.constraint_residual < 1e-8, "{:?}", r.diagnostics);
        prop_assert!(vn_entropy(&r.rho) >= vn_entropy(&rho) - 1e-9);
    }
}
