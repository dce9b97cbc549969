//! Schedule and consistency properties of the identification algorithms.

use cbmai::algo::{self, ScoreFlavor};
use cbmai::catalog;
use cbmai::harness::{self, Algorithm, ExperimentSpec};
use cbmai::model::Instance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn schedule_shape_and_monotonicity(
        k in 2usize..=24,
        k0_frac in 0.0..1.0f64,
        l in 1usize..=3,
        extra in 1u64..50_000,
    ) {
        let k0 = 1 + ((k - 1) as f64 * k0_frac) as usize;
        let budget = k0 as u64 + extra;
        let s = algo::pull_schedule(budget, k, k0, l).unwrap();
        prop_assert_eq!(s.rounds.len(), k - 1);
        prop_assert_eq!(s.cumulative.len(), k - 1);
        let mut prev = 0u64;
        for (t, n) in s.rounds.iter().zip(&s.cumulative) {
            prop_assert_eq!(prev + t, *n);
            prop_assert!(*n >= prev);
            prev = *n;
        }
        prop_assert!(s.cumulative[0] >= 1);
        // the closed form of the final round
        let psi = algo::schedule_normalizer(k0, l);
        let expected_last = ((budget - k0 as u64) as f64 / (psi * 2.0)).ceil() as u64;
        prop_assert_eq!(*s.cumulative.last().unwrap(), expected_last);
    }

    #[test]
    fn sfsr_respects_budget_on_random_instances(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(3..=10usize);
        let k0 = rng.random_range(1..=k);
        let l = rng.random_range(1..=3usize);
        let budget = rng.random_range(k0 as u64 + 10..3000);
        let rewards: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let costs: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..k).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        let inst = Instance::new("prop", k, k0, rewards, costs, vec![1.0; l], 1.0, 0.5).unwrap();
        for flavor in [ScoreFlavor::IntersectionValue, ScoreFlavor::Lagrangian] {
            let mut run_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let (id, stats) = algo::sfsr_run_traced(&inst, budget, flavor, &mut run_rng).unwrap();
            prop_assert!(stats.total_pulls <= budget);
            if let Some(indices) = id.support_indices() {
                prop_assert_eq!(indices.len(), l + 1);
            }
        }
    }
}

/// One-sided two-proportion z statistic for `p1 > p2`.
fn two_proportion_z(errors1: u64, errors2: u64, trials: u64) -> f64 {
    let p1 = errors1 as f64 / trials as f64;
    let p2 = errors2 as f64 / trials as f64;
    let pooled = (errors1 + errors2) as f64 / (2 * trials) as f64;
    let se = (pooled * (1.0 - pooled) * 2.0 / trials as f64).sqrt();
    (p1 - p2) / se
}

#[test]
fn d3p_identified_reliably_at_large_budget() {
    // the three-arm grid instance at a generous budget: the strict support
    // comes out right in at least 95% of trials
    let spec = ExperimentSpec {
        instance: catalog::builtin_instance("D3P").unwrap(),
        algorithms: vec![Algorithm::SfsrIv],
        budgets: vec![200_000],
        trials: 200,
        base_seed: 0,
    };
    let cells = harness::run_trials(&spec, false).unwrap();
    assert!(
        cells[0].error_rate <= 0.05,
        "error rate {} leaves success frequency below 0.95",
        cells[0].error_rate
    );
}

#[test]
fn error_rate_decreases_with_budget() {
    // The anchor instance is easy enough that errors vanish within a few
    // dozen pulls, so the strict comparison runs where errors are actually
    // observable; larger budgets are then checked for non-increase.
    let spec = ExperimentSpec {
        instance: catalog::builtin_instance("E1").unwrap(),
        algorithms: vec![Algorithm::SfsrIv],
        budgets: vec![6, 250, 4000],
        trials: 2000,
        base_seed: 424242,
    };
    let cells = harness::run_trials(&spec, false).unwrap();
    let errors: Vec<u64> = cells.iter().map(|c| c.errors).collect();
    let z = two_proportion_z(errors[0], errors[1], spec.trials);
    assert!(
        z > 2.326,
        "budget 6 vs 250: z = {z:.2} with errors {errors:?} not significant at 1%"
    );
    assert!(
        errors[2] <= errors[1],
        "errors increased with budget: {errors:?}"
    );
}
