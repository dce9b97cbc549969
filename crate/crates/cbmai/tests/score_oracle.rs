//! Independent oracles for the score functions: a segment-intersection
//! brute force for the single-constraint geometry, and coherence between
//! the score maxima and the restricted program's optimum.

use cbmai::algo::{self, Score};
use cbmai::linalg::DenseMat;
use cbmai::lp::{self, LpOutcome, StandardLp};
use cbmai::model::{empirical_views, EmpiricalState, Instance, Observation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Five-arm single-constraint layout mirroring the two-axis score picture:
/// `(cost, reward)` pairs around the bound at 1.
const FIVE_ARMS: [(f64, f64); 5] = [
    (0.0, 1.7),
    (1.8, 2.6),
    (0.8, 0.5),
    (1.3, 2.1),
    (2.0, 1.2),
];

fn five_arm_instance() -> Instance {
    let rewards = FIVE_ARMS.iter().map(|&(_, r)| r).collect();
    let costs = vec![FIVE_ARMS.iter().map(|&(c, _)| c).collect()];
    Instance::new("five", 5, 5, rewards, costs, vec![1.0], 1.0, 0.5).unwrap()
}

/// Brute-force scores for `L = 1`: for true arms, the best of the pure value
/// (if the arm is within the bound) and every straddling pair's segment
/// intersection with the boundary; for the slack arm, the best pure value.
fn segment_oracle(rewards: &[f64], costs: &[f64], bound: f64) -> Vec<Score> {
    let k = rewards.len();
    let mut scores = vec![Score::NegInfinity; k + 1];
    let mut raise = |idx: usize, value: f64| {
        let better = match scores[idx] {
            Score::NegInfinity => true,
            Score::Finite(cur) => value > cur,
        };
        if better {
            scores[idx] = Score::Finite(value);
        }
    };
    for a in 0..k {
        if costs[a] <= bound {
            // basis {a, slack}: a pure arm strictly inside the bound
            raise(a, rewards[a]);
            raise(k, rewards[a]);
        }
        for j in 0..k {
            if j == a {
                continue;
            }
            let (ca, cj) = (costs[a], costs[j]);
            if (ca - bound) * (cj - bound) < 0.0 {
                let t = (bound - ca) / (cj - ca);
                raise(a, rewards[a] + (rewards[j] - rewards[a]) * t);
            }
        }
    }
    scores
}

#[test]
fn iv_scores_match_segment_intersections() {
    let inst = five_arm_instance();
    let lpm = inst.standard_form();
    let x: Vec<usize> = (0..6).collect();
    let mu: Vec<f64> = x.iter().map(|&c| lpm.objective[c]).collect();
    let mut a = DenseMat::zeros(2, 6);
    for (j, &c) in x.iter().enumerate() {
        for r in 0..2 {
            a.set(r, j, lpm.constraint_matrix.get(r, c));
        }
    }
    let scores = algo::iv_scores(&x, &mu, &a, &lpm.rhs);
    let rewards: Vec<f64> = FIVE_ARMS.iter().map(|&(_, r)| r).collect();
    let costs: Vec<f64> = FIVE_ARMS.iter().map(|&(c, _)| c).collect();
    let oracle = segment_oracle(&rewards, &costs, 1.0);
    for (idx, (got, want)) in scores.iter().zip(&oracle).enumerate() {
        match (got, want) {
            (Score::Finite(g), Score::Finite(w)) => {
                assert!((g - w).abs() < 1e-9, "index {idx}: {g} vs oracle {w}")
            }
            (Score::NegInfinity, Score::NegInfinity) => {}
            other => panic!("index {idx}: mismatch {other:?}"),
        }
    }
    // hand-derived intersections for this layout
    let expected = [2.2, 2.2, 1.14, 1.7 + 0.4 / 1.3, 1.45, 1.7];
    for (idx, want) in expected.iter().enumerate() {
        let got = scores[idx].as_finite().unwrap();
        assert!((got - want).abs() < 1e-9, "index {idx}: {got} vs {want}");
    }
}

fn random_empirical_state(
    inst: &Instance,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, DenseMat), cbmai::model::ModelError> {
    let mut state = EmpiricalState::new(inst);
    for arm in 0..inst.num_unknown {
        for _ in 0..rng.random_range(1..40u32) {
            let obs = Observation {
                reward: inst.mean_rewards[arm] + rng.random_range(-1.0..1.0),
                costs: (0..inst.num_constraints)
                    .map(|l| inst.mean_costs[l][arm] + rng.random_range(-0.5..0.5))
                    .collect(),
            };
            state.record(arm, &obs);
        }
    }
    let all: Vec<usize> = (0..inst.num_vars()).collect();
    empirical_views(&state, inst, &all)
}

#[test]
fn score_maxima_agree_with_restricted_optimum() {
    for seed in 0..80u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(2..=6usize);
        let l = rng.random_range(1..=2usize);
        let rewards: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let costs: Vec<Vec<f64>> = (0..l)
            .map(|_| (0..k).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        let inst = Instance::new("coh", k, k, rewards, costs, vec![1.0; l], 1.0, 0.5).unwrap();
        let (mu, a) = random_empirical_state(&inst, &mut rng).unwrap();
        let mut b = inst.cost_bounds.clone();
        b.push(1.0);
        let x: Vec<usize> = (0..inst.num_vars()).collect();
        let iv = algo::iv_scores(&x, &mu, &a, &b);
        let lagr = algo::lagrangian_scores(&x, &mu, &a, &b);
        // an LP over the empirical views
        let empirical_lp = StandardLp {
            num_arms: k,
            num_constraints: l,
            objective: mu.clone(),
            constraint_matrix: a,
            rhs: b,
        };
        match lp::solve_primal(&empirical_lp, &mu) {
            LpOutcome::Infeasible => {
                assert!(iv.iter().all(Score::is_neg_infinity), "seed {seed}");
                assert!(lagr.iter().all(Score::is_neg_infinity), "seed {seed}");
            }
            LpOutcome::Optimal { value, basis, .. } => {
                let max_iv = iv
                    .iter()
                    .filter_map(Score::as_finite)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    (max_iv - value).abs() < 1e-9,
                    "seed {seed}: max score {max_iv} vs optimum {value}"
                );
                assert!(!lagr.iter().any(Score::is_neg_infinity), "seed {seed}");
                // reduced costs vanish exactly on the optimal basis columns
                for &col in basis.indices() {
                    let rc = lagr[col].as_finite().unwrap();
                    assert!(rc.abs() < 1e-9, "seed {seed}: basis column {col} scored {rc}");
                }
            }
        }
    }
}
