//! The score-function successive-reject algorithm in both flavors, its pull
//! schedule, and the uniform-sampling baseline.
//!
//! Both algorithms work over `K + L` candidate indices: the `K` true arms
//! plus one virtual arm per slack variable. Virtual and known arms are never
//! pulled, but they are eliminated and can appear in the output support.

use crate::linalg::{solve_square, DenseMat, MAX_SQUARE};
use crate::lp::{self, EPS_SING};
use crate::model::{self, EmpiricalState, Instance, ModelError};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AlgoError {
    #[error("budget {budget} is too small for {num_unknown} unknown arms")]
    BudgetTooSmall { budget: u64, num_unknown: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A per-arm elimination score. `NegInfinity` (no feasible basis contains the
/// arm) compares strictly below every finite score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    NegInfinity,
    Finite(f64),
}

impl Score {
    pub fn is_neg_infinity(&self) -> bool {
        matches!(self, Score::NegInfinity)
    }

    pub fn as_finite(&self) -> Option<f64> {
        match self {
            Score::Finite(v) => Some(*v),
            Score::NegInfinity => None,
        }
    }

    /// Total order with `NegInfinity` at the bottom. Finite scores are never
    /// NaN (they come from nonsingular solves of finite data).
    pub fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        match (self, other) {
            (Score::NegInfinity, Score::NegInfinity) => std::cmp::Ordering::Equal,
            (Score::NegInfinity, Score::Finite(_)) => std::cmp::Ordering::Less,
            (Score::Finite(_), Score::NegInfinity) => std::cmp::Ordering::Greater,
            (Score::Finite(a), Score::Finite(b)) => a.total_cmp(b),
        }
    }
}

/// Which score function drives the elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFlavor {
    /// Per-arm maximum basis value ("intersection value").
    IntersectionValue,
    /// Per-arm reduced cost under the empirical dual optimum.
    Lagrangian,
}

/// Per-round pull counts `T_k` and their cumulative sums `n_k`, `K - 1`
/// rounds long.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub rounds: Vec<u64>,
    pub cumulative: Vec<u64>,
}

/// The schedule normalizer: `sum_{j=1}^{K0} 1 / max(2, j - L)`.
pub fn schedule_normalizer(num_unknown: usize, num_constraints: usize) -> f64 {
    (1..=num_unknown)
        .map(|j| 1.0 / (j.saturating_sub(num_constraints)).max(2) as f64)
        .sum()
}

/// Computes the per-round pull counts: round `k` (1-based) pulls each
/// remaining unknown arm `T_k = n_k - n_{k-1}` times where
/// `n_k = ceil((N - K0) / (psi * (K + 1 - k)))`.
pub fn pull_schedule(
    budget: u64,
    num_arms: usize,
    num_unknown: usize,
    num_constraints: usize,
) -> Result<Schedule, AlgoError> {
    if budget <= num_unknown as u64 {
        return Err(AlgoError::BudgetTooSmall {
            budget,
            num_unknown,
        });
    }
    let psi = schedule_normalizer(num_unknown, num_constraints);
    let excess = (budget - num_unknown as u64) as f64;
    let mut cumulative = Vec::with_capacity(num_arms.saturating_sub(1));
    let mut rounds = Vec::with_capacity(num_arms.saturating_sub(1));
    let mut prev = 0u64;
    for k in 1..num_arms {
        let n_k = (excess / (psi * (num_arms + 1 - k) as f64)).ceil() as u64;
        rounds.push(n_k - prev);
        cumulative.push(n_k);
        prev = n_k;
    }
    Ok(Schedule { rounds, cumulative })
}

/// The algorithm's answer: either a support of `L + 1` indices (true arms
/// and/or virtual arms, sorted) with an optional mixture estimate, or the
/// infeasibility verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum Identification {
    Support {
        indices: Vec<usize>,
        /// `A_X^{-1} b` on the empirical matrix of the surviving columns,
        /// aligned with `indices`; omitted when that matrix is singular or
        /// no empirical means exist. May include slack coordinates and, on
        /// noisy data, small negative entries.
        mixture: Option<Vec<f64>>,
    },
    InfeasibleVerdict,
}

impl Identification {
    pub fn support_indices(&self) -> Option<&[usize]> {
        match self {
            Identification::Support { indices, .. } => Some(indices),
            Identification::InfeasibleVerdict => None,
        }
    }
}

/// Pull accounting for budget checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    pub total_pulls: u64,
}

/// Intersection-value scores for every index in `x` (sorted, full-space):
/// the best feasible-basis objective value among bases containing that
/// index, or `NegInfinity` if none. One enumeration pass is shared across
/// all arms.
pub fn iv_scores(x: &[usize], mu_x: &[f64], a_x: &DenseMat, b: &[f64]) -> Vec<Score> {
    debug_assert_eq!(mu_x.len(), x.len());
    debug_assert_eq!(a_x.cols(), x.len());
    let local: Vec<usize> = (0..x.len()).collect();
    let mut scores = vec![Score::NegInfinity; x.len()];
    lp::for_each_feasible_basis(a_x, b, mu_x, &local, |subset, _xb, value| {
        for &pos in subset {
            let better = match scores[pos] {
                Score::NegInfinity => true,
                Score::Finite(cur) => value > cur,
            };
            if better {
                scores[pos] = Score::Finite(value);
            }
        }
    });
    scores
}

/// Lagrangian scores: reduced costs under the dual multipliers of the
/// empirical optimal basis, or all `NegInfinity` when the empirical primal
/// restricted to `x` is infeasible (equivalently, the dual is unbounded).
pub fn lagrangian_scores(x: &[usize], mu_x: &[f64], a_x: &DenseMat, b: &[f64]) -> Vec<Score> {
    debug_assert_eq!(mu_x.len(), x.len());
    debug_assert_eq!(a_x.cols(), x.len());
    let local: Vec<usize> = (0..x.len()).collect();
    match lp::solve_restricted(a_x, b, mu_x, &local) {
        lp::RestrictedOutcome::Infeasible => vec![Score::NegInfinity; x.len()],
        lp::RestrictedOutcome::Optimal { basis, .. } => {
            let lambda = lp::dual_multipliers(a_x, mu_x, &basis)
                .expect("optimal basis of a feasible LP is nonsingular");
            lp::reduced_costs(a_x, mu_x, &lambda)
                .into_iter()
                .map(Score::Finite)
                .collect()
        }
    }
}

/// Runs the successive-reject algorithm and reports its pull count.
///
/// Each round pulls every remaining unknown arm `T_k` times, scores all
/// remaining indices, and removes the lowest-scoring one (ties broken toward
/// the smallest index). If every score is `NegInfinity` the run stops with
/// the infeasibility verdict.
pub fn sfsr_run_traced<R: Rng + ?Sized>(
    instance: &Instance,
    budget: u64,
    flavor: ScoreFlavor,
    rng: &mut R,
) -> Result<(Identification, RunStats), AlgoError> {
    let schedule = pull_schedule(
        budget,
        instance.num_arms,
        instance.num_unknown,
        instance.num_constraints,
    )?;
    let mut remaining: Vec<usize> = (0..instance.num_vars()).collect();
    let mut state = EmpiricalState::new(instance);
    let mut total_pulls = 0u64;
    for &pulls in &schedule.rounds {
        for &arm in remaining.iter().filter(|&&a| a < instance.num_unknown) {
            for _ in 0..pulls {
                let obs = model::sample_pull(instance, arm, rng)?;
                state.record(arm, &obs);
                total_pulls += 1;
            }
        }
        let (mu_x, a_x) = model::empirical_views(&state, instance, &remaining)?;
        let b = standard_rhs(instance);
        let scores = match flavor {
            ScoreFlavor::IntersectionValue => iv_scores(&remaining, &mu_x, &a_x, &b),
            ScoreFlavor::Lagrangian => lagrangian_scores(&remaining, &mu_x, &a_x, &b),
        };
        if scores.iter().all(Score::is_neg_infinity) {
            return Ok((Identification::InfeasibleVerdict, RunStats { total_pulls }));
        }
        let lowest = scores
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.total_cmp(b).then(i.cmp(j)))
            .map(|(i, _)| i)
            .expect("remaining is nonempty");
        remaining.remove(lowest);
    }
    let mixture = final_mixture(instance, &state, &remaining);
    Ok((
        Identification::Support {
            indices: remaining,
            mixture,
        },
        RunStats { total_pulls },
    ))
}

/// As `sfsr_run_traced`, dropping the pull accounting.
pub fn sfsr_run<R: Rng + ?Sized>(
    instance: &Instance,
    budget: u64,
    flavor: ScoreFlavor,
    rng: &mut R,
) -> Result<Identification, AlgoError> {
    sfsr_run_traced(instance, budget, flavor, rng).map(|(id, _)| id)
}

/// Solves the square empirical system on the surviving columns. `None` when
/// the matrix is singular or an unknown survivor was never pulled (possible
/// only in the degenerate zero-round case `K = 1`).
fn final_mixture(
    instance: &Instance,
    state: &EmpiricalState,
    remaining: &[usize],
) -> Option<Vec<f64>> {
    let m = instance.num_constraints + 1;
    debug_assert_eq!(remaining.len(), m);
    let (_, a_x) = model::empirical_views(state, instance, remaining).ok()?;
    let mut square = [0.0; MAX_SQUARE * MAX_SQUARE];
    let mut rhs = [0.0; MAX_SQUARE];
    let local: Vec<usize> = (0..m).collect();
    a_x.gather_columns(&local, &mut square[..m * m]);
    rhs[..m].copy_from_slice(&standard_rhs(instance));
    let det = solve_square(&mut square, &mut rhs, m);
    if det.abs() <= EPS_SING {
        return None;
    }
    Some(rhs[..m].to_vec())
}

fn standard_rhs(instance: &Instance) -> Vec<f64> {
    let mut b = instance.cost_bounds.clone();
    b.push(1.0);
    b
}

/// The uniform-sampling baseline: pull every unknown arm `floor(N / K0)`
/// times, then solve the empirical program once by enumeration.
pub fn uslp_run<R: Rng + ?Sized>(
    instance: &Instance,
    budget: u64,
    rng: &mut R,
) -> Result<Identification, AlgoError> {
    let pulls = budget / instance.num_unknown as u64;
    if pulls == 0 {
        return Err(AlgoError::BudgetTooSmall {
            budget,
            num_unknown: instance.num_unknown,
        });
    }
    let mut state = EmpiricalState::new(instance);
    for arm in 0..instance.num_unknown {
        for _ in 0..pulls {
            let obs = model::sample_pull(instance, arm, rng)?;
            state.record(arm, &obs);
        }
    }
    let all: Vec<usize> = (0..instance.num_vars()).collect();
    let (mu, a) = model::empirical_views(&state, instance, &all)?;
    let b = standard_rhs(instance);
    match lp::solve_restricted(&a, &b, &mu, &all) {
        lp::RestrictedOutcome::Infeasible => Ok(Identification::InfeasibleVerdict),
        lp::RestrictedOutcome::Optimal { basis, x_basis, .. } => Ok(Identification::Support {
            indices: basis,
            mixture: Some(x_basis),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn true_views(inst: &Instance, x: &[usize]) -> (Vec<f64>, DenseMat, Vec<f64>) {
        let lp = inst.standard_form();
        let mu: Vec<f64> = x.iter().map(|&c| lp.objective[c]).collect();
        let mut a = DenseMat::zeros(lp.constraint_matrix.rows(), x.len());
        for (j, &c) in x.iter().enumerate() {
            for r in 0..lp.constraint_matrix.rows() {
                a.set(r, j, lp.constraint_matrix.get(r, c));
            }
        }
        (mu, a, lp.rhs)
    }

    #[test]
    fn schedule_normalizer_16_arms_one_constraint() {
        let psi = schedule_normalizer(16, 1);
        let expected = 1.5 + (3..=15).map(|m| 1.0 / m as f64).sum::<f64>();
        assert!((psi - expected).abs() < 1e-12);
        assert!((psi - 3.318229).abs() < 1e-6);
    }

    #[test]
    fn pull_schedule_paper_parameters() {
        let s = pull_schedule(1000, 16, 16, 1).unwrap();
        assert_eq!(s.cumulative[0], 19);
        assert_eq!(s.cumulative[1], 20);
        assert_eq!(s.rounds[1], 1);
        assert_eq!(s.cumulative[14], 149);
        assert_eq!(s.rounds.len(), 15);
    }

    #[test]
    fn pull_schedule_two_arms_one_unknown() {
        for n in [10u64, 101, 5000] {
            let s = pull_schedule(n, 2, 1, 1).unwrap();
            assert_eq!(s.rounds, vec![n - 1]);
        }
    }

    #[test]
    fn pull_schedule_rejects_small_budget() {
        assert_eq!(
            pull_schedule(16, 16, 16, 1),
            Err(AlgoError::BudgetTooSmall {
                budget: 16,
                num_unknown: 16
            })
        );
    }

    #[test]
    fn schedule_is_monotone() {
        for (n, k, k0, l) in [(1000u64, 16, 16, 1), (57, 5, 3, 2), (100_000, 24, 24, 3)] {
            let s = pull_schedule(n, k, k0, l).unwrap();
            assert_eq!(s.rounds.len(), k - 1);
            let mut prev = 0;
            for (t, nk) in s.rounds.iter().zip(&s.cumulative) {
                assert_eq!(prev + t, *nk);
                prev = *nk;
            }
        }
    }

    #[test]
    fn iv_scores_e1_true_means() {
        let inst = catalog::builtin_instance("E1").unwrap();
        let x = vec![0, 1, 2];
        let (mu, a, b) = true_views(&inst, &x);
        let scores = iv_scores(&x, &mu, &a, &b);
        assert_eq!(scores[0], Score::Finite(0.5));
        assert_eq!(scores[1], Score::Finite(0.5));
        assert_eq!(scores[2], Score::Finite(0.0));
    }

    #[test]
    fn iv_scores_infeasible_all_neg_infinity() {
        let inst = catalog::builtin_instance("E2").unwrap();
        let x = vec![0, 1, 2];
        let (mu, a, b) = true_views(&inst, &x);
        assert!(iv_scores(&x, &mu, &a, &b)
            .iter()
            .all(Score::is_neg_infinity));
    }

    #[test]
    fn lagrangian_scores_e1_true_means() {
        let inst = catalog::builtin_instance("E1").unwrap();
        let x = vec![0, 1, 2];
        let (mu, a, b) = true_views(&inst, &x);
        let scores = lagrangian_scores(&x, &mu, &a, &b);
        let vals: Vec<f64> = scores.iter().map(|s| s.as_finite().unwrap()).collect();
        assert!(vals[0].abs() < 1e-12);
        assert!(vals[1].abs() < 1e-12);
        assert!((vals[2] - -0.5).abs() < 1e-12);
    }

    #[test]
    fn lagrangian_scores_infeasible_all_neg_infinity() {
        let inst = catalog::builtin_instance("E2").unwrap();
        let x = vec![0, 1, 2];
        let (mu, a, b) = true_views(&inst, &x);
        assert!(lagrangian_scores(&x, &mu, &a, &b)
            .iter()
            .all(Score::is_neg_infinity));
    }

    #[test]
    fn score_ordering() {
        assert_eq!(
            Score::NegInfinity.total_cmp(&Score::Finite(-1e300)),
            std::cmp::Ordering::Less
        );
        assert_eq!(
            Score::Finite(0.1).total_cmp(&Score::Finite(0.2)),
            std::cmp::Ordering::Less
        );
        assert_eq!(
            Score::NegInfinity.total_cmp(&Score::NegInfinity),
            std::cmp::Ordering::Equal
        );
    }

    #[test]
    fn sfsr_noise_free_e1_both_flavors() {
        let inst = catalog::builtin_instance("E1").unwrap().with_noise(0.0, 0.0);
        for flavor in [ScoreFlavor::IntersectionValue, ScoreFlavor::Lagrangian] {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let id = sfsr_run(&inst, 100, flavor, &mut rng).unwrap();
            match id {
                Identification::Support { indices, mixture } => {
                    assert_eq!(indices, vec![0, 1]);
                    let m = mixture.expect("nonsingular final system");
                    assert!((m[0] - 0.5).abs() < 1e-12);
                    assert!((m[1] - 0.5).abs() < 1e-12);
                }
                Identification::InfeasibleVerdict => panic!("E1 is feasible"),
            }
        }
    }

    #[test]
    fn sfsr_noise_free_e2_infeasible_verdict() {
        let inst = catalog::builtin_instance("E2").unwrap().with_noise(0.0, 0.0);
        for flavor in [ScoreFlavor::IntersectionValue, ScoreFlavor::Lagrangian] {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let id = sfsr_run(&inst, 100, flavor, &mut rng).unwrap();
            assert_eq!(id, Identification::InfeasibleVerdict);
        }
    }

    #[test]
    fn uslp_noise_free_cases() {
        let e1 = catalog::builtin_instance("E1").unwrap().with_noise(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let id = uslp_run(&e1, 100, &mut rng).unwrap();
        assert_eq!(id.support_indices(), Some(&[0usize, 1][..]));

        let e2 = catalog::builtin_instance("E2").unwrap().with_noise(0.0, 0.0);
        let id = uslp_run(&e2, 100, &mut rng).unwrap();
        assert_eq!(id, Identification::InfeasibleVerdict);
    }

    #[test]
    fn uslp_rejects_zero_pull_budget() {
        let inst = catalog::builtin_instance("E1").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            uslp_run(&inst, 1, &mut rng),
            Err(AlgoError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn sfsr_budget_never_exceeded_randomized() {
        // a desk-scale version of the budget invariant; the acceptance suite
        // runs the full randomized sweep
        let mut seed_rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..200 {
            let k = 3 + (trial % 8);
            let k0 = 1 + (trial % k);
            let l = 1 + (trial % 3);
            let budget = (k0 as u64 + 10) * (1 + (trial as u64 % 19));
            let inst = random_instance(&mut seed_rng, k, k0, l);
            for flavor in [ScoreFlavor::IntersectionValue, ScoreFlavor::Lagrangian] {
                let mut rng = ChaCha8Rng::seed_from_u64(trial as u64);
                let (_, stats) = sfsr_run_traced(&inst, budget, flavor, &mut rng).unwrap();
                assert!(
                    stats.total_pulls <= budget,
                    "pulls {} exceed budget {budget} (K={k} K0={k0} L={l})",
                    stats.total_pulls
                );
            }
        }
    }

    fn random_instance<R: Rng>(rng: &mut R, k: usize, k0: usize, l: usize) -> Instance {
        let rewards = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let costs = (0..l)
            .map(|_| (0..k).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        Instance::new("rand", k, k0, rewards, costs, vec![1.0; l], 1.0, 0.5).unwrap()
    }

    #[test]
    fn schedule_worst_case_pull_bound() {
        // the adversarial elimination order keeps every unknown arm alive as
        // long as possible: arm totals are then the K0 largest cumulative
        // counts, with survivors charged the final count. That sum must
        // still fit the budget for any (K, K0, L, N).
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..2000 {
            let k = rng.random_range(2..=24usize);
            let k0 = rng.random_range(1..=k);
            let l = rng.random_range(1..=3usize);
            let budget = rng.random_range(k0 as u64 + 1..=100_000);
            let s = pull_schedule(budget, k, k0, l).unwrap();
            let worst: u64 = (k - k0 + l + 1..=k + l)
                .map(|pos| s.cumulative[pos.min(k - 1) - 1])
                .sum();
            assert!(
                worst <= budget,
                "worst-case pulls {worst} exceed budget {budget} (K={k} K0={k0} L={l})"
            );
        }
    }

    #[test]
    fn sfsr_round_structure() {
        // exactly one index leaves per round, so the survivor count is L + 1
        let inst = catalog::builtin_instance("D1P").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let id = sfsr_run(&inst, 2000, ScoreFlavor::IntersectionValue, &mut rng).unwrap();
        if let Some(indices) = id.support_indices() {
            assert_eq!(indices.len(), inst.num_constraints + 1);
            assert!(indices.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
