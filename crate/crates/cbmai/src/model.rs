//! Problem instances, the Gaussian sampling environment, and the
//! empirical-mean bookkeeping that feeds the score functions.
//!
//! Arm indices are zero-based throughout: arms `0..K0` have unknown means,
//! arms `K0..K` have known means, and index `K + l` is the virtual arm for
//! the slack of cost constraint `l`.

use crate::linalg::{DenseMat, MAX_SQUARE};
use crate::lp::{self, Basis, LpOutcome, StandardLp};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Support-membership tolerance for the uniqueness check.
pub const EPS_SUPP: f64 = 1e-7;
/// Value margin below which a second feasible basis spoils uniqueness.
pub const EPS_UNIQUE: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("arm {arm} is not an unknown arm (K0 = {num_unknown}); known arms are never sampled")]
    KnownArmPull { arm: usize, num_unknown: usize },
    #[error("unknown arm {0} has no pulls; empirical means undefined")]
    UnsampledArm(usize),
}

/// A CBMAI problem instance: true means, noise levels, and the known/unknown
/// split. Serializes to the interchange JSON format with keys
/// `K, K0, L, r, c, c_bar, sigma_r, sigma_c, name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    /// Arm count `K`.
    #[serde(rename = "K")]
    pub num_arms: usize,
    /// Unknown-arm count `K0`, `1 <= K0 <= K`.
    #[serde(rename = "K0")]
    pub num_unknown: usize,
    /// Cost-constraint count `L`.
    #[serde(rename = "L")]
    pub num_constraints: usize,
    /// Mean rewards, length `K`.
    #[serde(rename = "r")]
    pub mean_rewards: Vec<f64>,
    /// Mean costs, `L` rows of length `K`.
    #[serde(rename = "c")]
    pub mean_costs: Vec<Vec<f64>>,
    /// Cost bounds, length `L`.
    #[serde(rename = "c_bar")]
    pub cost_bounds: Vec<f64>,
    /// Reward noise standard deviation (zero means deterministic rewards).
    #[serde(rename = "sigma_r")]
    pub reward_stddev: f64,
    /// Cost noise standard deviation.
    #[serde(rename = "sigma_c")]
    pub cost_stddev: f64,
}

impl Instance {
    /// Builds and validates an instance.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        num_arms: usize,
        num_unknown: usize,
        mean_rewards: Vec<f64>,
        mean_costs: Vec<Vec<f64>>,
        cost_bounds: Vec<f64>,
        reward_stddev: f64,
        cost_stddev: f64,
    ) -> Result<Self, ModelError> {
        let inst = Self {
            name: name.to_string(),
            num_arms,
            num_unknown,
            num_constraints: cost_bounds.len(),
            mean_rewards,
            mean_costs,
            cost_bounds,
            reward_stddev,
            cost_stddev,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Dimension and value checks; run after construction or deserialization.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::InvalidInstance(msg));
        if self.num_arms == 0 {
            return fail("K must be at least 1".into());
        }
        if self.num_unknown == 0 || self.num_unknown > self.num_arms {
            return fail(format!(
                "K0 must satisfy 1 <= K0 <= K, got K0={} K={}",
                self.num_unknown, self.num_arms
            ));
        }
        if self.num_constraints == 0 {
            return fail("L must be at least 1".into());
        }
        if self.num_constraints + 1 > MAX_SQUARE {
            return fail(format!("at most {} constraints supported", MAX_SQUARE - 1));
        }
        if self.mean_rewards.len() != self.num_arms {
            return fail(format!(
                "r has length {}, expected K={}",
                self.mean_rewards.len(),
                self.num_arms
            ));
        }
        if self.mean_costs.len() != self.num_constraints {
            return fail(format!(
                "c has {} rows, expected L={}",
                self.mean_costs.len(),
                self.num_constraints
            ));
        }
        if let Some(row) = self.mean_costs.iter().find(|row| row.len() != self.num_arms) {
            return fail(format!(
                "c row has length {}, expected K={}",
                row.len(),
                self.num_arms
            ));
        }
        if self.cost_bounds.len() != self.num_constraints {
            return fail("c_bar length must equal L".into());
        }
        let noise_ok = |s: f64| s.is_finite() && s >= 0.0;
        if !noise_ok(self.reward_stddev) || !noise_ok(self.cost_stddev) {
            return fail("sigma_r and sigma_c must be nonnegative finite".into());
        }
        // names flow into one-line CSV records
        if self.name.chars().any(|c| c == ',' || c.is_control()) {
            return fail("name must not contain commas or control characters".into());
        }
        let all_values = self
            .mean_rewards
            .iter()
            .chain(self.mean_costs.iter().flatten())
            .chain(self.cost_bounds.iter())
            .chain([&self.reward_stddev, &self.cost_stddev]);
        for v in all_values {
            if !v.is_finite() {
                return fail("all means, bounds and stddevs must be finite".into());
            }
        }
        Ok(())
    }

    /// Variable count of the standard form, `K + L`.
    pub fn num_vars(&self) -> usize {
        self.num_arms + self.num_constraints
    }

    /// Copy with different noise levels (used for noise-free checks).
    pub fn with_noise(&self, reward_stddev: f64, cost_stddev: f64) -> Self {
        Self {
            reward_stddev,
            cost_stddev,
            ..self.clone()
        }
    }

    pub fn standard_form(&self) -> StandardLp {
        lp::build_standard_form(self)
    }
}

/// One pull's outcome: a reward and one cost per constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub reward: f64,
    pub costs: Vec<f64>,
}

/// Draws one observation of an unknown arm. Consumes exactly `L + 1` normal
/// variates in fixed order (reward first, then costs by constraint index) so
/// that streams replay identically for a given seed.
pub fn sample_pull<R: Rng + ?Sized>(
    instance: &Instance,
    arm: usize,
    rng: &mut R,
) -> Result<Observation, ModelError> {
    if arm >= instance.num_unknown {
        return Err(ModelError::KnownArmPull {
            arm,
            num_unknown: instance.num_unknown,
        });
    }
    let z: f64 = rng.sample(StandardNormal);
    let reward = instance.mean_rewards[arm] + instance.reward_stddev * z;
    let costs = (0..instance.num_constraints)
        .map(|l| {
            let z: f64 = rng.sample(StandardNormal);
            instance.mean_costs[l][arm] + instance.cost_stddev * z
        })
        .collect();
    Ok(Observation { reward, costs })
}

/// Pull counts and running sums for the unknown arms of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalState {
    pull_counts: Vec<u64>,
    reward_sums: Vec<f64>,
    /// `L` rows of `K0` column sums.
    cost_sums: Vec<Vec<f64>>,
}

impl EmpiricalState {
    pub fn new(instance: &Instance) -> Self {
        Self {
            pull_counts: vec![0; instance.num_unknown],
            reward_sums: vec![0.0; instance.num_unknown],
            cost_sums: vec![vec![0.0; instance.num_unknown]; instance.num_constraints],
        }
    }

    pub fn record(&mut self, arm: usize, obs: &Observation) {
        self.pull_counts[arm] += 1;
        self.reward_sums[arm] += obs.reward;
        for (row, &c) in self.cost_sums.iter_mut().zip(&obs.costs) {
            row[arm] += c;
        }
    }

    pub fn pull_count(&self, arm: usize) -> u64 {
        self.pull_counts[arm]
    }

    pub fn total_pulls(&self) -> u64 {
        self.pull_counts.iter().sum()
    }

    pub fn mean_reward(&self, arm: usize) -> Result<f64, ModelError> {
        if self.pull_counts[arm] == 0 {
            return Err(ModelError::UnsampledArm(arm));
        }
        Ok(self.reward_sums[arm] / self.pull_counts[arm] as f64)
    }

    pub fn mean_cost(&self, constraint: usize, arm: usize) -> Result<f64, ModelError> {
        if self.pull_counts[arm] == 0 {
            return Err(ModelError::UnsampledArm(arm));
        }
        Ok(self.cost_sums[constraint][arm] / self.pull_counts[arm] as f64)
    }
}

/// Builds the empirical objective and constraint views restricted to the
/// columns in `remaining` (sorted, full-space indices). Unknown-arm entries
/// use empirical means; known arms and slack columns keep their true or
/// structural values.
pub fn empirical_views(
    state: &EmpiricalState,
    instance: &Instance,
    remaining: &[usize],
) -> Result<(Vec<f64>, DenseMat), ModelError> {
    let lp = instance.standard_form();
    let l = instance.num_constraints;
    let mut mu = Vec::with_capacity(remaining.len());
    let mut a = DenseMat::zeros(l + 1, remaining.len());
    for (j, &col) in remaining.iter().enumerate() {
        if col < instance.num_unknown {
            mu.push(state.mean_reward(col)?);
            for row in 0..l {
                a.set(row, j, state.mean_cost(row, col)?);
            }
        } else {
            mu.push(lp.objective[col]);
            for row in 0..l {
                a.set(row, j, lp.constraint_matrix.get(row, col));
            }
        }
        a.set(l, j, lp.constraint_matrix.get(l, col));
    }
    Ok((mu, a))
}

/// The true-mean optimum of an instance together with the stability checks
/// that the analysis requires: a unique optimal solution with exactly
/// `L + 1` nonzero coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum TrueOptimum {
    Infeasible,
    Solved {
        basis: Basis,
        /// Full-length optimal solution.
        x: Vec<f64>,
        value: f64,
        /// True iff the support is exactly `L + 1` strictly positive
        /// coordinates and no other feasible basis ties the optimal value.
        assumption_ok: bool,
    },
}

impl TrueOptimum {
    /// The stable optimal basis, when the instance has one.
    pub fn stable_basis(&self) -> Option<&Basis> {
        match self {
            TrueOptimum::Solved {
                basis,
                assumption_ok: true,
                ..
            } => Some(basis),
            _ => None,
        }
    }
}

/// Solves the true-mean LP and checks the uniqueness assumption.
pub fn true_optimum(instance: &Instance) -> TrueOptimum {
    let lp = instance.standard_form();
    match lp::solve_primal(&lp, &lp.objective) {
        LpOutcome::Infeasible => TrueOptimum::Infeasible,
        LpOutcome::Optimal { value, basis, x } => {
            let full_support = basis
                .indices()
                .iter()
                .all(|&i| x[i] > EPS_SUPP);
            let unique = !has_tying_basis(&lp, &basis, value);
            TrueOptimum::Solved {
                assumption_ok: full_support && unique,
                basis,
                x,
                value,
            }
        }
    }
}

/// True when some other feasible basis reaches within `EPS_UNIQUE` of the
/// optimal value.
fn has_tying_basis(lp: &StandardLp, optimal: &Basis, optimal_value: f64) -> bool {
    let cols: Vec<usize> = (0..lp.num_vars()).collect();
    let mut tied = false;
    lp::for_each_feasible_basis(
        &lp.constraint_matrix,
        &lp.rhs,
        &lp.objective,
        &cols,
        |subset, _x, value| {
            if !tied && value >= optimal_value - EPS_UNIQUE && subset != optimal.indices() {
                tied = true;
            }
        },
    );
    tied
}
