//! Built-in benchmark instances and parameterized instance generators.
//!
//! The six `D*` instances are 24-arm, two-constraint grids with published
//! mean tables. `E1` and `E2` are synthetic two-arm anchors used across the
//! test suite (`E1` has a strict two-arm optimal mix, `E2` is infeasible).
//! The generators produce fresh grid instances, hard clustered instances,
//! and uniform random instances.

use crate::model::{self, Instance, ModelError, TrueOptimum};
use crate::model::EPS_SUPP;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("unknown instance name '{0}'; expected one of {names:?}", names = BUILTIN_NAMES)]
    UnknownName(String),
    #[error("generator failed to produce a valid instance within {0} attempts")]
    GenerationFailed(u32),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Names accepted by `builtin_instance` (case-insensitive).
pub const BUILTIN_NAMES: [&str; 8] = ["D1P", "D2P", "D3P", "D1I", "D2I", "D3I", "E1", "E2"];

/// Regeneration cap for the randomized generators.
pub const MAX_GENERATION_ATTEMPTS: u32 = 1000;

const GRID_C1: [f64; 6] = [0.4, 0.6, 0.8, 1.0, 1.2, 1.4];
const GRID_C2: [f64; 4] = [0.7, 0.9, 1.1, 1.3];

// Mean-reward tables, row-major over (c1 ascending, c2 ascending).
const D1P_REWARDS: [f64; 24] = [
    0.88, 0.80, 0.82, 0.66, //
    0.72, 1.02, 0.70, 0.54, //
    0.92, 0.74, 0.94, 0.84, //
    0.76, 0.60, 0.56, 0.86, //
    0.98, 0.64, 0.68, 0.78, //
    0.62, 0.96, 0.90, 0.58,
];
const D2P_REWARDS: [f64; 24] = [
    0.08, 0.28, -0.02, 0.22, //
    0.20, 0.46, 0.54, 0.40, //
    0.42, 0.52, 0.80, 0.34, //
    0.92, 0.78, 0.96, 0.70, //
    0.94, 0.76, 1.10, 0.86, //
    1.42, 1.16, 1.04, 1.24,
];
const D3P_REWARDS: [f64; 24] = [
    1.04, 1.22, 1.28, 1.26, //
    0.98, 1.22, 1.60, 1.54, //
    1.26, 1.40, 1.88, 1.84, //
    1.72, 1.76, 1.64, 1.92, //
    1.78, 1.70, 1.96, 2.08, //
    1.94, 2.30, 2.32, 2.50,
];
const D1I_REWARDS: [f64; 24] = [
    0.84, 1.02, 0.74, 0.76, //
    0.84, 0.88, 0.96, 0.90, //
    0.90, 0.98, 0.92, 0.80, //
    0.98, 0.98, 0.90, 0.74, //
    0.94, 0.90, 0.88, 0.72, //
    0.78, 0.82, 0.88, 0.84,
];
const D2I_REWARDS: [f64; 24] = [
    0.40, 0.18, 0.28, 0.14, //
    0.44, 0.54, 0.40, 0.32, //
    0.56, 0.52, 0.68, 0.64, //
    0.84, 0.80, 0.82, 0.74, //
    0.94, 1.18, 1.02, 1.12, //
    1.42, 1.16, 1.24, 1.24,
];
const D3I_REWARDS: [f64; 24] = [
    0.92, 1.12, 1.32, 1.42, //
    1.14, 1.42, 1.62, 1.68, //
    1.30, 1.70, 1.68, 2.06, //
    1.46, 1.82, 2.02, 2.04, //
    1.84, 2.02, 2.12, 2.24, //
    2.06, 2.28, 2.32, 2.58,
];

/// Arm indices (row-major over the cost grid) of the published optimal
/// supports, true arms only.
pub fn expected_support(name: &str) -> Option<&'static [usize]> {
    match name.to_ascii_uppercase().as_str() {
        "D1P" => Some(&[5]),
        "D2P" => Some(&[10, 20]),
        "D3P" => Some(&[10, 12, 21]),
        "D1I" => Some(&[1]),
        "D2I" => Some(&[0, 20]),
        "D3I" => Some(&[9, 11, 21]),
        _ => None,
    }
}

/// Returns a built-in instance by name.
pub fn builtin_instance(name: &str) -> Result<Instance, CatalogError> {
    let canonical = name.to_ascii_uppercase();
    let rewards: &[f64] = match canonical.as_str() {
        "D1P" => &D1P_REWARDS,
        "D2P" => &D2P_REWARDS,
        "D3P" => &D3P_REWARDS,
        "D1I" => &D1I_REWARDS,
        "D2I" => &D2I_REWARDS,
        "D3I" => &D3I_REWARDS,
        "E1" => {
            return Ok(Instance::new(
                "E1",
                2,
                2,
                vec![1.0, 0.0],
                vec![vec![2.0, 0.0]],
                vec![1.0],
                1.0,
                0.5,
            )?)
        }
        "E2" => {
            return Ok(Instance::new(
                "E2",
                2,
                2,
                vec![1.0, 0.5],
                vec![vec![2.0, 1.5]],
                vec![1.0],
                1.0,
                0.5,
            )?)
        }
        _ => return Err(CatalogError::UnknownName(name.to_string())),
    };
    Ok(grid_instance(&canonical, rewards.to_vec())?)
}

/// Assembles a 24-arm grid instance with the standard noise levels.
fn grid_instance(name: &str, rewards: Vec<f64>) -> Result<Instance, ModelError> {
    let mut c1 = Vec::with_capacity(24);
    let mut c2 = Vec::with_capacity(24);
    for &a in &GRID_C1 {
        for &b in &GRID_C2 {
            c1.push(a);
            c2.push(b);
        }
    }
    Instance::new(name, 24, 24, rewards, vec![c1, c2], vec![1.0, 1.0], 1.0, 0.5)
}

/// How the grid generator draws its reward noise vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// A random permutation of `{0.00, 0.02, ..., 0.46}`.
    Permutation,
    /// Independent uniform draws from `{0.00, 0.02, ..., 0.28}`.
    Iid,
}

/// Reward rule of the grid generator, fixing the target support size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardRule {
    /// `r = 1 - W`; one-arm optimal support.
    D1,
    /// `r = c1 - W`; two-arm optimal support.
    D2,
    /// `r = c1 + c2 - W`; three-arm optimal support.
    D3,
}

impl RewardRule {
    fn target_support(self) -> usize {
        match self {
            RewardRule::D1 => 1,
            RewardRule::D2 => 2,
            RewardRule::D3 => 3,
        }
    }

    fn reward(self, c1: f64, c2: f64, w: f64) -> f64 {
        match self {
            RewardRule::D1 => 1.0 - w,
            RewardRule::D2 => c1 - w,
            RewardRule::D3 => c1 + c2 - w,
        }
    }
}

/// A recipe for generating an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// The 24-arm cost grid with randomized rewards, redrawn until the
    /// optimal support has the rule's target size, then bumped by 0.02.
    GridNoise {
        noise: NoiseMode,
        reward_rule: RewardRule,
    },
    /// One low-reward/low-cost anchor, one high-reward arm just past the
    /// cost bound, and `K - 2` identical near-boundary arms. The optimal
    /// mix is always arms 0 and 1.
    HardCluster {
        num_arms: usize,
        #[serde(default = "default_cluster_reward")]
        cluster_reward: f64,
    },
    /// Independent uniform rewards and costs, redrawn until the instance
    /// satisfies the uniqueness assumption.
    RandomUniform {
        num_arms: usize,
        num_constraints: usize,
        reward_range: (f64, f64),
        cost_range: (f64, f64),
    },
}

fn default_cluster_reward() -> f64 {
    // cluster sits 0.2 below the two-arm frontier at the cost bound
    0.7
}

/// Reward bump applied to the generated optimal support.
pub const SUPPORT_BUMP: f64 = 0.02;

/// Generates an instance from a spec. Randomized specs redraw up to
/// `MAX_GENERATION_ATTEMPTS` times before giving up.
pub fn generate<R: Rng + ?Sized>(
    spec: &GeneratorSpec,
    rng: &mut R,
) -> Result<Instance, CatalogError> {
    match spec {
        GeneratorSpec::GridNoise { noise, reward_rule } => generate_grid(*noise, *reward_rule, rng),
        GeneratorSpec::HardCluster {
            num_arms,
            cluster_reward,
        } => generate_hard_cluster(*num_arms, *cluster_reward),
        GeneratorSpec::RandomUniform {
            num_arms,
            num_constraints,
            reward_range,
            cost_range,
        } => generate_random_uniform(*num_arms, *num_constraints, *reward_range, *cost_range, rng),
    }
}

fn generate_grid<R: Rng + ?Sized>(
    noise: NoiseMode,
    rule: RewardRule,
    rng: &mut R,
) -> Result<Instance, CatalogError> {
    let target = rule.target_support();
    let mode_tag = match noise {
        NoiseMode::Permutation => "P",
        NoiseMode::Iid => "I",
    };
    let name = format!("D{target}{mode_tag}-gen");
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let w = draw_noise(noise, rng);
        let mut rewards = Vec::with_capacity(24);
        for (i, &wi) in w.iter().enumerate() {
            let c1 = GRID_C1[i / 4];
            let c2 = GRID_C2[i % 4];
            rewards.push(rule.reward(c1, c2, wi));
        }
        let candidate = grid_instance(&name, rewards.clone())?;
        let TrueOptimum::Solved { basis, x, .. } = model::true_optimum(&candidate) else {
            continue;
        };
        let support: Vec<usize> = basis
            .indices()
            .iter()
            .copied()
            .filter(|&i| i < 24 && x[i] > EPS_SUPP)
            .collect();
        if support.len() != target {
            continue;
        }
        let mut bumped = rewards;
        for &arm in &support {
            bumped[arm] += SUPPORT_BUMP;
        }
        let instance = grid_instance(&name, bumped)?;
        if let TrueOptimum::Solved {
            basis,
            assumption_ok: true,
            ..
        } = model::true_optimum(&instance)
        {
            let arms: Vec<usize> = basis
                .indices()
                .iter()
                .copied()
                .filter(|&i| i < 24)
                .collect();
            if arms == support {
                return Ok(instance);
            }
        }
    }
    Err(CatalogError::GenerationFailed(MAX_GENERATION_ATTEMPTS))
}

fn draw_noise<R: Rng + ?Sized>(mode: NoiseMode, rng: &mut R) -> Vec<f64> {
    match mode {
        NoiseMode::Permutation => {
            let mut w: Vec<f64> = (0..24).map(|i| 0.02 * i as f64).collect();
            w.shuffle(rng);
            w
        }
        NoiseMode::Iid => (0..24)
            .map(|_| 0.02 * rng.random_range(0..15) as f64)
            .collect(),
    }
}

fn generate_hard_cluster(num_arms: usize, cluster_reward: f64) -> Result<Instance, CatalogError> {
    if num_arms < 3 {
        return Err(CatalogError::InvalidSpec(
            "hard cluster needs at least 3 arms".into(),
        ));
    }
    if !cluster_reward.is_finite() {
        return Err(CatalogError::InvalidSpec("cluster reward must be finite".into()));
    }
    let mut rewards = vec![-0.2, 1.2];
    let mut costs = vec![-0.2, 1.2];
    rewards.extend(std::iter::repeat_n(cluster_reward, num_arms - 2));
    costs.extend(std::iter::repeat_n(0.9, num_arms - 2));
    let name = format!("hard-cluster-{num_arms}");
    let instance = Instance::new(
        &name,
        num_arms,
        num_arms,
        rewards,
        vec![costs],
        vec![1.0],
        1.0,
        0.5,
    )?;
    match model::true_optimum(&instance) {
        TrueOptimum::Solved {
            basis,
            assumption_ok: true,
            ..
        } if basis.indices() == [0, 1] => Ok(instance),
        _ => Err(CatalogError::InvalidSpec(format!(
            "cluster reward {cluster_reward} does not leave arms 0 and 1 as the unique optimal mix"
        ))),
    }
}

fn generate_random_uniform<R: Rng + ?Sized>(
    num_arms: usize,
    num_constraints: usize,
    reward_range: (f64, f64),
    cost_range: (f64, f64),
    rng: &mut R,
) -> Result<Instance, CatalogError> {
    if num_arms == 0 || num_constraints == 0 {
        return Err(CatalogError::InvalidSpec(
            "need at least one arm and one constraint".into(),
        ));
    }
    if reward_range.0 > reward_range.1 || cost_range.0 > cost_range.1 {
        return Err(CatalogError::InvalidSpec("empty range".into()));
    }
    let name = format!("random-uniform-{num_arms}x{num_constraints}");
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let rewards = (0..num_arms)
            .map(|_| rng.random_range(reward_range.0..=reward_range.1))
            .collect();
        let costs = (0..num_constraints)
            .map(|_| {
                (0..num_arms)
                    .map(|_| rng.random_range(cost_range.0..=cost_range.1))
                    .collect()
            })
            .collect();
        let instance = Instance::new(
            &name,
            num_arms,
            num_arms,
            rewards,
            costs,
            vec![1.0; num_constraints],
            1.0,
            0.5,
        )?;
        if let TrueOptimum::Solved {
            assumption_ok: true,
            ..
        } = model::true_optimum(&instance)
        {
            return Ok(instance);
        }
    }
    Err(CatalogError::GenerationFailed(MAX_GENERATION_ATTEMPTS))
}
