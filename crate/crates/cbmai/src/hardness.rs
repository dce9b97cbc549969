//! Numerical estimation of the instance-hardness gaps and the closed-form
//! theoretical rate exponents built from them.
//!
//! The gap programs minimize a noise-weighted squared perturbation of the
//! unknown means subject to nonconvex feasibility/overtake constraints. They
//! have no closed form, so each one is estimated by multi-start penalty
//! minimization (pattern-search coordinate descent with doubling penalty
//! weights), followed by a Gauss-Newton polish onto the constraint boundary.
//! Every reported value is a witness: the minimizing perturbation itself
//! satisfies the defining constraints within `EPS_FEAS`, so estimates can
//! overshoot the true infimum but never undershoot it.

use crate::linalg::{solve_square, MAX_SQUARE};
use crate::lp::{Basis, EPS_FEAS, EPS_SING};
use crate::model::{self, Instance, TrueOptimum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Gap values at or below this threshold classify as zero.
pub const TOL_GAP: f64 = 1e-3;
/// Random restarts per gap estimate.
pub const RESTARTS: usize = 64;
/// Penalty-doubling rounds per restart.
pub const PENALTY_ROUNDS: usize = 10;
/// Initial penalty weight.
pub const PENALTY_INITIAL: f64 = 10.0;

const PENALTY_SINGULAR: f64 = 1e6;
const POLISH_TARGET: f64 = 1e-10;
const SEED_BASE: u64 = 0xCBA1_2024;

#[derive(Debug, Error, PartialEq)]
pub enum HardnessError {
    #[error("instance '{0}' fails the uniqueness assumption; gaps are undefined")]
    AssumptionFailed(String),
    #[error("instance '{0}' has no feasible solution; gaps are undefined")]
    Infeasible(String),
    #[error("gap estimation requires strictly positive noise levels")]
    ZeroNoise,
}

/// The full hardness profile of an instance. All gaps are squared and use
/// `f64::INFINITY` for empty constraint sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub instance: String,
    /// Squared distance to the nearest cost perturbation that makes the
    /// optimal basis infeasible or singular.
    pub delta0_sq: f64,
    /// Squared basis value gap for every basis, in lexicographic order.
    pub basis_gaps: Vec<(Basis, f64)>,
    /// Per-index gap: the minimum basis gap over bases containing the index.
    pub arm_gaps: Vec<f64>,
    /// `arm_gaps` sorted ascending (ties broken by arm index).
    pub sorted_gaps: Vec<f64>,
    /// Budget-normalization coefficient `1 / (3 ((L+1)/2 + ln K0))`.
    pub n_tilde_coeff: f64,
}

/// Closed-form rate exponents per unit budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBounds {
    /// Guaranteed exponent coefficient of the successive-reject algorithm.
    pub sfsr_exponent_coeff: f64,
    /// Exponent ceiling for any consistent algorithm.
    pub lower_bound_rate: f64,
    /// Exponent ceiling for the uniform-sampling baseline.
    pub uslp_rate: f64,
}

/// Estimates the squared basis value gap of `basis`: the cheapest
/// noise-weighted move of the unknown means under which `basis` stays
/// feasible, the optimal basis stays feasible, and `basis` matches or beats
/// its value. Returns `f64::INFINITY` when no restart reaches the
/// constraint set.
pub fn estimate_delta_j(instance: &Instance, basis: &Basis) -> Result<f64, HardnessError> {
    let optimal = checked_optimum(instance)?;
    Ok(estimate_delta_j_inner(instance, optimal.indices(), basis.indices()))
}

/// Minimum basis value gap over all bases containing `arm`.
pub fn estimate_delta_a(instance: &Instance, arm: usize) -> Result<f64, HardnessError> {
    let optimal = checked_optimum(instance)?;
    let num_vars = instance.num_vars();
    let m = instance.num_constraints + 1;
    let mut bases: Vec<Vec<usize>> = Vec::new();
    crate::linalg::for_each_combination(num_vars, m, |subset| {
        if subset.contains(&arm) {
            bases.push(subset.to_vec());
        }
        true
    });
    let best = bases
        .par_iter()
        .map(|j| estimate_delta_j_inner(instance, optimal.indices(), j))
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}

/// Estimates the squared optimal-support infeasibility gap: the cheapest
/// cost move making the optimal basis singular or its basic solution
/// negative.
pub fn estimate_delta0(instance: &Instance) -> Result<f64, HardnessError> {
    let optimal = checked_optimum(instance)?;
    Ok(estimate_delta0_inner(instance, optimal.indices()))
}

/// Computes every basis gap, the per-arm minima, and the sorted profile.
pub fn gap_report(instance: &Instance) -> Result<GapReport, HardnessError> {
    let optimal = checked_optimum(instance)?;
    let num_vars = instance.num_vars();
    let m = instance.num_constraints + 1;
    let mut all_bases: Vec<Vec<usize>> = Vec::new();
    crate::linalg::for_each_combination(num_vars, m, |subset| {
        all_bases.push(subset.to_vec());
        true
    });
    let gaps: Vec<f64> = all_bases
        .par_iter()
        .map(|j| estimate_delta_j_inner(instance, optimal.indices(), j))
        .collect();
    let mut arm_gaps = vec![f64::INFINITY; num_vars];
    for (j, &gap) in all_bases.iter().zip(&gaps) {
        for &a in j {
            if gap < arm_gaps[a] {
                arm_gaps[a] = gap;
            }
        }
    }
    let mut order: Vec<usize> = (0..num_vars).collect();
    order.sort_by(|&a, &b| arm_gaps[a].total_cmp(&arm_gaps[b]).then(a.cmp(&b)));
    let sorted_gaps: Vec<f64> = order.iter().map(|&a| arm_gaps[a]).collect();
    let basis_gaps = all_bases
        .into_iter()
        .map(|idx| Basis::new(idx).expect("enumeration yields sorted bases"))
        .zip(gaps)
        .collect();
    let k0 = instance.num_unknown as f64;
    let l = instance.num_constraints as f64;
    Ok(GapReport {
        instance: instance.name.clone(),
        delta0_sq: estimate_delta0_inner(instance, optimal.indices()),
        basis_gaps,
        arm_gaps,
        sorted_gaps,
        n_tilde_coeff: 1.0 / (3.0 * ((l + 1.0) / 2.0 + k0.ln())),
    })
}

/// Evaluates the closed-form rate expressions from a gap report.
pub fn rate_bounds(instance: &Instance, gaps: &GapReport) -> RateBounds {
    let k = instance.num_arms;
    let l = instance.num_constraints;
    // Delta_(L+2)^2: the smallest nonzero entry of the sorted profile
    let delta_l2 = gaps.sorted_gaps[l + 1];
    let lower_bound_rate = 0.5 * gaps.delta0_sq.min(delta_l2);
    let uslp_rate = lower_bound_rate / k as f64;
    let mut worst = gaps.delta0_sq / k as f64;
    for i in 2..=k {
        worst = worst.min(gaps.sorted_gaps[l + i - 1] / i as f64);
    }
    let sfsr_exponent_coeff = worst / (3.0 * ((l as f64 + 1.0) / 2.0 + (k as f64).ln()));
    RateBounds {
        sfsr_exponent_coeff,
        lower_bound_rate,
        uslp_rate,
    }
}

impl GapReport {
    /// JSON rendering with `"inf"` standing in for infinite gaps (plain JSON
    /// has no infinity literal).
    pub fn to_json(&self) -> serde_json::Value {
        let gap_value = |g: f64| -> serde_json::Value {
            if g.is_finite() {
                serde_json::json!(g)
            } else {
                serde_json::json!("inf")
            }
        };
        serde_json::json!({
            "instance": self.instance,
            "delta0_sq": gap_value(self.delta0_sq),
            "basis_gaps": self
                .basis_gaps
                .iter()
                .map(|(b, g)| serde_json::json!({"basis": b.indices(), "gap_sq": gap_value(*g)}))
                .collect::<Vec<_>>(),
            "arm_gaps": self.arm_gaps.iter().map(|&g| gap_value(g)).collect::<Vec<_>>(),
            "sorted_gaps": self.sorted_gaps.iter().map(|&g| gap_value(g)).collect::<Vec<_>>(),
            "n_tilde_coeff": self.n_tilde_coeff,
        })
    }
}

fn checked_optimum(instance: &Instance) -> Result<Basis, HardnessError> {
    if instance.reward_stddev <= 0.0 || instance.cost_stddev <= 0.0 {
        return Err(HardnessError::ZeroNoise);
    }
    match model::true_optimum(instance) {
        TrueOptimum::Infeasible => Err(HardnessError::Infeasible(instance.name.clone())),
        TrueOptimum::Solved {
            basis,
            assumption_ok,
            ..
        } => {
            if assumption_ok {
                Ok(basis)
            } else {
                Err(HardnessError::AssumptionFailed(instance.name.clone()))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// perturbation problems
// ---------------------------------------------------------------------------

/// Outcome of evaluating the constraint vector at a perturbation.
enum ConstraintEval {
    /// Constraint values; nonnegative entries mean satisfied.
    Values,
    /// A required basis system is singular: the point is unusable.
    SingularReject,
    /// Singularity itself is the target set (infeasibility gap): satisfied.
    SingularAccept,
}

trait PerturbationProblem: Sync {
    fn dim(&self) -> usize;
    /// The unperturbed coordinates.
    fn base_point(&self) -> Vec<f64>;
    /// Noise-weighted squared distance from the base point.
    fn distance(&self, z: &[f64]) -> f64;
    /// Fills `g` with constraint values (satisfied iff `g_i >= 0`).
    fn constraints(&self, z: &[f64], g: &mut Vec<f64>) -> ConstraintEval;
    /// Extra deterministic seed points beyond the base point.
    fn seeds(&self) -> Vec<Vec<f64>>;
    /// Per-coordinate noise scale for random restarts.
    fn coordinate_scale(&self, coord: usize) -> f64;

    fn penalty(&self, z: &[f64], g: &mut Vec<f64>) -> f64 {
        match self.constraints(z, g) {
            ConstraintEval::SingularReject => PENALTY_SINGULAR,
            ConstraintEval::SingularAccept => 0.0,
            ConstraintEval::Values => g
                .iter()
                .map(|&v| {
                    let viol = (-v).max(0.0);
                    viol * viol
                })
                .sum(),
        }
    }

    /// True when the point is a genuine witness for the constraint set.
    fn verify(&self, z: &[f64], g: &mut Vec<f64>) -> bool {
        match self.constraints(z, g) {
            ConstraintEval::SingularReject => false,
            ConstraintEval::SingularAccept => true,
            ConstraintEval::Values => g.iter().all(|&v| v >= -EPS_FEAS),
        }
    }
}

/// Shared column scratch for a basis system under perturbed means.
struct BasisView<'a> {
    instance: &'a Instance,
    columns: Vec<usize>,
}

impl BasisView<'_> {
    /// Entry of the perturbed constraint matrix. `cost_offset` maps an
    /// unknown arm to the z-offset of its cost block, or `None` for fixed
    /// columns.
    #[inline]
    fn matrix_entry<F: Fn(usize) -> Option<usize>>(
        &self,
        row: usize,
        col: usize,
        z: &[f64],
        cost_offset: &F,
    ) -> f64 {
        let k = self.instance.num_arms;
        let l = self.instance.num_constraints;
        if row < l {
            if col < k {
                match cost_offset(col) {
                    Some(base) => z[base + row],
                    None => self.instance.mean_costs[row][col],
                }
            } else if col == k + row {
                1.0
            } else {
                0.0
            }
        } else if col < k {
            1.0
        } else {
            0.0
        }
    }

    /// Solves the perturbed square system for this basis. `None` on a pivot
    /// breakdown or determinant within `EPS_SING`.
    fn solve<F: Fn(usize) -> Option<usize>>(
        &self,
        z: &[f64],
        cost_offset: &F,
        out: &mut [f64; MAX_SQUARE],
    ) -> bool {
        let m = self.instance.num_constraints + 1;
        let mut square = [0.0; MAX_SQUARE * MAX_SQUARE];
        for (j, &col) in self.columns.iter().enumerate() {
            for row in 0..m {
                square[row * m + j] = self.matrix_entry(row, col, z, cost_offset);
            }
        }
        let mut rhs = [0.0; MAX_SQUARE];
        for (slot, &cb) in rhs.iter_mut().zip(&self.instance.cost_bounds) {
            *slot = cb;
        }
        rhs[m - 1] = 1.0;
        let det = solve_square(&mut square, &mut rhs, m);
        if det.abs() <= EPS_SING {
            return false;
        }
        out[..m].copy_from_slice(&rhs[..m]);
        true
    }
}

/// The basis-value-gap program: perturb rewards and costs of the arms in
/// `(J u I*) n [K0]` so that both bases stay feasible and `J` overtakes.
/// Coordinates per movable arm: `[reward, cost_1, ..., cost_L]`.
struct DeltaJProblem<'a> {
    instance: &'a Instance,
    istar: BasisView<'a>,
    other: BasisView<'a>,
    /// Movable unknown arms, ascending.
    scope: Vec<usize>,
    /// z-offset of each movable arm's block, indexed by arm.
    slot: Vec<Option<usize>>,
}

impl<'a> DeltaJProblem<'a> {
    fn new(instance: &'a Instance, istar: &[usize], other: &[usize]) -> Self {
        let mut scope: Vec<usize> = istar
            .iter()
            .chain(other)
            .copied()
            .filter(|&a| a < instance.num_unknown)
            .collect();
        scope.sort_unstable();
        scope.dedup();
        let mut slot = vec![None; instance.num_arms];
        let width = instance.num_constraints + 1;
        for (i, &arm) in scope.iter().enumerate() {
            slot[arm] = Some(i * width);
        }
        Self {
            instance,
            istar: BasisView {
                instance,
                columns: istar.to_vec(),
            },
            other: BasisView {
                instance,
                columns: other.to_vec(),
            },
            scope,
            slot,
        }
    }

    fn reward(&self, arm: usize, z: &[f64]) -> f64 {
        match self.slot.get(arm).copied().flatten() {
            Some(base) => z[base],
            None => {
                if arm < self.instance.num_arms {
                    self.instance.mean_rewards[arm]
                } else {
                    0.0
                }
            }
        }
    }

    fn basis_value(&self, view: &BasisView, x: &[f64], z: &[f64]) -> f64 {
        view.columns
            .iter()
            .zip(x)
            .map(|(&col, &xv)| {
                if col < self.instance.num_arms {
                    self.reward(col, z) * xv
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn cost_offset(&self) -> impl Fn(usize) -> Option<usize> + '_ {
        |arm| self.slot[arm].map(|base| base + 1)
    }

    /// Least-norm reward shift that lets `other` tie `istar` at true costs;
    /// a strong seed whenever both bases are feasible as-is.
    fn analytic_reward_seed(&self) -> Option<Vec<f64>> {
        let base = self.base_point();
        let mut xi = [0.0; MAX_SQUARE];
        let mut xj = [0.0; MAX_SQUARE];
        if !self.istar.solve(&base, &self.cost_offset(), &mut xi)
            || !self.other.solve(&base, &self.cost_offset(), &mut xj)
        {
            return None;
        }
        let m = self.instance.num_constraints + 1;
        if xi[..m].iter().any(|&v| v < -EPS_FEAS) || xj[..m].iter().any(|&v| v < -EPS_FEAS) {
            return None;
        }
        let gap = self.basis_value(&self.istar, &xi[..m], &base)
            - self.basis_value(&self.other, &xj[..m], &base);
        if gap <= 0.0 {
            return Some(base);
        }
        // weight per movable arm: its solution mass in `other` minus in `istar`
        let mut weights = vec![0.0; self.scope.len()];
        for (i, &arm) in self.scope.iter().enumerate() {
            if let Ok(pos) = self.other.columns.binary_search(&arm) {
                weights[i] += xj[pos];
            }
            if let Ok(pos) = self.istar.columns.binary_search(&arm) {
                weights[i] -= xi[pos];
            }
        }
        let norm_sq: f64 = weights.iter().map(|w| w * w).sum();
        if norm_sq <= 1e-14 {
            return None;
        }
        let mut z = base;
        let width = self.instance.num_constraints + 1;
        let push = gap * (1.0 + 1e-9) / norm_sq;
        for (i, w) in weights.iter().enumerate() {
            z[i * width] += push * w;
        }
        Some(z)
    }
}

impl PerturbationProblem for DeltaJProblem<'_> {
    fn dim(&self) -> usize {
        self.scope.len() * (self.instance.num_constraints + 1)
    }

    fn base_point(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim());
        for &arm in &self.scope {
            z.push(self.instance.mean_rewards[arm]);
            for l in 0..self.instance.num_constraints {
                z.push(self.instance.mean_costs[l][arm]);
            }
        }
        z
    }

    fn distance(&self, z: &[f64]) -> f64 {
        let width = self.instance.num_constraints + 1;
        let inv_r = self.instance.reward_stddev.powi(-2);
        let inv_c = self.instance.cost_stddev.powi(-2);
        let mut acc = 0.0;
        for (i, &arm) in self.scope.iter().enumerate() {
            let dr = self.instance.mean_rewards[arm] - z[i * width];
            acc += inv_r * dr * dr;
            for l in 0..self.instance.num_constraints {
                let dc = self.instance.mean_costs[l][arm] - z[i * width + 1 + l];
                acc += inv_c * dc * dc;
            }
        }
        acc
    }

    fn constraints(&self, z: &[f64], g: &mut Vec<f64>) -> ConstraintEval {
        g.clear();
        let m = self.instance.num_constraints + 1;
        let mut xi = [0.0; MAX_SQUARE];
        let mut xj = [0.0; MAX_SQUARE];
        let offset = self.cost_offset();
        if !self.istar.solve(z, &offset, &mut xi) || !self.other.solve(z, &offset, &mut xj) {
            return ConstraintEval::SingularReject;
        }
        g.extend_from_slice(&xi[..m]);
        g.extend_from_slice(&xj[..m]);
        let vi = self.basis_value(&self.istar, &xi[..m], z);
        let vj = self.basis_value(&self.other, &xj[..m], z);
        g.push(vj - vi);
        ConstraintEval::Values
    }

    fn seeds(&self) -> Vec<Vec<f64>> {
        self.analytic_reward_seed().into_iter().collect()
    }

    fn coordinate_scale(&self, coord: usize) -> f64 {
        let width = self.instance.num_constraints + 1;
        if coord.is_multiple_of(width) {
            self.instance.reward_stddev
        } else {
            self.instance.cost_stddev
        }
    }
}

/// The infeasibility-gap program: perturb the costs of the optimal basis's
/// unknown arms until the basis system turns singular or loses
/// nonnegativity. Coordinates per movable arm: `[cost_1, ..., cost_L]`.
struct Delta0Problem<'a> {
    instance: &'a Instance,
    istar: BasisView<'a>,
    scope: Vec<usize>,
    slot: Vec<Option<usize>>,
}

impl<'a> Delta0Problem<'a> {
    fn new(instance: &'a Instance, istar: &[usize]) -> Self {
        let scope: Vec<usize> = istar
            .iter()
            .copied()
            .filter(|&a| a < instance.num_unknown)
            .collect();
        let mut slot = vec![None; instance.num_arms];
        for (i, &arm) in scope.iter().enumerate() {
            slot[arm] = Some(i * instance.num_constraints);
        }
        Self {
            instance,
            istar: BasisView {
                instance,
                columns: istar.to_vec(),
            },
            scope,
            slot,
        }
    }

    fn cost_offset(&self) -> impl Fn(usize) -> Option<usize> + '_ {
        |arm| self.slot[arm]
    }

    /// True when the perturbed basis system is singular or has a
    /// nonpositive coordinate (the target set's closure).
    fn in_target(&self, z: &[f64]) -> bool {
        let mut x = [0.0; MAX_SQUARE];
        if !self.istar.solve(z, &self.cost_offset(), &mut x) {
            return true;
        }
        let m = self.instance.num_constraints + 1;
        x[..m].iter().any(|&v| v <= 0.0)
    }

    /// One-dimensional probes: push each cost coordinate until the basis
    /// breaks, then bisect back to the boundary.
    fn probe_seeds(&self) -> Vec<Vec<f64>> {
        let base = self.base_point();
        let mut seeds = Vec::new();
        for coord in 0..self.dim() {
            for dir in [1.0, -1.0] {
                let mut lo = 0.0;
                let mut hi = None;
                let mut t = 0.01;
                while t < 16.0 {
                    let mut z = base.clone();
                    z[coord] += dir * t;
                    if self.in_target(&z) {
                        hi = Some(t);
                        break;
                    }
                    lo = t;
                    t *= 1.6;
                }
                let Some(mut hi) = hi else { continue };
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    let mut z = base.clone();
                    z[coord] += dir * mid;
                    if self.in_target(&z) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let mut z = base.clone();
                z[coord] += dir * hi;
                seeds.push(z);
            }
        }
        seeds
    }
}

impl PerturbationProblem for Delta0Problem<'_> {
    fn dim(&self) -> usize {
        self.scope.len() * self.instance.num_constraints
    }

    fn base_point(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim());
        for &arm in &self.scope {
            for l in 0..self.instance.num_constraints {
                z.push(self.instance.mean_costs[l][arm]);
            }
        }
        z
    }

    fn distance(&self, z: &[f64]) -> f64 {
        let inv_c = self.instance.cost_stddev.powi(-2);
        let l = self.instance.num_constraints;
        let mut acc = 0.0;
        for (i, &arm) in self.scope.iter().enumerate() {
            for row in 0..l {
                let dc = self.instance.mean_costs[row][arm] - z[i * l + row];
                acc += inv_c * dc * dc;
            }
        }
        acc
    }

    fn constraints(&self, z: &[f64], g: &mut Vec<f64>) -> ConstraintEval {
        g.clear();
        let mut x = [0.0; MAX_SQUARE];
        if !self.istar.solve(z, &self.cost_offset(), &mut x) {
            return ConstraintEval::SingularAccept;
        }
        let m = self.instance.num_constraints + 1;
        let min_coord = x[..m].iter().copied().fold(f64::INFINITY, f64::min);
        // satisfied iff some coordinate reaches zero or below
        g.push(-min_coord);
        ConstraintEval::Values
    }

    fn seeds(&self) -> Vec<Vec<f64>> {
        self.probe_seeds()
    }

    fn coordinate_scale(&self, _coord: usize) -> f64 {
        self.instance.cost_stddev
    }
}

// ---------------------------------------------------------------------------
// the shared optimizer
// ---------------------------------------------------------------------------

fn estimate_delta_j_inner(instance: &Instance, istar: &[usize], other: &[usize]) -> f64 {
    if other == istar {
        return 0.0;
    }
    let problem = DeltaJProblem::new(instance, istar, other);
    minimize_witness(&problem)
}

fn estimate_delta0_inner(instance: &Instance, istar: &[usize]) -> f64 {
    let problem = Delta0Problem::new(instance, istar);
    minimize_witness(&problem)
}

/// Multi-start penalty minimization. Restarts run independently; each one
/// pattern-searches the penalized objective through the doubling schedule,
/// polishes onto the constraint boundary, and is verified before its
/// distance counts. Returns the smallest verified distance, or infinity.
fn minimize_witness<P: PerturbationProblem>(problem: &P) -> f64 {
    let base = problem.base_point();
    if problem.dim() == 0 {
        let mut g = Vec::new();
        return if problem.verify(&base, &mut g) {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let seeds = problem.seeds();
    let best = (0..RESTARTS)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED_BASE ^ (restart as u64));
            let mut z = if restart == 0 {
                base.clone()
            } else if restart <= seeds.len() {
                seeds[restart - 1].clone()
            } else {
                let scale = [0.1, 0.3, 0.7, 1.5][restart % 4];
                let mut z = base.clone();
                for (i, v) in z.iter_mut().enumerate() {
                    let noise: f64 = rng.sample(StandardNormal);
                    *v += noise * scale * problem.coordinate_scale(i);
                }
                z
            };
            let mut g = Vec::new();
            let mut weight = PENALTY_INITIAL;
            for round in 0..PENALTY_ROUNDS {
                // later rounds start near-converged; small steps suffice
                let step_scale = if round == 0 { 0.25 } else { 0.05 };
                pattern_search(problem, &mut z, weight, step_scale, &mut g);
                weight *= 2.0;
            }
            polish(problem, &mut z, &mut g);
            if problem.verify(&z, &mut g) {
                problem.distance(&z)
            } else {
                f64::INFINITY
            }
        })
        .reduce(|| f64::INFINITY, f64::min);
    best
}

/// Coordinate pattern search on `distance + weight * penalty`.
fn pattern_search<P: PerturbationProblem>(
    problem: &P,
    z: &mut [f64],
    weight: f64,
    step_scale: f64,
    g: &mut Vec<f64>,
) {
    let dim = z.len();
    let mut steps: Vec<f64> = (0..dim)
        .map(|i| step_scale * problem.coordinate_scale(i).max(0.05))
        .collect();
    let eval = |z: &[f64], g: &mut Vec<f64>| problem.distance(z) + weight * problem.penalty(z, g);
    let mut current = eval(z, g);
    for _ in 0..400 {
        let mut improved = false;
        for i in 0..dim {
            let step = steps[i];
            let original = z[i];
            z[i] = original + step;
            let up = eval(z, g);
            if up + 1e-15 < current {
                current = up;
                steps[i] = (step * 1.6).min(1.0);
                improved = true;
                continue;
            }
            z[i] = original - step;
            let down = eval(z, g);
            if down + 1e-15 < current {
                current = down;
                steps[i] = (step * 1.6).min(1.0);
                improved = true;
                continue;
            }
            z[i] = original;
            steps[i] = step * 0.5;
        }
        if !improved && steps.iter().all(|&s| s < 1e-7) {
            break;
        }
    }
}

/// Gauss-Newton projection of near-boundary violations onto the constraint
/// set: drives every constraint below `POLISH_TARGET` up to the target using
/// least-norm ridge steps with a numerical Jacobian.
fn polish<P: PerturbationProblem>(problem: &P, z: &mut [f64], g: &mut Vec<f64>) {
    let dim = z.len();
    for _ in 0..12 {
        match problem.constraints(z, g) {
            ConstraintEval::SingularAccept => return,
            ConstraintEval::SingularReject => return,
            ConstraintEval::Values => {}
        }
        let active: Vec<usize> = (0..g.len())
            .filter(|&i| g[i] < POLISH_TARGET)
            .collect();
        if active.is_empty() {
            return;
        }
        let g0: Vec<f64> = active.iter().map(|&i| g[i]).collect();
        // numerical Jacobian of the active constraints
        let h = 1e-7;
        let mut jac = vec![vec![0.0; dim]; active.len()];
        for col in 0..dim {
            let saved = z[col];
            z[col] = saved + h;
            match problem.constraints(z, g) {
                ConstraintEval::Values => {
                    for (row, &ci) in active.iter().enumerate() {
                        jac[row][col] = (g[ci] - g0[row]) / h;
                    }
                }
                _ => {
                    z[col] = saved;
                    return;
                }
            }
            z[col] = saved;
        }
        // least-norm step: dz = J^T (J J^T + ridge I)^{-1} (target - g0)
        let m = active.len();
        let mut gram = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                gram[r * m + c] = dot(&jac[r], &jac[c]) + if r == c { 1e-9 } else { 0.0 };
            }
        }
        let mut rhs: Vec<f64> = g0.iter().map(|&v| POLISH_TARGET - v).collect();
        if !gauss_general(&mut gram, &mut rhs, m) {
            return;
        }
        for col in 0..dim {
            let mut delta = 0.0;
            for r in 0..m {
                delta += jac[r][col] * rhs[r];
            }
            z[col] += delta;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Heap-based Gaussian elimination for the polish step's normal equations.
fn gauss_general(a: &mut [f64], b: &mut [f64], m: usize) -> bool {
    for col in 0..m {
        let mut pivot_row = col;
        let mut pivot_abs = a[col * m + col].abs();
        for r in col + 1..m {
            let cand = a[r * m + col].abs();
            if cand > pivot_abs {
                pivot_abs = cand;
                pivot_row = r;
            }
        }
        if pivot_abs < 1e-14 {
            return false;
        }
        if pivot_row != col {
            for c in 0..m {
                a.swap(pivot_row * m + c, col * m + c);
            }
            b.swap(pivot_row, col);
        }
        let pivot = a[col * m + col];
        for r in col + 1..m {
            let factor = a[r * m + col] / pivot;
            if factor != 0.0 {
                for c in col..m {
                    a[r * m + c] -= factor * a[col * m + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    for col in (0..m).rev() {
        let mut acc = b[col];
        for c in col + 1..m {
            acc -= a[col * m + c] * b[c];
        }
        b[col] = acc / a[col * m + col];
    }
    true
}
