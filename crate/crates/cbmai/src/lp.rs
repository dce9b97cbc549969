//! Small-LP machinery shared by every algorithm: standard-form construction,
//! basis enumeration, basic feasible solutions, an enumeration-based primal
//! solver, and dual certificates.
//!
//! The LPs here have at most a few dozen variables and `L + 1 <= 8` rows, so
//! the primal solver enumerates every basis instead of pivoting. Enumeration
//! doubles as the scoring engine for the elimination algorithms: one pass
//! over all bases yields both the optimum and the per-arm score maxima.

use crate::linalg::{for_each_combination, solve_square, DenseMat, MAX_SQUARE};
use crate::model::Instance;
use thiserror::Error;

/// Determinant magnitude at or below which a basis counts as singular.
pub const EPS_SING: f64 = 1e-10;
/// Tolerance for nonnegativity of basic solutions.
pub const EPS_FEAS: f64 = 1e-9;
/// Tolerance on linear residuals `A x - b`.
pub const EPS_LIN: f64 = 1e-9;
/// Tolerance for treating two objective values as tied.
pub const EPS_VAL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("basis indices must be strictly increasing, got {0:?}")]
    UnsortedBasis(Vec<usize>),
    #[error("basis {basis:?} does not fit an LP with {num_vars} variables and basis size {size}")]
    BasisShape {
        basis: Vec<usize>,
        num_vars: usize,
        size: usize,
    },
    #[error("constraint submatrix for basis {0:?} is singular")]
    SingularBasis(Vec<usize>),
}

/// The equality-form program `max { mu^T x : A x = b, x >= 0 }` built from an
/// instance: `x` stacks the mixing probabilities and one slack per cost
/// constraint, `A` stacks the cost rows, an identity block for the slacks,
/// and a final row of ones forcing the probabilities to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    /// Number of true arms `K`.
    pub num_arms: usize,
    /// Number of cost constraints `L`.
    pub num_constraints: usize,
    /// Objective `mu` of length `K + L` (zero on slack coordinates).
    pub objective: Vec<f64>,
    /// Constraint matrix of shape `(L + 1) x (K + L)`.
    pub constraint_matrix: DenseMat,
    /// Right-hand side `(c_bar_1, ..., c_bar_L, 1)`.
    pub rhs: Vec<f64>,
}

impl StandardLp {
    /// Total variable count `K + L`.
    pub fn num_vars(&self) -> usize {
        self.num_arms + self.num_constraints
    }

    /// Basis cardinality `L + 1`.
    pub fn basis_size(&self) -> usize {
        self.num_constraints + 1
    }
}

/// A sorted set of exactly `L + 1` distinct variable indices in `[0, K + L)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Basis(Vec<usize>);

impl Basis {
    /// Validates strictly increasing indices.
    pub fn new(indices: Vec<usize>) -> Result<Self, LpError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LpError::UnsortedBasis(indices));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    fn check_shape(&self, lp: &StandardLp) -> Result<(), LpError> {
        let ok = self.0.len() == lp.basis_size()
            && self.0.last().is_none_or(|&i| i < lp.num_vars());
        if ok {
            Ok(())
        } else {
            Err(LpError::BasisShape {
                basis: self.0.clone(),
                num_vars: lp.num_vars(),
                size: lp.basis_size(),
            })
        }
    }
}

/// Outcome of solving one basis system `A_I y = b`.
#[derive(Debug, Clone, PartialEq)]
pub enum BasicSolveOutcome {
    /// Nonnegative solution; entries in `[-EPS_FEAS, 0)` are clamped to zero.
    Feasible(Vec<f64>),
    /// The system solves but some coordinate is below `-EPS_FEAS`.
    InfeasibleBasis,
    /// `|det A_I| <= EPS_SING`.
    SingularBasis,
}

/// Outcome of the enumeration-based primal solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        value: f64,
        basis: Basis,
        /// Full-length solution, zero off the basis.
        x: Vec<f64>,
    },
    Infeasible,
}

/// Builds the standard-form triple `(A, b, mu)` from an instance's true means.
pub fn build_standard_form(instance: &Instance) -> StandardLp {
    let k = instance.num_arms;
    let l = instance.num_constraints;
    let mut a = DenseMat::zeros(l + 1, k + l);
    for row in 0..l {
        for arm in 0..k {
            a.set(row, arm, instance.mean_costs[row][arm]);
        }
        a.set(row, k + row, 1.0);
    }
    for arm in 0..k {
        a.set(l, arm, 1.0);
    }
    let mut rhs = instance.cost_bounds.clone();
    rhs.push(1.0);
    let mut objective = instance.mean_rewards.clone();
    objective.extend(std::iter::repeat_n(0.0, l));
    StandardLp {
        num_arms: k,
        num_constraints: l,
        objective,
        constraint_matrix: a,
        rhs,
    }
}

/// Classifies and solves the square system selected by `basis`.
pub fn basic_solution(lp: &StandardLp, basis: &Basis) -> BasicSolveOutcome {
    basis.check_shape(lp).expect("basis valid for lp");
    match solve_basis_system(&lp.constraint_matrix, &lp.rhs, basis.indices()) {
        None => BasicSolveOutcome::SingularBasis,
        Some(x) => {
            if x.iter().any(|&v| v < -EPS_FEAS) {
                BasicSolveOutcome::InfeasibleBasis
            } else {
                BasicSolveOutcome::Feasible(x.iter().map(|&v| v.max(0.0)).collect())
            }
        }
    }
}

/// Solves `A_I y = b` for the given columns; `None` when singular. Negative
/// entries within `EPS_FEAS` of zero are clamped, larger ones are preserved
/// so callers can classify infeasibility.
fn solve_basis_system(a: &DenseMat, b: &[f64], cols: &[usize]) -> Option<[f64; MAX_SQUARE]> {
    let m = a.rows();
    debug_assert_eq!(cols.len(), m);
    let mut square = [0.0; MAX_SQUARE * MAX_SQUARE];
    let mut rhs = [0.0; MAX_SQUARE];
    a.gather_columns(cols, &mut square[..m * m]);
    rhs[..m].copy_from_slice(b);
    let det = solve_square(&mut square, &mut rhs, m);
    if det.abs() <= EPS_SING {
        return None;
    }
    for v in &mut rhs[..m] {
        if *v < 0.0 && *v >= -EPS_FEAS {
            *v = 0.0;
        }
    }
    Some(rhs)
}

/// Enumerates every basis of the columns in `cols` (ascending index order,
/// which is lexicographic over bases) and invokes `visit` for each feasible
/// nonsingular one with the subset positions into `cols`, the Feasible-style
/// clamped basic solution, and its objective value under `obj`.
pub(crate) fn for_each_feasible_basis<F>(a: &DenseMat, b: &[f64], obj: &[f64], cols: &[usize], mut visit: F)
where
    F: FnMut(&[usize], &[f64], f64),
{
    let m = a.rows();
    if cols.len() < m {
        return;
    }
    let mut picked = [0usize; MAX_SQUARE];
    for_each_combination(cols.len(), m, |subset| {
        for (slot, &pos) in picked.iter_mut().zip(subset) {
            *slot = cols[pos];
        }
        if let Some(x) = solve_basis_system(a, b, &picked[..m]) {
            if x[..m].iter().all(|&v| v >= 0.0) {
                let value: f64 = picked[..m]
                    .iter()
                    .zip(&x[..m])
                    .map(|(&col, &xv)| obj[col] * xv)
                    .sum();
                visit(subset, &x[..m], value);
            }
        }
        true
    });
}

/// Result of `solve_restricted`: the best feasible basis over a column
/// subset, reported in full-space column indices.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RestrictedOutcome {
    Optimal {
        value: f64,
        basis: Vec<usize>,
        x_basis: Vec<f64>,
    },
    Infeasible,
}

/// Enumerative solve of `max { obj^T x : A x = b, x >= 0 }` restricted to the
/// columns in `cols` (sorted ascending). Ties within `EPS_VAL` keep the
/// lexicographically smallest basis.
pub(crate) fn solve_restricted(
    a: &DenseMat,
    b: &[f64],
    obj: &[f64],
    cols: &[usize],
) -> RestrictedOutcome {
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for_each_feasible_basis(a, b, obj, cols, |subset, x, value| {
        let better = match &best {
            None => true,
            Some((bv, _, _)) => value > bv + EPS_VAL,
        };
        if better {
            best = Some((value, subset.iter().map(|&p| cols[p]).collect(), x.to_vec()));
        }
    });
    match best {
        Some((value, basis, x_basis)) => RestrictedOutcome::Optimal {
            value,
            basis,
            x_basis,
        },
        None => RestrictedOutcome::Infeasible,
    }
}

/// Maximizes `objective` over the LP's feasible region by enumerating all
/// bases. Deterministic: value ties go to the lexicographically smallest
/// basis.
pub fn solve_primal(lp: &StandardLp, objective: &[f64]) -> LpOutcome {
    assert_eq!(objective.len(), lp.num_vars(), "objective length");
    let cols: Vec<usize> = (0..lp.num_vars()).collect();
    match solve_restricted(&lp.constraint_matrix, &lp.rhs, objective, &cols) {
        RestrictedOutcome::Infeasible => LpOutcome::Infeasible,
        RestrictedOutcome::Optimal {
            value,
            basis,
            x_basis,
        } => {
            let mut x = vec![0.0; lp.num_vars()];
            for (&col, &v) in basis.iter().zip(&x_basis) {
                x[col] = v;
            }
            LpOutcome::Optimal {
                value,
                basis: Basis(basis),
                x,
            }
        }
    }
}

/// Simplex multipliers and reduced costs for one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    /// `lambda` solving `A_I^T lambda = mu_I`, length `L + 1`.
    pub multipliers: Vec<f64>,
    /// `mu - A^T lambda`, length `K + L`; zero on basis columns.
    pub reduced_costs: Vec<f64>,
}

/// Computes the dual multipliers of `basis` for the given objective. When the
/// basis is primal-optimal for a feasible LP, the multipliers solve the dual
/// `min { b^T lambda : A^T lambda >= mu }` and every reduced cost is
/// nonpositive up to `EPS_VAL`.
pub fn dual_certificate(
    lp: &StandardLp,
    objective: &[f64],
    basis: &Basis,
) -> Result<DualCertificate, LpError> {
    basis.check_shape(lp)?;
    assert_eq!(objective.len(), lp.num_vars(), "objective length");
    let multipliers =
        dual_multipliers(&lp.constraint_matrix, objective, basis.indices())
            .ok_or_else(|| LpError::SingularBasis(basis.indices().to_vec()))?;
    let reduced_costs = reduced_costs(&lp.constraint_matrix, objective, &multipliers);
    Ok(DualCertificate {
        multipliers,
        reduced_costs,
    })
}

/// Solves `A_I^T lambda = obj_I`; `None` when the basis is singular.
pub(crate) fn dual_multipliers(a: &DenseMat, obj: &[f64], basis_cols: &[usize]) -> Option<Vec<f64>> {
    let m = a.rows();
    debug_assert_eq!(basis_cols.len(), m);
    let mut square = [0.0; MAX_SQUARE * MAX_SQUARE];
    let mut rhs = [0.0; MAX_SQUARE];
    a.gather_columns_transposed(basis_cols, &mut square[..m * m]);
    for (slot, &col) in rhs.iter_mut().zip(basis_cols) {
        *slot = obj[col];
    }
    let det = solve_square(&mut square, &mut rhs, m);
    if det.abs() <= EPS_SING {
        return None;
    }
    Some(rhs[..m].to_vec())
}

/// `obj - A^T lambda` over all columns.
pub(crate) fn reduced_costs(a: &DenseMat, obj: &[f64], lambda: &[f64]) -> Vec<f64> {
    (0..a.cols())
        .map(|col| {
            let pulled: f64 = (0..a.rows()).map(|r| a.get(r, col) * lambda[r]).sum();
            obj[col] - pulled
        })
        .collect()
}
