//! Monte Carlo trial driver and statistics: runs identification algorithms
//! over budget grids, counts strict misidentifications, and reports error
//! rates with normal-approximation confidence intervals.
//!
//! Determinism contract: trial `t` of an algorithm with offset `o` uses the
//! stream seeded with `base_seed + o * 10^7 + t`, so cells never share or
//! reuse streams and reruns of the same spec reproduce results bit for bit.
//! Budgets reuse the same per-trial streams (common random numbers across
//! the budget axis).

use crate::algo::{self, AlgoError, Identification, ScoreFlavor};
use crate::model::{self, Instance, TrueOptimum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed stride between algorithm stream families.
pub const ALGORITHM_SEED_STRIDE: u64 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("instance '{0}' fails the uniqueness assumption; rerun with force to override")]
    AssumptionFailed(String),
    #[error("experiment spec invalid: {0}")]
    InvalidSpec(String),
    #[error("decay fit needs at least 3 budgets with error rate strictly inside (0, 1), got {0}")]
    NotEnoughPoints(usize),
    #[error("decay fit needs at least two distinct budgets")]
    DegenerateFit,
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error("csv parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

/// The three identification algorithms the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    SfsrIv,
    SfsrL,
    Uslp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::SfsrIv, Algorithm::SfsrL, Algorithm::Uslp];

    /// Stable stream offset; independent of the order algorithms appear in
    /// a spec.
    pub fn seed_offset(self) -> u64 {
        match self {
            Algorithm::SfsrIv => 0,
            Algorithm::SfsrL => 1,
            Algorithm::Uslp => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SfsrIv => "sfsr-iv",
            Algorithm::SfsrL => "sfsr-l",
            Algorithm::Uslp => "uslp",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sfsr-iv" | "sfsr_iv" | "sfsriv" => Some(Algorithm::SfsrIv),
            "sfsr-l" | "sfsr_l" | "sfsrl" => Some(Algorithm::SfsrL),
            "uslp" => Some(Algorithm::Uslp),
            _ => None,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A full experiment grid: every algorithm at every budget, `trials` runs
/// per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub instance: Instance,
    pub algorithms: Vec<Algorithm>,
    pub budgets: Vec<u64>,
    pub trials: u64,
    pub base_seed: u64,
}

impl ExperimentSpec {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::InvalidSpec("trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::InvalidSpec("no algorithms requested".into()));
        }
        if self.budgets.is_empty() {
            return Err(HarnessError::InvalidSpec("no budgets requested".into()));
        }
        if let Some(&n) = self
            .budgets
            .iter()
            .find(|&&n| n <= self.instance.num_unknown as u64)
        {
            return Err(HarnessError::InvalidSpec(format!(
                "budget {n} does not exceed the unknown-arm count {}",
                self.instance.num_unknown
            )));
        }
        Ok(())
    }
}

/// One (instance, algorithm, budget) cell of results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub instance: String,
    pub algorithm: Algorithm,
    pub budget: u64,
    pub trials: u64,
    pub errors: u64,
    pub error_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub base_seed: u64,
}

/// The answer an identification must match exactly, as a sorted index set
/// over arms and virtual arms, or the infeasibility verdict.
#[derive(Debug, Clone, PartialEq)]
enum Target {
    Support(Vec<usize>),
    Infeasible,
}

fn target_for(instance: &Instance, force: bool) -> Result<Target, HarnessError> {
    match model::true_optimum(instance) {
        TrueOptimum::Infeasible => Ok(Target::Infeasible),
        TrueOptimum::Solved {
            basis,
            assumption_ok,
            ..
        } => {
            if assumption_ok || force {
                Ok(Target::Support(basis.indices().to_vec()))
            } else {
                Err(HarnessError::AssumptionFailed(instance.name.clone()))
            }
        }
    }
}

fn is_error(target: &Target, outcome: &Identification) -> bool {
    match (target, outcome) {
        (Target::Infeasible, Identification::InfeasibleVerdict) => false,
        (Target::Infeasible, Identification::Support { .. }) => true,
        (Target::Support(_), Identification::InfeasibleVerdict) => true,
        (Target::Support(want), Identification::Support { indices, .. }) => want != indices,
    }
}

/// Runs the whole grid. Refuses instances that fail the uniqueness check
/// unless `force` is set (infeasible instances are fine: the correct answer
/// there is the infeasibility verdict). Trials within a cell run in
/// parallel; error counting is commutative, so results are deterministic.
pub fn run_trials(spec: &ExperimentSpec, force: bool) -> Result<Vec<CellResult>, HarnessError> {
    spec.validate()?;
    let target = target_for(&spec.instance, force)?;
    let mut results = Vec::with_capacity(spec.algorithms.len() * spec.budgets.len());
    for &algorithm in &spec.algorithms {
        for &budget in &spec.budgets {
            let errors = run_cell(spec, algorithm, budget, &target)?;
            let error_rate = errors as f64 / spec.trials as f64;
            let (ci_low, ci_high) = ci95(errors, spec.trials);
            results.push(CellResult {
                instance: spec.instance.name.clone(),
                algorithm,
                budget,
                trials: spec.trials,
                errors,
                error_rate,
                ci_low,
                ci_high,
                base_seed: spec.base_seed,
            });
        }
    }
    Ok(results)
}

fn run_cell(
    spec: &ExperimentSpec,
    algorithm: Algorithm,
    budget: u64,
    target: &Target,
) -> Result<u64, HarnessError> {
    let instance = &spec.instance;
    let stream_base = spec
        .base_seed
        .wrapping_add(algorithm.seed_offset().wrapping_mul(ALGORITHM_SEED_STRIDE));
    let errors = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_base.wrapping_add(t));
            let outcome = match algorithm {
                Algorithm::SfsrIv => {
                    algo::sfsr_run(instance, budget, ScoreFlavor::IntersectionValue, &mut rng)
                }
                Algorithm::SfsrL => {
                    algo::sfsr_run(instance, budget, ScoreFlavor::Lagrangian, &mut rng)
                }
                Algorithm::Uslp => algo::uslp_run(instance, budget, &mut rng),
            };
            outcome.map(|id| u64::from(is_error(target, &id)))
        })
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(errors)
}

/// Normal-approximation 95% interval for a binomial proportion, clamped to
/// `[0, 1]`.
pub fn ci95(errors: u64, trials: u64) -> (f64, f64) {
    assert!(trials >= 1 && errors <= trials);
    let p = errors as f64 / trials as f64;
    let half = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Least-squares slope of `ln(error_rate)` against the budget, over cells
/// with rates strictly inside `(0, 1)`. A negative slope is the exponential
/// decay signature.
pub fn decay_fit(points: &[(u64, f64)]) -> Result<f64, HarnessError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, p)| *p > 0.0 && *p < 1.0)
        .map(|&(n, p)| (n as f64, p.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(HarnessError::NotEnoughPoints(usable.len()));
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = usable.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = usable
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::DegenerateFit);
    }
    Ok(sxy / sxx)
}

/// Exact column order of the results CSV.
pub const CSV_HEADER: &str =
    "instance,algorithm,budget,trials,errors,error_rate,ci_low,ci_high,base_seed";

/// Renders results in the canonical CSV format. Floats use the shortest
/// round-trip representation, so identical results serialize identically.
pub fn to_csv(results: &[CellResult]) -> String {
    let mut out = String::with_capacity(64 * (results.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in results {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.instance,
            r.algorithm,
            r.budget,
            r.trials,
            r.errors,
            r.error_rate,
            r.ci_low,
            r.ci_high,
            r.base_seed
        ));
    }
    out
}

/// Parses a CSV produced by `to_csv`.
pub fn from_csv(text: &str) -> Result<Vec<CellResult>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        other => {
            return Err(HarnessError::CsvParse {
                line: 1,
                message: format!("bad header: {:?}", other.map(|(_, h)| h)),
            })
        }
    }
    let mut results = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(HarnessError::CsvParse {
                line: idx + 1,
                message: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse_err = |message: String| HarnessError::CsvParse {
            line: idx + 1,
            message,
        };
        let algorithm = Algorithm::parse(fields[1])
            .ok_or_else(|| parse_err(format!("unknown algorithm '{}'", fields[1])))?;
        results.push(CellResult {
            instance: fields[0].to_string(),
            algorithm,
            budget: fields[2].parse().map_err(|e| parse_err(format!("budget: {e}")))?,
            trials: fields[3].parse().map_err(|e| parse_err(format!("trials: {e}")))?,
            errors: fields[4].parse().map_err(|e| parse_err(format!("errors: {e}")))?,
            error_rate: fields[5]
                .parse()
                .map_err(|e| parse_err(format!("error_rate: {e}")))?,
            ci_low: fields[6].parse().map_err(|e| parse_err(format!("ci_low: {e}")))?,
            ci_high: fields[7].parse().map_err(|e| parse_err(format!("ci_high: {e}")))?,
            base_seed: fields[8]
                .parse()
                .map_err(|e| parse_err(format!("base_seed: {e}")))?,
        });
    }
    Ok(results)
}
