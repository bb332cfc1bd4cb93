//! Linear programming: problem data, an interior-point solver, the
//! basis-pursuit and near-orthogonality formulations, and an exhaustive
//! sparsest-solution search used as a reference on tiny instances.
//!
//! All programs are minimizations over
//! `{ x : eq_lhs * x = eq_rhs, var_lower <= x <= var_upper }`,
//! with infinite bounds allowed.

mod bruteforce;
mod builders;
mod ipm;
mod lpfile;

pub use bruteforce::{l0_min_bruteforce, BRUTEFORCE_MAX_COLS};
pub use builders::{build_basis_pursuit, build_near_orthogonality_lp, BasisPursuit};
pub use ipm::solve_lp;
pub use lpfile::write_lp_format;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix, Vector};

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid bounds on variable {index}: [{lower}, {upper}]")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no solution with support size <= {max_support} fits the system")]
    NoSparseSolution { max_support: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LpError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LpStatus::Optimal => "Optimal",
            LpStatus::Infeasible => "Infeasible",
            LpStatus::Unbounded => "Unbounded",
            LpStatus::IterationLimit => "IterationLimit",
        };
        f.write_str(s)
    }
}

/// Tolerances and limits for [`solve_lp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative primal and dual infeasibility target.
    pub feas_tol: f64,
    /// Relative duality-gap target, `|primal - dual| / (1 + |primal|)`.
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.feas_tol > 0.0 && self.gap_tol > 0.0) {
            return Err(LpError::InvalidOptions(format!(
                "tolerances must be positive (feas_tol={}, gap_tol={})",
                self.feas_tol, self.gap_tol
            )));
        }
        if self.max_iter == 0 {
            return Err(LpError::InvalidOptions("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// `min c·x  s.t.  E x = f,  lower <= x <= upper`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vector,
    eq_lhs: Matrix,
    eq_rhs: Vector,
    var_lower: Vec<f64>,
    var_upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(
        objective: Vector,
        eq_lhs: Matrix,
        eq_rhs: Vector,
        var_lower: Vec<f64>,
        var_upper: Vec<f64>,
    ) -> Result<Self> {
        let n = eq_lhs.cols();
        if objective.dim() != n || var_lower.len() != n || var_upper.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{} columns, objective {}, lower {}, upper {}",
                n,
                objective.dim(),
                var_lower.len(),
                var_upper.len()
            )));
        }
        if eq_rhs.dim() != eq_lhs.rows() {
            return Err(LpError::DimensionMismatch(format!(
                "{} equality rows but rhs of dim {}",
                eq_lhs.rows(),
                eq_rhs.dim()
            )));
        }
        for (index, (&lower, &upper)) in var_lower.iter().zip(&var_upper).enumerate() {
            if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
                return Err(LpError::InvalidBounds { index, lower, upper });
            }
        }
        Ok(Self {
            objective,
            eq_lhs,
            eq_rhs,
            var_lower,
            var_upper,
        })
    }

    pub fn objective(&self) -> &Vector {
        &self.objective
    }

    pub fn eq_lhs(&self) -> &Matrix {
        &self.eq_lhs
    }

    pub fn eq_rhs(&self) -> &Vector {
        &self.eq_rhs
    }

    pub fn var_lower(&self) -> &[f64] {
        &self.var_lower
    }

    pub fn var_upper(&self) -> &[f64] {
        &self.var_upper
    }

    pub fn num_vars(&self) -> usize {
        self.eq_lhs.cols()
    }

    pub fn num_constraints(&self) -> usize {
        self.eq_lhs.rows()
    }

    /// `‖E x − f‖∞`.
    pub fn equality_residual(&self, x: &[f64]) -> f64 {
        (0..self.eq_lhs.rows())
            .map(|i| {
                let lhs: f64 = self.eq_lhs.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                (lhs - self.eq_rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest violation of the variable bounds.
    pub fn bound_violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.var_lower.iter().zip(&self.var_upper))
            .map(|(&v, (&l, &u))| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vector,
    pub objective_value: f64,
    pub status: LpStatus,
    pub iterations: usize,
    /// Relative gap between primal and dual objectives at the last iterate.
    pub duality_gap: f64,
    /// Absolute `‖E x − f‖∞` of the returned point.
    pub primal_residual: f64,
    /// Multipliers for the equality rows (zero for rows dropped as redundant).
    pub row_duals: Vector,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
