//! Sparse linear programs and a bounded-variable revised simplex solver.

mod lpfile;
pub mod lu;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lpfile::write_lp_format;
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

/// Feasibility tolerance on row activities and bounds.
pub const FEAS_TOL: f64 = 1e-7;
/// Optimality tolerance on reduced costs.
pub const OPT_TOL: f64 = 1e-7;
/// Smallest pivot magnitude accepted in the ratio test.
pub const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `activity` violates the row (0 when satisfied).
    pub fn violation(&self, activity: f64) -> f64 {
        match self.sense {
            Sense::Le => (activity - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - activity).max(0.0),
            Sense::Eq => (activity - self.rhs).abs(),
        }
    }
}

/// `min c^T x + offset` subject to sparse rows and column bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    pub objective: Vec<f64>,
    pub objective_offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub col_names: Vec<String>,
    pub rows: Vec<Row>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_col(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64, integer: bool) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(integer);
        self.col_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coefs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(r.activity(x)));
        let bounds = (0..self.n_cols()).map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Copy of the model with every integrality mark removed.
    pub fn relaxed(&self) -> LpModel {
        let mut m = self.clone();
        m.integer.iter_mut().for_each(|f| *f = false);
        m
    }

    pub fn check(&self) -> Result<(), LpError> {
        let n = self.n_cols();
        if self.lower.len() != n || self.upper.len() != n || self.integer.len() != n || self.col_names.len() != n {
            return Err(LpError::Malformed("column arrays differ in length".into()));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(LpError::Malformed(format!(
                    "column {} has bounds [{}, {}]",
                    self.col_names[j], self.lower[j], self.upper[j]
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::Malformed(format!("column {} has a non-finite cost", self.col_names[j])));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {} has a non-finite rhs", r.name)));
            }
            if let Some(&(j, a)) = r.coefs.iter().find(|&&(j, a)| j >= n || !a.is_finite()) {
                return Err(LpError::Malformed(format!("row {} has entry ({j}, {a})", r.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

/// Status of every structural column and every row (through its logical
/// variable). A valid basis has exactly `n_rows` basic entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub cols: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

impl Basis {
    pub fn n_basic(&self) -> usize {
        self.cols.iter().chain(&self.rows).filter(|s| **s == VarStatus::Basic).count()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// Row prices: `d objective / d rhs`. Nonnegative on binding `>=` rows
    /// of a minimization.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub iterations: usize,
}

impl LpSolution {
    /// Objective of the dual problem evaluated at the returned prices.
    pub fn dual_objective(&self, model: &LpModel) -> f64 {
        let mut v = model.objective_offset;
        for (r, &y) in model.rows.iter().zip(&self.duals) {
            v += y * r.rhs;
        }
        for j in 0..model.n_cols() {
            let d = self.reduced_costs[j];
            let bound = if d > 0.0 { model.lower[j] } else { model.upper[j] };
            if d != 0.0 && bound.is_finite() {
                v += d * bound;
            }
        }
        v
    }
}
