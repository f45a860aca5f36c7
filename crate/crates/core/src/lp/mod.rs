//! Dense linear programming: a bounded-variable revised simplex shared by the
//! scheduling and rebalancing transcriptions, plus an independent KKT check.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    cᵀz
//! subject to  A_eq z  = b_eq
//!             A_in z <= b_in
//!             lower <= z <= upper
//! ```
//!
//! Bounds may be infinite. Solutions are always basic (vertex) solutions.

mod dump;
mod kkt;
mod simplex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dump::write_fixed_column;
pub use kkt::{check_kkt, KktReport};
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),
    #[error("solution status is {0:?}, an optimal solution is required")]
    NotOptimal(LpStatus),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Dense LP in the form described in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_eq(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_matrix.nrows()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        let bad = |msg: String| Err(LpError::Malformed(msg));
        if self.eq_matrix.ncols() != n && self.eq_matrix.nrows() > 0 {
            return bad(format!(
                "equality block has {} columns, objective has {n}",
                self.eq_matrix.ncols()
            ));
        }
        if self.ineq_matrix.ncols() != n && self.ineq_matrix.nrows() > 0 {
            return bad(format!(
                "inequality block has {} columns, objective has {n}",
                self.ineq_matrix.ncols()
            ));
        }
        if self.eq_rhs.len() != self.num_eq() || self.ineq_rhs.len() != self.num_ineq() {
            return bad("right-hand side length differs from row count".into());
        }
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bound vectors must match the number of variables".into());
        }
        let finite = |v: &f64| v.is_finite();
        if !self.objective.iter().all(finite)
            || !self.eq_matrix.iter().all(finite)
            || !self.eq_rhs.iter().all(finite)
            || !self.ineq_matrix.iter().all(finite)
            || !self.ineq_rhs.iter().all(finite)
        {
            return bad("non-finite coefficient".into());
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return bad(format!("invalid bounds [{l}, {u}] for variable {j}"));
            }
        }
        Ok(())
    }

    /// `cᵀz`.
    pub fn objective_value(&self, z: &DVector<f64>) -> f64 {
        self.objective.dot(z)
    }
}

/// Row-by-row construction of a [`LinearProgram`] from sparse row entries.
#[derive(Debug, Clone)]
pub struct LpBuilder {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eq_rows: Vec<(Vec<(usize, f64)>, f64)>,
    ineq_rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl LpBuilder {
    /// `n` variables with zero cost and bounds `[0, +inf)`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_cost(&mut self, j: usize, c: f64) -> &mut Self {
        self.objective[j] = c;
        self
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn add_eq(&mut self, entries: Vec<(usize, f64)>, rhs: f64) -> &mut Self {
        self.eq_rows.push((entries, rhs));
        self
    }

    pub fn add_le(&mut self, entries: Vec<(usize, f64)>, rhs: f64) -> &mut Self {
        self.ineq_rows.push((entries, rhs));
        self
    }

    pub fn num_eq(&self) -> usize {
        self.eq_rows.len()
    }

    pub fn num_ineq(&self) -> usize {
        self.ineq_rows.len()
    }

    pub fn build(self) -> LinearProgram {
        let n = self.objective.len();
        let dense = |rows: &[(Vec<(usize, f64)>, f64)]| {
            let mut m = DMatrix::zeros(rows.len(), n);
            for (i, (entries, _)) in rows.iter().enumerate() {
                for &(j, v) in entries {
                    m[(i, j)] += v;
                }
            }
            let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|(_, b)| *b));
            (m, rhs)
        };
        let (eq_matrix, eq_rhs) = dense(&self.eq_rows);
        let (ineq_matrix, ineq_rhs) = dense(&self.ineq_rows);
        LinearProgram {
            objective: DVector::from_vec(self.objective),
            eq_matrix,
            eq_rhs,
            ineq_matrix,
            ineq_rhs,
            lower: DVector::from_vec(self.lower),
            upper: DVector::from_vec(self.upper),
        }
    }
}

/// Result of [`solve_lp`]. Dual signs follow the minimization convention:
/// inequality duals are `<= 0`, and `reduced_costs = c - A_eqᵀ y_eq - A_inᵀ y_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    pub eq_duals: DVector<f64>,
    pub ineq_duals: DVector<f64>,
    pub reduced_costs: DVector<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
