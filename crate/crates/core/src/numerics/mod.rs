//! Dense linear algebra helpers, the matrix exponential and state-transition
//! matrices for LTI and LTV systems.

mod expm;
mod transition;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use expm::matrix_exponential;
pub use transition::{
    discretize_steps, propagate_state, step_blocks, transition_matrix, StepBlocks, StepSet,
};

/// Dense real matrix. All matrices in this crate are dense.
pub type DenseMatrix = DMatrix<f64>;
/// Dense real vector.
pub type DenseVector = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("invalid time interval: t1 = {t1} precedes t0 = {t0} or leaves [0, {horizon}]")]
    InvalidInterval { t0: f64, t1: f64, horizon: f64 },
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("matrix provider failed at t = {t}: {reason}")]
    Provider { t: f64, reason: String },
    #[error("singular matrix encountered in {0}")]
    Singular(&'static str),
}

pub(crate) fn ensure_finite(m: &DenseMatrix, what: &'static str) -> Result<(), NumericsError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite(what))
    }
}

/// Uniform partition of `[0, T]` into `K` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    steps: usize,
    horizon: f64,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self, NumericsError> {
        if steps == 0 {
            return Err(NumericsError::InvalidGrid("at least one step required".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(NumericsError::InvalidGrid(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        Ok(Self {
            steps,
            horizon,
            dt: horizon / steps as f64,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Knot `t_k`; `knot(K)` is exactly the horizon.
    pub fn knot(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt
    }

    pub fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.knot(k))
    }

    /// Index of the step containing `t` (the last step owns `t = T`).
    pub fn step_of(&self, t: f64) -> usize {
        let k = (t / self.dt).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.steps - 1)
        }
    }

    /// True when both grids describe the same partition.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps
            && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon.max(other.horizon)
    }
}

/// Supplies `(A(t), B(t))` for a linear time-varying system.
pub trait MatrixProvider: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn matrices(&self, t: f64) -> Result<(DenseMatrix, DenseMatrix), NumericsError>;
    /// Providers returning the same pair for every `t` may say so; step blocks
    /// are then computed once.
    fn is_time_invariant(&self) -> bool {
        false
    }
}

/// Linear time-invariant system `x' = A x + B u` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DenseMatrix,
    b: DenseMatrix,
    horizon: f64,
}

impl LtiSystem {
    pub fn new(a: DenseMatrix, b: DenseMatrix, horizon: f64) -> Result<Self, NumericsError> {
        if a.nrows() != a.ncols() {
            return Err(NumericsError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.nrows() == 0 || b.ncols() == 0 {
            return Err(NumericsError::DimensionMismatch {
                what: "system",
                expected: "n >= 1 and m >= 1".into(),
                found: format!("n = {}, m = {}", a.nrows(), b.ncols()),
            });
        }
        if b.nrows() != a.nrows() {
            return Err(NumericsError::DimensionMismatch {
                what: "input matrix rows",
                expected: a.nrows().to_string(),
                found: b.nrows().to_string(),
            });
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(NumericsError::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self { a, b, horizon })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn to_ltv(&self) -> LtvSystem {
        LtvSystem::new(
            Arc::new(ConstantProvider {
                a: self.a.clone(),
                b: self.b.clone(),
            }),
            self.horizon,
        )
    }
}

#[derive(Debug, Clone)]
struct ConstantProvider {
    a: DenseMatrix,
    b: DenseMatrix,
}

impl MatrixProvider for ConstantProvider {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn matrices(&self, _t: f64) -> Result<(DenseMatrix, DenseMatrix), NumericsError> {
        Ok((self.a.clone(), self.b.clone()))
    }

    fn is_time_invariant(&self) -> bool {
        true
    }
}

/// Provider built from a closure, mostly for tests and ad-hoc LTV systems.
pub struct FnProvider<F> {
    n: usize,
    m: usize,
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(f64) -> (DenseMatrix, DenseMatrix) + Send + Sync,
{
    pub fn new(n: usize, m: usize, f: F) -> Self {
        Self { n, m, f }
    }
}

impl<F> MatrixProvider for FnProvider<F>
where
    F: Fn(f64) -> (DenseMatrix, DenseMatrix) + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.n
    }

    fn input_dim(&self) -> usize {
        self.m
    }

    fn matrices(&self, t: f64) -> Result<(DenseMatrix, DenseMatrix), NumericsError> {
        Ok((self.f)(t))
    }
}

/// Linear time-varying system `x' = A(t) x + B(t) u` on `[0, T]`.
#[derive(Clone)]
pub struct LtvSystem {
    n: usize,
    m: usize,
    horizon: f64,
    provider: Arc<dyn MatrixProvider>,
}

impl fmt::Debug for LtvSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LtvSystem")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("horizon", &self.horizon)
            .field("time_invariant", &self.provider.is_time_invariant())
            .finish()
    }
}

impl LtvSystem {
    pub fn new(provider: Arc<dyn MatrixProvider>, horizon: f64) -> Self {
        Self {
            n: provider.state_dim(),
            m: provider.input_dim(),
            horizon,
            provider,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_time_invariant(&self) -> bool {
        self.provider.is_time_invariant()
    }

    /// Evaluates the provider and checks shape and finiteness.
    pub fn matrices(&self, t: f64) -> Result<(DenseMatrix, DenseMatrix), NumericsError> {
        let (a, b) = self.provider.matrices(t)?;
        if a.shape() != (self.n, self.n) || b.shape() != (self.n, self.m) {
            return Err(NumericsError::Provider {
                t,
                reason: format!(
                    "expected A {0}x{0} and B {0}x{1}, got {2:?} and {3:?}",
                    self.n,
                    self.m,
                    a.shape(),
                    b.shape()
                ),
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(NumericsError::Provider {
                t,
                reason: "non-finite entry".into(),
            });
        }
        Ok((a, b))
    }
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &DenseMatrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One norm (max absolute column sum).
pub fn norm_one(m: &DenseMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
