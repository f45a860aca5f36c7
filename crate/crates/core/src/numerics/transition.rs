//! State-transition matrices and zero-order-hold step blocks.

use rayon::prelude::*;

use super::{
    matrix_exponential, norm_inf, DenseMatrix, DenseVector, LtvSystem, NumericsError, TimeGrid,
};

/// Reference number of steps per horizon for the RK4 transition integrator;
/// the substep is a quarter of `T / BASE_STEPS`.
const BASE_STEPS: f64 = 100.0;
/// Upper bound on `h * ||A||` for one RK4 substep.
const MAX_STEP_NORM: f64 = 0.02;

/// `Φ(t1, t0)` for `dΦ/dt = A(t) Φ`, `Φ(t0, t0) = I`, by classical RK4.
pub fn transition_matrix(sys: &LtvSystem, t1: f64, t0: f64) -> Result<DenseMatrix, NumericsError> {
    let horizon = sys.horizon();
    let slack = 1e-12 * horizon;
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 || t0 < -slack || t1 > horizon + slack {
        return Err(NumericsError::InvalidInterval { t0, t1, horizon });
    }
    let n = sys.state_dim();
    let mut phi = DenseMatrix::identity(n, n);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(phi);
    }

    let (a_start, _) = sys.matrices(t0)?;
    let (a_end, _) = sys.matrices(t1)?;
    let norm = norm_inf(&a_start).max(norm_inf(&a_end)).max(1e-300);
    let mut h = (horizon / BASE_STEPS / 4.0).min(MAX_STEP_NORM / norm);
    let substeps = (span / h).ceil().max(1.0) as usize;
    h = span / substeps as f64;

    let invariant = sys.is_time_invariant();
    let a_const = if invariant { Some(a_start) } else { None };
    let eval = |t: f64| -> Result<DenseMatrix, NumericsError> {
        match &a_const {
            Some(a) => Ok(a.clone()),
            None => sys.matrices(t).map(|(a, _)| a),
        }
    };

    for i in 0..substeps {
        let t = t0 + i as f64 * h;
        let a0 = eval(t)?;
        let am = eval(t + 0.5 * h)?;
        let a1 = eval(t + h)?;
        let k1 = &a0 * &phi;
        let k2 = &am * (&phi + &k1 * (0.5 * h));
        let k3 = &am * (&phi + &k2 * (0.5 * h));
        let k4 = &a1 * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(phi)
}

/// Zero-order-hold blocks of one step: `x_{k+1} = phi x_k + gamma u_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBlocks {
    pub phi: DenseMatrix,
    pub gamma: DenseMatrix,
}

/// Blocks for `[t0, t1]` with `(A, B)` frozen at the step midpoint, from the
/// exponential of the augmented matrix `[[A, B], [0, 0]] (t1 - t0)`.
pub fn step_blocks(sys: &LtvSystem, t0: f64, t1: f64) -> Result<StepBlocks, NumericsError> {
    let (a, b) = sys.matrices(0.5 * (t0 + t1))?;
    zoh_blocks(&a, &b, t1 - t0)
}

fn zoh_blocks(a: &DenseMatrix, b: &DenseMatrix, dt: f64) -> Result<StepBlocks, NumericsError> {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = DenseMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(b);
    let e = matrix_exponential(&aug, dt)?;
    Ok(StepBlocks {
        phi: e.view((0, 0), (n, n)).into_owned(),
        gamma: e.view((0, n), (n, m)).into_owned(),
    })
}

/// Step blocks over a grid; time-invariant systems share one block pair.
#[derive(Debug, Clone)]
pub enum StepSet {
    Shared { blocks: StepBlocks, steps: usize },
    PerStep(Vec<StepBlocks>),
}

impl StepSet {
    pub fn get(&self, k: usize) -> &StepBlocks {
        match self {
            StepSet::Shared { blocks, steps } => {
                assert!(k < *steps, "step {k} out of range");
                blocks
            }
            StepSet::PerStep(v) => &v[k],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            StepSet::Shared { steps, .. } => *steps,
            StepSet::PerStep(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Forward simulation `x_{k+1} = Φ_k x_k + Γ_k u_k` with `u` given as a
    /// `K x m` matrix of per-step values.
    pub fn propagate(
        &self,
        x0: &DenseVector,
        controls: &DenseMatrix,
    ) -> Result<Vec<DenseVector>, NumericsError> {
        let first = self.get(0);
        let n = first.phi.nrows();
        let m = first.gamma.ncols();
        if x0.len() != n {
            return Err(NumericsError::DimensionMismatch {
                what: "initial state",
                expected: n.to_string(),
                found: x0.len().to_string(),
            });
        }
        if controls.shape() != (self.len(), m) {
            return Err(NumericsError::DimensionMismatch {
                what: "control matrix (steps x inputs)",
                expected: format!("{}x{}", self.len(), m),
                found: format!("{}x{}", controls.nrows(), controls.ncols()),
            });
        }
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(x0.clone());
        for k in 0..self.len() {
            let blocks = self.get(k);
            let u = controls.row(k).transpose();
            let next = &blocks.phi * &out[k] + &blocks.gamma * u;
            out.push(next);
        }
        Ok(out)
    }
}

pub fn discretize_steps(sys: &LtvSystem, grid: &TimeGrid) -> Result<StepSet, NumericsError> {
    if sys.is_time_invariant() {
        let blocks = step_blocks(sys, 0.0, grid.dt())?;
        return Ok(StepSet::Shared {
            blocks,
            steps: grid.steps(),
        });
    }
    let blocks = (0..grid.steps())
        .into_par_iter()
        .map(|k| step_blocks(sys, grid.knot(k), grid.knot(k + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StepSet::PerStep(blocks))
}

/// State trajectory (`K + 1` vectors) under piecewise-constant controls.
pub fn propagate_state(
    sys: &LtvSystem,
    x0: &DenseVector,
    controls: &DenseMatrix,
    grid: &TimeGrid,
) -> Result<Vec<DenseVector>, NumericsError> {
    if x0.len() != sys.state_dim() {
        return Err(NumericsError::DimensionMismatch {
            what: "initial state",
            expected: sys.state_dim().to_string(),
            found: x0.len().to_string(),
        });
    }
    if controls.shape() != (grid.steps(), sys.input_dim()) {
        return Err(NumericsError::DimensionMismatch {
            what: "control matrix (steps x inputs)",
            expected: format!("{}x{}", grid.steps(), sys.input_dim()),
            found: format!("{}x{}", controls.nrows(), controls.ncols()),
        });
    }
    discretize_steps(sys, grid)?.propagate(x0, controls)
}
