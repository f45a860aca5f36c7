use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::numerics::{DenseMatrix, DenseVector};

use super::{
    BoundsMode, ControlTrajectory, ReachabilityDiscretization, RebalanceError, RebalanceInstance,
};

/// Largest accepted interior-mass fraction of a bang-bang control.
pub const MAX_INTERIOR_MASS: f64 = 1e-3;
/// Terminal residual limit relative to `‖x_ref‖∞`.
pub const TERMINAL_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct RebalanceOutcome {
    pub status: LpStatus,
    pub control: Option<ControlTrajectory>,
    /// Knot states of the optimal control.
    pub states: Option<Vec<DenseVector>>,
    pub terminal_residual: Option<f64>,
    pub iterations: usize,
}

/// Minimizes `dt Σ_k ‖u_k‖₁` subject to the terminal condition on
/// `Φ(T,0)x0 + Σ Γ_k u_k`, `‖u_k‖₁ <= β` and the box of the bounds mode.
/// Signed inputs are split as `u = u⁺ − u⁻`.
pub fn solve_relaxed_rebalance(
    instance: &RebalanceInstance,
    disc: &ReachabilityDiscretization,
) -> Result<RebalanceOutcome, RebalanceError> {
    let grid = disc.grid;
    let k = grid.steps();
    let dt = grid.dt();
    let n = instance.system.state_dim();
    let m = instance.system.input_dim();
    if disc.gammas.len() != k || disc.phi_total.nrows() != n {
        return Err(RebalanceError::InvalidInstance(
            "discretization does not match the instance".into(),
        ));
    }
    let signed = instance.mode == BoundsMode::Signed;
    let block = k * m;
    let nvars = if signed { 2 * block } else { block };

    let (c, d) = instance.target.constraint(n);
    let rows = c.nrows();
    let rhs = &d - &c * (&disc.phi_total * &instance.x0);
    let mut eq = DenseMatrix::zeros(rows, nvars);
    for (step, g) in disc.gammas.iter().enumerate() {
        let cg = &c * g;
        eq.view_mut((0, step * m), (rows, m)).copy_from(&cg);
        if signed {
            eq.view_mut((0, block + step * m), (rows, m))
                .copy_from(&(-cg));
        }
    }
    let mut ineq = DenseMatrix::zeros(k, nvars);
    for step in 0..k {
        for j in 0..m {
            ineq[(step, step * m + j)] = 1.0;
            if signed {
                ineq[(step, block + step * m + j)] = 1.0;
            }
        }
    }
    let lp = LinearProgram {
        objective: DenseVector::from_element(nvars, dt),
        eq_matrix: eq,
        eq_rhs: rhs,
        ineq_matrix: ineq,
        ineq_rhs: DenseVector::from_element(k, instance.beta as f64),
        lower: DenseVector::zeros(nvars),
        upper: DenseVector::from_element(nvars, 1.0),
    };
    let sol = solve_lp(&lp)?;
    log::debug!(
        "relaxed rebalance: {:?} after {} iterations ({} rows, {} columns)",
        sol.status,
        sol.iterations,
        rows + k,
        nvars
    );
    if sol.status != LpStatus::Optimal {
        return Ok(RebalanceOutcome {
            status: sol.status,
            control: None,
            states: None,
            terminal_residual: None,
            iterations: sol.iterations,
        });
    }
    let u = DenseMatrix::from_fn(k, m, |step, j| {
        let plus = sol.x[step * m + j].clamp(0.0, 1.0);
        if signed {
            plus - sol.x[block + step * m + j].clamp(0.0, 1.0)
        } else {
            plus
        }
    });
    let x_end = disc.terminal_state(&instance.x0, &u);
    let states = disc.trajectory(&instance.x0, &u);
    Ok(RebalanceOutcome {
        status: sol.status,
        terminal_residual: Some(instance.target.residual(&x_end)),
        control: Some(ControlTrajectory::new(grid, u)),
        states: Some(states),
        iterations: sol.iterations,
    })
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub control: ControlTrajectory,
    pub terminal_residual: f64,
    pub interior_mass: f64,
    pub interior_cells: usize,
}

/// Snaps entries within `tol` of the extreme set. Entries farther away are
/// left in place and measured by the interior mass; the control is rejected
/// when that mass exceeds [`MAX_INTERIOR_MASS`] or the terminal residual
/// exceeds [`TERMINAL_TOL`] times the target scale.
pub fn extract_sparse_control(
    instance: &RebalanceInstance,
    disc: &ReachabilityDiscretization,
    control: &ControlTrajectory,
    tol: f64,
) -> Result<Extraction, RebalanceError> {
    let mode = instance.mode;
    let interior_mass = control.interior_mass(mode, tol);
    if interior_mass > MAX_INTERIOR_MASS {
        return Err(RebalanceError::NonBinary {
            fraction: interior_mass,
        });
    }
    let interior_cells = control.interior_cells(mode, tol);
    let u = control.u.map(|x| {
        if mode.distance(x) <= tol {
            mode.snap(x)
        } else {
            x
        }
    });
    let x_end = disc.terminal_state(&instance.x0, &u);
    let terminal_residual = instance.target.residual(&x_end);
    let limit = TERMINAL_TOL * instance.target.scale();
    if terminal_residual > limit {
        return Err(RebalanceError::TerminalDrift {
            residual: terminal_residual,
            limit,
        });
    }
    Ok(Extraction {
        control: ControlTrajectory::new(control.grid, u),
        terminal_residual,
        interior_mass,
        interior_cells,
    })
}
