use nalgebra::SVD;

use crate::numerics::{DenseMatrix, DenseVector};

use super::{ControlTrajectory, ReachabilityDiscretization, RebalanceError, RebalanceInstance};

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    /// Least-squares control; meets the terminal condition, ignores the box.
    pub unclipped: ControlTrajectory,
    pub unclipped_residual: f64,
    /// Same control clipped to the box of the bounds mode.
    pub clipped: ControlTrajectory,
    pub clipped_residual: f64,
    pub clipped_cells: usize,
    pub rank: usize,
}

/// `u_k = (CΓ_k)ᵀ W⁺ (d − CΦ(T,0)x0)` with `W = Σ_k CΓ_k Γ_kᵀ Cᵀ`: the
/// smallest-energy piecewise-constant control meeting the terminal condition.
pub fn min_energy_baseline(
    instance: &RebalanceInstance,
    disc: &ReachabilityDiscretization,
) -> Result<BaselineOutcome, RebalanceError> {
    let n = instance.system.state_dim();
    let m = instance.system.input_dim();
    let k = disc.gammas.len();
    let (c, d) = instance.target.constraint(n);
    let rows = c.nrows();
    let rhs = &d - &c * (&disc.phi_total * &instance.x0);

    let blocks: Vec<DenseMatrix> = disc.gammas.iter().map(|g| &c * g).collect();
    let mut w = DenseMatrix::zeros(rows, rows);
    for b in &blocks {
        w += b * b.transpose();
    }
    let svd = SVD::new(w.clone(), true, true);
    let smax = svd.singular_values.max();
    let eps = smax * rows as f64 * f64::EPSILON * 16.0;
    let rank = svd.singular_values.iter().filter(|s| **s > eps).count();
    let pinv = svd
        .pseudo_inverse(eps)
        .map_err(|e| RebalanceError::InvalidInstance(e.to_string()))?;
    let lambda = &pinv * &rhs;
    // The target must lie in the range of W.
    let miss = (&w * &lambda - &rhs).amax();
    if miss > 1e-8 * rhs.amax().max(1.0) {
        return Err(RebalanceError::RankDeficient { rank, dim: rows });
    }

    let u = DenseMatrix::from_fn(k, m, |step, j| blocks[step].column(j).dot(&lambda));
    let lo = instance.mode.lower();
    let clipped_u = u.map(|x| x.clamp(lo, 1.0));
    let clipped_cells = u
        .iter()
        .zip(clipped_u.iter())
        .filter(|(a, b)| a != b)
        .count();
    if clipped_cells > 0 {
        log::warn!("minimum-energy control clipped in {clipped_cells} cells");
    }
    let residual = |u: &DenseMatrix| -> f64 {
        let x: DenseVector = disc.terminal_state(&instance.x0, u);
        instance.target.residual(&x)
    };
    Ok(BaselineOutcome {
        unclipped_residual: residual(&u),
        clipped_residual: residual(&clipped_u),
        unclipped: ControlTrajectory::new(disc.grid, u),
        clipped: ControlTrajectory::new(disc.grid, clipped_u),
        clipped_cells,
        rank,
    })
}
