use nalgebra::DMatrix;

use super::{Schedule, ScheduleError, ScheduleInstance, ScoreTable};
use crate::lp::{solve_lp, LpBuilder, LpStatus};

/// Maximizes `dt Σ f·v` over `v ∈ [0,1]^{K x m}` with `dt Σ_k v_kj <= α_j`
/// and `Σ_j v_kj <= β`. The row bound is dropped when `β = m`.
pub fn solve_relaxed_schedule(
    instance: &ScheduleInstance,
    scores: &ScoreTable,
) -> Result<Schedule, ScheduleError> {
    instance.check_grid(&scores.grid)?;
    let m = instance.channels();
    if scores.channels() != m {
        return Err(ScheduleError::GridMismatch(format!(
            "score table has {} channels, instance has {m}",
            scores.channels()
        )));
    }
    let k = scores.grid.steps();
    let dt = scores.grid.dt();
    let var = |step: usize, j: usize| step * m + j;

    let mut b = LpBuilder::new(k * m);
    for step in 0..k {
        for j in 0..m {
            b.set_cost(var(step, j), -dt * scores.scores[(step, j)])
                .set_bounds(var(step, j), 0.0, 1.0);
        }
    }
    for (j, &a) in instance.alpha().iter().enumerate() {
        b.add_le((0..k).map(|step| (var(step, j), dt)).collect(), a);
    }
    if instance.beta() < m {
        for step in 0..k {
            b.add_le(
                (0..m).map(|j| (var(step, j), 1.0)).collect(),
                instance.beta() as f64,
            );
        }
    }
    let lp = b.build();
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(ScheduleError::UnexpectedStatus(sol.status));
    }
    let v = DMatrix::from_fn(k, m, |step, j| sol.x[var(step, j)].clamp(0.0, 1.0));
    log::debug!(
        "relaxed schedule: {} simplex iterations, objective {}",
        sol.iterations,
        -sol.objective
    );
    Ok(Schedule::from_values(&v, scores))
}
