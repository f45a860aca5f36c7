use nalgebra::DMatrix;

use super::{Schedule, ScheduleError, ScoreTable};

/// Superlevel-set schedule together with its score threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TopSlice {
    pub schedule: Schedule,
    /// Smallest selected score; every unselected cell scores at most this.
    pub threshold: f64,
    pub cells: usize,
}

/// Activates the `round(alpha_total / dt)` cells with the largest scores,
/// ignoring per-channel budgets and the simultaneity bound. Ties are broken
/// by earlier step, then lower channel index.
pub fn top_slice_schedule(scores: &ScoreTable, alpha_total: f64) -> Result<TopSlice, ScheduleError> {
    let grid = scores.grid;
    let (k, m) = scores.scores.shape();
    let capacity = m as f64 * grid.horizon();
    if !(alpha_total.is_finite() && alpha_total > 0.0 && alpha_total <= capacity * (1.0 + 1e-12)) {
        return Err(ScheduleError::InvalidInstance(format!(
            "aggregate budget {alpha_total} outside (0, {capacity}]"
        )));
    }
    let cells = ((alpha_total / grid.dt()).round() as usize).min(k * m);
    let mut order: Vec<(usize, usize)> = (0..k).flat_map(|s| (0..m).map(move |j| (s, j))).collect();
    order.sort_by(|a, b| {
        scores.scores[*b]
            .partial_cmp(&scores.scores[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut v = DMatrix::zeros(k, m);
    for &cell in &order[..cells] {
        v[cell] = 1.0;
    }
    let threshold = order[..cells]
        .last()
        .map_or(f64::INFINITY, |&c| scores.scores[c]);
    Ok(TopSlice {
        schedule: Schedule::from_values(&v, scores),
        threshold,
        cells,
    })
}
