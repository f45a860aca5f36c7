//! Multiplier characterization of the relaxed optimum: with `γ ≤ 0`, a channel
//! is active at `t` when `f_j(t) + γ_j > 0` and it ranks among the `β` largest
//! shifted scores. Each `γ_j` is set by an exact search over the breakpoints
//! of its own usage with the others frozen; sweeps repeat until no budget is
//! violated and every negative multiplier has a tight budget.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{Schedule, ScheduleError, ScheduleInstance, ScoreTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    pub max_sweeps: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self { max_sweeps: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    /// Budget multipliers, all `<= 0`.
    pub gamma: Vec<f64>,
    /// Weight on the objective in the maximum condition; always 1 here.
    pub eta: f64,
    /// `max_j |γ_j (y_j(T) − α_j)|`.
    pub slackness_residual: f64,
    pub sweeps: usize,
}

pub fn solve_schedule_dual(
    instance: &ScheduleInstance,
    scores: &ScoreTable,
    opts: &DualOptions,
) -> Result<(Schedule, DualReport), ScheduleError> {
    instance.check_grid(&scores.grid)?;
    let m = instance.channels();
    if scores.channels() != m {
        return Err(ScheduleError::GridMismatch(format!(
            "score table has {} channels, instance has {m}",
            scores.channels()
        )));
    }
    let f = &scores.scores;
    let dt = scores.grid.dt();
    let beta = instance.beta();
    let alpha = instance.alpha();
    // Largest number of cells each channel may occupy.
    let allowed: Vec<usize> = alpha
        .iter()
        .map(|a| ((a / dt) * (1.0 + 1e-12)).floor() as usize)
        .collect();

    let mut gamma = vec![0.0; m];
    let mut sweeps = 0;
    loop {
        let v = activation(f, &gamma, beta);
        let residual = budget_residual(&v, &gamma, &allowed);
        if residual == 0 {
            break;
        }
        if sweeps >= opts.max_sweeps {
            return Err(ScheduleError::NoConvergence {
                sweeps,
                residual: residual as f64 * dt,
            });
        }
        sweeps += 1;
        for j in 0..m {
            gamma[j] = best_response(f, &gamma, beta, j, allowed[j]);
        }
    }

    let v = activation(f, &gamma, beta);
    let schedule = Schedule::from_values(&v, scores);
    let slackness_residual = gamma
        .iter()
        .zip(&schedule.usage)
        .zip(alpha)
        .map(|((g, y), a)| (g * (y - a)).abs())
        .fold(0.0, f64::max);
    Ok((
        schedule,
        DualReport {
            gamma,
            eta: 1.0,
            slackness_residual,
            sweeps,
        },
    ))
}

/// Cells where channel `j` ranks within the top `beta` shifted scores and the
/// shifted score is positive. Ties go to the lower channel index.
fn activation(f: &DMatrix<f64>, gamma: &[f64], beta: usize) -> DMatrix<f64> {
    let (k, m) = f.shape();
    let mut v = DMatrix::zeros(k, m);
    let mut idx: Vec<usize> = Vec::with_capacity(m);
    for step in 0..k {
        idx.clear();
        idx.extend((0..m).filter(|&j| f[(step, j)] + gamma[j] > 0.0));
        idx.sort_by(|&a, &b| {
            let sa = f[(step, a)] + gamma[a];
            let sb = f[(step, b)] + gamma[b];
            sb.partial_cmp(&sa).unwrap().then(a.cmp(&b))
        });
        for &j in idx.iter().take(beta) {
            v[(step, j)] = 1.0;
        }
    }
    v
}

/// Cells of violation: over-budget cells, plus unused cells of channels with
/// a negative multiplier.
fn budget_residual(v: &DMatrix<f64>, gamma: &[f64], allowed: &[usize]) -> usize {
    (0..v.ncols())
        .map(|j| {
            let used = v.column(j).iter().filter(|x| **x > 0.5).count();
            if used > allowed[j] {
                used - allowed[j]
            } else if gamma[j] < 0.0 {
                allowed[j] - used
            } else {
                0
            }
        })
        .max()
        .unwrap_or(0)
}

/// Largest `γ_j <= 0` keeping channel `j` within `allowed` cells, others fixed.
/// The result sits midway between consecutive activation thresholds.
fn best_response(f: &DMatrix<f64>, gamma: &[f64], beta: usize, j: usize, allowed: usize) -> f64 {
    let (k, m) = f.shape();
    // Channel j is active at a step iff γ_j exceeds its threshold there.
    let mut thresholds: Vec<f64> = Vec::with_capacity(k);
    let mut others: Vec<f64> = Vec::with_capacity(m);
    for step in 0..k {
        others.clear();
        others.extend((0..m).filter(|&i| i != j).map(|i| f[(step, i)] + gamma[i]));
        let mut th = -f[(step, j)];
        if others.len() >= beta {
            others.sort_by(|a, b| b.partial_cmp(a).unwrap());
            th = th.max(others[beta - 1] - f[(step, j)]);
        }
        thresholds.push(th);
    }
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let active_at_zero = thresholds.iter().filter(|&&t| t < 0.0).count();
    if active_at_zero <= allowed {
        return 0.0;
    }
    // Exactly `allowed` thresholds below γ: γ in (θ[allowed-1], θ[allowed]].
    let upper = thresholds[allowed];
    let lower = if allowed == 0 {
        upper - 1.0
    } else {
        thresholds[allowed - 1]
    };
    0.5 * (lower + upper)
}
