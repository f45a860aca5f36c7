//! Control-node scheduling: pick which input channels are active over time so
//! that the trace of the controllability Gramian is maximized, subject to a
//! per-channel activation budget and a bound on simultaneously active channels.
//!
//! The combinatorial problem is solved through its linear relaxation; on
//! regular instances the relaxed optimum is already binary.

mod dual;
mod io;
mod relaxed;
mod top_slice;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LpError, LpStatus};
use crate::numerics::{matrix_exponential, DenseMatrix, LtiSystem, NumericsError, TimeGrid};

pub use dual::{solve_schedule_dual, DualOptions, DualReport};
pub use io::{gantt_chart, write_schedule_csv, GanttChannel, GanttChart, ScheduleInstanceFile};
pub use relaxed::solve_relaxed_schedule;
pub use top_slice::{top_slice_schedule, TopSlice};

/// Entries farther than this from {0, 1} count as fractional.
pub const DEFAULT_BINARY_TOL: f64 = 1e-6;
/// Largest fractional share of `m·T` accepted by [`recover_binary_schedule`].
pub const MAX_FRACTIONAL_SHARE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("invalid schedule instance: {0}")]
    InvalidInstance(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("schedule is not binary: fractional share {fraction:.3e} of m*T")]
    NonBinary { fraction: f64 },
    #[error("dual iteration did not converge after {sweeps} sweeps, residual {residual:.3e}")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("relaxed schedule LP returned {0:?}")]
    UnexpectedStatus(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// System, per-channel budgets `alpha` (time) and simultaneity bound `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleInstance {
    system: LtiSystem,
    alpha: Vec<f64>,
    beta: usize,
}

impl ScheduleInstance {
    pub fn new(system: LtiSystem, alpha: Vec<f64>, beta: usize) -> Result<Self, ScheduleError> {
        let m = system.input_dim();
        let t = system.horizon();
        if m == 0 {
            return Err(ScheduleError::InvalidInstance("no input channels".into()));
        }
        if alpha.len() != m {
            return Err(ScheduleError::InvalidInstance(format!(
                "{} budgets for {m} channels",
                alpha.len()
            )));
        }
        if let Some((j, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(a.is_finite() && **a > 0.0 && **a <= t * (1.0 + 1e-12)))
        {
            return Err(ScheduleError::InvalidInstance(format!(
                "budget of channel {} is {a}, must lie in (0, {t}]",
                j + 1
            )));
        }
        if beta == 0 || beta > m {
            return Err(ScheduleError::InvalidInstance(format!(
                "simultaneity bound {beta} outside 1..={m}"
            )));
        }
        Ok(Self {
            system,
            alpha,
            beta,
        })
    }

    pub fn system(&self) -> &LtiSystem {
        &self.system
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn channels(&self) -> usize {
        self.alpha.len()
    }

    pub fn horizon(&self) -> f64 {
        self.system.horizon()
    }

    fn check_grid(&self, grid: &TimeGrid) -> Result<(), ScheduleError> {
        let t = self.horizon();
        if (grid.horizon() - t).abs() > 1e-12 * t {
            return Err(ScheduleError::GridMismatch(format!(
                "grid horizon {} differs from instance horizon {t}",
                grid.horizon()
            )));
        }
        Ok(())
    }
}

/// `f_j(t) = ‖e^{At} b_j‖²` sampled at step midpoints, stored `K x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub grid: TimeGrid,
    pub scores: DenseMatrix,
}

impl ScoreTable {
    pub fn channels(&self) -> usize {
        self.scores.ncols()
    }

    /// Channel indices at step `k` ordered by decreasing score, lowest index first on ties.
    pub fn ranking(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.channels()).collect();
        idx.sort_by(|&a, &b| {
            self.scores[(k, b)]
                .partial_cmp(&self.scores[(k, a)])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    }
}

pub fn controllability_scores(
    system: &LtiSystem,
    grid: &TimeGrid,
) -> Result<ScoreTable, ScheduleError> {
    let a = system.a();
    let b = system.b();
    let k = grid.steps();
    let m = b.ncols();
    let rows: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|step| -> Result<Vec<f64>, NumericsError> {
            let e = matrix_exponential(a, grid.midpoint(step))?;
            let eb = e * b;
            Ok((0..m).map(|j| eb.column(j).norm_squared()).collect())
        })
        .collect::<Result<_, _>>()?;
    let scores = DMatrix::from_fn(k, m, |i, j| rows[i][j]);
    Ok(ScoreTable {
        grid: *grid,
        scores,
    })
}

/// Piecewise-constant activation `v` (`K x m`, values in `[0, 1]`) with its
/// objective, per-channel usage `y_j(T) = dt Σ_k v_kj` and fractional share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub horizon: f64,
    pub steps: usize,
    /// Row-major `K x m` activation values.
    pub v: Vec<Vec<f64>>,
    pub objective: f64,
    pub usage: Vec<f64>,
    /// Share of `m·T` covered by cells farther than the binary tolerance from {0, 1}.
    pub discreteness: f64,
}

impl Schedule {
    pub fn from_values(v: &DenseMatrix, scores: &ScoreTable) -> Self {
        let grid = scores.grid;
        let dt = grid.dt();
        let (k, m) = v.shape();
        let rows: Vec<Vec<f64>> = (0..k).map(|i| v.row(i).iter().copied().collect()).collect();
        let usage = (0..m).map(|j| dt * v.column(j).sum()).collect();
        let objective = dt * v.component_mul(&scores.scores).sum();
        Self {
            horizon: grid.horizon(),
            steps: k,
            v: rows,
            objective,
            usage,
            discreteness: fractional_share(v, DEFAULT_BINARY_TOL),
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.steps).expect("schedule grid was valid at construction")
    }

    pub fn channels(&self) -> usize {
        self.v.first().map_or(0, Vec::len)
    }

    pub fn matrix(&self) -> DenseMatrix {
        DMatrix::from_fn(self.steps, self.channels(), |i, j| self.v[i][j])
    }

    pub fn is_active(&self, k: usize, j: usize) -> bool {
        self.v[k][j] > 0.5
    }

    /// Largest violation of the box, row (`beta`) and budget (`alpha`) constraints.
    pub fn max_violation(&self, alpha: &[f64], beta: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.v {
            for &x in row {
                worst = worst.max(-x).max(x - 1.0);
            }
            worst = worst.max(row.iter().sum::<f64>() - beta as f64);
        }
        for (u, a) in self.usage.iter().zip(alpha) {
            worst = worst.max(u - a);
        }
        worst
    }
}

fn fractional_share(v: &DenseMatrix, tol: f64) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let count = v
        .iter()
        .filter(|&&x| x.abs() > tol && (x - 1.0).abs() > tol)
        .count();
    count as f64 / v.len() as f64
}

/// `dt Σ_{k,j} f_j(t_k) v_kj`.
pub fn objective_value(schedule: &Schedule, scores: &ScoreTable) -> Result<f64, ScheduleError> {
    if !schedule.grid().same_as(&scores.grid) || schedule.channels() != scores.channels() {
        return Err(ScheduleError::GridMismatch(format!(
            "schedule is {}x{} on T={}, scores are {}x{} on T={}",
            schedule.steps,
            schedule.channels(),
            schedule.horizon,
            scores.grid.steps(),
            scores.channels(),
            scores.grid.horizon()
        )));
    }
    let dt = scores.grid.dt();
    let mut total = 0.0;
    for (k, row) in schedule.v.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            total += scores.scores[(k, j)] * x;
        }
    }
    Ok(dt * total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    /// Channels (0-based) whose score is constant over the grid.
    pub constant_channels: Vec<usize>,
    /// Pairs `(i, j)`, `i < j`, whose score difference is constant.
    pub constant_pairs: Vec<(usize, usize)>,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.constant_channels.is_empty() && self.constant_pairs.is_empty()
    }
}

/// Flags channels and channel pairs whose score (difference) varies by less
/// than `tol` over the grid.
pub fn check_regularity(scores: &ScoreTable, tol: f64) -> RegularityReport {
    let s = &scores.scores;
    let m = s.ncols();
    let spread = |f: &dyn Fn(usize) -> f64| {
        let (lo, hi) = (0..s.nrows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
            let v = f(k);
            (lo.min(v), hi.max(v))
        });
        hi - lo
    };
    let constant_channels = (0..m)
        .filter(|&j| spread(&|k| s[(k, j)]) < tol)
        .collect();
    let mut constant_pairs = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if spread(&|k| s[(k, i)] - s[(k, j)]) < tol {
                constant_pairs.push((i, j));
            }
        }
    }
    RegularityReport {
        constant_channels,
        constant_pairs,
    }
}

/// Snaps entries within `tol` of 0 or 1. Entries farther away are kept; if
/// they cover more than [`MAX_FRACTIONAL_SHARE`] of `m·T` the schedule is
/// rejected as non-binary.
pub fn recover_binary_schedule(
    schedule: &Schedule,
    scores: &ScoreTable,
    tol: f64,
) -> Result<Schedule, ScheduleError> {
    let mut v = schedule.matrix();
    let fraction = fractional_share(&v, tol);
    if fraction > MAX_FRACTIONAL_SHARE {
        return Err(ScheduleError::NonBinary { fraction });
    }
    for x in v.iter_mut() {
        if x.abs() <= tol {
            *x = 0.0;
        } else if (*x - 1.0).abs() <= tol {
            *x = 1.0;
        }
    }
    let mut out = Schedule::from_values(&v, scores);
    out.discreteness = fraction;
    objective_value(&out, scores).map(|_| out)
}

/// Result of a [`Scheduler`]: the schedule and, for dual methods, the multipliers.
#[derive(Debug, Clone)]
pub struct ScheduleOutcome {
    pub method: &'static str,
    pub schedule: Schedule,
    pub dual: Option<DualReport>,
}

/// A named scheduling method.
pub trait Scheduler: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn solve(
        &self,
        instance: &ScheduleInstance,
        scores: &ScoreTable,
    ) -> Result<ScheduleOutcome, ScheduleError>;
}

/// Relaxed linear program over the grid.
pub struct RelaxedLp;

impl Scheduler for RelaxedLp {
    fn name(&self) -> &'static str {
        "relaxed-lp"
    }
    fn describe(&self) -> &'static str {
        "linear relaxation solved by the simplex method"
    }
    fn solve(
        &self,
        instance: &ScheduleInstance,
        scores: &ScoreTable,
    ) -> Result<ScheduleOutcome, ScheduleError> {
        Ok(ScheduleOutcome {
            method: self.name(),
            schedule: solve_relaxed_schedule(instance, scores)?,
            dual: None,
        })
    }
}

/// Threshold rule on shifted scores with budget multipliers.
pub struct DualThreshold(pub DualOptions);

impl Scheduler for DualThreshold {
    fn name(&self) -> &'static str {
        "dual"
    }
    fn describe(&self) -> &'static str {
        "top-beta rule on scores shifted by nonpositive budget multipliers"
    }
    fn solve(
        &self,
        instance: &ScheduleInstance,
        scores: &ScoreTable,
    ) -> Result<ScheduleOutcome, ScheduleError> {
        let (schedule, report) = solve_schedule_dual(instance, scores, &self.0)?;
        Ok(ScheduleOutcome {
            method: self.name(),
            schedule,
            dual: Some(report),
        })
    }
}

/// Aggregate-budget superlevel set, ignoring per-channel budgets and `beta`.
pub struct TopSliceMethod;

impl Scheduler for TopSliceMethod {
    fn name(&self) -> &'static str {
        "top-slice"
    }
    fn describe(&self) -> &'static str {
        "superlevel set of the scores with the summed budget"
    }
    fn solve(
        &self,
        instance: &ScheduleInstance,
        scores: &ScoreTable,
    ) -> Result<ScheduleOutcome, ScheduleError> {
        let total: f64 = instance.alpha().iter().sum();
        Ok(ScheduleOutcome {
            method: self.name(),
            schedule: top_slice_schedule(scores, total)?.schedule,
            dual: None,
        })
    }
}

/// Scheduling methods selectable by name.
pub struct SchedulerRegistry {
    methods: Vec<Box<dyn Scheduler>>,
}

impl Default for SchedulerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(RelaxedLp));
        r.register(Box::new(DualThreshold(DualOptions::default())));
        r.register(Box::new(TopSliceMethod));
        r
    }
}

impl SchedulerRegistry {
    pub fn empty() -> Self {
        Self {
            methods: Vec::new(),
        }
    }

    /// Adds a method; a method with the same name is replaced.
    pub fn register(&mut self, method: Box<dyn Scheduler>) {
        self.methods.retain(|m| m.name() != method.name());
        self.methods.push(method);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Scheduler> {
        self.methods
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }
}
