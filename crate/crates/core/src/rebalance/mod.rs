//! Sparse rebalancing: steer a linear time-varying system to a terminal
//! condition with piecewise-constant inputs while minimizing the total
//! activation time, through the L1 relaxation over the discretized
//! reachability map.

mod assumption;
mod baseline;
mod io;
mod solve;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{LpError, LpStatus};
use crate::mobility::{MobilityError, MobilityModel, MobilityScenario, TargetSpec};
use crate::numerics::{
    discretize_steps, DenseMatrix, DenseVector, LtvSystem, NumericsError, TimeGrid,
};

pub use assumption::{
    check_assumption, check_assumption_with, AssumptionFlag, AssumptionOptions,
    AssumptionReport, FlagKind, TrialStats,
};
pub use baseline::{min_energy_baseline, BaselineOutcome};
pub use io::{write_state_csv, ControlEntry, RebalanceResults, ResultCosts};
pub use solve::{extract_sparse_control, solve_relaxed_rebalance, Extraction, RebalanceOutcome};

/// Cells with `|u|` at or below this count as inactive.
pub const NONZERO_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RebalanceError {
    #[error("invalid rebalancing instance: {0}")]
    InvalidInstance(String),
    #[error("control is not bang-bang: interior mass fraction {fraction:.3e}")]
    NonBinary { fraction: f64 },
    #[error("terminal residual {residual:.3e} exceeds {limit:.3e}")]
    TerminalDrift { residual: f64, limit: f64 },
    #[error("reachability map has rank {rank} of {dim} and the target is outside its range")]
    RankDeficient { rank: usize, dim: usize },
    #[error("relaxed rebalancing LP returned {0:?}")]
    UnexpectedStatus(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
}

/// Box on the input: `[0, 1]^m`, or `[-1, 1]^m` with extreme set `{0, ±1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMode {
    NonNegative,
    Signed,
}

impl BoundsMode {
    pub fn lower(self) -> f64 {
        match self {
            BoundsMode::NonNegative => 0.0,
            BoundsMode::Signed => -1.0,
        }
    }

    /// Distance from `x` to the extreme value set.
    pub fn distance(self, x: f64) -> f64 {
        let d = x.abs().min((x - 1.0).abs());
        match self {
            BoundsMode::NonNegative => d,
            BoundsMode::Signed => d.min((x + 1.0).abs()),
        }
    }

    /// Nearest extreme value.
    pub fn snap(self, x: f64) -> f64 {
        let mut best = 0.0;
        for c in [1.0, -1.0] {
            if (c >= self.lower()) && (x - c).abs() < (x - best).abs() {
                best = c;
            }
        }
        best
    }
}

/// Terminal condition `C x(T) = d`, with a reference state for scaling residuals.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalTarget {
    Exact(DenseVector),
    /// `v_1(T) = … = v_s(T)`; `nominal` is used for scaling only.
    BalancedStations { stations: usize, nominal: DenseVector },
}

impl TerminalTarget {
    pub fn reference(&self) -> &DenseVector {
        match self {
            TerminalTarget::Exact(x) => x,
            TerminalTarget::BalancedStations { nominal, .. } => nominal,
        }
    }

    pub fn constraint(&self, n: usize) -> (DenseMatrix, DenseVector) {
        match self {
            TerminalTarget::Exact(x) => (DenseMatrix::identity(n, n), x.clone()),
            TerminalTarget::BalancedStations { stations, .. } => {
                let rows = stations - 1;
                let mut c = DenseMatrix::zeros(rows, n);
                for i in 0..rows {
                    c[(i, i)] = 1.0;
                    c[(i, i + 1)] = -1.0;
                }
                (c, DenseVector::zeros(rows))
            }
        }
    }

    /// `‖C x − d‖∞`.
    pub fn residual(&self, x: &DenseVector) -> f64 {
        let (c, d) = self.constraint(x.len());
        (c * x - d).amax()
    }

    /// `‖x_ref‖∞`, floored at 1 so an all-zero target still has a scale.
    pub fn scale(&self) -> f64 {
        self.reference().amax().max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct RebalanceInstance {
    pub system: LtvSystem,
    pub x0: DenseVector,
    pub target: TerminalTarget,
    pub beta: usize,
    pub mode: BoundsMode,
}

impl RebalanceInstance {
    pub fn new(
        system: LtvSystem,
        x0: DenseVector,
        target: TerminalTarget,
        beta: usize,
        mode: BoundsMode,
    ) -> Result<Self, RebalanceError> {
        let n = system.state_dim();
        let m = system.input_dim();
        if x0.len() != n || target.reference().len() != n {
            return Err(RebalanceError::InvalidInstance(format!(
                "state vectors must have {n} entries"
            )));
        }
        if beta == 0 || beta > m {
            return Err(RebalanceError::InvalidInstance(format!(
                "simultaneity bound {beta} outside 1..={m}"
            )));
        }
        if let TerminalTarget::BalancedStations { stations, .. } = &target {
            if *stations < 2 || *stations > n {
                return Err(RebalanceError::InvalidInstance("bad station count".into()));
            }
        }
        Ok(Self {
            system,
            x0,
            target,
            beta,
            mode,
        })
    }

    pub fn from_scenario(
        scenario: &MobilityScenario,
        mode: BoundsMode,
    ) -> Result<(Self, MobilityModel), RebalanceError> {
        let model = MobilityModel::new(scenario.clone())?;
        let s = scenario.station_count();
        let target = match &scenario.target {
            TargetSpec::Exact { state } => TerminalTarget::Exact(DenseVector::from_vec(state.clone())),
            TargetSpec::Uniform => TerminalTarget::Exact(scenario.uniform_target()),
            TargetSpec::BalancedStations => TerminalTarget::BalancedStations {
                stations: s,
                nominal: scenario.uniform_target(),
            },
        };
        let inst = Self::new(model.to_ltv(), scenario.x0(), target, scenario.beta, mode)?;
        Ok((inst, model))
    }

    pub fn horizon(&self) -> f64 {
        self.system.horizon()
    }
}

/// `x(T) = Φ(T,0) x0 + Σ_k Γ_k u_k` with `Γ_k = ∫ Φ(T,τ) B(τ) dτ` over step `k`.
#[derive(Debug, Clone)]
pub struct ReachabilityDiscretization {
    pub grid: TimeGrid,
    pub phi_total: DenseMatrix,
    pub gammas: Vec<DenseMatrix>,
    /// Per-step transition blocks, kept for forward propagation.
    pub step_phi: Vec<DenseMatrix>,
    pub step_gamma: Vec<DenseMatrix>,
}

impl ReachabilityDiscretization {
    pub fn terminal_state(&self, x0: &DenseVector, u: &DenseMatrix) -> DenseVector {
        let mut x = &self.phi_total * x0;
        for (k, g) in self.gammas.iter().enumerate() {
            x += g * u.row(k).transpose();
        }
        x
    }

    /// Knot states under the zero-order-hold steps.
    pub fn trajectory(&self, x0: &DenseVector, u: &DenseMatrix) -> Vec<DenseVector> {
        let mut out = Vec::with_capacity(self.gammas.len() + 1);
        out.push(x0.clone());
        for k in 0..self.gammas.len() {
            let next = &self.step_phi[k] * &out[k] + &self.step_gamma[k] * u.row(k).transpose();
            out.push(next);
        }
        out
    }

    /// `Φ(T, t_k)` for every knot, `k = 0..=K`.
    pub fn transitions_to_end(&self) -> Vec<DenseMatrix> {
        let k = self.gammas.len();
        let n = self.phi_total.nrows();
        let mut out = vec![DenseMatrix::identity(n, n); k + 1];
        for step in (0..k).rev() {
            out[step] = &out[step + 1] * &self.step_phi[step];
        }
        out
    }
}

pub fn discretize_reachability(
    system: &LtvSystem,
    grid: &TimeGrid,
) -> Result<ReachabilityDiscretization, RebalanceError> {
    let steps = discretize_steps(system, grid)?;
    let k = grid.steps();
    let n = system.state_dim();
    let step_phi: Vec<DenseMatrix> = (0..k).map(|i| steps.get(i).phi.clone()).collect();
    let step_gamma: Vec<DenseMatrix> = (0..k).map(|i| steps.get(i).gamma.clone()).collect();
    let mut gammas = vec![DenseMatrix::zeros(0, 0); k];
    let mut p = DenseMatrix::identity(n, n);
    for i in (0..k).rev() {
        gammas[i] = &p * &step_gamma[i];
        p = &p * &step_phi[i];
    }
    Ok(ReachabilityDiscretization {
        grid: *grid,
        phi_total: p,
        gammas,
        step_phi,
        step_gamma,
    })
}

/// Activation-cost summary of a control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCensus {
    /// Active time per channel.
    pub l0_per_channel: Vec<f64>,
    pub l0_total: f64,
    pub l1_total: f64,
    /// Largest number of channels active in one step.
    pub l0_max_step: usize,
    /// Largest per-step `Σ_j |u_j|`.
    pub l1_max_step: f64,
}

pub fn cost_census(u: &DenseMatrix, grid: &TimeGrid) -> CostCensus {
    let dt = grid.dt();
    let (k, m) = u.shape();
    let l0_per_channel: Vec<f64> = (0..m)
        .map(|j| dt * u.column(j).iter().filter(|x| x.abs() > NONZERO_TOL).count() as f64)
        .collect();
    let l0_max_step = (0..k)
        .map(|s| u.row(s).iter().filter(|x| x.abs() > NONZERO_TOL).count())
        .max()
        .unwrap_or(0);
    let l1_max_step = (0..k)
        .map(|s| u.row(s).iter().map(|x| x.abs()).sum::<f64>())
        .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
        .unwrap_or(0.0);
    CostCensus {
        l0_total: l0_per_channel.iter().sum(),
        l0_per_channel,
        l1_total: dt * u.iter().map(|x| x.abs()).sum::<f64>(),
        l0_max_step,
        l1_max_step,
    }
}

/// Piecewise-constant control on a grid with its cost census.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTrajectory {
    pub grid: TimeGrid,
    /// `K x m`.
    pub u: DenseMatrix,
    pub census: CostCensus,
}

impl ControlTrajectory {
    pub fn new(grid: TimeGrid, u: DenseMatrix) -> Self {
        let census = cost_census(&u, &grid);
        Self { grid, u, census }
    }

    pub fn zeros(grid: TimeGrid, m: usize) -> Self {
        Self::new(grid, DenseMatrix::zeros(grid.steps(), m))
    }

    /// Share of cells with `|u| > NONZERO_TOL`.
    pub fn support_fraction(&self) -> f64 {
        let count = self.u.iter().filter(|x| x.abs() > NONZERO_TOL).count();
        count as f64 / self.u.len().max(1) as f64
    }

    /// `dt Σ dist(u, extremes) / (m T)` over cells farther than `tol`.
    pub fn interior_mass(&self, mode: BoundsMode, tol: f64) -> f64 {
        let dt = self.grid.dt();
        let mass: f64 = self
            .u
            .iter()
            .map(|&x| mode.distance(x))
            .filter(|d| *d > tol)
            .sum();
        dt * mass / (self.u.ncols() as f64 * self.grid.horizon())
    }

    /// Count of cells farther than `tol` from the extreme set.
    pub fn interior_cells(&self, mode: BoundsMode, tol: f64) -> usize {
        self.u.iter().filter(|x| mode.distance(**x) > tol).count()
    }
}

/// Result of a rebalancing method.
#[derive(Debug, Clone)]
pub struct RebalanceRun {
    pub method: &'static str,
    pub status: LpStatus,
    pub control: Option<ControlTrajectory>,
    pub terminal_residual: Option<f64>,
    /// `1ᵀ x_ref − 1ᵀ x0` for exact targets: nonzero means the target is unreachable.
    pub mass_gap: f64,
}

/// A named rebalancing method.
pub trait Rebalancer: Send + Sync {
    fn name(&self) -> &'static str;
    fn describe(&self) -> &'static str;
    fn solve(
        &self,
        instance: &RebalanceInstance,
        disc: &ReachabilityDiscretization,
    ) -> Result<RebalanceRun, RebalanceError>;
}

fn mass_gap(instance: &RebalanceInstance) -> f64 {
    match &instance.target {
        TerminalTarget::Exact(x) => x.sum() - instance.x0.sum(),
        TerminalTarget::BalancedStations { .. } => 0.0,
    }
}

/// L1 relaxation solved by the simplex method.
pub struct SparseL1;

impl Rebalancer for SparseL1 {
    fn name(&self) -> &'static str {
        "sparse-l1"
    }
    fn describe(&self) -> &'static str {
        "minimum total activation via the L1 relaxation"
    }
    fn solve(
        &self,
        instance: &RebalanceInstance,
        disc: &ReachabilityDiscretization,
    ) -> Result<RebalanceRun, RebalanceError> {
        let out = solve_relaxed_rebalance(instance, disc)?;
        Ok(RebalanceRun {
            method: self.name(),
            status: out.status,
            terminal_residual: out.terminal_residual,
            control: out.control,
            mass_gap: mass_gap(instance),
        })
    }
}

/// Least-squares control through the reachability Gramian.
pub struct MinEnergy;

impl Rebalancer for MinEnergy {
    fn name(&self) -> &'static str {
        "min-energy"
    }
    fn describe(&self) -> &'static str {
        "minimum-energy least-squares control (dense comparator)"
    }
    fn solve(
        &self,
        instance: &RebalanceInstance,
        disc: &ReachabilityDiscretization,
    ) -> Result<RebalanceRun, RebalanceError> {
        let out = min_energy_baseline(instance, disc)?;
        Ok(RebalanceRun {
            method: self.name(),
            status: LpStatus::Optimal,
            terminal_residual: Some(out.unclipped_residual),
            control: Some(out.unclipped),
            mass_gap: mass_gap(instance),
        })
    }
}

/// Rebalancing methods selectable by name.
pub struct RebalancerRegistry {
    methods: Vec<Box<dyn Rebalancer>>,
}

impl Default for RebalancerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SparseL1));
        r.register(Box::new(MinEnergy));
        r
    }
}

impl RebalancerRegistry {
    pub fn empty() -> Self {
        Self {
            methods: Vec::new(),
        }
    }

    pub fn register(&mut self, method: Box<dyn Rebalancer>) {
        self.methods.retain(|m| m.name() != method.name());
        self.methods.push(method);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Rebalancer> {
        self.methods
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.iter().map(|m| m.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census_of_simple_controls() {
        let grid = TimeGrid::new(2.0, 4).unwrap();
        let zero = cost_census(&DenseMatrix::zeros(4, 3), &grid);
        assert_eq!(zero.l0_total, 0.0);
        assert_eq!(zero.l1_total, 0.0);
        assert_eq!(zero.l0_max_step, 0);

        let mut u = DenseMatrix::zeros(4, 3);
        u.column_mut(1).fill(1.0);
        let c = cost_census(&u, &grid);
        assert_eq!(c.l0_per_channel, vec![0.0, 2.0, 0.0]);
        assert_eq!(c.l0_total, 2.0);
        assert_eq!(c.l0_max_step, 1);
        assert_eq!(c.l1_total, 2.0);
    }

    #[test]
    fn snapping_and_distances() {
        assert_eq!(BoundsMode::NonNegative.snap(-0.9), 0.0);
        assert_eq!(BoundsMode::Signed.snap(-0.9), -1.0);
        assert_eq!(BoundsMode::NonNegative.snap(0.7), 1.0);
        assert!((BoundsMode::Signed.distance(-0.6) - 0.4).abs() < 1e-15);
        assert!((BoundsMode::NonNegative.distance(-0.6) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn balanced_target_rows() {
        let t = TerminalTarget::BalancedStations {
            stations: 3,
            nominal: DenseVector::from_vec(vec![2.0; 9]),
        };
        let (c, d) = t.constraint(9);
        assert_eq!(c.shape(), (2, 9));
        assert_eq!(d.len(), 2);
        let mut x = DenseVector::zeros(9);
        x[0] = 1.0;
        x[1] = 1.0;
        x[2] = 1.0;
        x[5] = 7.0;
        assert_eq!(t.residual(&x), 0.0);
    }
}
