//! Integer-state Monte-Carlo simulation of the vehicle-sharing network.
//!
//! One step of length `δ` does, for every pair `(i, j)` (destination, origin):
//!
//! ```text
//! G_ij ~ Poisson(max(g_ij, 0) δ)          customer departures from j
//! U_ij  = whole units of the running sum of u_ij δ   rebalancing departures
//! A_ij ~ Binomial(F_ij, 1 − e^{−γ_ij δ})   arrivals at i
//! ```
//!
//! Departures are limited by the vehicles parked at the origin at the start of
//! the step; when the requests exceed them, the kept requests are drawn
//! uniformly at random (multivariate hypergeometric) and the rest are dropped
//! and counted. The expectations of these counts follow the mean-field ODE used
//! by [`crate::mobility`], which [`run_monte_carlo`] integrates alongside.
//!
//! Each run starts the rebalancing accumulators at independent uniform phases.
//!
//! Randomness: run `r` uses `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r`. Across-run statistics come from exact integer sums, so a summary
//! does not depend on how runs are spread over threads.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::{
    assemble_matrices, effective_demand, IndexMap, MobilityError, MobilityModel,
    MobilityScenario, PairCoefficients,
};
use crate::numerics::{
    propagate_state, DenseMatrix, DenseVector, LtiSystem, NumericsError, TimeGrid,
};

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("state component {index} = {value} is not a nonnegative integer")]
    NonIntegerState { index: usize, value: f64 },
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Parked counts per station and in-transit counts per pair (pair order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticState {
    pub parked: Vec<u64>,
    pub transit: Vec<u64>,
}

impl StochasticState {
    /// From a state vector in the mobility layout; entries must be whole.
    pub fn from_vector(index: &IndexMap, x: &DenseVector) -> Result<Self, StochasticError> {
        if x.len() != index.state_dim() {
            return Err(StochasticError::InvalidRates(format!(
                "state has {} entries, network needs {}",
                x.len(),
                index.state_dim()
            )));
        }
        let mut counts = Vec::with_capacity(x.len());
        for (i, &v) in x.iter().enumerate() {
            if !(v >= 0.0 && v.fract() == 0.0 && v < 1e15) {
                return Err(StochasticError::NonIntegerState { index: i, value: v });
            }
            counts.push(v as u64);
        }
        let transit = counts.split_off(index.stations());
        Ok(Self {
            parked: counts,
            transit,
        })
    }

    pub fn to_vector(&self) -> DenseVector {
        DenseVector::from_iterator(
            self.parked.len() + self.transit.len(),
            self.parked.iter().chain(&self.transit).map(|&c| c as f64),
        )
    }

    pub fn total(&self) -> u64 {
        self.parked.iter().chain(&self.transit).sum()
    }

    fn component(&self, c: usize) -> u64 {
        if c < self.parked.len() {
            self.parked[c]
        } else {
            self.transit[c - self.parked.len()]
        }
    }
}

/// Per-pair rates for one step.
#[derive(Debug, Clone, Copy)]
pub struct Rates<'a> {
    pub demand: &'a [f64],
    pub rebalance: &'a [f64],
    pub gamma: &'a [f64],
}

/// What one step had to clamp.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTally {
    /// `Σ max(−g, 0) δ`: demand mass dropped because the rate was negative.
    pub clamped_demand: f64,
    /// Departure requests dropped for lack of parked vehicles.
    pub truncated: u64,
}

/// Probability that a vehicle in transit arrives within `δ`.
pub fn arrival_probability(gamma: f64, delta: f64) -> f64 {
    -(-gamma * delta).exp_m1()
}

/// Poisson draw with mean `mean` (0 for nonpositive means).
pub fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("finite positive mean").sample(rng) as u64
    } else {
        0
    }
}

/// Advances `state` by one step. `carry` holds the fractional rebalancing
/// departures per pair and is updated in place.
pub fn step<R: Rng + ?Sized>(
    index: &IndexMap,
    state: &mut StochasticState,
    carry: &mut [f64],
    rates: Rates<'_>,
    delta: f64,
    rng: &mut R,
) -> StepTally {
    let m = index.pair_count();
    let mut tally = StepTally::default();
    let mut departures = vec![0u64; m];
    for p in 0..m {
        let g = rates.demand[p];
        if g < 0.0 {
            tally.clamped_demand -= g * delta;
        }
        let customers = poisson_draw(g * delta, rng);
        carry[p] += rates.rebalance[p].max(0.0) * delta;
        let whole = carry[p].floor();
        carry[p] -= whole;
        departures[p] = customers + whole as u64;
    }

    let arrivals: Vec<u64> = (0..m)
        .map(|p| {
            let f = state.transit[p];
            let q = arrival_probability(rates.gamma[p], delta);
            if f == 0 || q <= 0.0 {
                0
            } else if q >= 1.0 {
                f
            } else {
                Binomial::new(f, q).expect("valid probability").sample(rng)
            }
        })
        .collect();

    for origin in 0..index.stations() {
        let pairs: Vec<usize> = (0..m).filter(|&p| index.pair(p).1 == origin).collect();
        let requested: u64 = pairs.iter().map(|&p| departures[p]).sum();
        let available = state.parked[origin];
        if requested <= available {
            continue;
        }
        tally.truncated += requested - available;
        let mut pool = requested;
        let mut slots = available;
        for &p in &pairs {
            let want = departures[p];
            let kept = if slots == 0 || want == 0 {
                0
            } else if want == pool {
                slots
            } else {
                Hypergeometric::new(pool, want, slots)
                    .expect("valid hypergeometric")
                    .sample(rng)
            };
            pool -= want;
            slots -= kept;
            departures[p] = kept;
        }
    }

    for (p, &(dest, origin)) in index.pairs().iter().enumerate() {
        state.parked[origin] -= departures[p];
        state.transit[p] = state.transit[p] + departures[p] - arrivals[p];
        state.parked[dest] += arrivals[p];
    }
    tally
}

/// Piecewise-constant demand and rebalancing rates on a grid, already clamped
/// at zero. The clamped mass is kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSchedule {
    grid: TimeGrid,
    demand: Vec<Vec<f64>>,
    rebalance: Vec<Vec<f64>>,
    gamma: Vec<f64>,
    clamped_mass: f64,
}

impl RateSchedule {
    /// `demand` and `rebalance` are `K x m` (steps by pairs).
    pub fn new(
        grid: TimeGrid,
        demand: &DenseMatrix,
        rebalance: Option<&DenseMatrix>,
        gamma: Vec<f64>,
    ) -> Result<Self, StochasticError> {
        let m = gamma.len();
        let k = grid.steps();
        let zero = DenseMatrix::zeros(k, m);
        let rebalance = rebalance.unwrap_or(&zero);
        for (name, mat) in [("demand", demand), ("rebalance", rebalance)] {
            if mat.shape() != (k, m) {
                return Err(StochasticError::InvalidRates(format!(
                    "{name} is {:?}, expected {k}x{m}",
                    mat.shape()
                )));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(StochasticError::InvalidRates(format!("non-finite {name} rate")));
            }
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(StochasticError::InvalidRates(
                "travel rates must be finite and nonnegative".into(),
            ));
        }
        let negative: f64 = demand
            .iter()
            .chain(rebalance.iter())
            .map(|v| (-v).max(0.0))
            .sum();
        let rows = |mat: &DenseMatrix| -> Vec<Vec<f64>> {
            (0..k)
                .map(|r| mat.row(r).iter().map(|v| v.max(0.0)).collect())
                .collect()
        };
        Ok(Self {
            grid,
            demand: rows(demand),
            rebalance: rows(rebalance),
            gamma,
            clamped_mass: negative * grid.dt(),
        })
    }

    /// Time-invariant demand on `[0, horizon]` with no rebalancing.
    pub fn constant(horizon: f64, demand: &[f64], gamma: Vec<f64>) -> Result<Self, StochasticError> {
        let grid = TimeGrid::new(horizon, 1)?;
        let d = DenseMatrix::from_row_slice(1, demand.len(), demand);
        Self::new(grid, &d, None, gamma)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `∫ (g⁻ + u⁻) dt` summed over pairs: rate mass removed by clamping.
    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    /// Rates in force during grid step `k`.
    pub fn rates(&self, k: usize) -> Rates<'_> {
        Rates {
            demand: &self.demand[k],
            rebalance: &self.rebalance[k],
            gamma: &self.gamma,
        }
    }

    fn max_rate(&self) -> f64 {
        self.demand
            .iter()
            .chain(&self.rebalance)
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Network, initial integer state and rates.
#[derive(Debug, Clone)]
pub struct MonteCarloProblem {
    index: IndexMap,
    initial: StochasticState,
    rates: RateSchedule,
}

impl MonteCarloProblem {
    pub fn explicit(
        index: IndexMap,
        initial: StochasticState,
        rates: RateSchedule,
    ) -> Result<Self, StochasticError> {
        if initial.parked.len() != index.stations() || initial.transit.len() != index.pair_count() {
            return Err(StochasticError::InvalidRates(
                "initial state does not match the network".into(),
            ));
        }
        if rates.gamma.len() != index.pair_count() {
            return Err(StochasticError::InvalidRates(format!(
                "{} travel rates for {} pairs",
                rates.gamma.len(),
                index.pair_count()
            )));
        }
        Ok(Self {
            index,
            initial,
            rates,
        })
    }

    /// Demand from the scenario's pricing rule, evaluated along the
    /// deterministic trajectory under `control` (or none) and held constant
    /// over each step of `control`'s grid (or of `steps` uniform steps).
    pub fn from_scenario(
        scenario: &MobilityScenario,
        control: Option<(TimeGrid, DenseMatrix)>,
        steps: usize,
    ) -> Result<Self, StochasticError> {
        let model = MobilityModel::new(scenario.clone())?;
        let index = model.index().clone();
        let (grid, u) = match control {
            Some(c) => c,
            None => {
                let grid = TimeGrid::new(scenario.horizon_hours, steps)?;
                (grid, DenseMatrix::zeros(steps, index.pair_count()))
            }
        };
        let x0 = scenario.x0();
        let path = propagate_state(&model.to_ltv(), &x0, &u, &grid)?;
        let mut demand = DenseMatrix::zeros(grid.steps(), index.pair_count());
        for k in 0..grid.steps() {
            let mid = (&path[k] + &path[k + 1]) * 0.5;
            let g = effective_demand(scenario, &mid, grid.midpoint(k)).demand;
            demand.row_mut(k).copy_from_slice(&g);
        }
        let rates = RateSchedule::new(grid, &demand, Some(&u), scenario.gamma.clone())?;
        let initial = StochasticState::from_vector(&index, &x0)?;
        Self::explicit(index, initial, rates)
    }

    pub fn index(&self) -> &IndexMap {
        &self.index
    }

    pub fn initial(&self) -> &StochasticState {
        &self.initial
    }

    pub fn rates(&self) -> &RateSchedule {
        &self.rates
    }

    /// Mean-field ODE on `sim` for the same (clamped) rates.
    pub fn mean_field(&self, sim: &TimeGrid) -> Result<Vec<DenseVector>, StochasticError> {
        let m = self.index.pair_count();
        let travel = PairCoefficients {
            gamma: self.rates.gamma.clone(),
            theta: vec![0.0; m],
            lambda: vec![0.0; m],
        };
        let (a, b) = assemble_matrices(&self.index, &travel);
        let sys = LtiSystem::new(a, b, sim.horizon())?.to_ltv();
        let mut input = DenseMatrix::zeros(sim.steps(), m);
        for k in 0..sim.steps() {
            let r = self.rates.rates(self.rates.grid.step_of(sim.midpoint(k)));
            for p in 0..m {
                input[(k, p)] = r.demand[p] + r.rebalance[p];
            }
        }
        Ok(propagate_state(&sys, &self.initial.to_vector(), &input, sim)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Step length; must divide the horizon.
    pub delta: f64,
    pub runs: usize,
    pub seed: u64,
    /// Record every this many steps (the final knot is always recorded).
    pub record_every: usize,
}

impl SimulationConfig {
    pub fn new(delta: f64, runs: usize, seed: u64) -> Self {
        Self {
            delta,
            runs,
            seed,
            record_every: 1,
        }
    }

    /// Simulation grid over `[0, horizon]`.
    pub fn grid(&self, horizon: f64) -> Result<TimeGrid, StochasticError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(StochasticError::InvalidConfig(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.runs == 0 || self.record_every == 0 {
            return Err(StochasticError::InvalidConfig(
                "runs and record_every must be at least 1".into(),
            ));
        }
        let steps = (horizon / self.delta).round();
        if steps < 1.0 || (steps * self.delta - horizon).abs() > 1e-9 * horizon {
            return Err(StochasticError::InvalidConfig(format!(
                "delta {} does not divide the horizon {horizon}",
                self.delta
            )));
        }
        Ok(TimeGrid::new(horizon, steps as usize)?)
    }
}

/// Across-run statistics at the recorded knots, indexed `[knot][component]`.
/// Components follow the mobility state layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub delta: f64,
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub ode: Vec<Vec<f64>>,
    /// `(mean − ode) / sqrt(se² + 1/N²)`.
    pub zscore: Vec<Vec<f64>>,
    pub max_abs_z: f64,
    /// Departure requests dropped, summed over runs.
    pub truncated: u64,
    /// Rate mass removed by clamping negative rates.
    pub clamped_mass: f64,
}

impl MonteCarloSummary {
    pub fn clamping_inactive(&self) -> bool {
        self.truncated == 0 && self.clamped_mass == 0.0
    }

    pub fn passes(&self, z_limit: f64) -> bool {
        self.max_abs_z <= z_limit
    }

    /// Root-mean-square of `mean − ode` over all knots and components.
    pub fn rms_deviation(&self) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for (row, ode) in self.mean.iter().zip(&self.ode) {
            for (a, b) in row.iter().zip(ode) {
                sum += (a - b) * (a - b);
                count += 1;
            }
        }
        (sum / count.max(1) as f64).sqrt()
    }

    /// Root-mean-square of `(mean − ode) / sd` over cells with nonzero spread.
    /// Every component weighs the same, whatever its scale.
    pub fn normalized_deviation(&self) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for k in 0..self.times.len() {
            for c in 0..self.labels.len() {
                let v = self.variance[k][c];
                if v > 0.0 {
                    let d = self.mean[k][c] - self.ode[k][c];
                    sum += d * d / v;
                    count += 1;
                }
            }
        }
        (sum / count.max(1) as f64).sqrt()
    }
}

/// Deviation from the ODE at `N` and `N/2` runs, each averaged (in mean
/// square) over independent replicate batches.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub runs: usize,
    pub replicates: usize,
    pub full: f64,
    pub half: f64,
    /// `half / full`; about √2 when the error is sampling noise.
    pub ratio: f64,
}

/// Checks that the Monte-Carlo error shrinks like `1/√N`. Batch seeds are
/// drawn from `config.seed`.
pub fn deviation_scaling(
    problem: &MonteCarloProblem,
    config: &SimulationConfig,
    replicates: usize,
) -> Result<ScalingReport, StochasticError> {
    if config.runs < 2 || replicates == 0 {
        return Err(StochasticError::InvalidConfig(
            "scaling check needs at least 2 runs and 1 replicate".into(),
        ));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mean_square = |runs: usize| -> Result<f64, StochasticError> {
        let mut acc = 0.0;
        for _ in 0..replicates {
            let cfg = SimulationConfig {
                runs,
                seed: seeds.random(),
                ..config.clone()
            };
            acc += run_monte_carlo(problem, &cfg)?.normalized_deviation().powi(2);
        }
        Ok((acc / replicates as f64).sqrt())
    };
    let full = mean_square(config.runs)?;
    let half = mean_square(config.runs / 2)?;
    Ok(ScalingReport {
        runs: config.runs,
        replicates,
        full,
        half,
        ratio: half / full,
    })
}

fn component_labels(index: &IndexMap) -> Vec<String> {
    let mut labels: Vec<String> = (1..=index.stations()).map(|i| format!("v_{i}")).collect();
    labels.extend(
        index
            .pairs()
            .iter()
            .map(|&(i, j)| format!("f_{}_{}", i + 1, j + 1)),
    );
    labels
}

struct Sums {
    first: Vec<u128>,
    second: Vec<u128>,
    truncated: u64,
}

impl Sums {
    fn new(len: usize) -> Self {
        Self {
            first: vec![0; len],
            second: vec![0; len],
            truncated: 0,
        }
    }

    fn merge(mut self, other: Sums) -> Sums {
        for (a, b) in self.first.iter_mut().zip(other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(other.second) {
            *a += b;
        }
        self.truncated += other.truncated;
        self
    }
}

fn recorded_steps(steps: usize, every: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=steps).step_by(every).collect();
    if *out.last().unwrap() != steps {
        out.push(steps);
    }
    out
}

/// Runs `config.runs` independent simulations and compares their mean with the
/// mean-field ODE.
pub fn run_monte_carlo(
    problem: &MonteCarloProblem,
    config: &SimulationConfig,
) -> Result<MonteCarloSummary, StochasticError> {
    let sim = config.grid(problem.rates.grid.horizon())?;
    let delta = sim.dt();
    if problem.rates.max_rate() * delta > 1.0 {
        log::warn!(
            "rate x delta = {:.3} exceeds 1; consider a smaller delta",
            problem.rates.max_rate() * delta
        );
    }
    let knots = recorded_steps(sim.steps(), config.record_every);
    let n = problem.index.state_dim();
    let cells = knots.len() * n;
    let rate_step: Vec<usize> = (0..sim.steps())
        .map(|k| problem.rates.grid.step_of(sim.midpoint(k)))
        .collect();

    let sums = (0..config.runs)
        .into_par_iter()
        .fold(
            || Sums::new(cells),
            |mut acc, run| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(run as u64);
                let mut state = problem.initial.clone();
                // A uniform starting phase makes the whole departures emitted
                // by the accumulator unbiased over every window.
                let mut carry: Vec<f64> = (0..problem.index.pair_count())
                    .map(|_| rng.random::<f64>())
                    .collect();
                let record = |slot: usize, state: &StochasticState, acc: &mut Sums| {
                    for c in 0..n {
                        let v = state.component(c) as u128;
                        acc.first[slot * n + c] += v;
                        acc.second[slot * n + c] += v * v;
                    }
                };
                record(0, &state, &mut acc);
                let mut slot = 1;
                for (k, &r) in rate_step.iter().enumerate() {
                    let tally = step(
                        &problem.index,
                        &mut state,
                        &mut carry,
                        problem.rates.rates(r),
                        delta,
                        &mut rng,
                    );
                    acc.truncated += tally.truncated;
                    if slot < knots.len() && knots[slot] == k + 1 {
                        record(slot, &state, &mut acc);
                        slot += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| Sums::new(cells), Sums::merge);

    let ode_path = problem.mean_field(&sim)?;
    let runs = config.runs as u128;
    let mut summary = MonteCarloSummary {
        runs: config.runs,
        delta,
        times: knots.iter().map(|&k| sim.knot(k)).collect(),
        labels: component_labels(&problem.index),
        mean: Vec::with_capacity(knots.len()),
        variance: Vec::with_capacity(knots.len()),
        std_error: Vec::with_capacity(knots.len()),
        ode: Vec::with_capacity(knots.len()),
        zscore: Vec::with_capacity(knots.len()),
        max_abs_z: 0.0,
        truncated: sums.truncated,
        clamped_mass: problem.rates.clamped_mass(),
    };
    for (slot, &k) in knots.iter().enumerate() {
        let mut mean = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        let mut se = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        let ode: Vec<f64> = ode_path[k].iter().copied().collect();
        for c in 0..n {
            let s1 = sums.first[slot * n + c];
            let s2 = sums.second[slot * n + c];
            let mu = s1 as f64 / runs as f64;
            // N·Σx² − (Σx)² is exact in integers and never negative.
            let v = if runs > 1 {
                (runs * s2 - s1 * s1) as f64 / (runs * (runs - 1)) as f64
            } else {
                0.0
            };
            let e = (v / runs as f64).sqrt();
            let gap = mu - ode[c];
            // The mean moves in steps of 1/N; adding that resolution to the
            // standard error keeps rare-event components (a handful of
            // nonzero runs, or none) from producing spurious large z.
            let zc = gap / (e * e + (runs as f64).powi(-2)).sqrt();
            summary.max_abs_z = summary.max_abs_z.max(zc.abs());
            mean.push(mu);
            var.push(v);
            se.push(e);
            z.push(zc);
        }
        summary.mean.push(mean);
        summary.variance.push(var);
        summary.std_error.push(se);
        summary.ode.push(ode);
        summary.zscore.push(z);
    }
    Ok(summary)
}

/// CSV `t,component,mc_mean,mc_se,ode_value,zscore`, one row per knot and
/// component.
pub fn write_summary_csv<W: Write>(summary: &MonteCarloSummary, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "component", "mc_mean", "mc_se", "ode_value", "zscore"])?;
    for (k, t) in summary.times.iter().enumerate() {
        for (c, label) in summary.labels.iter().enumerate() {
            w.write_record([
                t.to_string(),
                label.clone(),
                summary.mean[k][c].to_string(),
                summary.std_error[k][c].to_string(),
                summary.ode[k][c].to_string(),
                summary.zscore[k][c].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Network with time-invariant demand, as read from JSON. Pair vectors follow
/// the mobility pair order; `transit` defaults to all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRatesFile {
    pub parked: Vec<u64>,
    #[serde(default)]
    pub transit: Option<Vec<u64>>,
    pub demand: Vec<f64>,
    pub gamma: Vec<f64>,
    pub horizon: f64,
}

impl ExplicitRatesFile {
    pub fn to_problem(&self) -> Result<MonteCarloProblem, StochasticError> {
        let index = IndexMap::new(self.parked.len())?;
        let m = index.pair_count();
        if self.demand.len() != m {
            return Err(StochasticError::InvalidRates(format!(
                "{} demand rates for {m} pairs",
                self.demand.len()
            )));
        }
        let initial = StochasticState {
            parked: self.parked.clone(),
            transit: self.transit.clone().unwrap_or_else(|| vec![0; m]),
        };
        let rates = RateSchedule::constant(self.horizon, &self.demand, self.gamma.clone())?;
        MonteCarloProblem::explicit(index, initial, rates)
    }
}
