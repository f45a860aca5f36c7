//! Vehicle-sharing network model.
//!
//! State layout for `s` stations: parked counts `v_1..v_s` followed by the
//! in-transit counts `f_ij` for every ordered pair `i != j`, where `i` is the
//! destination and `j` the origin. Pairs are ordered lexicographically by
//! `(i, j)`; the rebalancing input `u_ij` uses the same order.
//!
//! ```text
//! f_ij' = -γ_ij f_ij + g_ij + u_ij
//! v_i'  =  Σ_j γ_ij f_ij − Σ_k (g_ki + u_ki)
//! g_ij  = −θ_ij (λ_ij v_i − λ_ji v_j)
//! ```

mod scenario;
mod staff;

use std::sync::Arc;

use thiserror::Error;

use crate::numerics::{DenseMatrix, DenseVector, LtvSystem, MatrixProvider, NumericsError};

pub use scenario::{
    generate_random_scenario, travel_rate, CongestionBump, ExplicitScenario, GeneratedScenario,
    GeneratorConfig, MobilityScenario, ScenarioFile, Station, TargetSpec,
};
pub use staff::{build_staff_problem, StaffOptions, StaffProblem, StaffRowCensus};

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("at least two stations are required, got {0}")]
    TooFewStations(usize),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("missing coefficient {what} for pair ({i}, {j})")]
    MissingCoefficient { what: &'static str, i: usize, j: usize },
    #[error("staff problem too large: {vars} variables exceeds cap {cap}")]
    TooLarge { vars: usize, cap: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Ordered pairs and state offsets for `s` stations. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    s: usize,
    pairs: Vec<(usize, usize)>,
    lookup: Vec<Option<usize>>,
}

impl IndexMap {
    pub fn new(s: usize) -> Result<Self, MobilityError> {
        if s < 2 {
            return Err(MobilityError::TooFewStations(s));
        }
        let mut pairs = Vec::with_capacity(s * s - s);
        let mut lookup = vec![None; s * s];
        for i in 0..s {
            for j in 0..s {
                if i != j {
                    lookup[i * s + j] = Some(pairs.len());
                    pairs.push((i, j));
                }
            }
        }
        Ok(Self { s, pairs, lookup })
    }

    pub fn stations(&self) -> usize {
        self.s
    }

    /// `m = s² − s`.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// `n = s²`.
    pub fn state_dim(&self) -> usize {
        self.s * self.s
    }

    /// `(destination, origin)` of pair `p`.
    pub fn pair(&self, p: usize) -> (usize, usize) {
        self.pairs[p]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn index(&self, dest: usize, origin: usize) -> Option<usize> {
        if dest < self.s && origin < self.s {
            self.lookup[dest * self.s + origin]
        } else {
            None
        }
    }

    /// State component of the in-transit count of pair `p`.
    pub fn transit_state(&self, p: usize) -> usize {
        self.s + p
    }

    /// `"i,j"` with 1-based station ids, as used in scenario files.
    pub fn pair_key(&self, p: usize) -> String {
        let (i, j) = self.pairs[p];
        format!("{},{}", i + 1, j + 1)
    }
}

pub fn build_index_map(s: usize) -> Result<IndexMap, MobilityError> {
    IndexMap::new(s)
}

/// Per-pair coefficients in pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCoefficients {
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// `A` (`n x n`) and `B` (`n x m`) for the given coefficients.
pub fn assemble_matrices(index: &IndexMap, c: &PairCoefficients) -> (DenseMatrix, DenseMatrix) {
    let s = index.stations();
    let n = index.state_dim();
    let m = index.pair_count();
    let mut a = DenseMatrix::zeros(n, n);
    let mut b = DenseMatrix::zeros(n, m);
    for (p, &(i, j)) in index.pairs().iter().enumerate() {
        let fp = s + p;
        let rev = index.index(j, i).expect("reverse pair exists");
        // Pricing row: -g_ij = θ_ij(λ_ij v_i − λ_ji v_j).
        let wi = c.theta[p] * c.lambda[p];
        let wj = c.theta[p] * c.lambda[rev];
        a[(fp, i)] -= wi;
        a[(fp, j)] += wj;
        a[(j, i)] += wi;
        a[(j, j)] -= wj;
        // Arrivals.
        a[(fp, fp)] = -c.gamma[p];
        a[(i, fp)] = c.gamma[p];
        b[(j, p)] = -1.0;
        b[(fp, p)] = 1.0;
    }
    (a, b)
}

/// `(A(t), B)` of a scenario. Coefficients are constant over the horizon.
pub fn build_system_matrices(
    scenario: &MobilityScenario,
    _t: f64,
) -> (DenseMatrix, DenseMatrix) {
    assemble_matrices(&scenario.index(), &scenario.coefficients())
}

/// Scenario together with its assembled system matrices.
#[derive(Debug, Clone)]
pub struct MobilityModel {
    scenario: MobilityScenario,
    index: IndexMap,
    a: DenseMatrix,
    b: DenseMatrix,
}

impl MobilityModel {
    pub fn new(scenario: MobilityScenario) -> Result<Self, MobilityError> {
        scenario.validate()?;
        let index = scenario.index();
        let (a, b) = assemble_matrices(&index, &scenario.coefficients());
        Ok(Self {
            scenario,
            index,
            a,
            b,
        })
    }

    pub fn scenario(&self) -> &MobilityScenario {
        &self.scenario
    }

    pub fn index(&self) -> &IndexMap {
        &self.index
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn to_ltv(&self) -> LtvSystem {
        LtvSystem::new(Arc::new(self.clone()), self.scenario.horizon_hours)
    }
}

impl MatrixProvider for MobilityModel {
    fn state_dim(&self) -> usize {
        self.index.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.index.pair_count()
    }

    fn matrices(&self, _t: f64) -> Result<(DenseMatrix, DenseMatrix), NumericsError> {
        Ok((self.a.clone(), self.b.clone()))
    }

    fn is_time_invariant(&self) -> bool {
        true
    }
}

/// Effective demand and prices at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandReport {
    /// `g_ij`, pair order; may be negative.
    pub demand: Vec<f64>,
    /// `p_ij = ḡ_ij/θ_ij + λ_ij v_i − λ_ji v_j`.
    pub price: Vec<f64>,
    /// Pairs with negative demand.
    pub negative: Vec<usize>,
}

pub fn effective_demand(scenario: &MobilityScenario, x: &DenseVector, _t: f64) -> DemandReport {
    let index = scenario.index();
    let mut demand = Vec::with_capacity(index.pair_count());
    let mut price = Vec::with_capacity(index.pair_count());
    for (p, &(i, j)) in index.pairs().iter().enumerate() {
        let rev = index.index(j, i).expect("reverse pair exists");
        let shift = scenario.lambda[p] * x[i] - scenario.lambda[rev] * x[j];
        demand.push(-scenario.theta[p] * shift);
        price.push(scenario.gbar[p] / scenario.theta[p] + shift);
    }
    let negative = demand
        .iter()
        .enumerate()
        .filter(|(_, g)| **g < 0.0)
        .map(|(p, _)| p)
        .collect();
    DemandReport {
        demand,
        price,
        negative,
    }
}
