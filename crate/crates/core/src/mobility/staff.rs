//! Rebalancing with explicit staff teams: every team drives its own car
//! (staff states follow the same travel dynamics without pricing), may only
//! move a customer vehicle along a route it is driving, cannot leave a station
//! without a car, and handles at most one route at a time. The per-team
//! one-route rule is relaxed to an ℓ¹ bound; no exactness is claimed.

use serde::Serialize;

use super::{assemble_matrices, MobilityError, MobilityScenario, PairCoefficients};
use crate::lp::{LinearProgram, LpBuilder};
use crate::numerics::{DenseMatrix, DenseVector, LtiSystem, TimeGrid};
use crate::rebalance::{discretize_reachability, BoundsMode, RebalanceInstance};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaffOptions {
    /// Staff travel rate relative to customer travel rate.
    pub speed_scale: f64,
    /// Refuse to build problems with more variables than this.
    pub max_vars: usize,
}

impl Default for StaffOptions {
    fn default() -> Self {
        Self {
            speed_scale: 1.0,
            max_vars: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StaffRowCensus {
    /// `û >= u` rows, `m·K·β`.
    pub coupling: usize,
    /// Staff parked counts `>= 0` at knots `1..=K`, `s·K·β`.
    pub staff_nonneg: usize,
    /// Per-team per-step ℓ¹ rows, `K·β`.
    pub team_l1: usize,
    pub terminal: usize,
}

#[derive(Debug, Clone)]
pub struct StaffProblem {
    pub lp: LinearProgram,
    pub teams: usize,
    pub steps: usize,
    pub pairs: usize,
    pub census: StaffRowCensus,
    /// Initial staff state of each team (one car at station `team mod s`).
    pub staff_x0: Vec<DenseVector>,
}

impl StaffProblem {
    /// Column of `u_{p,team}` at `step`.
    pub fn u_var(&self, team: usize, step: usize, p: usize) -> usize {
        (team * self.steps + step) * self.pairs + p
    }

    /// Column of `û_{p,team}` at `step`.
    pub fn uhat_var(&self, team: usize, step: usize, p: usize) -> usize {
        self.teams * self.steps * self.pairs + self.u_var(team, step, p)
    }

    /// Aggregate customer control `u = Σ_team u_team` (`K x m`) from an LP point.
    pub fn aggregate(&self, z: &DenseVector) -> DenseMatrix {
        DenseMatrix::from_fn(self.steps, self.pairs, |k, p| {
            (0..self.teams).map(|t| z[self.u_var(t, k, p)]).sum()
        })
    }
}

pub fn build_staff_problem(
    scenario: &MobilityScenario,
    grid: &TimeGrid,
    opts: &StaffOptions,
) -> Result<StaffProblem, MobilityError> {
    scenario.validate()?;
    let index = scenario.index();
    let s = index.stations();
    let m = index.pair_count();
    let k = grid.steps();
    let beta = scenario.beta;
    let dt = grid.dt();
    let nvars = 2 * m * k * beta;
    if nvars > opts.max_vars {
        return Err(MobilityError::TooLarge {
            vars: nvars,
            cap: opts.max_vars,
        });
    }

    // Customer reachability and terminal rows.
    let (inst, _) = RebalanceInstance::from_scenario(scenario, BoundsMode::NonNegative)
        .map_err(|e| MobilityError::InvalidScenario(e.to_string()))?;
    let disc = discretize_reachability(&inst.system, grid)
        .map_err(|e| MobilityError::InvalidScenario(e.to_string()))?;
    let n = index.state_dim();
    let (c, d) = inst.target.constraint(n);
    let rhs = &d - &c * (&disc.phi_total * &inst.x0);

    // Staff dynamics: same travel structure, no pricing.
    let staff_coeffs = PairCoefficients {
        gamma: scenario.gamma.iter().map(|g| g * opts.speed_scale).collect(),
        theta: vec![1.0; m],
        lambda: vec![0.0; m],
    };
    let (a_s, b_s) = assemble_matrices(&index, &staff_coeffs);
    let staff_sys = LtiSystem::new(a_s, b_s, grid.horizon())?.to_ltv();
    let staff = discretize_reachability(&staff_sys, grid)
        .map_err(|e| MobilityError::InvalidScenario(e.to_string()))?;
    let phi = &staff.step_phi[0];
    let g = &staff.step_gamma[0];
    // powers[r] = Φ̂^r Ĝ restricted to the parked rows.
    let mut powers = Vec::with_capacity(k);
    let mut acc = g.clone();
    for _ in 0..k {
        powers.push(acc.rows(0, s).into_owned());
        acc = phi * acc;
    }

    let layout = StaffProblem {
        lp: LpBuilder::new(0).build(),
        teams: beta,
        steps: k,
        pairs: m,
        census: StaffRowCensus {
            coupling: 0,
            staff_nonneg: 0,
            team_l1: 0,
            terminal: 0,
        },
        staff_x0: Vec::new(),
    };
    let mut b = LpBuilder::new(nvars);
    for v in 0..nvars {
        b.set_cost(v, dt).set_bounds(v, 0.0, 1.0);
    }
    let mut census = StaffRowCensus {
        coupling: 0,
        staff_nonneg: 0,
        team_l1: 0,
        terminal: 0,
    };

    // Terminal condition on the aggregate control.
    let cg: Vec<DenseMatrix> = disc.gammas.iter().map(|g| &c * g).collect();
    for r in 0..c.nrows() {
        let mut entries = Vec::with_capacity(beta * k * m);
        for team in 0..beta {
            for (step, blk) in cg.iter().enumerate() {
                for p in 0..m {
                    let v = blk[(r, p)];
                    if v != 0.0 {
                        entries.push((layout.u_var(team, step, p), v));
                    }
                }
            }
        }
        b.add_eq(entries, rhs[r]);
        census.terminal += 1;
    }

    let mut staff_x0 = Vec::with_capacity(beta);
    for team in 0..beta {
        let mut x0 = DenseVector::zeros(n);
        x0[team % s] = 1.0;
        // Coupling û >= u and the relaxed one-route rule.
        for step in 0..k {
            for p in 0..m {
                b.add_le(
                    vec![
                        (layout.u_var(team, step, p), 1.0),
                        (layout.uhat_var(team, step, p), -1.0),
                    ],
                    0.0,
                );
                census.coupling += 1;
            }
            b.add_le(
                (0..m).map(|p| (layout.uhat_var(team, step, p), 1.0)).collect(),
                1.0,
            );
            census.team_l1 += 1;
        }
        // Staff cars parked at each station stay nonnegative at every knot.
        let mut free = x0.clone();
        for l in 1..=k {
            free = phi * free;
            for i in 0..s {
                let mut entries = Vec::new();
                for q in 0..l {
                    let blk = &powers[l - 1 - q];
                    for p in 0..m {
                        let v = blk[(i, p)];
                        if v != 0.0 {
                            entries.push((layout.uhat_var(team, q, p), -v));
                        }
                    }
                }
                b.add_le(entries, free[i]);
                census.staff_nonneg += 1;
            }
        }
        staff_x0.push(x0);
    }

    Ok(StaffProblem {
        lp: b.build(),
        census,
        staff_x0,
        ..layout
    })
}
