//! Sampling diagnostic for the switching-function regularity that makes the
//! relaxed optimum bang-bang: for random directions ρ, the functions
//! `h_j(t) = ρᵀΦ(T,t)b_j(t)` should not dwell on 0, 1 or on each other.
//! A flag is a warning, never a proof.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::numerics::{DenseVector, LtvSystem};

use super::{ReachabilityDiscretization, RebalanceError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionOptions {
    pub trials: usize,
    pub seed: u64,
    pub gap_tol: f64,
    /// Consecutive knots within the gap that raise a flag.
    pub dwell: usize,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        Self {
            trials: 64,
            seed: 0,
            gap_tol: 1e-9,
            dwell: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlagKind {
    /// `h_j` stays at `eta`.
    Level { channel: usize, eta: f64 },
    /// `h_i` and `h_j` coincide.
    Pair { first: usize, second: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionFlag {
    pub trial: usize,
    pub flag: FlagKind,
    /// Longest run of knots inside the gap.
    pub run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub min_level_gap: f64,
    pub min_pair_gap: f64,
    pub longest_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub trials: usize,
    pub stats: Vec<TrialStats>,
    pub flags: Vec<AssumptionFlag>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.flags.is_empty()
    }
}

/// Random unit directions drawn from the seed.
pub fn check_assumption(
    system: &LtvSystem,
    disc: &ReachabilityDiscretization,
    opts: &AssumptionOptions,
) -> Result<AssumptionReport, RebalanceError> {
    let n = system.state_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let dirs: Vec<DenseVector> = (0..opts.trials)
        .map(|_| {
            let v = DenseVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = v.norm();
            v / norm
        })
        .collect();
    check_assumption_with(system, disc, &dirs, opts)
}

/// Same diagnostic with caller-supplied directions.
pub fn check_assumption_with(
    system: &LtvSystem,
    disc: &ReachabilityDiscretization,
    directions: &[DenseVector],
    opts: &AssumptionOptions,
) -> Result<AssumptionReport, RebalanceError> {
    let grid = disc.grid;
    let k = grid.steps();
    let m = system.input_dim();
    let phis = disc.transitions_to_end();
    let bs = (0..=k)
        .map(|i| system.matrices(grid.knot(i)).map(|(_, b)| b))
        .collect::<Result<Vec<_>, _>>()?;

    let mut stats = Vec::with_capacity(directions.len());
    let mut flags = Vec::new();
    for (trial, rho) in directions.iter().enumerate() {
        // h[i][j] = ρᵀ Φ(T, t_i) b_j(t_i)
        let h: Vec<Vec<f64>> = (0..=k)
            .map(|i| {
                let row = phis[i].tr_mul(rho);
                (0..m).map(|j| bs[i].column(j).dot(&row)).collect()
            })
            .collect();
        let mut st = TrialStats {
            min_level_gap: f64::INFINITY,
            min_pair_gap: f64::INFINITY,
            longest_run: 0,
        };
        let mut scan = |gap: &dyn Fn(usize) -> f64, flag: FlagKind, st: &mut TrialStats, min: &mut f64| {
            let (mut run, mut best) = (0usize, 0usize);
            for i in 0..=k {
                let g = gap(i);
                *min = min.min(g);
                if g < opts.gap_tol {
                    run += 1;
                    best = best.max(run);
                } else {
                    run = 0;
                }
            }
            st.longest_run = st.longest_run.max(best);
            if best >= opts.dwell {
                flags.push(AssumptionFlag { trial, flag, run: best });
            }
        };
        for j in 0..m {
            for eta in [0.0, 1.0] {
                let mut min = st.min_level_gap;
                scan(&|i| (h[i][j] - eta).abs(), FlagKind::Level { channel: j, eta }, &mut st, &mut min);
                st.min_level_gap = min;
            }
        }
        for a in 0..m {
            for b in a + 1..m {
                let mut min = st.min_pair_gap;
                scan(
                    &|i| (h[i][a] - h[i][b]).abs(),
                    FlagKind::Pair { first: a, second: b },
                    &mut st,
                    &mut min,
                );
                st.min_pair_gap = min;
            }
        }
        stats.push(st);
    }
    Ok(AssumptionReport {
        trials: directions.len(),
        stats,
        flags,
    })
}
