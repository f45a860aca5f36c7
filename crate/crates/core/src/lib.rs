//! Sparse control-node scheduling and sparse rebalancing of one-way
//! vehicle-sharing networks.
//!
//! The combinatorial L0/l0 problems (switching budgets per channel and a cap
//! on simultaneously active channels) are solved through their L1/l1
//! linear-program relaxations, which return binary vertices when the
//! regularity hypotheses hold.
//!
//! Module map:
//! - [`numerics`]: dense linear algebra, matrix exponential, transition matrices.
//! - [`lp`]: bounded-variable revised simplex and KKT residual checks.
//! - [`scheduling`]: controllability scores and the node-scheduling solvers.
//! - [`mobility`]: mobility-network model, scenarios and the staff extension.
//! - [`rebalance`]: sparse rebalancing through the reachability LP.
//! - [`stochastic`]: integer-state Monte-Carlo validation of the mean-field model.

pub mod error;
pub mod lp;
pub mod mobility;
pub mod numerics;
pub mod rebalance;
pub mod scheduling;
pub mod stochastic;

pub use error::{Error, Result};
