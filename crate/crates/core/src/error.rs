use thiserror::Error;

use crate::lp::LpError;
use crate::mobility::MobilityError;
use crate::numerics::NumericsError;
use crate::rebalance::RebalanceError;
use crate::scheduling::ScheduleError;
use crate::stochastic::StochasticError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Rebalance(#[from] RebalanceError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
