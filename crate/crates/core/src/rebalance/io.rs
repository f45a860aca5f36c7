use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::lp::LpStatus;
use crate::mobility::IndexMap;
use crate::numerics::{DenseMatrix, DenseVector, TimeGrid};

use super::{ControlTrajectory, NONZERO_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultCosts {
    #[serde(rename = "L0")]
    pub l0: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    pub l0_max: usize,
}

/// One nonzero cell: step `k`, pair key `"i,j"`, value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlEntry {
    pub k: usize,
    pub pair: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebalanceResults {
    pub method: String,
    pub status: LpStatus,
    pub costs: Option<ResultCosts>,
    pub terminal_residual: Option<f64>,
    /// Grid of the control, when one exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub controls: Vec<ControlEntry>,
}

impl RebalanceResults {
    pub fn new(
        method: &str,
        status: LpStatus,
        control: Option<&ControlTrajectory>,
        terminal_residual: Option<f64>,
        index: Option<&IndexMap>,
    ) -> Self {
        let controls = control
            .map(|c| {
                let mut out = Vec::new();
                for k in 0..c.u.nrows() {
                    for j in 0..c.u.ncols() {
                        let v = c.u[(k, j)];
                        if v.abs() > NONZERO_TOL {
                            let pair = index.map_or_else(|| (j + 1).to_string(), |ix| ix.pair_key(j));
                            out.push(ControlEntry { k, pair, value: v });
                        }
                    }
                }
                out
            })
            .unwrap_or_default();
        Self {
            method: method.to_string(),
            status,
            costs: control.map(|c| ResultCosts {
                l0: c.census.l0_total,
                l1: c.census.l1_total,
                l0_max: c.census.l0_max_step,
            }),
            terminal_residual,
            steps: control.map(|c| c.grid.steps()),
            horizon: control.map(|c| c.grid.horizon()),
            controls,
        }
    }

    /// Dense `K x m` control rebuilt from the sparse triplets. `None` when the
    /// file carries no grid or a triplet does not fit `index`.
    pub fn control_matrix(&self, index: &IndexMap) -> Option<(TimeGrid, DenseMatrix)> {
        let grid = TimeGrid::new(self.horizon?, self.steps?).ok()?;
        let keys: Vec<String> = (0..index.pair_count()).map(|p| index.pair_key(p)).collect();
        let mut u = DenseMatrix::zeros(grid.steps(), index.pair_count());
        for e in &self.controls {
            let p = keys.iter().position(|k| *k == e.pair)?;
            if e.k >= grid.steps() {
                return None;
            }
            u[(e.k, p)] = e.value;
        }
        Some((grid, u))
    }
}

/// CSV `t,x_1,…,x_n` at every knot.
pub fn write_state_csv<W: Write>(
    grid: &TimeGrid,
    states: &[DenseVector],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let n = states.first().map_or(0, |x| x.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for (k, x) in states.iter().enumerate() {
        let mut rec = vec![format!("{}", grid.knot(k))];
        rec.extend(x.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
