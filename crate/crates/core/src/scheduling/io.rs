use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Schedule, ScheduleError, ScheduleInstance};
use crate::numerics::{DenseMatrix, LtiSystem};

/// JSON form of a scheduling instance; matrices are lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInstanceFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub horizon: f64,
    pub alpha: Vec<f64>,
    pub beta: usize,
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DenseMatrix, ScheduleError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(ScheduleError::InvalidInstance(format!("{what} is empty")));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(ScheduleError::InvalidInstance(format!("{what} has ragged rows")));
    }
    Ok(DenseMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl ScheduleInstanceFile {
    pub fn to_instance(&self) -> Result<ScheduleInstance, ScheduleError> {
        let a = rows_to_matrix(&self.a, "A")?;
        let b = rows_to_matrix(&self.b, "B")?;
        let sys = LtiSystem::new(a, b, self.horizon)?;
        ScheduleInstance::new(sys, self.alpha.clone(), self.beta)
    }

    pub fn from_instance(instance: &ScheduleInstance) -> Self {
        let rows = |m: &DenseMatrix| {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        Self {
            a: rows(instance.system().a()),
            b: rows(instance.system().b()),
            horizon: instance.horizon(),
            alpha: instance.alpha().to_vec(),
            beta: instance.beta(),
        }
    }
}

/// CSV with header `t_k,v_1,…,v_m`, one row per step (left knot).
pub fn write_schedule_csv<W: Write>(schedule: &Schedule, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let m = schedule.channels();
    let mut header = vec!["t_k".to_string()];
    header.extend((1..=m).map(|j| format!("v_{j}")));
    w.write_record(&header)?;
    let grid = schedule.grid();
    for (k, row) in schedule.v.iter().enumerate() {
        let mut rec = vec![format!("{}", grid.knot(k))];
        rec.extend(row.iter().map(|x| format!("{x}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanttChannel {
    /// 1-based channel number.
    pub channel: usize,
    pub intervals: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanttChart {
    pub horizon: f64,
    pub channels: Vec<GanttChannel>,
}

/// Maximal runs of active cells (`v > 0.5`) per channel.
pub fn gantt_chart(schedule: &Schedule) -> GanttChart {
    let grid = schedule.grid();
    let channels = (0..schedule.channels())
        .map(|j| {
            let mut intervals = Vec::new();
            let mut start: Option<usize> = None;
            for k in 0..=schedule.steps {
                let on = k < schedule.steps && schedule.is_active(k, j);
                match (on, start) {
                    (true, None) => start = Some(k),
                    (false, Some(s)) => {
                        intervals.push([grid.knot(s), grid.knot(k)]);
                        start = None;
                    }
                    _ => {}
                }
            }
            GanttChannel {
                channel: j + 1,
                intervals,
            }
        })
        .collect();
    GanttChart {
        horizon: schedule.horizon,
        channels,
    }
}
