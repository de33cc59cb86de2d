//! One-parameter grids over the closed-form rates.

use thiserror::Error;

use crate::exec::Execution;
use crate::params::{ConfigError, ProtocolParams};
use crate::rates::{self, RateReport, RatesError};

use super::report::Record;

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// `steps` evenly spaced points including both ends.
    Linear { from: f64, to: f64, steps: usize },
    /// Every integer in `[from, to]`.
    Integer { from: f64, to: f64 },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            Grid::Linear { from, to, steps } => match steps {
                0 => Vec::new(),
                1 => vec![from],
                _ => (0..steps).map(|i| from + (to - from) * i as f64 / (steps - 1) as f64).collect(),
            },
            Grid::Integer { from, to } => {
                let (lo, hi) = (from.ceil(), to.floor());
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Vec::new();
                }
                (0..=(hi - lo) as u64).map(|i| lo + i as f64).collect()
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("the grid is empty")]
    EmptyGrid,
    #[error("at {key} = {value}: {source}")]
    Rates { key: String, value: f64, source: RatesError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub report: RateReport,
    /// Smallest `t_total` on the grid; ties go to the earlier point.
    pub argmin: bool,
}

pub fn sweep(base: &ProtocolParams, key: &str, grid: &Grid, exec: Execution) -> Result<Vec<SweepRow>, SweepError> {
    let points = grid.points();
    if points.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let mut grid_params = Vec::with_capacity(points.len());
    for &v in &points {
        let mut p = *base;
        p.set(key, v)?;
        p.validate().map_err(ConfigError::from)?;
        grid_params.push(p);
    }
    let reports = exec.map(points.len() as u64, |i| rates::t_total(&grid_params[i as usize]));
    let mut rows = Vec::with_capacity(points.len());
    for (value, report) in points.into_iter().zip(reports) {
        let report = report.map_err(|source| SweepError::Rates { key: key.to_string(), value, source })?;
        rows.push(SweepRow { value, report, argmin: false });
    }
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.report.t_total.total_cmp(&b.1.report.t_total).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty");
    rows[best].argmin = true;
    Ok(rows)
}

pub fn record(key: &str, row: &SweepRow) -> Record {
    let mut r = Record::new().with("param", key.to_string()).with("value", row.value);
    for (name, v) in RateReport::FIELDS.iter().zip(row.report.values()) {
        r = r.with(name, v);
    }
    r.with("argmin", row.argmin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_sweep_marks_six() {
        let rows = sweep(&ProtocolParams::paper_defaults(), "n", &Grid::Integer { from: 1.0, to: 10.0 }, Execution::default())
            .unwrap();
        assert_eq!(rows.len(), 10);
        let marked: Vec<f64> = rows.iter().filter(|r| r.argmin).map(|r| r.value).collect();
        assert_eq!(marked, vec![6.0]);
    }

    #[test]
    fn detector_sweep_decreasing() {
        let grid = Grid::Linear { from: 0.5, to: 0.9, steps: 5 };
        let rows = sweep(&ProtocolParams::paper_defaults(), "eta_d", &grid, Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 5);
        assert!((rows[4].value - 0.9).abs() < 1e-15);
        assert!(rows.windows(2).all(|w| w[1].report.t_total < w[0].report.t_total));
        assert!(rows[4].argmin);
    }

    #[test]
    fn errors() {
        let p = ProtocolParams::paper_defaults();
        let g = Grid::Linear { from: 0.5, to: 0.9, steps: 3 };
        assert!(matches!(sweep(&p, "bogus", &g, Execution::default()), Err(SweepError::Config(_))));
        let empty = Grid::Linear { from: 0.5, to: 0.9, steps: 0 };
        assert!(matches!(sweep(&p, "eta_d", &empty, Execution::default()), Err(SweepError::EmptyGrid)));
        assert!(Grid::Integer { from: 3.5, to: 3.7 }.points().is_empty());
        let out_of_range = Grid::Linear { from: 0.5, to: 1.5, steps: 3 };
        assert!(matches!(sweep(&p, "eta_d", &out_of_range, Execution::default()), Err(SweepError::Config(_))));
        let dead = Grid::Linear { from: 0.0, to: 0.5, steps: 2 };
        assert!(matches!(sweep(&p, "eta_d", &dead, Execution::default()), Err(SweepError::Rates { .. })));
    }

    #[test]
    fn record_columns() {
        let rows = sweep(&ProtocolParams::paper_defaults(), "n", &Grid::Integer { from: 4.0, to: 4.0 }, Execution::default())
            .unwrap();
        let rec = record("n", &rows[0]);
        let cols: Vec<&str> = rec.0.iter().map(|(k, _)| *k).collect();
        assert_eq!(cols.len(), 2 + RateReport::FIELDS.len() + 1);
        assert_eq!(cols[..2], ["param", "value"]);
        assert_eq!(cols.last(), Some(&"argmin"));
    }
}
