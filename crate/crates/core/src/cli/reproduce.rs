//! Headline numbers recomputed from the closed forms and set against the
//! published values.

use crate::params::ProtocolParams;
use crate::rates::{self, RatesError};

use super::report::Record;

/// Relative tolerance for two-significant-figure published values.
pub const TOLERANCE: f64 = 0.02;

pub const PR_NOTE: &str = "reference value, not computed";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub quantity: &'static str,
    pub computed: Option<f64>,
    pub paper: f64,
    pub unit: &'static str,
    pub not_computed: bool,
}

impl Row {
    pub fn rel_dev(&self) -> Option<f64> {
        self.computed.map(|c| ((c - self.paper) / self.paper).abs())
    }

    /// `None` for reference rows.
    pub fn passed(&self) -> Option<bool> {
        self.rel_dev().map(|d| d <= TOLERANCE)
    }

    pub fn record(&self) -> Record {
        Record::new()
            .with("quantity", self.quantity)
            .with("computed", self.computed)
            .with("paper", self.paper)
            .with("unit", self.unit)
            .with("rel_dev", self.rel_dev())
            .with("pass", self.passed())
            .with("not_computed", self.not_computed)
            .with("note", if self.not_computed { PR_NOTE } else { "" })
    }
}

fn row(quantity: &'static str, computed: f64, paper: f64, unit: &'static str) -> Row {
    Row { quantity, computed: Some(computed), paper, unit, not_computed: false }
}

pub fn rows() -> Result<Vec<Row>, RatesError> {
    let p = ProtocolParams::paper_defaults();
    let (best, _) = rates::optimal_n(&p, 1, 10)?;
    Ok(vec![
        row("t_total_n4", rates::t_total(&p)?.t_total, 4.4, "s"),
        row("t_total_n6", rates::t_total(&p.with_n(6))?.t_total, 0.84, "s"),
        row("balance_rate", rates::balance_rate(&p)?, 3.76e6, "Hz"),
        row("delta_f_n4", rates::delta_f(4, p.p_d), 1.6e-4, ""),
        row("optimal_n", f64::from(best), 6.0, ""),
        Row { quantity: "pr_protocol_t_total", computed: None, paper: 107.6, unit: "s", not_computed: true },
    ])
}

/// True when every computed row is within [`TOLERANCE`].
pub fn all_pass(rows: &[Row]) -> bool {
    rows.iter().all(|r| r.passed() != Some(false))
}
