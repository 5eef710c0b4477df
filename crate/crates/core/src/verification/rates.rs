//! Observed convergence rates and their tabular output.

use std::fmt::Write as _;

use thiserror::Error;

use crate::verification::errors::FieldErrors;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("error {value} at position {index} is not positive")]
    NonPositive { index: usize, value: f64 },
}

/// `log₂(e_k / e_{k+1})` for consecutive halvings.
pub fn convergence_rate(errors: &[f64]) -> Result<Vec<f64>, RateError> {
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, &e)| !(e > 0.0 && e.is_finite())) {
        return Err(RateError::NonPositive { index, value });
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

pub const FIELD_NAMES: [&str; 6] = ["sigma", "u", "ustar", "gamma", "z", "p"];
const FIELD_LABELS: [&str; 6] = ["σ", "u", "u*", "γ", "z", "p"];

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub one_over_h: usize,
    pub errors: FieldErrors,
    /// Absent on the first row.
    pub rates: Option<[f64; 6]>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn from_errors(entries: &[(usize, FieldErrors)]) -> Result<Self, RateError> {
        let mut rows = Vec::with_capacity(entries.len());
        for (k, &(one_over_h, errors)) in entries.iter().enumerate() {
            let rates = if k == 0 {
                None
            } else {
                let prev = entries[k - 1].1.as_array();
                let cur = errors.as_array();
                let mut r = [0.0; 6];
                for f in 0..6 {
                    r[f] = convergence_rate(&[prev[f], cur[f]])?[0];
                }
                Some(r)
            };
            rows.push(RateRow { one_over_h, errors, rates });
        }
        Ok(RateTable { rows })
    }

    pub fn csv_header() -> String {
        let mut h = String::from("one_over_h");
        for name in FIELD_NAMES {
            let _ = write!(h, ",err_{name},rate_{name}");
        }
        h
    }

    /// Full-precision CSV; the first row has empty rate cells.
    pub fn to_csv(&self) -> String {
        let mut out = Self::csv_header();
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{}", row.one_over_h);
            let e = row.errors.as_array();
            for f in 0..6 {
                let rate = row.rates.map(|r| format!("{:e}", r[f])).unwrap_or_default();
                let _ = write!(out, ",{:e},{}", e[f], rate);
            }
            out.push('\n');
        }
        out
    }

    /// Markdown with three significant digits.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| 1/h |");
        for label in FIELD_LABELS {
            let _ = write!(out, " ‖{label} error‖ | rate |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|---|".repeat(6));
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "| {} |", row.one_over_h);
            let e = row.errors.as_array();
            for f in 0..6 {
                let rate = row.rates.map(|r| format!("{:.2}", r[f])).unwrap_or_else(|| "--".into());
                let _ = write!(out, " {} | {} |", sci3(e[f]), rate);
            }
            out.push('\n');
        }
        out
    }

    /// Rates of the last row, if there are at least two rows.
    pub fn final_rates(&self) -> Option<[f64; 6]> {
        self.rows.last().and_then(|r| r.rates)
    }
}

/// Three significant digits in scientific notation, e.g. `5.93e0`.
pub fn sci3(v: f64) -> String {
    format!("{v:.2e}")
}
