//! Structured records of checked inequalities and their CSV form.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// Default slack tolerance, relative to `max(1, |rhs|)`.
pub const SLACK_TOL: f64 = 1e-10;

/// One checked inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub dim: usize,
    pub indices: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Always exactly `rhs - lhs`; negative values signal a violation.
    pub slack: f64,
    pub seed: u64,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, dim: usize, indices: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        BoundReport { name: name.into(), dim, indices: indices.into(), lhs, rhs, slack: rhs - lhs, seed: 0 }
    }

    /// A residual report: `lhs` is a deviation that must stay below `tolerance`.
    pub fn residual(name: impl Into<String>, dim: usize, indices: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self::new(name, dim, indices, deviation, tolerance)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn scaled_tolerance(&self, tol: f64) -> f64 {
        tol * self.rhs.abs().max(1.0)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.slack.is_finite() && self.slack >= -self.scaled_tolerance(tol)
    }
}

pub fn format_index(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

pub fn write_csv<W: Write>(writer: W, rows: &[BoundReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(reader: R) -> csv::Result<Vec<BoundReport>> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Minimum of `slack / max(1, |rhs|)` over a batch.
pub fn min_relative_slack(rows: &[BoundReport]) -> f64 {
    rows.iter().map(|r| r.slack / r.rhs.abs().max(1.0)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_is_rhs_minus_lhs() {
        let r = BoundReport::new("x", 2, "p=2", 3.0, 2.5);
        assert_eq!(r.slack, -0.5);
        assert!(!r.passes(1e-10));
        assert!(BoundReport::new("x", 2, "", 1.0, 1.0).passes(1e-10));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            BoundReport::new("holder", 3, "p=2;q=2", 0.1, 0.3).with_seed(9),
            BoundReport::new("minkowski", 4, "p=inf", 1.0 / 3.0, 2.0),
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("name,dim,indices,lhs,rhs,slack,seed\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }
}
