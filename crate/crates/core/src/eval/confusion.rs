use std::fmt;

use crate::error::{Error, Result};

/// Row = requested subcategory, column = oracle verdict, values in percent.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(m: usize) -> Self {
        Self {
            counts: vec![vec![0; m]; m],
        }
    }

    /// Builds from raw counts; every row must be non-empty.
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let m = counts.len();
        if m == 0 || counts.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("confusion counts must be a non-empty square matrix"));
        }
        Ok(Self { counts })
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn row_total(&self, k: usize) -> usize {
        self.counts[k].iter().sum()
    }

    /// Percentages; an empty row stays all zero.
    pub fn percent(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }

    /// Share of row `k` classified as `k`, in `[0, 1]`.
    pub fn class_accuracy(&self, k: usize) -> f64 {
        let total = self.row_total(k);
        if total == 0 {
            0.0
        } else {
            self.counts[k][k] as f64 / total as f64
        }
    }

    /// Macro accuracy: every class weighs the same.
    pub fn accuracy(&self) -> f64 {
        (0..self.size()).map(|k| self.class_accuracy(k)).sum::<f64>() / self.size() as f64
    }

    /// True when every diagonal entry is strictly larger than every other
    /// entry in its row.
    pub fn diagonally_dominant(&self) -> bool {
        self.counts.iter().enumerate().all(|(k, row)| {
            row.iter()
                .enumerate()
                .all(|(j, &c)| j == k || c < row[k])
        })
    }

    /// Aligned plain-text table of percentages.
    pub fn to_table(&self, names: &[String]) -> String {
        let label = |k: usize| names.get(k).cloned().unwrap_or_else(|| k.to_string());
        let pct = self.percent();
        let width = (0..self.size())
            .map(|k| label(k).len())
            .max()
            .unwrap_or(0)
            .max(7);
        let mut out = format!("{:>width$}", "");
        for k in 0..self.size() {
            out.push_str(&format!(" {:>width$}", label(k)));
        }
        out.push('\n');
        for (k, row) in pct.iter().enumerate() {
            out.push_str(&format!("{:>width$}", label(k)));
            for v in row {
                out.push_str(&format!(" {:>width$.2}", v));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table(&[]))
    }
}
