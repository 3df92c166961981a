//! Four-bin equal-width discretization shared by record points, entropy,
//! joins and the parallel-sets model, so (attribute, label) pairs line up
//! across all of them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_value, Cell, Column, ColumnKind};

pub const BIN_COUNT: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BinningError {
    #[error("no finite values to bin")]
    NoFiniteValues,
}

/// Equal-width bins over `[min, max]`; half-open except the last, which is
/// closed. A constant range collapses to a single bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    edges: Vec<f64>,
}

impl Bins {
    pub fn over<I: IntoIterator<Item = f64>>(values: I) -> Result<Self, BinningError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            return Err(BinningError::NoFiniteValues);
        }
        if lo == hi {
            return Ok(Self {
                edges: vec![lo, hi],
            });
        }
        let width = (hi - lo) / BIN_COUNT as f64;
        let mut edges: Vec<f64> = (0..BIN_COUNT).map(|i| lo + width * i as f64).collect();
        edges.push(hi);
        Ok(Self { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bounds(&self, bin: usize) -> (f64, f64) {
        (self.edges[bin], self.edges[bin + 1])
    }

    /// Bin holding `x`; values outside the range clamp to the end bins.
    pub fn index_of(&self, x: f64) -> usize {
        let last = self.len() - 1;
        (0..last).find(|&i| x < self.edges[i + 1]).unwrap_or(last)
    }

    pub fn contains(&self, bin: usize, x: f64) -> bool {
        let (lo, hi) = self.bounds(bin);
        if bin + 1 == self.len() {
            lo <= x && x <= hi
        } else {
            lo <= x && x < hi
        }
    }

    pub fn label(&self, bin: usize) -> String {
        let (lo, hi) = self.bounds(bin);
        if lo == hi {
            format!("{lo}")
        } else {
            format!("{lo}-{hi}")
        }
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    pub fn label_of(&self, x: f64) -> String {
        self.label(self.index_of(x))
    }
}

/// Bins over the union of two value lists.
pub fn numeric_bins(values_a: &[f64], values_b: &[f64]) -> Result<Bins, BinningError> {
    Bins::over(values_a.iter().chain(values_b).copied())
}

/// Category label per row (`None` for missing). Numeric columns are binned
/// over their own range; stray text cells in a numeric column keep their
/// own category.
pub fn discretize(column: &Column) -> Vec<Option<String>> {
    let bins = match column.kind {
        ColumnKind::Numeric => Bins::over(column.numbers()).ok(),
        ColumnKind::Categorical => None,
    };
    discretize_with(&column.values, bins.as_ref())
}

pub fn discretize_with(cells: &[Cell], bins: Option<&Bins>) -> Vec<Option<String>> {
    cells.iter().map(|c| cell_label(c, bins)).collect()
}

pub fn cell_label(cell: &Cell, bins: Option<&Bins>) -> Option<String> {
    match cell {
        Cell::Missing => None,
        Cell::Text(s) => Some(normalize_value(s)),
        Cell::Number(v) => Some(match bins {
            Some(b) => b.label_of(*v),
            None => format!("{v}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_width_bins() {
        let b = Bins::over([0.0, 3.0, 8.0]).unwrap();
        assert_eq!(b.edges(), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(b.labels(), ["0-2", "2-4", "4-6", "6-8"]);
        assert_eq!(b.index_of(0.0), 0);
        assert_eq!(b.index_of(2.0), 1);
        assert_eq!(b.index_of(7.99), 3);
        assert_eq!(b.index_of(8.0), 3);
        assert!(b.contains(3, 8.0));
        assert!(!b.contains(0, 2.0));
    }

    #[test]
    fn constant_values_make_one_bin() {
        let b = Bins::over([5.0, 5.0]).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.labels(), ["5"]);
        assert!(b.contains(0, 5.0));
    }

    #[test]
    fn union_of_ranges() {
        let b = numeric_bins(&[0.0, 4.0], &[2.0, 8.0]).unwrap();
        assert_eq!(b.edges(), &[0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(
            numeric_bins(&[], &[f64::NAN]),
            Err(BinningError::NoFiniteValues)
        );
    }

    #[test]
    fn discretize_numeric_column() {
        let col = Column {
            name: "age".into(),
            kind: ColumnKind::Numeric,
            values: vec![
                Cell::Number(11.0),
                Cell::Number(15.0),
                Cell::Missing,
                Cell::Text(" Unknown".into()),
            ],
        };
        assert_eq!(
            discretize(&col),
            vec![
                Some("11-12".to_string()),
                Some("14-15".to_string()),
                None,
                Some("unknown".to_string())
            ]
        );
    }
}
