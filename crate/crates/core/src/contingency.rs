use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

/// Joint label counts of two segmentations, with cached marginals.
///
/// Rows index labels of the first segmentation, columns labels of the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    total: u64,
}

/// Exact joint label counts between `a` (rows) and `b` (columns).
pub fn contingency(a: &Segmentation, b: &Segmentation) -> Result<ContingencyTable> {
    a.check_same_len(b)?;
    let rows = a.num_labels() as usize;
    let cols = b.num_labels() as usize;
    let mut table = ContingencyTable::zeros(rows, cols);
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        table.add(x as usize, y as usize);
    }
    Ok(table)
}

impl ContingencyTable {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, counts: vec![0; rows * cols], row_sums: vec![0; rows], col_sums: vec![0; cols], total: 0 }
    }

    /// Builds a table from a row-major count matrix.
    pub fn from_counts(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: counts.len() });
        }
        let mut row_sums = vec![0; rows];
        let mut col_sums = vec![0; cols];
        for r in 0..rows {
            for c in 0..cols {
                let v = counts[r * cols + c];
                row_sums[r] += v;
                col_sums[c] += v;
            }
        }
        let total = row_sums.iter().sum();
        Ok(Self { rows, cols, counts, row_sums, col_sums, total })
    }

    #[inline]
    fn add(&mut self, r: usize, c: usize) {
        self.counts[r * self.cols + c] += 1;
        self.row_sums[r] += 1;
        self.col_sums[c] += 1;
        self.total += 1;
    }

    /// Moves one unit in row `r` from column `from` to column `to`.
    #[inline]
    pub(crate) fn shift(&mut self, r: usize, from: usize, to: usize) {
        debug_assert!(self.counts[r * self.cols + from] > 0);
        self.counts[r * self.cols + from] -= 1;
        self.counts[r * self.cols + to] += 1;
        self.col_sums[from] -= 1;
        self.col_sums[to] += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.counts[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[u64] {
        &self.counts[r * self.cols..(r + 1) * self.cols]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn transpose(&self) -> ContingencyTable {
        let mut counts = vec![0; self.counts.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                counts[c * self.rows + r] = self.get(r, c);
            }
        }
        ContingencyTable {
            rows: self.cols,
            cols: self.rows,
            counts,
            row_sums: self.col_sums.clone(),
            col_sums: self.row_sums.clone(),
            total: self.total,
        }
    }

    /// Nonzero cells as `(row, col, count)` in row-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts.iter().enumerate().filter(|(_, &v)| v > 0).map(move |(i, &v)| (i / self.cols, i % self.cols, v))
    }
}
