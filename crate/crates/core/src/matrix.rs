//! Dense row-major matrix used for feature tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::ShapeMismatch {
                expected: n_rows * n_cols,
                got: data.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Builds a matrix from row slices; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::ShapeMismatch {
                    expected: n_cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    /// Builds a matrix whose columns are the given slices.
    pub fn from_columns<C: AsRef<[f64]>>(cols: &[C]) -> Result<Self> {
        let n_rows = cols.first().map_or(0, |c| c.as_ref().len());
        for c in cols {
            if c.as_ref().len() != n_rows {
                return Err(Error::ShapeMismatch {
                    expected: n_rows,
                    got: c.as_ref().len(),
                });
            }
        }
        let n_cols = cols.len();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for c in cols {
                data.push(c.as_ref()[i]);
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n_cols + col] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so zero-width matrices yield empty rows explicitly.
        let width = self.n_cols;
        (0..self.n_rows).map(move |i| &self.data[i * width..(i + 1) * width])
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Returns a copy with `col` appended as the last column.
    pub fn with_column(&self, col: &[f64]) -> Result<Self> {
        if col.len() != self.n_rows {
            return Err(Error::ShapeMismatch {
                expected: self.n_rows,
                got: col.len(),
            });
        }
        let n_cols = self.n_cols + 1;
        let mut data = Vec::with_capacity(self.n_rows * n_cols);
        for (row, &extra) in self.rows().zip(col) {
            data.extend_from_slice(row);
            data.push(extra);
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols,
            data,
        })
    }

    /// Gathers the listed rows (repeats allowed) into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
