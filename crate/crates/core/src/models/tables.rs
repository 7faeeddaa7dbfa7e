use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

/// Row-major `f64` matrix whose cells can be read and written through a
/// shared reference.
///
/// Cells are stored as `AtomicU64` bit patterns accessed with relaxed
/// ordering. With one writer this behaves exactly like a plain matrix; with
/// several writers updates to the same row may be lost, never torn.
#[derive(Debug)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Box<[AtomicU64]>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let data = (0..rows * cols).map(|_| AtomicU64::new(0f64.to_bits())).collect();
        Matrix { rows, cols, data }
    }

    /// Cells drawn uniformly from `[-half_width, half_width)`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, cols: usize, half_width: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| {
                let u: f64 = rng.gen();
                AtomicU64::new(((u - 0.5) * 2.0 * half_width).to_bits())
            })
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "matrix shape mismatch");
        let data = values.into_iter().map(|v| AtomicU64::new(v.to_bits())).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        f64::from_bits(self.data[row * self.cols + col].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col].store(value.to_bits(), Ordering::Relaxed);
    }

    fn cells(&self, row: usize) -> &[AtomicU64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.cells(row).iter().map(|c| f64::from_bits(c.load(Ordering::Relaxed))).collect()
    }

    pub fn read_row_into(&self, row: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.cells(row)) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    pub fn dot_row(&self, row: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.cols);
        self.cells(row)
            .iter()
            .zip(v)
            .map(|(c, x)| f64::from_bits(c.load(Ordering::Relaxed)) * x)
            .sum()
    }

    /// `row += scale * delta`, cell by cell.
    pub fn add_to_row(&self, row: usize, delta: &[f64], scale: f64) {
        debug_assert_eq!(delta.len(), self.cols);
        for (c, d) in self.cells(row).iter().zip(delta) {
            let v = f64::from_bits(c.load(Ordering::Relaxed));
            c.store((v + scale * d).to_bits(), Ordering::Relaxed);
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data.iter().map(|c| f64::from_bits(c.load(Ordering::Relaxed))).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| f64::from_bits(c.load(Ordering::Relaxed)).is_finite())
    }
}

impl Clone for Matrix {
    fn clone(&self) -> Self {
        Matrix::from_vec(self.rows, self.cols, self.to_vec())
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.to_vec() == other.to_vec()
    }
}

/// Identifies one of the four parameter tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Table {
    CharIn,
    CompIn,
    CharOut,
    CompOut,
}

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::CharIn => "char_in",
            Table::CompIn => "comp_in",
            Table::CharOut => "char_out",
            Table::CompOut => "comp_out",
        }
    }
}

/// Input and output parameter tables of one model.
///
/// `comp_in` exists for charCBOW (components are inputs there) and
/// `comp_out` for charSkipGram (components are prediction targets).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTables {
    pub char_in: Matrix,
    pub comp_in: Option<Matrix>,
    pub char_out: Matrix,
    pub comp_out: Option<Matrix>,
}

impl EmbeddingTables {
    pub fn get(&self, table: Table) -> Option<&Matrix> {
        match table {
            Table::CharIn => Some(&self.char_in),
            Table::CompIn => self.comp_in.as_ref(),
            Table::CharOut => Some(&self.char_out),
            Table::CompOut => self.comp_out.as_ref(),
        }
    }

    pub fn table(&self, table: Table) -> &Matrix {
        self.get(table)
            .unwrap_or_else(|| panic!("model has no {} table", table.name()))
    }

    /// Name of the first table containing a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        [Table::CharIn, Table::CompIn, Table::CharOut, Table::CompOut]
            .into_iter()
            .find(|&t| self.get(t).is_some_and(|m| !m.all_finite()))
            .map(Table::name)
    }
}

/// Sparse set of row gradients, kept in first-touch order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    rows: Vec<(Table, u32, usize)>,
    values: Vec<f64>,
    widths: Vec<usize>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mutable gradient for `(table, row)`, zero-initialized on first touch.
    pub fn row_mut(&mut self, table: Table, row: u32, width: usize) -> &mut [f64] {
        let slot = match self.rows.iter().position(|&(t, r, _)| t == table && r == row) {
            Some(i) => i,
            None => {
                self.rows.push((table, row, self.values.len()));
                self.widths.push(width);
                self.values.resize(self.values.len() + width, 0.0);
                self.rows.len() - 1
            }
        };
        let (_, _, offset) = self.rows[slot];
        debug_assert_eq!(self.widths[slot], width, "row width changed between touches");
        &mut self.values[offset..offset + width]
    }

    pub fn add(&mut self, table: Table, row: u32, delta: &[f64], scale: f64) {
        for (g, d) in self.row_mut(table, row, delta.len()).iter_mut().zip(delta) {
            *g += scale * d;
        }
    }

    pub fn get(&self, table: Table, row: u32) -> Option<&[f64]> {
        self.rows
            .iter()
            .zip(&self.widths)
            .find(|((t, r, _), _)| *t == table && *r == row)
            .map(|((_, _, offset), &w)| &self.values[*offset..*offset + w])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Table, u32, &[f64])> {
        self.rows
            .iter()
            .zip(&self.widths)
            .map(|(&(t, r, offset), &w)| (t, r, &self.values[offset..offset + w]))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Gradient-descent update `param -= lr * grad` on every touched row.
    pub fn apply(&self, tables: &EmbeddingTables, lr: f64) {
        if lr == 0.0 {
            return;
        }
        for (table, row, grad) in self.iter() {
            tables.table(table).add_to_row(row as usize, grad, -lr);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn uniform_respects_bounds() {
        let mut rng = substream(3, "m");
        let m = Matrix::uniform(50, 4, 0.125, &mut rng);
        assert!(m.to_vec().iter().all(|v| (-0.125..0.125).contains(v)));
        assert!(m.to_vec().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn row_arithmetic() {
        let m = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.dot_row(1, &[1.0, 0.0, -1.0]), -2.0);
        m.add_to_row(0, &[1.0, 1.0, 1.0], -2.0);
        assert_eq!(m.row(0), vec![-1.0, 0.0, 1.0]);
        m.set(1, 2, f64::NAN);
        assert!(!m.all_finite());
    }

    #[test]
    fn gradients_merge_repeated_rows() {
        let mut g = Gradients::new();
        g.add(Table::CompIn, 0, &[1.0, 2.0], 1.0);
        g.add(Table::CharIn, 0, &[5.0, 5.0], 1.0);
        g.add(Table::CompIn, 0, &[1.0, 2.0], 0.5);
        assert_eq!(g.len(), 2);
        assert_eq!(g.get(Table::CompIn, 0), Some(&[1.5, 3.0][..]));
        assert_eq!(g.get(Table::CharOut, 0), None);
    }
}
