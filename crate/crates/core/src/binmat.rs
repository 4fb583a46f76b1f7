//! Partially observed binary matrices.
//!
//! An [`ObservedBinaryMatrix`] stores only the observed cells, once in
//! row-major order and once column-major. Row subsets used by the
//! partitioning driver are [`RowSubsetView`]s, which borrow the parent and
//! only carry a list of parent row ids.

use crate::error::{Error, Result};
use crate::tbmc::Tiling;

/// A binary matrix of which only the cells in the mask are known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedBinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    row_entries: Vec<(usize, bool)>,
    col_ptr: Vec<usize>,
    col_entries: Vec<(usize, bool)>,
}

impl ObservedBinaryMatrix {
    /// Builds a matrix from `(row, col, bit)` triplets in any order.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, bool)>,
    {
        let mut cells: Vec<(usize, usize, bool)> = triplets.into_iter().collect();
        for &(row, col, _) in &cells {
            if row >= n_rows || col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    rows: n_rows,
                    cols: n_cols,
                });
            }
        }
        cells.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if let Some(w) = cells.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::DuplicateEntry(w[0].0, w[0].1));
        }

        let mut row_ptr = vec![0; n_rows + 1];
        let mut col_ptr = vec![0; n_cols + 1];
        for &(i, j, _) in &cells {
            row_ptr[i + 1] += 1;
            col_ptr[j + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        for j in 0..n_cols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_entries = cells.iter().map(|&(_, j, b)| (j, b)).collect();

        // Row-major traversal fills each column in increasing row order.
        let mut col_entries = vec![(0, false); cells.len()];
        let mut next = col_ptr.clone();
        for &(i, j, b) in &cells {
            col_entries[next[j]] = (i, b);
            next[j] += 1;
        }

        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            row_entries,
            col_ptr,
            col_entries,
        })
    }

    /// Builds a fully observed matrix from dense rows.
    pub fn from_dense(rows: &[Vec<bool>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch("ragged dense rows".into()));
        }
        let cells = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &b)| (i, j, b)));
        Self::from_triplets(rows.len(), n_cols, cells)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of observed cells, |Ω|.
    pub fn n_observed(&self) -> usize {
        self.row_entries.len()
    }

    /// Number of observed ones, |Ω₁|.
    pub fn n_ones(&self) -> usize {
        self.row_entries.iter().filter(|e| e.1).count()
    }

    /// Observed `(col, bit)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, bool)] {
        &self.row_entries[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Observed `(row, bit)` pairs of column `j`, sorted by row.
    pub fn col(&self, j: usize) -> &[(usize, bool)] {
        &self.col_entries[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<bool> {
        let row = self.row(i);
        row.binary_search_by_key(&j, |e| e.0).ok().map(|k| row[k].1)
    }

    /// All observed cells in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).iter().map(move |&(j, b)| (i, j, b)))
    }

    /// View over every row.
    pub fn view(&self) -> RowSubsetView<'_> {
        RowSubsetView {
            parent: self,
            rows: (0..self.n_rows).collect(),
        }
    }

    /// View over the given parent rows, in the given order.
    pub fn view_rows(&self, rows: Vec<usize>) -> Result<RowSubsetView<'_>> {
        let mut seen = vec![false; self.n_rows];
        for &r in &rows {
            if r >= self.n_rows {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: 0,
                    rows: self.n_rows,
                    cols: self.n_cols,
                });
            }
            if std::mem::replace(&mut seen[r], true) {
                return Err(Error::DimensionMismatch(format!("row {r} repeated in view")));
            }
        }
        Ok(RowSubsetView { parent: self, rows })
    }
}

/// A subset of the rows of a parent matrix. Local row `k` is parent row
/// `rows()[k]`; entry data is never copied.
#[derive(Debug, Clone)]
pub struct RowSubsetView<'a> {
    parent: &'a ObservedBinaryMatrix,
    rows: Vec<usize>,
}

impl<'a> RowSubsetView<'a> {
    pub fn parent(&self) -> &'a ObservedBinaryMatrix {
        self.parent
    }

    /// Parent row ids, indexed by local row.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.parent.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn parent_row(&self, local: usize) -> usize {
        self.rows[local]
    }

    /// Observed `(col, bit)` pairs of local row `i`.
    pub fn row(&self, i: usize) -> &'a [(usize, bool)] {
        self.parent.row(self.rows[i])
    }

    pub fn n_observed(&self) -> usize {
        (0..self.n_rows()).map(|i| self.row(i).len()).sum()
    }

    pub fn n_ones(&self) -> usize {
        (0..self.n_rows())
            .map(|i| self.row(i).iter().filter(|e| e.1).count())
            .sum()
    }

    /// Observed cells in local coordinates, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        (0..self.n_rows()).flat_map(move |i| self.row(i).iter().map(move |&(j, b)| (i, j, b)))
    }

    /// Splits into the rows selected by `u` and the rest, both in the
    /// original order.
    pub fn split_rows(&self, u: &[bool]) -> Result<(RowSubsetView<'a>, RowSubsetView<'a>)> {
        if u.len() != self.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "u has length {} but view has {} rows",
                u.len(),
                self.n_rows()
            )));
        }
        let (ones, zeros): (Vec<_>, Vec<_>) = self.rows.iter().zip(u).partition(|(_, &b)| b);
        let pick = |part: Vec<(&usize, &bool)>| RowSubsetView {
            parent: self.parent,
            rows: part.into_iter().map(|(&r, _)| r).collect(),
        };
        Ok((pick(ones), pick(zeros)))
    }
}

/// A rank-one binary pair `u vᵀ` over a view: `u` is indexed by local row,
/// `v` by column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tile {
    pub u: Vec<bool>,
    pub v: Vec<bool>,
}

impl Tile {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            u: vec![false; n_rows],
            v: vec![false; n_cols],
        }
    }

    /// True when `u vᵀ` is the zero matrix.
    pub fn is_empty(&self) -> bool {
        !self.u.iter().any(|&b| b) || !self.v.iter().any(|&b| b)
    }

    fn check(&self, view: &RowSubsetView<'_>) -> Result<()> {
        if self.u.len() != view.n_rows() || self.v.len() != view.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "tile is {}x{} but view is {}x{}",
                self.u.len(),
                self.v.len(),
                view.n_rows(),
                view.n_cols()
            )));
        }
        Ok(())
    }

    /// Masked squared error of `u vᵀ` against the observed cells of `view`.
    pub fn error_on(&self, view: &RowSubsetView<'_>) -> Result<usize> {
        self.check(view)?;
        Ok((0..view.n_rows())
            .map(|i| {
                let row = view.row(i);
                if self.u[i] {
                    row.iter().filter(|&&(j, b)| self.v[j] != b).count()
                } else {
                    row.iter().filter(|e| e.1).count()
                }
            })
            .sum())
    }
}

impl serde::Serialize for Tile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let bits = |v: &[bool]| v.iter().map(|&b| u8::from(b)).collect::<Vec<_>>();
        let mut st = s.serialize_struct("Tile", 2)?;
        st.serialize_field("u", &bits(&self.u))?;
        st.serialize_field("v", &bits(&self.v))?;
        st.end()
    }
}

/// Fraction of the observed cells of local row `i` on which `v` disagrees.
pub fn scaled_hamming(view: &RowSubsetView<'_>, i: usize, v: &[bool]) -> Result<f64> {
    if v.len() != view.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "pattern has length {} but view has {} columns",
            v.len(),
            view.n_cols()
        )));
    }
    let row = view.row(i);
    if row.is_empty() {
        return Err(Error::EmptyRow(view.parent_row(i)));
    }
    let wrong = row.iter().filter(|&&(j, b)| v[j] != b).count();
    Ok(wrong as f64 / row.len() as f64)
}

/// Number of observed cells mispredicted by the tiling.
pub fn masked_error(m: &ObservedBinaryMatrix, tiling: &Tiling) -> Result<usize> {
    if tiling.n_rows() != m.n_rows() || tiling.n_cols() != m.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "tiling is {}x{} but matrix is {}x{}",
            tiling.n_rows(),
            tiling.n_cols(),
            m.n_rows(),
            m.n_cols()
        )));
    }
    let owner = tiling.row_owner();
    Ok(m
        .entries()
        .filter(|&(i, j, b)| owner[i].is_some_and(|t| tiling.tiles()[t].v[j]) != b)
        .count())
}
