//! Alternating minimisation of a rank-one tile under missing data.
//!
//! With `W = 2A − 1` on Ω and 0 elsewhere the masked error of `u vᵀ` is
//! `|Ω₁| − uᵀ W v`, so for fixed `v` the best `u` is `u_i = [(Wv)_i > 0]`
//! and symmetrically for `v`. Each half-step is an exact coordinate
//! minimiser and the error never increases.

use serde::Serialize;

use crate::binmat::{RowSubsetView, Tile};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 20;

/// Sparse ±1 matrix on the observed cells, by row and by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightMatrix {
    rows: Vec<Vec<(usize, i8)>>,
    cols: Vec<Vec<(usize, i8)>>,
}

impl WeightMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// `W_ij`, 0 off the mask.
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map_or(0, |k| self.rows[i][k].1)
    }

    /// `W v`.
    pub fn times(&self, v: &[bool]) -> Vec<i64> {
        self.rows
            .iter()
            .map(|row| row.iter().filter(|e| v[e.0]).map(|e| i64::from(e.1)).sum())
            .collect()
    }

    /// `uᵀ W`.
    pub fn times_transposed(&self, u: &[bool]) -> Vec<i64> {
        self.cols
            .iter()
            .map(|col| col.iter().filter(|e| u[e.0]).map(|e| i64::from(e.1)).sum())
            .collect()
    }
}

pub fn weight_matrix(b: &RowSubsetView<'_>) -> WeightMatrix {
    let mut rows = vec![Vec::new(); b.n_rows()];
    let mut cols = vec![Vec::new(); b.n_cols()];
    for (i, j, bit) in b.entries() {
        let w = if bit { 1 } else { -1 };
        rows[i].push((j, w));
        cols[j].push((i, w));
    }
    WeightMatrix { rows, cols }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    /// Update `u` from `v`, then `v` from `u`.
    #[default]
    RowsFirst,
    ColumnsFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    /// A full sweep left the tile unchanged.
    Converged,
    /// An update would have emptied the tile and was rejected.
    EmptyRejected,
    /// `max_iter` sweeps ran without reaching a fixed point.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Refinement {
    pub tile: Tile,
    pub sweeps: usize,
    pub outcome: Outcome,
    /// Masked error of the start tile and after every accepted half-step.
    pub errors: Vec<usize>,
}

impl Refinement {
    pub fn converged(&self) -> bool {
        self.outcome != Outcome::IterationLimit
    }
}

pub fn refine(b: &RowSubsetView<'_>, start: &Tile, max_iter: usize) -> Result<Refinement> {
    refine_with(b, start, max_iter, SweepOrder::default())
}

pub fn refine_with(
    b: &RowSubsetView<'_>,
    start: &Tile,
    max_iter: usize,
    order: SweepOrder,
) -> Result<Refinement> {
    if start.u.len() != b.n_rows() || start.v.len() != b.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "start tile is {}x{} but view is {}x{}",
            start.u.len(),
            start.v.len(),
            b.n_rows(),
            b.n_cols()
        )));
    }
    let w = weight_matrix(b);
    let mut tile = start.clone();
    let mut errors = vec![tile.error_on(b)?];
    for sweep in 1..=max_iter {
        let before = tile.clone();
        for rows in match order {
            SweepOrder::RowsFirst => [true, false],
            SweepOrder::ColumnsFirst => [false, true],
        } {
            let next: Vec<bool> = if rows {
                w.times(&tile.v).into_iter().map(|s| s > 0).collect()
            } else {
                w.times_transposed(&tile.u).into_iter().map(|s| s > 0).collect()
            };
            if !next.iter().any(|&x| x) {
                return Ok(Refinement {
                    tile,
                    sweeps: sweep,
                    outcome: Outcome::EmptyRejected,
                    errors,
                });
            }
            if rows {
                tile.u = next;
            } else {
                tile.v = next;
            }
            errors.push(tile.error_on(b)?);
        }
        if tile == before {
            return Ok(Refinement {
                tile,
                sweeps: sweep,
                outcome: Outcome::Converged,
                errors,
            });
        }
    }
    Ok(Refinement {
        tile,
        sweeps: max_iter,
        outcome: Outcome::IterationLimit,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ObservedBinaryMatrix;
    use rand::{Rng, SeedableRng};

    fn dense(rows: &[&[u8]]) -> ObservedBinaryMatrix {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        ObservedBinaryMatrix::from_dense(&rows).unwrap()
    }

    #[test]
    fn weight_matrix_examples() {
        let m = ObservedBinaryMatrix::from_triplets(2, 2, [(0, 0, true), (1, 0, false), (1, 1, true)]).unwrap();
        let w = weight_matrix(&m.view());
        let cells: Vec<i8> = [(0, 0), (0, 1), (1, 0), (1, 1)].iter().map(|&(i, j)| w.get(i, j)).collect();
        assert_eq!(cells, vec![1, 0, -1, 1]);

        let empty = ObservedBinaryMatrix::from_triplets(2, 2, []).unwrap();
        let w = weight_matrix(&empty.view());
        assert!((0..2).all(|i| (0..2).all(|j| w.get(i, j) == 0)));

        let ones = dense(&[&[1, 1], &[1, 1]]);
        let w = weight_matrix(&ones.view());
        assert!((0..2).all(|i| (0..2).all(|j| w.get(i, j) == 1)));
    }

    #[test]
    fn two_sweeps_by_hand() {
        let m = dense(&[&[1, 1], &[0, 0]]);
        let start = Tile { u: vec![false, true], v: vec![true, true] };
        let r = refine(&m.view(), &start, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.tile, Tile { u: vec![true, false], v: vec![true, true] });
        assert_eq!(r.tile.error_on(&m.view()).unwrap(), 0);
        assert_eq!(r.outcome, Outcome::Converged);
    }

    #[test]
    fn empty_start_is_unchanged() {
        let m = dense(&[&[1, 0], &[0, 1]]);
        let r = refine(&m.view(), &Tile::empty(2, 2), DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.tile, Tile::empty(2, 2));
        assert_eq!(r.outcome, Outcome::EmptyRejected);
    }

    #[test]
    fn planted_tile_is_a_fixed_point() {
        let m = dense(&[&[1, 1, 0], &[1, 1, 0], &[0, 0, 0]]);
        let tile = Tile { u: vec![true, true, false], v: vec![true, true, false] };
        let r = refine(&m.view(), &tile, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.tile, tile);
        assert_eq!(r.sweeps, 1);
    }

    #[test]
    fn dimension_mismatch() {
        let m = dense(&[&[1, 1]]);
        assert!(matches!(
            refine(&m.view(), &Tile::empty(2, 2), 5),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn error_never_increases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let (m, n) = (rng.gen_range(1..8), rng.gen_range(1..8));
            let mut cells = Vec::new();
            for i in 0..m {
                for j in 0..n {
                    if rng.gen_bool(0.6) {
                        cells.push((i, j, rng.gen_bool(0.5)));
                    }
                }
            }
            let mat = ObservedBinaryMatrix::from_triplets(m, n, cells).unwrap();
            let start = Tile {
                u: (0..m).map(|_| rng.gen_bool(0.5)).collect(),
                v: (0..n).map(|_| rng.gen_bool(0.5)).collect(),
            };
            for order in [SweepOrder::RowsFirst, SweepOrder::ColumnsFirst] {
                let r = refine_with(&mat.view(), &start, DEFAULT_MAX_ITER, order).unwrap();
                assert!(r.errors.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.errors);
                assert_eq!(*r.errors.last().unwrap(), r.tile.error_on(&mat.view()).unwrap());
                assert!(r.converged());
            }
        }
    }
}
