//! Exact rank-one solutions, the ground truth for approximation ratios.
//!
//! The objective is `Σ_{(i,j)∈Ω} (2A_ij − 1) u_i v_j`; the masked error of
//! a tile is `|Ω₁|` minus that value. For a fixed `v` the best `u` is
//! `u_i = [Σ_j W_ij v_j > 0]`, so only one side needs to be searched.
//!
//! When the shorter side has at most [`ENUMERATION_CAP`] entries it is
//! enumerated. Larger instances are searched by branch and bound over the
//! columns, bounded by the min-cut solution of the LP relaxation with the
//! branched columns fixed.

use serde::Serialize;

use crate::binmat::{RowSubsetView, Tile};
use crate::error::{Error, Result};
use crate::lp::{solve_relaxation, Relaxation};

pub const ENUMERATION_CAP: usize = 20;

/// Branch-and-bound nodes explored before giving up with `TooLarge`.
pub const NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleResult {
    pub tile: Tile,
    /// Optimal masked error.
    pub error: usize,
    /// Optimal value of `Σ_Ω (2A − 1) u v`.
    pub objective: i64,
}

/// Signed cells `(other index, ±1)` grouped by row or by column.
fn signed_lines(b: &RowSubsetView<'_>, by_col: bool) -> Vec<Vec<(usize, i64)>> {
    let mut lines = vec![Vec::new(); if by_col { b.n_cols() } else { b.n_rows() }];
    for (i, j, bit) in b.entries() {
        let w = if bit { 1 } else { -1 };
        if by_col {
            lines[j].push((i, w));
        } else {
            lines[i].push((j, w));
        }
    }
    lines
}

/// Enumerates every pattern of the side whose lines are given and returns
/// the best one with its objective. Among ties the lexicographically
/// smallest pattern (index 0 most significant) wins.
fn enumerate(lines: &[Vec<(usize, i64)>], other: usize) -> (Vec<bool>, i64) {
    let k = lines.len();
    let mut sums = vec![0i64; other];
    let mut pattern = vec![false; k];
    let (mut value, mut key) = (0i64, 0u64);
    let (mut best_value, mut best_key) = (0i64, 0u64);
    for step in 1..1u64 << k {
        let flip = step.trailing_zeros() as usize;
        pattern[flip] = !pattern[flip];
        let sign = if pattern[flip] { 1 } else { -1 };
        for &(o, w) in &lines[flip] {
            let old = sums[o];
            sums[o] += sign * w;
            value += sums[o].max(0) - old.max(0);
        }
        key ^= 1 << (k - 1 - flip);
        if value > best_value || (value == best_value && key < best_key) {
            best_value = value;
            best_key = key;
        }
    }
    let best = (0..k).map(|t| best_key >> (k - 1 - t) & 1 == 1).collect();
    (best, best_value)
}

/// Best response of the other side: `[Σ W · pattern > 0]` per index.
fn respond(lines: &[Vec<(usize, i64)>], pattern: &[bool], other: usize) -> Vec<bool> {
    let mut sums = vec![0i64; other];
    for (line, _) in lines.iter().zip(pattern).filter(|(_, &p)| p) {
        for &(o, w) in line {
            sums[o] += w;
        }
    }
    sums.into_iter().map(|s| s > 0).collect()
}

fn objective_of(b: &RowSubsetView<'_>, tile: &Tile) -> i64 {
    b.entries()
        .filter(|&(i, j, _)| tile.u[i] && tile.v[j])
        .map(|(_, _, bit)| if bit { 1 } else { -1 })
        .sum()
}

fn finish(b: &RowSubsetView<'_>, tile: Tile) -> OracleResult {
    let objective = objective_of(b, &tile);
    OracleResult {
        error: (b.n_ones() as i64 - objective) as usize,
        objective,
        tile,
    }
}

/// Optimum found by enumerating the columns.
fn by_columns(b: &RowSubsetView<'_>) -> OracleResult {
    let cols = signed_lines(b, true);
    let (v, _) = enumerate(&cols, b.n_rows());
    let u = respond(&cols, &v, b.n_rows());
    finish(b, Tile { u, v })
}

/// Optimum found by enumerating the rows.
fn by_rows(b: &RowSubsetView<'_>) -> OracleResult {
    let rows = signed_lines(b, false);
    let (u, _) = enumerate(&rows, b.n_cols());
    let v = respond(&rows, &u, b.n_cols());
    finish(b, Tile { u, v })
}

struct Search {
    cols: Vec<Vec<(usize, i64)>>,
    n_rows: usize,
    best_value: i64,
    best_v: Vec<bool>,
    nodes: usize,
    budget: usize,
}

impl Search {
    fn value_of(&self, v: &[bool]) -> i64 {
        let mut sums = vec![0i64; self.n_rows];
        for (col, _) in self.cols.iter().zip(v).filter(|(_, &x)| x) {
            for &(i, w) in col {
                sums[i] += w;
            }
        }
        sums.into_iter().map(|s| s.max(0)).sum()
    }

    fn explore(&mut self, fixed: &mut Vec<Option<bool>>) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::TooLarge(format!(
                "branch and bound exceeded {} nodes",
                self.budget
            )));
        }
        let n = self.cols.len();
        let mut relax = Relaxation {
            row_weight2: vec![0; self.n_rows],
            col_weight2: vec![0; n],
            pairs: Vec::new(),
        };
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, w) in col {
                match fixed[j] {
                    Some(true) => relax.row_weight2[i] += 2 * w,
                    Some(false) => {}
                    None if w > 0 => {
                        relax.row_weight2[i] += 1;
                        relax.col_weight2[j] += 1;
                    }
                    None => relax.pairs.push((i, j)),
                }
            }
        }
        let cut = solve_relaxation(&relax);
        let v: Vec<bool> = (0..n).map(|j| fixed[j].unwrap_or(cut.v[j])).collect();
        let value = self.value_of(&v);
        if value > self.best_value {
            self.best_value = value;
            self.best_v = v;
        }
        // the objective is integral, so half a unit of slack cannot help
        if cut.objective2.div_euclid(2) <= self.best_value {
            return Ok(());
        }
        // Only ones in free columns with u_i ≠ v_j make the bound loose.
        let branch = (0..n)
            .filter(|&j| fixed[j].is_none())
            .map(|j| {
                let loose = self.cols[j]
                    .iter()
                    .filter(|&&(i, w)| w > 0 && cut.u[i] != cut.v[j])
                    .count();
                (loose, j)
            })
            .filter(|&(loose, _)| loose > 0)
            .max_by_key(|&(loose, j)| (loose, std::cmp::Reverse(j)));
        let Some((_, j)) = branch else {
            return Ok(());
        };
        for choice in [cut.v[j], !cut.v[j]] {
            fixed[j] = Some(choice);
            self.explore(fixed)?;
        }
        fixed[j] = None;
        Ok(())
    }
}

fn branch_and_bound(b: &RowSubsetView<'_>, budget: usize) -> Result<OracleResult> {
    let cols = signed_lines(b, true);
    let mut search = Search {
        n_rows: b.n_rows(),
        best_value: 0,
        best_v: vec![false; cols.len()],
        cols,
        nodes: 0,
        budget,
    };
    let mut fixed = vec![None; search.cols.len()];
    search.explore(&mut fixed)?;
    let mut v = search.best_v;
    for (vj, col) in v.iter_mut().zip(&search.cols) {
        *vj &= !col.is_empty();
    }
    let u = respond(&search.cols, &v, b.n_rows());
    Ok(finish(b, Tile { u, v }))
}

/// Exact rank-one optimum with the default limits.
pub fn exact_rank1(b: &RowSubsetView<'_>) -> Result<OracleResult> {
    exact_rank1_with(b, ENUMERATION_CAP, NODE_BUDGET)
}

/// Exact optimum. Enumerates the shorter side when it has at most `cap`
/// entries (columns on a tie); otherwise runs branch and bound, failing
/// with `TooLarge` after `node_budget` nodes. Pass a budget of 0 to refuse
/// anything beyond enumeration.
pub fn exact_rank1_with(b: &RowSubsetView<'_>, cap: usize, node_budget: usize) -> Result<OracleResult> {
    let (m, n) = (b.n_rows(), b.n_cols());
    if n <= m && n <= cap {
        return Ok(by_columns(b));
    }
    if m < n && m <= cap {
        return Ok(by_rows(b));
    }
    if node_budget == 0 {
        return Err(Error::TooLarge(format!(
            "{m}x{n} exceeds the enumeration cap of {cap}"
        )));
    }
    branch_and_bound(b, node_budget)
}

/// `error / optimal`, with `1` when both are zero and `+∞` when only the
/// optimum is zero.
pub fn ratio(error: usize, optimal: usize) -> f64 {
    match (error, optimal) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => error as f64 / optimal as f64,
    }
}

/// Approximation ratio of `tile` against the exact optimum on `b`.
pub fn approx_ratio(b: &RowSubsetView<'_>, tile: &Tile) -> Result<f64> {
    let error = tile.error_on(b)?;
    let best = exact_rank1(b)?;
    Ok(ratio(error, best.error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ObservedBinaryMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(rows: &[&[u8]]) -> ObservedBinaryMatrix {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        ObservedBinaryMatrix::from_dense(&rows).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> ObservedBinaryMatrix {
        let mut cells = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.gen_bool(density) {
                    cells.push((i, j, rng.gen_bool(0.5)));
                }
            }
        }
        ObservedBinaryMatrix::from_triplets(m, n, cells).unwrap()
    }

    fn brute_force(b: &RowSubsetView<'_>) -> usize {
        let (m, n) = (b.n_rows(), b.n_cols());
        (0..1u32 << (m + n))
            .map(|mask| {
                let tile = Tile {
                    u: (0..m).map(|i| mask >> i & 1 == 1).collect(),
                    v: (0..n).map(|j| mask >> (m + j) & 1 == 1).collect(),
                };
                tile.error_on(b).unwrap()
            })
            .min()
            .unwrap()
    }

    #[test]
    fn spec_examples() {
        let ones = dense(&[&[1, 1, 1], &[1, 1, 1], &[1, 1, 1]]);
        let r = exact_rank1(&ones.view()).unwrap();
        assert_eq!(r.error, 0);
        assert_eq!(r.tile, Tile { u: vec![true; 3], v: vec![true; 3] });

        let id = dense(&[&[1, 0], &[0, 1]]);
        assert_eq!(exact_rank1(&id.view()).unwrap().error, 1);

        let zeros = dense(&[&[0, 0, 0], &[0, 0, 0], &[0, 0, 0]]);
        let r = exact_rank1(&zeros.view()).unwrap();
        assert_eq!((r.error, r.objective), (0, 0));
        assert_eq!(r.tile, Tile::empty(3, 3));
    }

    #[test]
    fn ties_prefer_smallest_v() {
        // both diagonal cells are optimal; v = (0,1) is lexicographically smaller
        let id = dense(&[&[1, 0], &[0, 1]]);
        let r = exact_rank1(&id.view()).unwrap();
        assert_eq!(r.tile, Tile { u: vec![false, true], v: vec![false, true] });
    }

    #[test]
    fn ratio_examples() {
        let id = dense(&[&[1, 0], &[0, 1]]);
        let best = exact_rank1(&id.view()).unwrap();
        assert_eq!(approx_ratio(&id.view(), &best.tile).unwrap(), 1.0);
        assert_eq!(approx_ratio(&id.view(), &Tile::empty(2, 2)).unwrap(), 2.0);
        assert_eq!(ratio(0, 0), 1.0);
        assert_eq!(ratio(3, 0), f64::INFINITY);
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let (m, n) = (rng.gen_range(1..6), rng.gen_range(1..6));
            let mat = random(&mut rng, m, n, 0.7);
            let r = exact_rank1(&mat.view()).unwrap();
            assert_eq!(r.error, brute_force(&mat.view()));
            assert_eq!(r.tile.error_on(&mat.view()).unwrap(), r.error);
            assert_eq!(r.error as i64, mat.n_ones() as i64 - r.objective);
        }
    }

    #[test]
    fn either_side_gives_the_same_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let (m, n) = (rng.gen_range(1..9), rng.gen_range(1..9));
            let mat = random(&mut rng, m, n, 0.6);
            assert_eq!(by_rows(&mat.view()).error, by_columns(&mat.view()).error);
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (m, n) = (rng.gen_range(1..10), rng.gen_range(1..10));
            let mat = random(&mut rng, m, n, 0.6);
            let exact = exact_rank1(&mat.view()).unwrap();
            let bb = exact_rank1_with(&mat.view(), 0, NODE_BUDGET).unwrap();
            assert_eq!(bb.error, exact.error);
            assert_eq!(bb.tile.error_on(&mat.view()).unwrap(), bb.error);
        }
    }

    #[test]
    fn cap_without_budget_is_too_large() {
        let mat = dense(&[&[1, 0, 1], &[0, 1, 1]]);
        assert!(matches!(
            exact_rank1_with(&mat.view(), 1, 0),
            Err(Error::TooLarge(_))
        ));
    }
}
