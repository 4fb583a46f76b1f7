//! Tiling for binary matrix completion: recursive row partitioning driven
//! by a rank-one solver.
//!
//! A work stack starts with the whole matrix. Each popped view `B` gets a
//! rank-one tile `{u, v}`; the rows with `u_i = 0` go back on the stack as
//! `B₀`. The tile is accepted when every selected row is within scaled
//! Hamming distance `t` of `v` (or when `u` selects all of `B`); otherwise
//! the selected rows `B₁` are pushed and split further.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::altmin::{refine, DEFAULT_MAX_ITER};
use crate::binmat::{masked_error, scaled_hamming, ObservedBinaryMatrix, RowSubsetView, Tile};
use crate::error::{Error, Result};
use crate::heuristics::{average_rank1, partition_rank1};
use crate::lp::{lp_rank1_with, LpSolver};

/// A tile of a [`Tiling`]; `u` is indexed by original row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilingTile {
    pub u: Vec<bool>,
    pub v: Vec<bool>,
}

/// Tiles with pairwise disjoint row supports, so `U Vᵀ` is binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tiling {
    n_rows: usize,
    n_cols: usize,
    tiles: Vec<TilingTile>,
    owner: Vec<Option<usize>>,
}

impl Tiling {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            tiles: Vec::new(),
            owner: vec![None; n_rows],
        }
    }

    /// Checks tile dimensions and that no row is in two tiles.
    pub fn new(n_rows: usize, n_cols: usize, tiles: Vec<TilingTile>) -> Result<Self> {
        let mut owner = vec![None; n_rows];
        for (t, tile) in tiles.iter().enumerate() {
            if tile.u.len() != n_rows || tile.v.len() != n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "tile {t} is {}x{} but the tiling is {n_rows}x{n_cols}",
                    tile.u.len(),
                    tile.v.len()
                )));
            }
            for (i, _) in tile.u.iter().enumerate().filter(|(_, &b)| b) {
                if owner[i].replace(t).is_some() {
                    return Err(Error::OverlappingTiles(i));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            tiles,
            owner,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn tiles(&self) -> &[TilingTile] {
        &self.tiles
    }

    /// Tile owning each row, if any.
    pub fn row_owner(&self) -> &[Option<usize>] {
        &self.owner
    }

    /// Reconstructed bit at `(i, j)`.
    pub fn predict(&self, i: usize, j: usize) -> Result<bool> {
        if i >= self.n_rows || j >= self.n_cols {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                rows: self.n_rows,
                cols: self.n_cols,
            });
        }
        Ok(self.owner[i].is_some_and(|t| self.tiles[t].v[j]))
    }
}

/// Rank-one solver used inside the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rank1Method {
    #[default]
    Lp,
    Average,
    Partition,
}

impl fmt::Display for Rank1Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rank1Method::Lp => "lp",
            Rank1Method::Average => "average",
            Rank1Method::Partition => "partition",
        })
    }
}

impl FromStr for Rank1Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lp" => Ok(Rank1Method::Lp),
            "average" => Ok(Rank1Method::Average),
            "partition" => Ok(Rank1Method::Partition),
            _ => Err(Error::ConfigInvalid(format!(
                "unknown method {s:?}; expected lp, average or partition"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TbmcConfig {
    /// Scaled Hamming tolerance `t`.
    pub tolerance: f64,
    /// Maximum number of tiles; `None` means `min(m, 256)`.
    pub k_max: Option<usize>,
    pub method: Rank1Method,
    /// Refine every rank-one tile with alternating minimisation.
    pub use_am: bool,
    pub am_max_iter: usize,
    /// Seed for the `partition` heuristic.
    pub rng_seed: u64,
    pub lp_solver: LpSolver,
}

impl Default for TbmcConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.05,
            k_max: None,
            method: Rank1Method::Lp,
            use_am: false,
            am_max_iter: DEFAULT_MAX_ITER,
            rng_seed: 0,
            lp_solver: LpSolver::Auto,
        }
    }
}

impl TbmcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.k_max == Some(0) {
            return Err(Error::ConfigInvalid("k_max must be at least 1".into()));
        }
        Ok(())
    }

    pub fn k_max_for(&self, n_rows: usize) -> usize {
        self.k_max.unwrap_or(n_rows.min(256))
    }
}

/// Why a tile was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Acceptance {
    /// Every selected row is within the tolerance of `v`.
    ToleranceMet,
    /// `u` selected every row of a multi-row view.
    UAllOnes,
    /// The view was a single row.
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TilingReport {
    pub tiles: usize,
    pub train_error: usize,
    pub acceptance: Vec<Acceptance>,
    /// Views popped from the work stack.
    pub iterations: usize,
    pub max_stack: usize,
    /// Views whose rank-one tile was empty.
    pub discarded_branches: usize,
    /// Rows left out of every tile, in increasing order.
    pub uncovered_rows: Vec<usize>,
    /// True when the run stopped at `k_max` with work left.
    pub hit_k_max: bool,
}

/// Rank-one tile of `b` with the configured backend.
pub fn rank1_tile(b: &RowSubsetView<'_>, cfg: &TbmcConfig, rng: &mut ChaCha8Rng) -> Result<Tile> {
    let tile = match cfg.method {
        Rank1Method::Lp => lp_rank1_with(b, cfg.lp_solver)?.tile,
        Rank1Method::Average => average_rank1(b),
        Rank1Method::Partition => partition_rank1(b, rng),
    };
    if cfg.use_am && !tile.is_empty() {
        return Ok(refine(b, &tile, cfg.am_max_iter)?.tile);
    }
    Ok(tile)
}

fn within_tolerance(b1: &RowSubsetView<'_>, v: &[bool], t: f64) -> Result<bool> {
    for i in 0..b1.n_rows() {
        if !b1.row(i).is_empty() && scaled_hamming(b1, i, v)? >= t {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn tbmc(m: &ObservedBinaryMatrix, cfg: &TbmcConfig) -> Result<(Tiling, TilingReport)> {
    cfg.validate()?;
    let k_max = cfg.k_max_for(m.n_rows());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut stack = vec![m.view()];
    let mut tiles = Vec::new();
    let mut acceptance = Vec::new();
    let (mut iterations, mut max_stack, mut discarded) = (0, 1, 0);
    let mut uncovered = Vec::new();
    while tiles.len() < k_max {
        let Some(b) = stack.pop() else { break };
        iterations += 1;
        let tile = rank1_tile(&b, cfg, &mut rng)?;
        if tile.is_empty() {
            discarded += 1;
            uncovered.extend_from_slice(b.rows());
            continue;
        }
        let (b1, b0) = b.split_rows(&tile.u)?;
        let all_ones = b0.is_empty();
        if !all_ones {
            stack.push(b0);
        }
        let reason = if within_tolerance(&b1, &tile.v, cfg.tolerance)? {
            Some(Acceptance::ToleranceMet)
        } else if all_ones && b.n_rows() == 1 {
            Some(Acceptance::Leaf)
        } else if all_ones {
            Some(Acceptance::UAllOnes)
        } else {
            None
        };
        match reason {
            Some(r) => {
                let mut u = vec![false; m.n_rows()];
                for &i in b1.rows() {
                    u[i] = true;
                }
                tiles.push(TilingTile { u, v: tile.v });
                acceptance.push(r);
            }
            None => stack.push(b1),
        }
        max_stack = max_stack.max(stack.len());
    }
    let hit_k_max = !stack.is_empty();
    for b in &stack {
        uncovered.extend_from_slice(b.rows());
    }
    uncovered.sort_unstable();
    let tiling = Tiling::new(m.n_rows(), m.n_cols(), tiles)?;
    let report = TilingReport {
        tiles: tiling.tiles().len(),
        train_error: masked_error(m, &tiling)?,
        acceptance,
        iterations,
        max_stack,
        discarded_branches: discarded,
        uncovered_rows: uncovered,
        hit_k_max,
    };
    Ok((tiling, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dense(rows: &[&[u8]]) -> ObservedBinaryMatrix {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        ObservedBinaryMatrix::from_dense(&rows).unwrap()
    }

    fn block_diag(sizes: &[usize]) -> ObservedBinaryMatrix {
        let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(l, &s)| vec![l; s]).collect();
        let rows: Vec<Vec<bool>> = block.iter().map(|&a| block.iter().map(|&b| a == b).collect()).collect();
        ObservedBinaryMatrix::from_dense(&rows).unwrap()
    }

    #[test]
    fn two_block_recovery() {
        let m = block_diag(&[4, 2]);
        let (tiling, report) = tbmc(&m, &TbmcConfig::default()).unwrap();
        assert_eq!(report.train_error, 0);
        assert_eq!(tiling.tiles().len(), 2);
        let mut supports: Vec<Vec<bool>> = tiling.tiles().iter().map(|t| t.u.clone()).collect();
        supports.sort();
        let a = vec![true, true, true, true, false, false];
        let b: Vec<bool> = a.iter().map(|x| !x).collect();
        assert_eq!(supports, vec![b, a]);
        for t in tiling.tiles() {
            assert_eq!(t.u, t.v);
        }
    }

    #[test]
    fn all_ones_is_one_tile() {
        let m = dense(&[&[1, 1, 1], &[1, 1, 1], &[1, 1, 1]]);
        let (tiling, report) = tbmc(&m, &TbmcConfig::default()).unwrap();
        assert_eq!(tiling.tiles().len(), 1);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.train_error, 0);
        assert!((0..3).all(|i| (0..3).all(|j| tiling.predict(i, j).unwrap())));
    }

    #[test]
    fn all_zeros_is_empty() {
        let m = dense(&[&[0, 0], &[0, 0]]);
        let (tiling, report) = tbmc(&m, &TbmcConfig::default()).unwrap();
        assert!(tiling.tiles().is_empty());
        assert_eq!(report.uncovered_rows, vec![0, 1]);
        assert_eq!(report.discarded_branches, 1);
    }

    #[test]
    fn predict_examples() {
        let empty = Tiling::empty(2, 2);
        assert!(!empty.predict(1, 1).unwrap());
        assert!(matches!(empty.predict(2, 0), Err(Error::IndexOutOfRange { .. })));
        let full = Tiling::new(2, 2, vec![TilingTile { u: vec![true; 2], v: vec![true; 2] }]).unwrap();
        assert!(full.predict(0, 1).unwrap());
        let (blocks, _) = tbmc(&block_diag(&[4, 2]), &TbmcConfig::default()).unwrap();
        assert!(!blocks.predict(0, 5).unwrap());
        assert!(blocks.predict(5, 4).unwrap());
    }

    #[test]
    fn overlapping_rows_are_rejected() {
        let t = TilingTile { u: vec![true, false], v: vec![true] };
        assert_eq!(
            Tiling::new(2, 1, vec![t.clone(), t]),
            Err(Error::OverlappingTiles(0))
        );
    }

    #[test]
    fn config_validation() {
        let bad = TbmcConfig { tolerance: 1.0, ..TbmcConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::ConfigInvalid(_))));
        let bad = TbmcConfig { k_max: Some(0), ..TbmcConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::ConfigInvalid(_))));
        assert_eq!("partition".parse::<Rank1Method>().unwrap(), Rank1Method::Partition);
        assert!("nmf".parse::<Rank1Method>().is_err());
    }

    #[test]
    fn k_max_stops_early() {
        let m = block_diag(&[3, 2, 1]);
        let cfg = TbmcConfig { k_max: Some(1), ..TbmcConfig::default() };
        let (tiling, report) = tbmc(&m, &cfg).unwrap();
        assert_eq!(tiling.tiles().len(), 1);
        assert!(report.hit_k_max);
        assert_eq!(report.uncovered_rows.len(), 3);
    }

    #[test]
    fn random_runs_keep_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..60 {
            let (m, n) = (rng.gen_range(1..12), rng.gen_range(1..12));
            let mut cells = Vec::new();
            for i in 0..m {
                for j in 0..n {
                    if rng.gen_bool(0.7) {
                        cells.push((i, j, rng.gen_bool(0.4)));
                    }
                }
            }
            let mat = ObservedBinaryMatrix::from_triplets(m, n, cells).unwrap();
            for method in [Rank1Method::Lp, Rank1Method::Average, Rank1Method::Partition] {
                for use_am in [false, true] {
                    let cfg = TbmcConfig { method, use_am, rng_seed: trial, ..TbmcConfig::default() };
                    let (tiling, report) = tbmc(&mat, &cfg).unwrap();
                    assert!(report.iterations <= 2 * m + cfg.k_max_for(m));
                    assert!(report.train_error <= mat.n_ones());
                    let covered = tiling.row_owner().iter().filter(|o| o.is_some()).count();
                    assert_eq!(covered + report.uncovered_rows.len(), m);
                    assert_eq!(tbmc(&mat, &cfg).unwrap().0, tiling);
                }
            }
        }
    }
}
