//! Synthetic instances: noisy planted tiles and geometric block-diagonal
//! matrices, with the ground truth needed to score recovery.
//!
//! Specs round-trip through a plain `key=value` text form, one pair per
//! line; blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::binmat::ObservedBinaryMatrix;
use crate::error::{Error, Result};
use crate::tbmc::{Tiling, TilingTile};

/// Noisy planted tiles on contiguous row blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedSpec {
    pub m: usize,
    pub n: usize,
    pub k_tiles: usize,
    /// Fraction of columns in each tile.
    pub tau: f64,
    /// Fraction of all cells flipped.
    pub eps: f64,
    /// Fraction of cells observed.
    pub rho: f64,
    pub seed: u64,
}

/// Symmetric block diagonal with tile sizes shrinking by the ratio `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockDiagSpec {
    pub m: usize,
    pub k: usize,
    pub a: f64,
    pub rho: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// The full matrix, noise included.
    pub full: Vec<Vec<bool>>,
    /// The planted tiles.
    pub tiling: Tiling,
    /// Observed cells.
    pub mask: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recovery {
    /// Prediction matches the full matrix on every cell.
    pub exact: bool,
    /// Fraction of all cells predicted correctly.
    pub accuracy: f64,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::SpecInvalid(msg()))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    check(rho > 0.0 && rho <= 1.0, || format!("rho must lie in (0, 1], got {rho}"))
}

impl PlantedSpec {
    pub fn validate(&self) -> Result<()> {
        check(self.m > 0 && self.n > 0, || "m and n must be positive".into())?;
        check(self.k_tiles >= 1 && self.k_tiles <= self.m, || {
            format!("{} tiles do not fit in {} rows", self.k_tiles, self.m)
        })?;
        check(self.tau > 0.0 && self.tau <= 1.0, || format!("tau must lie in (0, 1], got {}", self.tau))?;
        check(self.eps >= 0.0 && self.eps < 0.5, || format!("eps must lie in [0, 0.5), got {}", self.eps))?;
        check_rho(self.rho)
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::from("model=planted\n");
        let _ = writeln!(out, "m={}\nn={}\nk_tiles={}", self.m, self.n, self.k_tiles);
        let _ = writeln!(out, "tau={}\neps={}\nrho={}\nseed={}", self.tau, self.eps, self.rho, self.seed);
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kv = Kv::parse(text, "planted")?;
        let spec = Self {
            m: kv.take("m")?,
            n: kv.take("n")?,
            k_tiles: kv.take("k_tiles")?,
            tau: kv.take("tau")?,
            eps: kv.take("eps")?,
            rho: kv.take("rho")?,
            seed: kv.take_or("seed", 0)?,
        };
        kv.finish()?;
        spec.validate()?;
        Ok(spec)
    }
}

impl BlockDiagSpec {
    /// Tile sizes: `round(m τ_l)` with `τ_l ∝ a^l` summing to one; the
    /// rounding remainder goes to the first tile.
    pub fn tile_sizes(&self) -> Result<Vec<usize>> {
        check(self.m > 0 && self.k >= 1, || "m and k must be positive".into())?;
        check(self.a > 0.0 && self.a <= 1.0, || format!("a must lie in (0, 1], got {}", self.a))?;
        let tau1 = if self.a == 1.0 {
            1.0 / self.k as f64
        } else {
            (1.0 - self.a) / (1.0 - self.a.powi(self.k as i32))
        };
        let mut sizes: Vec<i64> = (0..self.k)
            .map(|l| (self.m as f64 * tau1 * self.a.powi(l as i32)).round() as i64)
            .collect();
        sizes[0] += self.m as i64 - sizes.iter().sum::<i64>();
        if let Some(l) = sizes.iter().position(|&s| s < 1) {
            return Err(Error::SpecInvalid(format!(
                "tile {} of m={}, k={}, a={} rounds to zero rows",
                l + 1,
                self.m,
                self.k,
                self.a
            )));
        }
        Ok(sizes.into_iter().map(|s| s as usize).collect())
    }

    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        self.tile_sizes().map(|_| ())
    }

    pub fn to_kv(&self) -> String {
        format!(
            "model=blockdiag\nm={}\nk={}\na={}\nrho={}\nseed={}\n",
            self.m, self.k, self.a, self.rho, self.seed
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kv = Kv::parse(text, "blockdiag")?;
        let spec = Self {
            m: kv.take("m")?,
            k: kv.take("k")?,
            a: kv.take("a")?,
            rho: kv.take("rho")?,
            seed: kv.take_or("seed", 0)?,
        };
        kv.finish()?;
        spec.validate()?;
        Ok(spec)
    }
}

struct Kv(BTreeMap<String, String>);

impl Kv {
    fn parse(text: &str, model: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::SpecInvalid(format!("expected key=value, got {line:?}")))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::SpecInvalid(format!("key {k:?} given twice")));
            }
        }
        let mut kv = Kv(map);
        if let Some(found) = kv.0.remove("model") {
            check(found == model, || format!("expected model={model}, got model={found}"))?;
        }
        Ok(kv)
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self
            .0
            .remove(key)
            .ok_or_else(|| Error::SpecInvalid(format!("missing key {key:?}")))?;
        raw.parse()
            .map_err(|_| Error::SpecInvalid(format!("bad value {raw:?} for {key:?}")))
    }

    fn take_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        if self.0.contains_key(key) {
            self.take(key)
        } else {
            Ok(default)
        }
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(k) => Err(Error::SpecInvalid(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

/// Draws the mask and packages the observed matrix with its ground truth.
fn observe(full: Vec<Vec<bool>>, tiling: Tiling, rho: f64, rng: &mut ChaCha8Rng) -> Result<(ObservedBinaryMatrix, GroundTruth)> {
    let mask: Vec<Vec<bool>> = full
        .iter()
        .map(|row| row.iter().map(|_| rng.gen_bool(rho)).collect())
        .collect();
    let n = tiling.n_cols();
    let cells = (0..full.len())
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| mask[i][j])
        .map(|(i, j)| (i, j, full[i][j]));
    let matrix = ObservedBinaryMatrix::from_triplets(full.len(), n, cells)?;
    Ok((matrix, GroundTruth { full, tiling, mask }))
}

fn noiseless(tiling: &Tiling) -> Vec<Vec<bool>> {
    (0..tiling.n_rows())
        .map(|i| (0..tiling.n_cols()).map(|j| tiling.predict(i, j).unwrap_or(false)).collect())
        .collect()
}

/// Planted instance: each row block gets one random set of `round(τ n)`
/// columns, exactly `round(ε m n)` cells are flipped, then each cell is
/// observed with probability `ρ`.
pub fn gen_planted(spec: &PlantedSpec) -> Result<(ObservedBinaryMatrix, GroundTruth)> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let block = m / spec.k_tiles;
    let width = ((spec.tau * n as f64).round() as usize).min(n);
    let mut tiles = Vec::with_capacity(spec.k_tiles);
    for t in 0..spec.k_tiles {
        let end = if t + 1 == spec.k_tiles { m } else { (t + 1) * block };
        let mut v = vec![false; n];
        for j in sample(&mut rng, n, width) {
            v[j] = true;
        }
        let u = (0..m).map(|i| (t * block..end).contains(&i)).collect();
        tiles.push(TilingTile { u, v });
    }
    let tiling = Tiling::new(m, n, tiles)?;
    let mut full = noiseless(&tiling);
    let flips = (spec.eps * (m * n) as f64).round() as usize;
    for cell in sample(&mut rng, m * n, flips) {
        let (i, j) = (cell / n, cell % n);
        full[i][j] = !full[i][j];
    }
    observe(full, tiling, spec.rho, &mut rng)
}

/// Noiseless single tile on the first `rows` rows and a random set of
/// `cols` columns, observed with probability `ρ`.
pub fn gen_single_tile(
    m: usize,
    n: usize,
    rows: usize,
    cols: usize,
    rho: f64,
    seed: u64,
) -> Result<(ObservedBinaryMatrix, GroundTruth)> {
    check(rows <= m && cols <= n, || format!("a {rows}x{cols} tile does not fit in {m}x{n}"))?;
    check_rho(rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![false; n];
    for j in sample(&mut rng, n, cols) {
        v[j] = true;
    }
    let u = (0..m).map(|i| i < rows).collect();
    let tiling = Tiling::new(m, n, vec![TilingTile { u, v }])?;
    let full = noiseless(&tiling);
    observe(full, tiling, rho, &mut rng)
}

/// Symmetric block-diagonal instance with consecutive blocks.
pub fn gen_block_diagonal(spec: &BlockDiagSpec) -> Result<(ObservedBinaryMatrix, GroundTruth)> {
    check_rho(spec.rho)?;
    let sizes = spec.tile_sizes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut start = 0;
    let mut tiles = Vec::with_capacity(sizes.len());
    for s in sizes {
        let bits: Vec<bool> = (0..spec.m).map(|i| (start..start + s).contains(&i)).collect();
        tiles.push(TilingTile { u: bits.clone(), v: bits });
        start += s;
    }
    let tiling = Tiling::new(spec.m, spec.m, tiles)?;
    let full = noiseless(&tiling);
    observe(full, tiling, spec.rho, &mut rng)
}

/// True when every row and column of every planted tile shows at least one
/// observed 1 and one observed 0.
pub fn tiles_visible(gt: &GroundTruth) -> bool {
    let seen = |cells: &mut dyn Iterator<Item = (usize, usize)>| {
        let (mut one, mut zero) = (false, false);
        for (i, j) in cells {
            if gt.mask[i][j] {
                one |= gt.full[i][j];
                zero |= !gt.full[i][j];
            }
        }
        one && zero
    };
    let (m, n) = (gt.tiling.n_rows(), gt.tiling.n_cols());
    gt.tiling.tiles().iter().all(|t| {
        let rows_ok = (0..m).filter(|&i| t.u[i]).all(|i| seen(&mut (0..n).map(|j| (i, j))));
        let cols_ok = (0..n).filter(|&j| t.v[j]).all(|j| seen(&mut (0..m).map(|i| (i, j))));
        rows_ok && cols_ok
    })
}

/// Compares the tiling's reconstruction with the full matrix on all cells.
pub fn recovery_score(t: &Tiling, gt: &GroundTruth) -> Result<Recovery> {
    let m = gt.full.len();
    let n = gt.tiling.n_cols();
    if t.n_rows() != m || t.n_cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "tiling is {}x{} but the instance is {m}x{n}",
            t.n_rows(),
            t.n_cols()
        )));
    }
    let mut correct = 0usize;
    for (i, row) in gt.full.iter().enumerate() {
        for (j, &bit) in row.iter().enumerate() {
            correct += usize::from(t.predict(i, j)? == bit);
        }
    }
    Ok(Recovery {
        exact: correct == m * n,
        accuracy: if m * n == 0 { 1.0 } else { correct as f64 / (m * n) as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(m: usize, n: usize, k: usize, tau: f64, eps: f64, rho: f64, seed: u64) -> PlantedSpec {
        PlantedSpec { m, n, k_tiles: k, tau, eps, rho, seed }
    }

    #[test]
    fn noiseless_single_tile() {
        let (mat, gt) = gen_planted(&planted(10, 8, 1, 0.5, 0.0, 1.0, 3)).unwrap();
        assert_eq!(mat.n_observed(), 80);
        assert_eq!(gt.tiling.tiles().len(), 1);
        let v = &gt.tiling.tiles()[0].v;
        assert_eq!(v.iter().filter(|&&b| b).count(), 4);
        for (i, j, bit) in mat.entries() {
            assert_eq!(bit, v[j], "cell ({i},{j})");
        }
        let (ones, _) = gen_planted(&planted(3, 4, 1, 1.0, 0.0, 1.0, 0)).unwrap();
        assert_eq!(ones.n_ones(), 12);
    }

    #[test]
    fn table_one_spec() {
        let spec = planted(100, 100, 1, 0.7, 0.03, 0.7, 17);
        let (mat, gt) = gen_planted(&spec).unwrap();
        let frac = mat.n_observed() as f64 / 1e4;
        assert!((frac - 0.7).abs() < 0.02, "{frac}");
        let clean = noiseless(&gt.tiling);
        let flipped = (0..100)
            .flat_map(|i| (0..100).map(move |j| (i, j)))
            .filter(|&(i, j)| clean[i][j] != gt.full[i][j])
            .count();
        assert_eq!(flipped, 300);
        assert_eq!(gen_planted(&spec).unwrap().0, mat);
    }

    #[test]
    fn planted_blocks_split_rows() {
        let (_, gt) = gen_planted(&planted(10, 10, 3, 0.5, 0.0, 1.0, 1)).unwrap();
        let sizes: Vec<usize> = gt.tiling.tiles().iter().map(|t| t.u.iter().filter(|&&b| b).count()).collect();
        assert_eq!(sizes, vec![3, 3, 4]);
    }

    #[test]
    fn block_sizes() {
        let spec = |m, k, a| BlockDiagSpec { m, k, a, rho: 1.0, seed: 0 };
        assert_eq!(spec(6, 2, 0.5).tile_sizes().unwrap(), vec![4, 2]);
        assert_eq!(spec(8, 2, 1.0).tile_sizes().unwrap(), vec![4, 4]);
        assert_eq!(spec(15, 4, 0.5).tile_sizes().unwrap(), vec![8, 4, 2, 1]);
        assert!(matches!(spec(8, 4, 0.1).tile_sizes(), Err(Error::SpecInvalid(_))));
    }

    #[test]
    fn block_diagonal_is_symmetric() {
        let (_, gt) = gen_block_diagonal(&BlockDiagSpec { m: 20, k: 3, a: 0.6, rho: 0.5, seed: 2 }).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(gt.full[i][j], gt.full[j][i]);
            }
        }
    }

    #[test]
    fn observed_fraction_tracks_rho() {
        let mut total = 0;
        for seed in 0..20 {
            let (mat, _) = gen_block_diagonal(&BlockDiagSpec { m: 50, k: 2, a: 0.5, rho: 0.3, seed }).unwrap();
            total += mat.n_observed();
        }
        let cells = 20.0 * 2500.0_f64;
        let sigma = (cells * 0.3 * 0.7).sqrt();
        assert!((total as f64 - 0.3 * cells).abs() < 3.0 * sigma);
    }

    #[test]
    fn recovery_examples() {
        let spec = BlockDiagSpec { m: 15, k: 4, a: 0.5, rho: 1.0, seed: 0 };
        let (_, gt) = gen_block_diagonal(&spec).unwrap();
        let r = recovery_score(&gt.tiling, &gt).unwrap();
        assert!(r.exact && r.accuracy == 1.0);

        let r = recovery_score(&Tiling::empty(15, 15), &gt).unwrap();
        assert!(!r.exact);
        assert!((r.accuracy - 140.0 / 225.0).abs() < 1e-12);

        let three = Tiling::new(15, 15, gt.tiling.tiles()[..3].to_vec()).unwrap();
        let r = recovery_score(&three, &gt).unwrap();
        assert!((r.accuracy - 224.0 / 225.0).abs() < 1e-12);

        assert!(matches!(
            recovery_score(&Tiling::empty(3, 15), &gt),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn kv_round_trip() {
        let p = planted(100, 90, 3, 0.7, 0.03, 0.7, 5);
        assert_eq!(PlantedSpec::from_kv(&p.to_kv()).unwrap(), p);
        let b = BlockDiagSpec { m: 512, k: 4, a: 0.6, rho: 0.7, seed: 9 };
        assert_eq!(BlockDiagSpec::from_kv(&b.to_kv()).unwrap(), b);
        assert!(PlantedSpec::from_kv(&b.to_kv()).is_err());
        assert!(BlockDiagSpec::from_kv("m=4\nk=2\na=0.5\nrho=1\ncolour=red").is_err());
        assert!(PlantedSpec::from_kv("m=4\nn=4\nk_tiles=1\ntau=0.5\neps=0.7\nrho=1").is_err());
    }

    #[test]
    fn visibility_screen() {
        let (_, gt) = gen_single_tile(20, 20, 10, 10, 1.0, 0).unwrap();
        assert!(tiles_visible(&gt));
        let (_, gt) = gen_planted(&planted(5, 5, 1, 0.6, 0.0, 1.0, 0)).unwrap();
        // a tile spanning every row has no zero in its columns
        assert!(!tiles_visible(&gt));
    }
}
