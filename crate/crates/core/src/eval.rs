//! Experiment harness: held-out evaluation, approximation ratios against
//! the exact oracle, and recovery phase grids.
//!
//! Every trial draws its seed from the master seed through a counter-based
//! mix, and results are gathered in job order, so the output does not
//! depend on the number of worker threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::altmin::refine;
use crate::binmat::ObservedBinaryMatrix;
use crate::error::{Error, Result};
use crate::heuristics::{average_rank1, partition_rank1};
use crate::lp::{lp_rank1_with, LpSolver};
use crate::oracle::{exact_rank1, ratio};
use crate::synth::{gen_block_diagonal, gen_planted, recovery_score, BlockDiagSpec, PlantedSpec};
use crate::tbmc::{tbmc, Rank1Method, TbmcConfig, Tiling};

/// Accuracy at or above which a phase-grid trial counts as recovered.
pub const ACCURACY_THRESHOLD: f64 = 0.97;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the job identified by `parts` under `master`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Runs `f` over `items` on `jobs` threads (0 = all cores), keeping input order.
fn run_parallel<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::ConfigInvalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.into_par_iter().map(f).collect()))
}

fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.6}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: ObservedBinaryMatrix,
    pub test: Vec<(usize, usize, bool)>,
    pub seed: u64,
}

/// Sends each observed entry to the training set with probability `rho`.
pub fn split(m: &ObservedBinaryMatrix, rho: f64, seed: u64) -> Result<SplitPair> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::ConfigInvalid(format!("split fraction must lie in (0, 1), got {rho}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for cell in m.entries() {
        if rng.gen_bool(rho) {
            train.push(cell);
        } else {
            test.push(cell);
        }
    }
    Ok(SplitPair {
        train: ObservedBinaryMatrix::from_triplets(m.n_rows(), m.n_cols(), train)?,
        test,
        seed,
    })
}

/// Percentage of `test` entries the tiling mispredicts.
pub fn proportional_error(t: &Tiling, test: &[(usize, usize, bool)]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut wrong = 0usize;
    for &(i, j, bit) in test {
        wrong += usize::from(t.predict(i, j)? != bit);
    }
    Ok(100.0 * wrong as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTrial {
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "R")]
    pub r: f64,
    pub error: usize,
    pub oracle_error: usize,
    /// Largest distance of an LP value from {0, 1}; LP only.
    pub integrality_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioStats {
    pub method: Rank1Method,
    pub am: bool,
    pub trials: Vec<RatioTrial>,
    /// Mean over trials with a finite ratio.
    pub mean_r: f64,
    /// Fraction of finite-ratio trials with `R > 2`.
    pub p0: f64,
    /// Fraction of finite-ratio trials with `R > 1`.
    pub p1: f64,
    /// Trials where the oracle error is 0 but the method's is not.
    pub infinite: usize,
    pub max_integrality_gap: Option<f64>,
}

impl RatioStats {
    fn from_trials(method: Rank1Method, am: bool, trials: Vec<RatioTrial>) -> Self {
        let finite: Vec<f64> = trials.iter().map(|t| t.r).filter(|r| r.is_finite()).collect();
        let frac = |pred: &dyn Fn(f64) -> bool| {
            if finite.is_empty() {
                f64::NAN
            } else {
                finite.iter().filter(|&&r| pred(r)).count() as f64 / finite.len() as f64
            }
        };
        let mean_r = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let max_integrality_gap = trials
            .iter()
            .filter_map(|t| t.integrality_gap)
            .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.max(g))));
        Self {
            method,
            am,
            mean_r,
            p0: frac(&|r| r > 2.0),
            p1: frac(&|r| r > 1.0),
            infinite: trials.len() - finite.len(),
            max_integrality_gap,
            trials,
        }
    }

    pub const SUMMARY_HEADER: &'static str = "method,am,trials,mean_R,P0,P_R_gt_1,infinite,max_integrality_gap";
    pub const TRIAL_HEADER: &'static str = "method,am,trial,R,error,oracle_error";

    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            u8::from(self.am),
            self.trials.len(),
            fmt_f64(self.mean_r),
            fmt_f64(self.p0),
            fmt_f64(self.p1),
            self.infinite,
            self.max_integrality_gap.map_or("NA".into(), |g| format!("{g:e}")),
        )
    }

    pub fn trial_rows(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.method,
                u8::from(self.am),
                t.trial,
                fmt_f64(t.r),
                t.error,
                t.oracle_error
            );
        }
        out
    }
}

/// Approximation ratios of a rank-one method over seeded instances of
/// `model` (its own seed is ignored). Trial `t` uses the same instance for
/// every method under a given master seed.
pub fn ratio_experiment(
    model: &PlantedSpec,
    method: Rank1Method,
    use_am: bool,
    trials: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<RatioStats> {
    model.validate()?;
    let results = run_parallel(jobs, (0..trials).collect(), |trial| -> Result<RatioTrial> {
        let seed = derive_seed(master_seed, &[trial as u64]);
        let spec = PlantedSpec { seed, ..model.clone() };
        let (m, _) = gen_planted(&spec)?;
        let view = m.view();
        let (mut tile, gap) = match method {
            Rank1Method::Lp => {
                let sol = lp_rank1_with(&view, LpSolver::Auto)?;
                (sol.tile, Some(sol.max_integrality_gap))
            }
            Rank1Method::Average => (average_rank1(&view), None),
            Rank1Method::Partition => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
                (partition_rank1(&view, &mut rng), None)
            }
        };
        if use_am && !tile.is_empty() {
            tile = refine(&view, &tile, crate::altmin::DEFAULT_MAX_ITER)?.tile;
        }
        let error = tile.error_on(&view)?;
        let oracle_error = exact_rank1(&view)?.error;
        Ok(RatioTrial {
            trial,
            seed,
            r: ratio(error, oracle_error),
            error,
            oracle_error,
            integrality_gap: gap,
        })
    })?;
    let trials = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RatioStats::from_trials(method, use_am, trials))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub size: usize,
    pub a: f64,
    pub rho: f64,
    /// Fraction of trials recovered exactly.
    pub exact_prop: f64,
    /// Fraction of trials with at least 97% of cells correct.
    pub acc97_prop: f64,
    /// Set when the cell's spec is invalid; proportions are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub k: usize,
    pub trials: usize,
    pub cells: Vec<PhaseCell>,
}

impl PhaseGrid {
    pub const HEADER: &'static str = "size,a,rho,exact_prop,acc97_prop";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.size,
                c.a,
                c.rho,
                fmt_f64(c.exact_prop),
                fmt_f64(c.acc97_prop)
            );
        }
        out
    }

    /// Heatmap of the 97%-accuracy proportion, one panel per size, `a`
    /// across and `rho` down.
    pub fn to_svg(&self) -> String {
        let mut sizes: Vec<usize> = self.cells.iter().map(|c| c.size).collect();
        sizes.dedup();
        let axis = |f: &dyn Fn(&PhaseCell) -> f64| {
            let mut v: Vec<f64> = self.cells.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (a_axis, rho_axis) = (axis(&|c| c.a), axis(&|c| c.rho));
        let cell = 24.0;
        let panel_w = cell * a_axis.len() as f64 + 60.0;
        let height = cell * rho_axis.len() as f64 + 50.0;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{height}\">\n",
            panel_w * sizes.len() as f64
        );
        for (p, size) in sizes.iter().enumerate() {
            let x0 = p as f64 * panel_w + 40.0;
            let _ = writeln!(out, "<text x=\"{x0}\" y=\"14\" font-size=\"12\">m={size}</text>");
            for c in self.cells.iter().filter(|c| c.size == *size) {
                let col = a_axis.iter().position(|&a| a == c.a).unwrap_or(0);
                let row = rho_axis.iter().position(|&r| r == c.rho).unwrap_or(0);
                let shade = if c.acc97_prop.is_nan() { 128 } else { (255.0 * (1.0 - c.acc97_prop)) as u8 };
                let _ = writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},{shade})\"><title>a={} rho={} p={}</title></rect>",
                    x0 + col as f64 * cell,
                    20.0 + row as f64 * cell,
                    c.a,
                    c.rho,
                    fmt_f64(c.acc97_prop)
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Recovery proportions of TBMC (LP backend) on block-diagonal instances
/// over the grid `sizes × a_grid × rho_grid`.
pub fn phase_experiment(
    sizes: &[usize],
    a_grid: &[f64],
    rho_grid: &[f64],
    k: usize,
    trials: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<PhaseGrid> {
    if sizes.is_empty() || a_grid.is_empty() || rho_grid.is_empty() || trials == 0 {
        return Err(Error::ConfigInvalid("phase grids and trial count must be nonempty".into()));
    }
    let mut cells = Vec::new();
    for &size in sizes {
        for &a in a_grid {
            for &rho in rho_grid {
                cells.push((size, a, rho));
            }
        }
    }
    let work: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let outcomes = run_parallel(jobs, work, |(c, trial)| -> Result<(bool, bool)> {
        let (size, a, rho) = cells[c];
        let seed = derive_seed(master_seed, &[size as u64, a.to_bits(), rho.to_bits(), trial as u64]);
        let spec = BlockDiagSpec { m: size, k, a, rho, seed };
        let (m, gt) = gen_block_diagonal(&spec)?;
        let (tiling, _) = tbmc(&m, &TbmcConfig::default())?;
        let r = recovery_score(&tiling, &gt)?;
        Ok((r.exact, r.accuracy >= ACCURACY_THRESHOLD))
    })?;
    let mut out = Vec::with_capacity(cells.len());
    for (c, chunk) in outcomes.chunks(trials).enumerate() {
        let (size, a, rho) = cells[c];
        let mut cell = PhaseCell { size, a, rho, exact_prop: f64::NAN, acc97_prop: f64::NAN, error: None };
        let mut ok = Vec::with_capacity(trials);
        for r in chunk {
            match r {
                Ok(x) => ok.push(*x),
                Err(Error::SpecInvalid(msg)) => cell.error = Some(msg.clone()),
                Err(e) => return Err(e.clone()),
            }
        }
        if cell.error.is_none() {
            let n = ok.len() as f64;
            cell.exact_prop = ok.iter().filter(|x| x.0).count() as f64 / n;
            cell.acc97_prop = ok.iter().filter(|x| x.1).count() as f64 / n;
        }
        out.push(cell);
    }
    Ok(PhaseGrid { k, trials, cells: out })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalTrial {
    pub method: Rank1Method,
    pub am: bool,
    pub trial: usize,
    pub p_test: f64,
    pub p_train: f64,
    pub tiles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub trials: Vec<EvalTrial>,
}

impl EvalReport {
    pub const HEADER: &'static str = "dataset,method,am,P_test,P_train,tiles";

    /// One row per (method, am) with means over trials, in first-seen order.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<(Rank1Method, bool)> = Vec::new();
        for t in &self.trials {
            if !keys.contains(&(t.method, t.am)) {
                keys.push((t.method, t.am));
            }
        }
        let mut out = format!("{}\n", Self::HEADER);
        for (method, am) in keys {
            let rows: Vec<&EvalTrial> = self.trials.iter().filter(|t| t.method == method && t.am == am).collect();
            let mean = |f: &dyn Fn(&EvalTrial) -> f64| rows.iter().map(|t| f(t)).sum::<f64>() / rows.len() as f64;
            let _ = writeln!(
                out,
                "{},{method},{},{},{},{}",
                self.dataset,
                u8::from(am),
                fmt_f64(mean(&|t| t.p_test)),
                fmt_f64(mean(&|t| t.p_train)),
                fmt_f64(mean(&|t| t.tiles as f64)),
            );
        }
        out
    }
}

/// Held-out error of TBMC: each trial splits the observed entries with
/// fraction `rho` for training and scores the rest. All methods see the
/// same splits.
pub fn eval_experiment(
    m: &ObservedBinaryMatrix,
    dataset: &str,
    rho: f64,
    base: &TbmcConfig,
    methods: &[(Rank1Method, bool)],
    trials: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<EvalReport> {
    base.validate()?;
    let work: Vec<(usize, usize)> = (0..trials).flat_map(|t| (0..methods.len()).map(move |k| (t, k))).collect();
    let results = run_parallel(jobs, work, |(trial, k)| -> Result<EvalTrial> {
        let (method, am) = methods[k];
        let pair = split(m, rho, derive_seed(master_seed, &[trial as u64]))?;
        let cfg = TbmcConfig {
            method,
            use_am: am,
            rng_seed: derive_seed(master_seed, &[trial as u64, 2]),
            ..base.clone()
        };
        let (tiling, report) = tbmc(&pair.train, &cfg)?;
        let observed = pair.train.n_observed();
        Ok(EvalTrial {
            method,
            am,
            trial,
            p_test: proportional_error(&tiling, &pair.test)?,
            p_train: if observed == 0 { 0.0 } else { 100.0 * report.train_error as f64 / observed as f64 },
            tiles: report.tiles,
        })
    })?;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        trials: results.into_iter().collect::<Result<Vec<_>>>()?,
    })
}
