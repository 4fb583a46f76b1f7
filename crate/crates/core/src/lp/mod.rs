//! LP relaxation of the best binary rank-one approximation with missing data.
//!
//! Variables are ordered `u_0..u_{m-1}, v_0..v_{n-1}, z_0..z_{|Ω₀|-1}`, with
//! one `z` per observed zero in row-major order. The problem is
//!
//! ```text
//! max  Σ_{(i,j)∈Ω₁} ½(u_i + v_j) − Σ_{(i,j)∈Ω₀} z_ij
//! s.t. u_i + v_j − z_ij ≤ 1        (i,j) ∈ Ω₀
//!      0 ≤ u, v, z ≤ 1
//! ```
//!
//! The constraint matrix is totally unimodular, so every vertex is integral.

mod cut;
mod simplex;

use std::fmt::Write as _;

use serde::Serialize;

use crate::binmat::{RowSubsetView, Tile};
use crate::error::{Error, Result};

pub use cut::{solve_relaxation, CutSolution, Relaxation};
pub use simplex::solve_simplex;

/// Tolerance for feasibility, optimality and integrality.
pub const TOL: f64 = 1e-9;

/// The rank-one LP of a view, in local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    n_rows: usize,
    n_cols: usize,
    row_ones: Vec<usize>,
    col_ones: Vec<usize>,
    zeros: Vec<(usize, usize)>,
}

impl LpProblem {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_variables(&self) -> usize {
        self.n_rows + self.n_cols + self.zeros.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.zeros.len()
    }

    /// Cells `(i, j)` of the observed zeros; constraint `r` is for `zeros()[r]`.
    pub fn zeros(&self) -> &[(usize, usize)] {
        &self.zeros
    }

    /// Observed ones per row.
    pub fn row_ones(&self) -> &[usize] {
        &self.row_ones
    }

    /// Observed ones per column.
    pub fn col_ones(&self) -> &[usize] {
        &self.col_ones
    }

    pub fn n_ones(&self) -> usize {
        self.row_ones.iter().sum()
    }

    /// Objective coefficients over all variables.
    pub fn objective(&self) -> Vec<f64> {
        self.row_ones
            .iter()
            .chain(&self.col_ones)
            .map(|&c| 0.5 * c as f64)
            .chain(std::iter::repeat_n(-1.0, self.zeros.len()))
            .collect()
    }

    /// Objective value at `x` (all variables).
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective().iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn variable_name(&self, k: usize) -> String {
        let (m, n) = (self.n_rows, self.n_cols);
        if k < m {
            format!("u{k}")
        } else if k < m + n {
            format!("v{}", k - m)
        } else {
            let (i, j) = self.zeros[k - m - n];
            format!("z{i}_{j}")
        }
    }

    /// Renders the problem in CPLEX LP text format.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::from("\\ rank-one relaxation\nMaximize\n obj:");
        let mut first = true;
        for (k, c) in self.objective().iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let sign = if *c < 0.0 { " -" } else if first { "" } else { " +" };
            let _ = write!(out, "{sign} {} {}", c.abs(), self.variable_name(k));
            first = false;
        }
        if first {
            out.push_str(" 0 u0");
        }
        out.push_str("\nSubject To\n");
        for (r, &(i, j)) in self.zeros.iter().enumerate() {
            let _ = writeln!(out, " c{r}: u{i} + v{j} - z{i}_{j} <= 1");
        }
        out.push_str("Bounds\n");
        for k in 0..self.n_variables() {
            let _ = writeln!(out, " 0 <= {} <= 1", self.variable_name(k));
        }
        out.push_str("End\n");
        out
    }
}

/// Builds the rank-one LP of a view.
pub fn build_lp(b: &RowSubsetView<'_>) -> LpProblem {
    let n_rows = b.n_rows();
    let n_cols = b.n_cols();
    let mut row_ones = vec![0; n_rows];
    let mut col_ones = vec![0; n_cols];
    let mut zeros = Vec::new();
    for (i, j, bit) in b.entries() {
        if bit {
            row_ones[i] += 1;
            col_ones[j] += 1;
        } else {
            zeros.push((i, j));
        }
    }
    LpProblem {
        n_rows,
        n_cols,
        row_ones,
        col_ones,
        zeros,
    }
}

/// Result of a rank-one solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rank1Solution {
    pub tile: Tile,
    pub objective: f64,
    /// Optimal values of all variables before rounding.
    pub raw_values: Vec<f64>,
    pub max_integrality_gap: f64,
    /// Pivots and bound flips.
    pub iterations: usize,
}

pub(crate) fn integrality_gap(x: &[f64]) -> f64 {
    x.iter()
        .map(|&v| v.abs().min((v - 1.0).abs()))
        .fold(0.0, f64::max)
}

/// Algorithm used for the relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpSolver {
    /// Bounded-variable simplex with Bland's rule.
    Simplex,
    /// Minimum s-t cut. Same optimal value; the optimum picked among ties
    /// may differ from the simplex vertex.
    MinCut,
    /// Simplex up to [`SIMPLEX_LIMIT`] constraints, min cut beyond or when
    /// the simplex stalls at its pivot cap.
    #[default]
    Auto,
}

/// Largest constraint count [`LpSolver::Auto`] hands to the simplex.
pub const SIMPLEX_LIMIT: usize = 5_000;

/// Solves the rank-one LP of `b` with the simplex method and returns the
/// integral tile. Rows and columns without observed entries are fixed to 0.
pub fn lp_rank1(b: &RowSubsetView<'_>) -> Result<Rank1Solution> {
    lp_rank1_with(b, LpSolver::Simplex)
}

/// [`lp_rank1`] with a choice of algorithm.
pub fn lp_rank1_with(b: &RowSubsetView<'_>, solver: LpSolver) -> Result<Rank1Solution> {
    let problem = build_lp(b);
    let use_simplex = match solver {
        LpSolver::Simplex => true,
        LpSolver::MinCut => false,
        LpSolver::Auto => problem.n_constraints() <= SIMPLEX_LIMIT,
    };
    let mut sol = match (use_simplex, solver) {
        (false, _) => solve_min_cut(&problem),
        (true, LpSolver::Auto) => match solve_simplex(&problem) {
            Err(Error::NumericalFailure(_)) => solve_min_cut(&problem),
            r => r?,
        },
        (true, _) => solve_simplex(&problem)?,
    };
    for i in 0..b.n_rows() {
        if b.row(i).is_empty() {
            sol.tile.u[i] = false;
        }
    }
    let mut seen = vec![false; b.n_cols()];
    for (_, j, _) in b.entries() {
        seen[j] = true;
    }
    for (vj, s) in sol.tile.v.iter_mut().zip(seen) {
        *vj &= s;
    }
    Ok(sol)
}

/// Integral optimum of the relaxation via [`solve_relaxation`], reported
/// in the same shape as the simplex result.
pub fn solve_min_cut(problem: &LpProblem) -> Rank1Solution {
    let cut = solve_relaxation(&Relaxation::from_problem(problem));
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let raw_values: Vec<f64> = cut
        .u
        .iter()
        .chain(&cut.v)
        .map(|&b| bit(b))
        .chain(problem.zeros.iter().map(|&(i, j)| bit(cut.u[i] && cut.v[j])))
        .collect();
    Rank1Solution {
        objective: problem.evaluate(&raw_values),
        max_integrality_gap: 0.0,
        raw_values,
        iterations: 0,
        tile: Tile { u: cut.u, v: cut.v },
    }
}

pub(crate) fn round_tile(problem: &LpProblem, x: &[f64]) -> Result<Tile> {
    let gap = integrality_gap(x);
    if gap > TOL {
        let (k, v) = x
            .iter()
            .enumerate()
            .find(|(_, v)| v.abs().min((*v - 1.0).abs()) > TOL)
            .unwrap();
        return Err(Error::NumericalFailure(format!(
            "fractional optimum: {} = {v}",
            problem.variable_name(k)
        )));
    }
    let m = problem.n_rows;
    let n = problem.n_cols;
    Ok(Tile {
        u: x[..m].iter().map(|&v| v > 0.5).collect(),
        v: x[m..m + n].iter().map(|&v| v > 0.5).collect(),
    })
}
