//! Bounded-variable primal simplex for the rank-one LP, with Bland's rule.
//!
//! Every constraint row `u_i + v_j − z_ij + s_ij = 1` touches one `u`, one
//! `v` and two unit columns (`z` and the slack `s`). A basis therefore
//! covers most rows with a unit column; what remains is a square core
//! between the uncovered rows and the basic `u`/`v` columns. Each core row
//! holds at most two ones, so the core is the incidence matrix of a forest
//! with one half-edge per tree and is solved by peeling leaves in linear
//! time. A dense elimination is kept as a fallback.

use super::{integrality_gap, round_tile, LpProblem, Rank1Solution, TOL};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy)]
enum Var {
    U(usize),
    V(usize),
    Z(usize),
    S(usize),
}

/// Two-level bitset with a fast least-element query.
struct RankSet {
    words: Vec<u64>,
    summary: Vec<u64>,
}

impl RankSet {
    fn new(len: usize) -> Self {
        let words = len.div_ceil(64);
        Self {
            words: vec![0; words],
            summary: vec![0; words.div_ceil(64)],
        }
    }

    fn set(&mut self, i: usize, on: bool) {
        let (w, bit) = (i / 64, 1u64 << (i % 64));
        if on {
            self.words[w] |= bit;
            self.summary[w / 64] |= 1 << (w % 64);
        } else {
            self.words[w] &= !bit;
            if self.words[w] == 0 {
                self.summary[w / 64] &= !(1 << (w % 64));
            }
        }
    }

    fn first(&self) -> Option<usize> {
        let (s, sw) = self.summary.iter().enumerate().find(|(_, &sw)| sw != 0)?;
        let w = s * 64 + sw.trailing_zeros() as usize;
        Some(w * 64 + self.words[w].trailing_zeros() as usize)
    }
}

/// Membership list with O(1) insert and remove.
struct Slots {
    items: Vec<usize>,
    slot: Vec<usize>,
}

impl Slots {
    fn new(universe: usize) -> Self {
        Self {
            items: Vec::new(),
            slot: vec![NONE; universe],
        }
    }

    fn insert(&mut self, x: usize) {
        debug_assert_eq!(self.slot[x], NONE);
        self.slot[x] = self.items.len();
        self.items.push(x);
    }

    fn remove(&mut self, x: usize) {
        let s = std::mem::replace(&mut self.slot[x], NONE);
        debug_assert_ne!(s, NONE);
        self.items.swap_remove(s);
        if s < self.items.len() {
            self.slot[self.items[s]] = s;
        }
    }
}

/// Adjacency of the square core between uncovered rows and basic `u`/`v`.
struct Core {
    /// Core columns of each core row (at most two).
    row_vars: Vec<Vec<usize>>,
    /// Core rows of each core column.
    var_rows: Vec<Vec<usize>>,
}

struct Tableau<'p> {
    m: usize,
    n: usize,
    nc: usize,
    zeros: &'p [(usize, usize)],
    row_cells: Vec<Vec<usize>>,
    col_cells: Vec<Vec<usize>>,
    cost: Vec<f64>,
    status: Vec<Status>,
    x: Vec<f64>,
    /// Basic unit variable covering each constraint, or NONE.
    unit: Vec<usize>,
    /// Bland priority of each variable.
    rank: Vec<usize>,
    by_rank: Vec<usize>,
    /// Simplex multiplier of each constraint, and their sums over the
    /// support of each `u`/`v` column.
    y: Vec<f64>,
    ysum: Vec<f64>,
    core_vars: Slots,
    core_rows: Slots,
    attractive: RankSet,
    acc: Vec<f64>,
    touched: Vec<usize>,
    in_touched: Vec<bool>,
}

impl<'p> Tableau<'p> {
    fn new(p: &'p LpProblem) -> Self {
        let (m, n, nc) = (p.n_rows(), p.n_cols(), p.n_constraints());
        let mut row_cells = vec![Vec::new(); m];
        let mut col_cells = vec![Vec::new(); n];
        for (r, &(i, j)) in p.zeros().iter().enumerate() {
            row_cells[i].push(r);
            col_cells[j].push(r);
        }
        let mut cost = p.objective();
        cost.extend(std::iter::repeat_n(0.0, nc));
        let total = m + n + 2 * nc;
        let mut status = vec![Status::Lower; total];
        let mut x = vec![0.0; total];
        let mut unit = vec![NONE; nc];
        for r in 0..nc {
            let s = m + n + nc + r;
            status[s] = Status::Basic;
            x[s] = 1.0;
            unit[r] = s;
        }
        // u and v interleave so ties between optimal vertices are broken
        // by growing rows and columns together.
        let mut by_rank = Vec::with_capacity(total);
        for t in 0..m.max(n) {
            if t < m {
                by_rank.push(t);
            }
            if t < n {
                by_rank.push(m + t);
            }
        }
        by_rank.extend(m + n..total);
        let mut rank = vec![0; total];
        for (pos, &k) in by_rank.iter().enumerate() {
            rank[k] = pos;
        }
        let mut t = Self {
            m,
            n,
            nc,
            zeros: p.zeros(),
            row_cells,
            col_cells,
            cost,
            status,
            x,
            unit,
            rank,
            by_rank,
            y: vec![0.0; nc],
            ysum: vec![0.0; m + n],
            core_vars: Slots::new(m + n),
            core_rows: Slots::new(nc),
            attractive: RankSet::new(total),
            acc: vec![0.0; nc],
            touched: Vec::new(),
            in_touched: vec![false; nc],
        };
        for k in 0..total {
            t.refresh(k);
        }
        t
    }

    fn kind(&self, k: usize) -> Var {
        let (m, n, nc) = (self.m, self.n, self.nc);
        if k < m {
            Var::U(k)
        } else if k < m + n {
            Var::V(k - m)
        } else if k < m + n + nc {
            Var::Z(k - m - n)
        } else {
            Var::S(k - m - n - nc)
        }
    }

    fn upper(&self, k: usize) -> f64 {
        match self.kind(k) {
            Var::S(_) => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Constraint rows touched by a structural `u`/`v` column.
    fn cells(&self, k: usize) -> &[usize] {
        match self.kind(k) {
            Var::U(i) => &self.row_cells[i],
            Var::V(j) => &self.col_cells[j],
            _ => &[],
        }
    }

    /// Sign of the unit column of a basic `z` or `s`.
    fn unit_sign(&self, k: usize) -> f64 {
        match self.kind(k) {
            Var::Z(_) => -1.0,
            _ => 1.0,
        }
    }

    fn reduced_cost(&self, k: usize) -> f64 {
        match self.kind(k) {
            Var::U(_) | Var::V(_) => self.cost[k] - self.ysum[k],
            Var::Z(r) => -1.0 + self.y[r],
            Var::S(r) => -self.y[r],
        }
    }

    /// Re-evaluates whether `k` may enter the basis.
    fn refresh(&mut self, k: usize) {
        let gain = match self.status[k] {
            Status::Basic => 0.0,
            Status::Lower => self.reduced_cost(k),
            Status::Upper => -self.reduced_cost(k),
        };
        self.attractive.set(self.rank[k], gain > TOL);
    }

    fn set_y(&mut self, r: usize, value: f64) {
        let delta = value - self.y[r];
        if delta == 0.0 {
            return;
        }
        self.y[r] = value;
        let (i, j) = self.zeros[r];
        let (ui, vj) = (i, self.m + j);
        self.ysum[ui] += delta;
        self.ysum[vj] += delta;
        let (z, s) = (self.m + self.n + r, self.m + self.n + self.nc + r);
        for k in [ui, vj, z, s] {
            self.refresh(k);
        }
    }

    fn core(&self) -> Core {
        let vars = &self.core_vars;
        let mut row_vars = Vec::with_capacity(self.core_rows.items.len());
        let mut var_rows = vec![Vec::new(); vars.items.len()];
        for (a, &r) in self.core_rows.items.iter().enumerate() {
            let (i, j) = self.zeros[r];
            let members: Vec<usize> = [vars.slot[i], vars.slot[self.m + j]]
                .into_iter()
                .filter(|&c| c != NONE)
                .collect();
            for &c in &members {
                var_rows[c].push(a);
            }
            row_vars.push(members);
        }
        Core { row_vars, var_rows }
    }

    /// Recomputes the multipliers of the uncovered rows; covered rows are
    /// pinned by their unit column (0 for a slack, 1 for a `z`).
    fn compute_duals(&mut self, core: &Core) -> Result<()> {
        if self.core_vars.items.len() != self.core_rows.items.len() {
            return Err(Error::NumericalFailure(format!(
                "basis lost its shape: {} core columns, {} core rows",
                self.core_vars.items.len(),
                self.core_rows.items.len()
            )));
        }
        let rhs: Vec<f64> = self
            .core_vars
            .items
            .iter()
            .zip(&core.var_rows)
            .map(|(&k, rows)| {
                let inside: f64 = rows.iter().map(|&a| self.y[self.core_rows.items[a]]).sum();
                self.cost[k] - self.ysum[k] + inside
            })
            .collect();
        let dual = solve_core(&core.var_rows, &core.row_vars, &rhs)?;
        for (a, value) in dual.into_iter().enumerate() {
            let r = self.core_rows.items[a];
            self.set_y(r, value);
        }
        Ok(())
    }

    /// Bland's rule: the first nonbasic variable in priority order whose
    /// move improves the objective.
    fn entering(&self) -> Option<(usize, f64)> {
        let k = self.by_rank[self.attractive.first()?];
        let dir = if self.status[k] == Status::Lower { 1.0 } else { -1.0 };
        Some((k, dir))
    }

    fn touch(&mut self, r: usize) {
        if !self.in_touched[r] {
            self.in_touched[r] = true;
            self.touched.push(r);
        }
    }

    /// Column of `q` in the current basis: `B d = a_q`, as (basic var, d).
    fn ftran(&mut self, q: usize, core: &Core) -> Result<Vec<(usize, f64)>> {
        let column: Vec<(usize, f64)> = match self.kind(q) {
            Var::U(_) | Var::V(_) => self.cells(q).iter().map(|&r| (r, 1.0)).collect(),
            Var::Z(r) => vec![(r, -1.0)],
            Var::S(r) => vec![(r, 1.0)],
        };
        let mut rhs = vec![0.0; self.core_rows.items.len()];
        for (r, c) in column {
            let a = self.core_rows.slot[r];
            if a != NONE {
                rhs[a] += c;
            } else {
                self.acc[r] += c;
                self.touch(r);
            }
        }
        let d_core = solve_core(&core.row_vars, &core.var_rows, &rhs)?;
        let mut out = Vec::new();
        for (a, &dk) in d_core.iter().enumerate() {
            if dk.abs() <= TOL {
                continue;
            }
            let k = self.core_vars.items[a];
            out.push((k, dk));
            for idx in 0..self.cells(k).len() {
                let r = self.cells(k)[idx];
                if self.unit[r] != NONE {
                    self.acc[r] -= dk;
                    self.touch(r);
                }
            }
        }
        for r in std::mem::take(&mut self.touched) {
            let val = std::mem::replace(&mut self.acc[r], 0.0);
            self.in_touched[r] = false;
            if val.abs() > TOL {
                let k = self.unit[r];
                out.push((k, self.unit_sign(k) * val));
            }
        }
        Ok(out)
    }

    /// One pivot or bound flip with entering `q` moving in direction `dir`.
    fn step(&mut self, q: usize, dir: f64, column: &[(usize, f64)]) -> Result<()> {
        // (limit, var index, bound the leaving var ends at)
        let mut best: Option<(f64, usize, Status)> = None;
        let rank = &self.rank;
        let mut consider = |limit: f64, k: usize, to: Status| {
            let better = match best {
                None => true,
                Some((bl, bk, _)) => {
                    limit < bl - TOL || (limit <= bl + TOL && rank[k] < rank[bk])
                }
            };
            if better {
                best = Some((limit, k, to));
            }
        };
        let span = self.upper(q);
        if span.is_finite() {
            let to = if dir > 0.0 { Status::Upper } else { Status::Lower };
            consider(span, q, to);
        }
        for &(k, dk) in column {
            let rate = -dir * dk;
            if rate < 0.0 {
                consider((self.x[k] / -rate).max(0.0), k, Status::Lower);
            } else if self.upper(k).is_finite() {
                consider(((self.upper(k) - self.x[k]) / rate).max(0.0), k, Status::Upper);
            }
        }
        let Some((theta, leave, to)) = best else {
            return Err(Error::NumericalFailure("unbounded direction".into()));
        };

        self.x[q] += dir * theta;
        for &(k, dk) in column {
            self.x[k] -= dir * theta * dk;
        }
        if leave == q {
            self.status[q] = to;
            self.x[q] = if to == Status::Upper { self.upper(q) } else { 0.0 };
            self.refresh(q);
            return Ok(());
        }

        self.status[leave] = to;
        self.x[leave] = if to == Status::Upper { self.upper(leave) } else { 0.0 };
        match self.kind(leave) {
            Var::Z(r) | Var::S(r) => {
                self.unit[r] = NONE;
                self.core_rows.insert(r);
            }
            _ => self.core_vars.remove(leave),
        }
        self.refresh(leave);

        self.status[q] = Status::Basic;
        match self.kind(q) {
            Var::Z(r) | Var::S(r) => {
                if self.unit[r] != NONE {
                    return Err(Error::NumericalFailure(format!("row {r} covered twice")));
                }
                self.unit[r] = q;
                self.core_rows.remove(r);
                let pinned = if matches!(self.kind(q), Var::Z(_)) { 1.0 } else { 0.0 };
                self.set_y(r, pinned);
            }
            _ => self.core_vars.insert(q),
        }
        self.refresh(q);
        Ok(())
    }
}

/// Solves `Σ_{v ∈ eqs[e]} x_v = rhs[e]` for a square system whose
/// coefficients are all one, by repeatedly resolving an equation with a
/// single unknown. Falls back to dense elimination if peeling stalls.
fn solve_core(eqs: &[Vec<usize>], var_eqs: &[Vec<usize>], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = var_eqs.len();
    let mut x = vec![0.0; n];
    let mut solved = vec![false; n];
    let mut open: Vec<usize> = eqs.iter().map(Vec::len).collect();
    let mut resid = rhs.to_vec();
    let mut queue: Vec<usize> = (0..eqs.len()).filter(|&e| open[e] == 1).collect();
    let mut done = 0;
    while let Some(e) = queue.pop() {
        if open[e] != 1 {
            continue;
        }
        let Some(&v) = eqs[e].iter().find(|&&v| !solved[v]) else {
            continue;
        };
        x[v] = resid[e];
        solved[v] = true;
        done += 1;
        for &f in &var_eqs[v] {
            resid[f] -= x[v];
            open[f] -= 1;
            if open[f] == 1 {
                queue.push(f);
            }
        }
    }
    if done == n {
        return Ok(x);
    }
    dense_solve(eqs, n, rhs)
}

fn dense_solve(eqs: &[Vec<usize>], n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut a = vec![vec![0.0; n + 1]; n];
    for (e, vars) in eqs.iter().enumerate() {
        for &v in vars {
            a[e][v] += 1.0;
        }
        a[e][n] = rhs[e];
    }
    for c in 0..n {
        let p = (c..n)
            .max_by(|&r, &s| a[r][c].abs().total_cmp(&a[s][c].abs()))
            .unwrap();
        if a[p][c].abs() < TOL {
            return Err(Error::NumericalFailure("singular basis".into()));
        }
        a.swap(c, p);
        for r in 0..n {
            if r != c && a[r][c] != 0.0 {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    Ok((0..n).map(|c| a[c][n] / a[c][c]).collect())
}

/// Solves the rank-one LP from the all-zero vertex with Bland's rule.
pub fn solve_simplex(p: &LpProblem) -> Result<Rank1Solution> {
    let mut t = Tableau::new(p);
    let cap = 10 * (p.n_variables() + p.n_constraints()).max(1);
    let mut iterations = 0;
    loop {
        let core = t.core();
        t.compute_duals(&core)?;
        let Some((q, dir)) = t.entering() else {
            break;
        };
        iterations += 1;
        if iterations > cap {
            return Err(Error::NumericalFailure(format!(
                "iteration cap of {cap} pivots exceeded"
            )));
        }
        let column = t.ftran(q, &core)?;
        t.step(q, dir, &column)?;
    }
    if let Some(k) = (0..t.x.len()).find(|&k| t.x[k] < -TOL || t.x[k] > t.upper(k) + TOL) {
        return Err(Error::NumericalFailure(format!(
            "variable {k} left its bounds: {}",
            t.x[k]
        )));
    }
    let raw_values = t.x[..p.n_variables()].to_vec();
    let tile = round_tile(p, &raw_values)?;
    Ok(Rank1Solution {
        tile,
        objective: p.evaluate(&raw_values),
        max_integrality_gap: integrality_gap(&raw_values),
        raw_values,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peel_solves_tree_with_half_edge() {
        // x0 = 2; x0 + x1 = 5; x1 + x2 = 4
        let eqs = vec![vec![0], vec![0, 1], vec![1, 2]];
        let var_eqs = vec![vec![0, 1], vec![1, 2], vec![2]];
        let x = solve_core(&eqs, &var_eqs, &[2.0, 5.0, 4.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0, 1.0]);
    }

    #[test]
    fn dense_fallback_and_singular() {
        // an odd cycle is nonsingular but has no single-unknown equation
        let eqs = vec![vec![0, 1], vec![1, 2], vec![0, 2]];
        let var_eqs = vec![vec![0, 2], vec![0, 1], vec![1, 2]];
        let x = solve_core(&eqs, &var_eqs, &[3.0, 5.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        let eqs = vec![vec![0, 1], vec![0, 1]];
        let var_eqs = vec![vec![0, 1], vec![0, 1]];
        assert!(solve_core(&eqs, &var_eqs, &[1.0, 1.0]).is_err());
    }
}
