//! Exact solution of the rank-one relaxation as a minimum s-t cut.
//!
//! With `w_j = 1 − v_j` each penalty `max(0, u_i + v_j − 1)` becomes
//! `max(0, u_i − w_j)`, the LP relaxation of a cut problem. Its optimum is
//! attained by a cut, so a max-flow computation yields an integral optimum
//! of the same LP the simplex solves. This is an independent route used to
//! cross-check the simplex and to bound the branch-and-bound oracle.

use std::collections::VecDeque;

use super::LpProblem;

/// `max Σ a_i u_i + Σ b_j v_j − Σ_{(i,j)∈pairs} max(0, u_i + v_j − 1)`
/// over the unit box. Weights are stored doubled so they are integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relaxation {
    pub row_weight2: Vec<i64>,
    pub col_weight2: Vec<i64>,
    pub pairs: Vec<(usize, usize)>,
}

impl Relaxation {
    pub fn from_problem(p: &LpProblem) -> Self {
        Self {
            row_weight2: p.row_ones().iter().map(|&c| c as i64).collect(),
            col_weight2: p.col_ones().iter().map(|&c| c as i64).collect(),
            pairs: p.zeros().to_vec(),
        }
    }

    /// Doubled objective at a binary point.
    pub fn value2(&self, u: &[bool], v: &[bool]) -> i64 {
        let lin: i64 = self
            .row_weight2
            .iter()
            .zip(u)
            .chain(self.col_weight2.iter().zip(v))
            .filter(|(_, &b)| b)
            .map(|(w, _)| *w)
            .sum();
        let clash = self.pairs.iter().filter(|&&(i, j)| u[i] && v[j]).count() as i64;
        lin - 2 * clash
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutSolution {
    pub u: Vec<bool>,
    pub v: Vec<bool>,
    /// Twice the optimal objective.
    pub objective2: i64,
}

impl CutSolution {
    pub fn objective(&self) -> f64 {
        self.objective2 as f64 / 2.0
    }
}

struct FlowGraph {
    head: Vec<usize>,
    cap: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        Self {
            head: Vec::new(),
            cap: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(cap);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.cap.push(0);
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for &e in &self.adj[x] {
                let y = self.head[e];
                if self.cap[e] > 0 && level[y] == usize::MAX {
                    level[y] = level[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        level
    }

    fn augment(&mut self, x: usize, t: usize, pushed: i64, level: &[usize], it: &mut [usize]) -> i64 {
        if x == t {
            return pushed;
        }
        while it[x] < self.adj[x].len() {
            let e = self.adj[x][it[x]];
            let y = self.head[e];
            if self.cap[e] > 0 && level[y] == level[x] + 1 {
                let got = self.augment(y, t, pushed.min(self.cap[e]), level, it);
                if got > 0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            it[x] += 1;
        }
        0
    }

    /// Runs Dinic's algorithm and returns the residual source side.
    fn min_cut(&mut self, s: usize, t: usize) -> Vec<bool> {
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                return level.iter().map(|&l| l != usize::MAX).collect();
            }
            let mut it = vec![0; self.adj.len()];
            while self.augment(s, t, i64::MAX, &level, &mut it) > 0 {}
        }
    }
}

/// Optimal binary point of the relaxation; among optima it takes the
/// smallest set of rows.
pub fn solve_relaxation(r: &Relaxation) -> CutSolution {
    let (m, n) = (r.row_weight2.len(), r.col_weight2.len());
    let (s, t) = (0, 1);
    let row_node = |i: usize| 2 + i;
    let col_node = |j: usize| 2 + m + j;
    let mut g = FlowGraph::new(2 + m + n);
    for (i, &a) in r.row_weight2.iter().enumerate() {
        if a > 0 {
            g.add_edge(s, row_node(i), a);
        } else if a < 0 {
            g.add_edge(row_node(i), t, -a);
        }
    }
    for (j, &b) in r.col_weight2.iter().enumerate() {
        if b > 0 {
            g.add_edge(col_node(j), t, b);
        } else if b < 0 {
            g.add_edge(s, col_node(j), -b);
        }
    }
    for &(i, j) in &r.pairs {
        g.add_edge(row_node(i), col_node(j), 2);
    }
    let source_side = g.min_cut(s, t);
    let u: Vec<bool> = (0..m).map(|i| source_side[row_node(i)]).collect();
    let v: Vec<bool> = (0..n).map(|j| !source_side[col_node(j)]).collect();
    let objective2 = r.value2(&u, &v);
    CutSolution { u, v, objective2 }
}
