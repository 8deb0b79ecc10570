//! A dense two-phase primal simplex with dual extraction.
//!
//! Small and dependency-free: adequate for masters with a few hundred
//! rows and a few thousand columns, which is all the desk-scale
//! pipelines in this crate need. Problems are stated as
//!
//! ```text
//! min c'x   s.t.   a_i'x {<=,>=,=} b_i,   x >= 0
//! ```
//!
//! The returned duals `y` satisfy the usual sign conventions for a
//! minimization problem: `y_i >= 0` for `>=` rows, `y_i <= 0` for `<=`
//! rows, free for `=` rows, with `c_j - y'A_j >= 0` for every column at
//! optimality and `y'b` equal to the optimal objective.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Row {
    /// Sparse coefficients as (variable, value); variables may repeat,
    /// repeats are summed.
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub n_vars: usize,
    /// Minimization objective, one coefficient per variable.
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram { n_vars, objective: vec![0.0; n_vars], rows: Vec::new() }
    }

    pub fn push_row(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        self.rows.push(Row { coeffs, cmp, rhs });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values, one per variable; zeros unless status is Optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Duals, one per row; zeros unless status is Optimal.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

/// Backend interface so an external engine can replace the embedded
/// solver behind the same contract.
pub trait LpSolver {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution>;
}

#[derive(Clone, Debug)]
pub struct DenseSimplex {
    pub max_iterations: usize,
    /// Pivot tolerance.
    pub eps: f64,
    /// Feasibility tolerance on the phase-1 objective.
    pub feas_eps: f64,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex { max_iterations: 200_000, eps: 1e-9, feas_eps: 1e-7 }
    }
}

impl LpSolver for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpSolution> {
        Tableau::build(lp, self).solve()
    }
}

/// Column roles in the expanded tableau.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ColKind {
    Structural(usize),
    /// Slack (+1) or surplus (-1) of the given original row.
    Slack(usize, i8),
    Artificial(usize),
}

struct Tableau<'a> {
    cfg: &'a DenseSimplex,
    n_rows: usize,
    n_cols: usize,
    /// Row-major constraint matrix, rhs appended as the last column.
    a: Vec<f64>,
    kinds: Vec<ColKind>,
    /// Original (phase-2) costs per column.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Row sign flips applied while normalizing rhs >= 0, needed to map
    /// slack reduced costs back to duals of the original rows.
    row_flipped: Vec<bool>,
    iterations: usize,
}

impl<'a> Tableau<'a> {
    fn build(lp: &LinearProgram, cfg: &'a DenseSimplex) -> Self {
        let m = lp.rows.len();
        // Count extra columns.
        let mut kinds: Vec<ColKind> = (0..lp.n_vars).map(ColKind::Structural).collect();
        let mut dense_rows: Vec<(Vec<f64>, Cmp, f64, bool)> = Vec::with_capacity(m);
        for (ri, row) in lp.rows.iter().enumerate() {
            let mut dense = vec![0.0; lp.n_vars];
            for &(j, v) in &row.coeffs {
                assert!(j < lp.n_vars, "row {ri} references unknown variable {j}");
                dense[j] += v;
            }
            let mut cmp = row.cmp;
            let mut rhs = row.rhs;
            let mut flipped = false;
            if rhs < 0.0 {
                for v in dense.iter_mut() {
                    *v = -*v;
                }
                rhs = -rhs;
                flipped = true;
                cmp = match cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
            }
            dense_rows.push((dense, cmp, rhs, flipped));
        }
        let mut slack_col_of_row = vec![usize::MAX; m];
        for (ri, (_, cmp, _, _)) in dense_rows.iter().enumerate() {
            match cmp {
                Cmp::Le => {
                    slack_col_of_row[ri] = kinds.len();
                    kinds.push(ColKind::Slack(ri, 1));
                }
                Cmp::Ge => {
                    slack_col_of_row[ri] = kinds.len();
                    kinds.push(ColKind::Slack(ri, -1));
                }
                Cmp::Eq => {}
            }
        }
        // Artificial columns: for Ge and Eq rows (Le rows start with
        // their slack basic).
        let mut art_col_of_row = vec![usize::MAX; m];
        for (ri, (_, cmp, _, _)) in dense_rows.iter().enumerate() {
            if matches!(cmp, Cmp::Ge | Cmp::Eq) {
                art_col_of_row[ri] = kinds.len();
                kinds.push(ColKind::Artificial(ri));
            }
        }
        let n_cols = kinds.len();
        let width = n_cols + 1; // + rhs
        let mut a = vec![0.0; m * width];
        let mut basis = vec![0usize; m];
        let mut row_flipped = vec![false; m];
        for (ri, (dense, cmp, rhs, flipped)) in dense_rows.iter().enumerate() {
            row_flipped[ri] = *flipped;
            for (j, &v) in dense.iter().enumerate() {
                a[ri * width + j] = v;
            }
            match cmp {
                Cmp::Le => {
                    a[ri * width + slack_col_of_row[ri]] = 1.0;
                    basis[ri] = slack_col_of_row[ri];
                }
                Cmp::Ge => {
                    a[ri * width + slack_col_of_row[ri]] = -1.0;
                    a[ri * width + art_col_of_row[ri]] = 1.0;
                    basis[ri] = art_col_of_row[ri];
                }
                Cmp::Eq => {
                    a[ri * width + art_col_of_row[ri]] = 1.0;
                    basis[ri] = art_col_of_row[ri];
                }
            }
            a[ri * width + n_cols] = *rhs;
        }
        let mut cost = vec![0.0; n_cols];
        for (j, kind) in kinds.iter().enumerate() {
            if let ColKind::Structural(v) = kind {
                cost[j] = lp.objective[*v];
            }
        }
        Tableau { cfg, n_rows: m, n_cols, a, kinds, cost, basis, row_flipped, iterations: 0 }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.n_cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.n_cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.n_cols + 1;
        let pivot = self.a[pr * width + pc];
        debug_assert!(pivot.abs() > self.cfg.eps);
        let inv = 1.0 / pivot;
        for c in 0..width {
            self.a[pr * width + c] *= inv;
        }
        for r in 0..self.n_rows {
            if r == pr {
                continue;
            }
            let factor = self.a[r * width + pc];
            if factor == 0.0 {
                continue;
            }
            for c in 0..width {
                self.a[r * width + c] -= factor * self.a[pr * width + c];
            }
            self.a[r * width + pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Reduced costs z_j = c_j - y'A_j under the given cost vector for
    /// the current basis, plus the dual vector y.
    fn priced(&self, cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
        // y'A_j for basic columns equals c_B in the transformed tableau:
        // since the tableau rows are B^{-1}A, reduced cost of column j is
        // c_j - sum_r c_{basis[r]} * a[r][j].
        let width = self.n_cols + 1;
        let cb: Vec<f64> = self.basis.iter().map(|&b| cost[b]).collect();
        let mut z = vec![0.0; self.n_cols];
        for (j, zj) in z.iter_mut().enumerate() {
            let mut acc = 0.0;
            for r in 0..self.n_rows {
                let v = self.a[r * width + j];
                if v != 0.0 {
                    acc += cb[r] * v;
                }
            }
            *zj = cost[j] - acc;
        }
        (z, cb)
    }

    /// One simplex phase under `cost`. Entering rule: Dantzig with a
    /// Bland fallback once degenerate pivots pile up. `allow` masks
    /// columns barred from entering (artificials during phase 2).
    fn run_phase(&mut self, cost: &[f64], allow: &[bool]) -> Result<PhaseEnd> {
        let width = self.n_cols + 1;
        let mut degenerate_streak = 0usize;
        loop {
            if self.iterations > self.cfg.max_iterations {
                return Err(Error::Lp(format!(
                    "iteration limit {} exceeded",
                    self.cfg.max_iterations
                )));
            }
            let (z, _) = self.priced(cost);
            let bland = degenerate_streak > 40;
            let mut entering: Option<usize> = None;
            if bland {
                for j in 0..self.n_cols {
                    if allow[j] && z[j] < -self.cfg.eps {
                        entering = Some(j);
                        break;
                    }
                }
            } else {
                let mut best = -self.cfg.eps;
                for j in 0..self.n_cols {
                    if allow[j] && z[j] < best {
                        best = z[j];
                        entering = Some(j);
                    }
                }
            }
            let Some(pc) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            // Ratio test.
            let mut pr: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.n_rows {
                let v = self.a[r * width + pc];
                if v > self.cfg.eps {
                    let ratio = self.rhs(r) / v;
                    let better = ratio < best_ratio - self.cfg.eps
                        || (ratio < best_ratio + self.cfg.eps
                            && pr.map(|p| self.basis[r] < self.basis[p]).unwrap_or(true));
                    if better {
                        best_ratio = ratio;
                        pr = Some(r);
                    }
                }
            }
            let Some(pr) = pr else {
                return Ok(PhaseEnd::Unbounded);
            };
            if best_ratio < self.cfg.eps {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(pr, pc);
        }
    }

    fn solve(mut self) -> Result<LpSolution> {
        // Phase 1: minimize the sum of artificials.
        let phase1_cost: Vec<f64> = self
            .kinds
            .iter()
            .map(|k| if matches!(k, ColKind::Artificial(_)) { 1.0 } else { 0.0 })
            .collect();
        let needs_phase1 = self.basis.iter().any(|&b| matches!(self.kinds[b], ColKind::Artificial(_)));
        if needs_phase1 {
            let allow = vec![true; self.n_cols];
            match self.run_phase(&phase1_cost, &allow)? {
                PhaseEnd::Optimal => {}
                PhaseEnd::Unbounded => {
                    return Err(Error::Lp("phase 1 unbounded; malformed input".into()))
                }
            }
            let infeas: f64 = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| matches!(self.kinds[b], ColKind::Artificial(_)))
                .map(|(r, _)| self.rhs(r))
                .sum();
            if infeas > self.cfg.feas_eps {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    x: vec![0.0; structural_count(&self.kinds)],
                    objective: 0.0,
                    duals: vec![0.0; self.n_rows],
                    iterations: self.iterations,
                });
            }
            // Drive remaining artificials out of the basis where possible.
            let width = self.n_cols + 1;
            for r in 0..self.n_rows {
                if matches!(self.kinds[self.basis[r]], ColKind::Artificial(_)) {
                    let mut pivot_col = None;
                    for j in 0..self.n_cols {
                        if !matches!(self.kinds[j], ColKind::Artificial(_))
                            && self.a[r * width + j].abs() > self.cfg.eps
                        {
                            pivot_col = Some(j);
                            break;
                        }
                    }
                    if let Some(pc) = pivot_col {
                        self.pivot(r, pc);
                    }
                    // Otherwise the row is redundant; the artificial
                    // stays basic at value zero.
                }
            }
        }
        // Phase 2 under true costs, artificials barred from entering.
        let allow: Vec<bool> =
            self.kinds.iter().map(|k| !matches!(k, ColKind::Artificial(_))).collect();
        let cost = self.cost.clone();
        match self.run_phase(&cost, &allow)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    x: vec![0.0; structural_count(&self.kinds)],
                    objective: f64::NEG_INFINITY,
                    duals: vec![0.0; self.n_rows],
                    iterations: self.iterations,
                });
            }
        }
        // Extract primal values.
        let n_structural = structural_count(&self.kinds);
        let mut x = vec![0.0; n_structural];
        for (r, &b) in self.basis.iter().enumerate() {
            if let ColKind::Structural(v) = self.kinds[b] {
                x[v] = self.rhs(r);
            }
        }
        let objective: f64 = (0..n_structural).map(|v| x[v] * objective_coef(&self.kinds, &self.cost, v)).sum();
        // Duals from reduced costs of slack and artificial columns:
        // for a slack of sign sigma in row i, z_slack = -sigma * y_i;
        // for an artificial in row i, z_art = -y_i (cost 0 in phase 2).
        let (z, _) = self.priced(&cost);
        let mut duals = vec![0.0; self.n_rows];
        let mut have = vec![false; self.n_rows];
        for (j, kind) in self.kinds.iter().enumerate() {
            match *kind {
                ColKind::Artificial(ri) if !have[ri] => {
                    duals[ri] = -z[j];
                    have[ri] = true;
                }
                ColKind::Slack(ri, sigma) if !have[ri] => {
                    duals[ri] = -f64::from(sigma) * z[j];
                    have[ri] = true;
                }
                _ => {}
            }
        }
        for (ri, flipped) in self.row_flipped.iter().enumerate() {
            if *flipped {
                duals[ri] = -duals[ri];
            }
        }
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            duals,
            iterations: self.iterations,
        })
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

fn structural_count(kinds: &[ColKind]) -> usize {
    kinds.iter().filter(|k| matches!(k, ColKind::Structural(_))).count()
}

fn objective_coef(kinds: &[ColKind], cost: &[f64], var: usize) -> f64 {
    for (j, kind) in kinds.iter().enumerate() {
        if matches!(kind, ColKind::Structural(v) if *v == var) {
            return cost[j];
        }
    }
    0.0
}
