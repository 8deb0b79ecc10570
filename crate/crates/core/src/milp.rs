//! A small branch-and-bound layer over the embedded simplex for the
//! mixed 0/1 programs the pricing backend emits. Depth-first with
//! best-incumbent pruning; collects a pool of improving integral
//! solutions so a single run can feed several columns.

use std::time::{Duration, Instant};

use crate::lp::{Cmp, DenseSimplex, LinearProgram, LpSolver, LpStatus};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Milp {
    pub lp: LinearProgram,
    /// Variables constrained to {0, 1}. Upper-bound rows are added
    /// automatically.
    pub binaries: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct MilpConfig {
    pub node_limit: usize,
    pub time_limit: Duration,
    pub int_eps: f64,
    /// Keep up to this many distinct improving incumbents.
    pub pool_size: usize,
}

impl Default for MilpConfig {
    fn default() -> Self {
        MilpConfig {
            node_limit: 20_000,
            time_limit: Duration::from_secs(60),
            int_eps: 1e-6,
            pool_size: 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    /// Search completed; incumbent (if any) is globally optimal.
    Optimal,
    /// Search completed with no feasible integral point.
    Infeasible,
    /// Node or time limit hit; incumbent (if any) is feasible but
    /// unproven.
    LimitReached,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub best: Option<(Vec<f64>, f64)>,
    /// Improving integral solutions met during the search, best last.
    pub pool: Vec<(Vec<f64>, f64)>,
    pub nodes: usize,
}

pub fn solve_milp(milp: &Milp, cfg: &MilpConfig) -> Result<MilpSolution> {
    let solver = DenseSimplex::default();
    let mut base = milp.lp.clone();
    for &j in &milp.binaries {
        if j >= base.n_vars {
            return Err(Error::Config(format!("binary index {j} out of range")));
        }
        base.push_row(vec![(j, 1.0)], Cmp::Le, 1.0);
    }
    let started = Instant::now();
    let mut nodes = 0usize;
    let mut pool: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    // Each stack entry fixes a set of binaries: (var, value).
    let mut stack: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    let mut limit_hit = false;
    while let Some(fixes) = stack.pop() {
        if nodes >= cfg.node_limit || started.elapsed() > cfg.time_limit {
            limit_hit = true;
            break;
        }
        nodes += 1;
        let mut lp = base.clone();
        for &(j, v) in &fixes {
            lp.push_row(vec![(j, 1.0)], Cmp::Eq, v);
        }
        let rel = solver.solve(&lp)?;
        match rel.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(Error::Lp("relaxation unbounded; add bounds".into()))
            }
            LpStatus::Optimal => {}
        }
        if let Some((_, incumbent)) = &best {
            if rel.objective >= *incumbent - 1e-9 {
                continue; // bound: cannot improve
            }
        }
        // Most fractional binary.
        let mut branch_var = None;
        let mut worst_gap = cfg.int_eps;
        for &j in &milp.binaries {
            let frac = (rel.x[j] - rel.x[j].round()).abs();
            if frac > worst_gap {
                worst_gap = frac;
                branch_var = Some(j);
            }
        }
        match branch_var {
            None => {
                // Integral: new incumbent.
                let rounded: Vec<f64> = rel.x.clone();
                pool.push((rounded.clone(), rel.objective));
                if pool.len() > cfg.pool_size {
                    pool.remove(0);
                }
                best = Some((rounded, rel.objective));
            }
            Some(j) => {
                // Dive toward the nearer bound first (explored last in
                // LIFO order, so push it second).
                let toward_one = rel.x[j] >= 0.5;
                let mut far = fixes.clone();
                far.push((j, if toward_one { 0.0 } else { 1.0 }));
                stack.push(far);
                let mut near = fixes;
                near.push((j, if toward_one { 1.0 } else { 0.0 }));
                stack.push(near);
            }
        }
    }
    let status = if limit_hit {
        MilpStatus::LimitReached
    } else if best.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    };
    Ok(MilpSolution { status, best, pool, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knapsack_three_items() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4 => a=1, c=1, value 8.
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![-5.0, -4.0, -3.0];
        lp.push_row(vec![(0, 2.0), (1, 3.0), (2, 1.0)], Cmp::Le, 4.0);
        let milp = Milp { lp, binaries: vec![0, 1, 2] };
        let sol = solve_milp(&milp, &MilpConfig::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        let (x, obj) = sol.best.unwrap();
        assert!((obj + 8.0).abs() < 1e-6);
        assert!((x[0] - 1.0).abs() < 1e-6);
        assert!(x[1].abs() < 1e-6);
        assert!((x[2] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_binary_system() {
        // a + b >= 3 with binaries is infeasible.
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.push_row(vec![(0, 1.0), (1, 1.0)], Cmp::Ge, 3.0);
        let milp = Milp { lp, binaries: vec![0, 1] };
        let sol = solve_milp(&milp, &MilpConfig::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
        assert!(sol.best.is_none());
    }

    #[test]
    fn equality_selection() {
        // pick exactly two of four items, minimize cost.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![4.0, 1.0, 3.0, 2.0];
        lp.push_row((0..4).map(|j| (j, 1.0)).collect(), Cmp::Eq, 2.0);
        let milp = Milp { lp, binaries: (0..4).collect() };
        let sol = solve_milp(&milp, &MilpConfig::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        let (x, obj) = sol.best.unwrap();
        assert!((obj - 3.0).abs() < 1e-6);
        assert!((x[1] - 1.0).abs() < 1e-6);
        assert!((x[3] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pool_collects_improving_solutions() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 2.0, 3.0];
        lp.push_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Cmp::Ge, 1.0);
        let milp = Milp { lp, binaries: vec![0, 1, 2] };
        let sol = solve_milp(&milp, &MilpConfig::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!(!sol.pool.is_empty());
        let (_, best_obj) = sol.best.unwrap();
        assert!((best_obj - 1.0).abs() < 1e-6);
    }
}
