//! The lottery optimizer: a master LP over an explicit support of
//! weakly stable matchings, dual extraction, two pricing variants with
//! a cut-off-rank stability encoding, an equal-treatment extension, and
//! the full column-generation loop.
//!
//! The master finds weights λ over the support minimizing the expected
//! total rank subject to the mixture stochastically dominating a given
//! table `p` edge-by-edge (one cumulative constraint per edge) and
//! Σλ = 1. Its duals (μ per edge, δ for the convexity row) price
//! candidate columns: a weakly stable matching with positive reduced
//! cost improves the master; when none exists the mixture is optimal
//! over all weakly stable matchings.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_traits::{ToPrimitive, Zero};

use crate::lp::{Cmp, DenseSimplex, LinearProgram, LpSolver, LpStatus};
use crate::market::{
    self, is_weakly_stable, lift_matching, lift_random, restrict_matching, restrict_random,
    total_rank, Matching, MarketInstance, RandomMatching, School, Student,
};
use crate::mech::sub_seed;
use crate::milp::{solve_milp, Milp, MilpConfig, MilpStatus};
use crate::oracle::{self, EnumBudget};
use crate::sic::{resolve_to_constrained_efficient, ResolvePolicy};
use crate::{Error, Frac, Result, EPS_LP};

/// Strictness threshold standing in for the pricing problem's strict
/// inequality, which an LP cannot express directly.
pub const EPS_STRICT: f64 = 1e-7;

/// Grid for snapping LP weights into exact fractions; fine enough that
/// re-expanding a decomposition reproduces its table to well below any
/// tolerance used by the checks.
const LAMBDA_GRID: i128 = 1_000_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MasterStatus {
    /// Solved with the artificial column at weight zero (or absent).
    Optimal,
    /// Solved, but only because the artificial column carries weight:
    /// the support cannot cover `p`.
    ArtificialActive,
    /// Artificial column disabled and the LP is infeasible.
    InfeasibleWithoutArtificial,
}

/// Master-LP duals. `mu` is aligned with `MarketInstance::edges()`
/// order; `ete` holds the duals of the equal-treatment rows keyed by
/// (student i, student j, school).
#[derive(Clone, Debug)]
pub struct Duals {
    pub mu: Vec<f64>,
    pub delta: f64,
    pub ete: Vec<(Student, Student, School, f64)>,
}

#[derive(Clone, Debug)]
pub struct MasterSolution {
    /// One weight per support matching, in input order.
    pub weights: Vec<f64>,
    pub duals: Duals,
    /// Expected total rank (divide by |N| for the average).
    pub objective: f64,
    pub status: MasterStatus,
    pub artificial_weight: f64,
}

#[derive(Clone, Debug)]
pub struct MasterConfig {
    pub use_artificial: bool,
    /// Cost of the artificial column; defaults to
    /// (max rank + 1) · |N| · 1000, far above any genuine column.
    pub artificial_cost: Option<f64>,
}

impl Default for MasterConfig {
    fn default() -> Self {
        MasterConfig { use_artificial: true, artificial_cost: None }
    }
}

/// Students with identical relevant preferences under a base table:
/// equal restricted lists and tied priorities at every school on them.
#[derive(Clone, Debug, Default)]
pub struct IdenticalPairs {
    /// Pairs (i, j) with i < j.
    pub pairs: Vec<(Student, Student)>,
    /// Shared restricted list per pair, aligned with `pairs`.
    pub common_lists: Vec<Vec<School>>,
}

impl IdenticalPairs {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn flagged(&self, i: Student, j: Student) -> bool {
        let key = (i.min(j), i.max(j));
        self.pairs.iter().any(|&p| p == key)
    }
}

/// The restricted preference list of `i` under `p`: the schools
/// strictly preferred to the least preferred school receiving positive
/// probability. Empty when `i` receives no probability at all.
fn restricted_list(inst: &MarketInstance, p: &RandomMatching, i: Student) -> Vec<School> {
    let prefs = inst.pref(i);
    let mut last_pos = None;
    for (pos, &s) in prefs.iter().enumerate() {
        if !p.get(i, s).is_zero() {
            last_pos = Some(pos);
        }
    }
    match last_pos {
        Some(pos) => prefs[..pos].to_vec(),
        None => Vec::new(),
    }
}

/// Flags student pairs with identical restricted preference lists whose
/// listed schools are all indifferent between the two.
pub fn identical_pairs(inst: &MarketInstance, p: &RandomMatching) -> Result<IdenticalPairs> {
    p.validate(inst)?;
    let n = inst.n_students();
    let lists: Vec<Vec<School>> = (0..n).map(|i| restricted_list(inst, p, i)).collect();
    let mut pairs = Vec::new();
    let mut common_lists = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if lists[i] != lists[j] {
                continue;
            }
            let tied_everywhere = lists[i].iter().all(|&s| {
                match (inst.priority_rank(i, s), inst.priority_rank(j, s)) {
                    (Ok(a), Ok(b)) => a == b,
                    _ => false,
                }
            });
            if tied_everywhere {
                pairs.push((i, j));
                common_lists.push(lists[i].clone());
            }
        }
    }
    Ok(IdenticalPairs { pairs, common_lists })
}

/// Cumulative edge indicator of a matching at edge (i, position k):
/// 1 iff i is assigned a school ranked at position k or better.
fn cum_indicator(inst: &MarketInstance, m: &Matching, i: Student, pos_1based: u32) -> f64 {
    match m.school_of(i) {
        Some(s) => {
            if inst.rank_of(i, s).expect("assigned edge") <= pos_1based {
                1.0
            } else {
                0.0
            }
        }
        None => 0.0,
    }
}

/// Solves the master LP over `support` for base table `p`, optionally
/// with equal-treatment rows. When the LP is infeasible and the
/// artificial column is enabled, the all-ones column with a very high
/// cost is added and the status reports whether it carries weight.
pub fn solve_master(
    inst: &MarketInstance,
    support: &[Matching],
    p: &RandomMatching,
    equal_treatment: Option<&IdenticalPairs>,
    cfg: &MasterConfig,
    solver: &dyn LpSolver,
) -> Result<MasterSolution> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    p.validate(inst)?;
    for m in support {
        m.validate(inst)?;
    }
    let edges = inst.edges();
    let n_cols = support.len();
    let art_col = n_cols; // present only when use_artificial
    let n_vars = if cfg.use_artificial { n_cols + 1 } else { n_cols };
    let art_cost = cfg
        .artificial_cost
        .unwrap_or_else(|| f64::from(inst.max_rank() + 1) * inst.n_students() as f64 * 1000.0);

    let mut lp = LinearProgram::new(n_vars);
    for (l, m) in support.iter().enumerate() {
        lp.objective[l] = total_rank(inst, m) as f64;
    }
    if cfg.use_artificial {
        lp.objective[art_col] = art_cost;
    }
    // Dominance rows, one per edge in canonical order.
    for &(i, s) in &edges {
        let pos = inst.rank_of(i, s)?;
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for (l, m) in support.iter().enumerate() {
            let c = cum_indicator(inst, m, i, pos);
            if c != 0.0 {
                coeffs.push((l, c));
            }
        }
        if cfg.use_artificial {
            // all-ones column: its cumulative sum at position k is k
            coeffs.push((art_col, f64::from(pos)));
        }
        let rhs = p.cum(inst, i, pos).to_f64().unwrap();
        lp.push_row(coeffs, Cmp::Ge, rhs);
    }
    let n_edge_rows = edges.len();
    // Equal-treatment rows.
    let mut ete_keys: Vec<(Student, Student, School)> = Vec::new();
    if let Some(eq) = equal_treatment {
        for (pair_idx, &(i, j)) in eq.pairs.iter().enumerate() {
            for &s in &eq.common_lists[pair_idx] {
                let mut coeffs: Vec<(usize, f64)> = Vec::new();
                for (l, m) in support.iter().enumerate() {
                    let mut c = 0.0;
                    if m.school_of(i) == Some(s) {
                        c += 1.0;
                    }
                    if m.school_of(j) == Some(s) {
                        c -= 1.0;
                    }
                    if c != 0.0 {
                        coeffs.push((l, c));
                    }
                }
                // artificial column covers both students: coefficient 0
                lp.push_row(coeffs, Cmp::Eq, 0.0);
                ete_keys.push((i, j, s));
            }
        }
    }
    // Convexity row.
    let conv_row = lp.rows.len();
    lp.push_row((0..n_vars).map(|l| (l, 1.0)).collect(), Cmp::Eq, 1.0);

    let sol = solver.solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return if cfg.use_artificial {
                Err(Error::Lp(
                    "master with artificial column reported infeasible; this should not happen"
                        .into(),
                ))
            } else {
                Ok(MasterSolution {
                    weights: vec![0.0; n_cols],
                    duals: Duals { mu: vec![0.0; n_edge_rows], delta: 0.0, ete: Vec::new() },
                    objective: f64::NAN,
                    status: MasterStatus::InfeasibleWithoutArtificial,
                    artificial_weight: 0.0,
                })
            };
        }
        LpStatus::Unbounded => {
            return Err(Error::Lp("master unbounded; check objective signs".into()))
        }
    }
    let weights: Vec<f64> = (0..n_cols).map(|l| sol.x[l].max(0.0)).collect();
    let artificial_weight = if cfg.use_artificial { sol.x[art_col].max(0.0) } else { 0.0 };
    let mu: Vec<f64> = (0..n_edge_rows).map(|r| sol.duals[r].max(0.0)).collect();
    let ete = ete_keys
        .iter()
        .enumerate()
        .map(|(k, &(i, j, s))| (i, j, s, sol.duals[n_edge_rows + k]))
        .collect();
    let delta = sol.duals[conv_row];
    let status = if artificial_weight > EPS_LP {
        MasterStatus::ArtificialActive
    } else {
        MasterStatus::Optimal
    };
    // Objective excluding any artificial contribution.
    let objective: f64 =
        weights.iter().zip(support).map(|(w, m)| w * total_rank(inst, m) as f64).sum();
    Ok(MasterSolution {
        weights,
        duals: Duals { mu, delta, ete },
        objective,
        status,
        artificial_weight,
    })
}

/// Precomputed per-edge reduced-cost weights for a dual vector:
/// rc(M) = Σ_e w_e · M_e + δ, where w_e folds the suffix sum of μ along
/// the student's list, the equal-treatment duals, and the rank cost.
pub struct DualsView {
    /// w_e aligned with `MarketInstance::edges()`.
    pub rc_edge_weight: Vec<f64>,
    /// μ per edge (not suffix-summed), for the rank-bonus objective.
    pub mu_edge: Vec<f64>,
    pub max_mu: f64,
    pub delta: f64,
    edge_index: Vec<Vec<usize>>, // per student: edge ids along pref order
}

impl DualsView {
    pub fn new(inst: &MarketInstance, duals: &Duals) -> Self {
        let edges = inst.edges();
        assert_eq!(duals.mu.len(), edges.len(), "mu must align with instance edges");
        let n = inst.n_students();
        let mut edge_index: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, &(i, _)) in edges.iter().enumerate() {
            edge_index[i].push(e);
        }
        // suffix sums of mu along each preference list
        let mut rc_edge_weight = vec![0.0; edges.len()];
        for i in 0..n {
            let ids = &edge_index[i];
            let mut suffix = 0.0;
            for &e in ids.iter().rev() {
                suffix += duals.mu[e];
                rc_edge_weight[e] = suffix;
            }
        }
        for (e, &(i, s)) in edges.iter().enumerate() {
            rc_edge_weight[e] -= f64::from(inst.rank_of(i, s).expect("edge"));
        }
        for &(i, j, s, eta) in &duals.ete {
            for (e, &(si, ss)) in edges.iter().enumerate() {
                if si == i && ss == s {
                    rc_edge_weight[e] += eta;
                }
                if si == j && ss == s {
                    rc_edge_weight[e] -= eta;
                }
            }
        }
        let max_mu = duals.mu.iter().cloned().fold(0.0f64, f64::max);
        DualsView {
            rc_edge_weight,
            mu_edge: duals.mu.clone(),
            max_mu,
            delta: duals.delta,
            edge_index,
        }
    }

    /// Exact evaluation of the pricing objective for a matching: a
    /// positive value certifies the column improves the master.
    pub fn reduced_cost(&self, inst: &MarketInstance, m: &Matching) -> f64 {
        let mut acc = self.delta;
        for i in 0..inst.n_students() {
            if let Some(s) = m.school_of(i) {
                let pos = inst.rank_of(i, s).expect("edge") as usize - 1;
                let e = self.edge_index[i][pos];
                acc += self.rc_edge_weight[e];
            }
        }
        acc
    }

    /// The rank-with-dual-bonus objective of the alternative pricing
    /// variant: Σ M_e (rank_e − ζ·μ_e / max μ); the bonus term is zero
    /// when every μ vanishes.
    pub fn bonus_objective(&self, inst: &MarketInstance, m: &Matching, zeta: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..inst.n_students() {
            if let Some(s) = m.school_of(i) {
                let pos = inst.rank_of(i, s).expect("edge") as usize - 1;
                let e = self.edge_index[i][pos];
                acc += f64::from(inst.rank_of(i, s).expect("edge"));
                if self.max_mu > 0.0 {
                    acc -= zeta * self.mu_edge[e] / self.max_mu;
                }
            }
        }
        acc
    }
}

/// Evaluates the pricing objective for one matching under master duals.
pub fn reduced_cost(inst: &MarketInstance, m: &Matching, duals: &Duals) -> f64 {
    DualsView::new(inst, duals).reduced_cost(inst, m)
}

/// The cut-off-rank stability encoding: binary edge variables M_e,
/// a per-school cut-off y_s in [1, r̄_s + 1], and a binary fill flag
/// f_s. The 0/1-feasible edge vectors are exactly the weakly stable
/// matchings.
#[derive(Clone, Debug)]
pub struct CutoffModel {
    pub edges: Vec<(Student, School)>,
    pub n_edge_vars: usize,
    pub f_offset: usize,
    pub y_offset: usize,
    pub n_vars: usize,
    pub rows: Vec<crate::lp::Row>,
    pub binaries: Vec<usize>,
}

/// Builds the constraint system linking edge variables, cut-off ranks,
/// and fill flags:
///
/// * y_s ≥ r_{is} · M(i,s) for every edge (the cut-off covers every
///   admitted class);
/// * r_{is} ≥ y_s − (r̄_s + 1) · Σ_{s' weakly better} M(i,s') for every
///   edge (a student left wanting bounds the cut-off: fairness);
/// * f_s·c_s ≤ load_s ≤ c_s and y_s ≥ (1 − f_s)(r̄_s + 1)
///   (an unfilled school must push its cut-off past every class:
///   non-wastefulness);
/// * each student takes at most one school; 1 ≤ y_s ≤ r̄_s + 1.
pub fn build_cutoff_constraints(inst: &MarketInstance) -> CutoffModel {
    let edges = inst.edges();
    let n_edges = edges.len();
    let m_schools = inst.n_schools();
    let f_offset = n_edges;
    let y_offset = n_edges + m_schools;
    let n_vars = n_edges + 2 * m_schools;
    let mut rows: Vec<crate::lp::Row> = Vec::new();
    let mut push = |coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64| {
        rows.push(crate::lp::Row { coeffs, cmp, rhs });
    };
    let rbar = |s: School| f64::from(inst.n_priority_classes(s));
    // linking: y_s - r_is * M(i,s) >= 0
    for (e, &(i, s)) in edges.iter().enumerate() {
        let r = f64::from(inst.priority_rank(i, s).expect("edge"));
        push(vec![(y_offset + s, 1.0), (e, -r)], Cmp::Ge, 0.0);
    }
    // fairness: y_s - (rbar+1) * sum_{s' weakly better} M(i,s') <= r_is
    for (e0, &(i, s)) in edges.iter().enumerate() {
        let r = f64::from(inst.priority_rank(i, s).expect("edge"));
        let pos = inst.rank_of(i, s).expect("edge");
        let mut coeffs = vec![(y_offset + s, 1.0)];
        for (e2, &(i2, s2)) in edges.iter().enumerate() {
            if i2 == i && inst.rank_of(i2, s2).expect("edge") <= pos {
                coeffs.push((e2, -(rbar(s) + 1.0)));
            }
        }
        let _ = e0;
        push(coeffs, Cmp::Le, r);
    }
    for s in 0..m_schools {
        let incident: Vec<(usize, f64)> = edges
            .iter()
            .enumerate()
            .filter(|(_, &(_, s2))| s2 == s)
            .map(|(e, _)| (e, 1.0))
            .collect();
        let c = f64::from(inst.capacity(s));
        // f_s * c <= load
        let mut fill = incident.clone();
        fill.push((f_offset + s, -c));
        push(fill, Cmp::Ge, 0.0);
        // load <= c
        push(incident, Cmp::Le, c);
        // y_s + (rbar+1) f_s >= rbar + 1
        push(vec![(y_offset + s, 1.0), (f_offset + s, rbar(s) + 1.0)], Cmp::Ge, rbar(s) + 1.0);
        // y domain
        push(vec![(y_offset + s, 1.0)], Cmp::Ge, 1.0);
        push(vec![(y_offset + s, 1.0)], Cmp::Le, rbar(s) + 1.0);
    }
    // each student at most one school
    for i in 0..inst.n_students() {
        let mine: Vec<(usize, f64)> = edges
            .iter()
            .enumerate()
            .filter(|(_, &(i2, _))| i2 == i)
            .map(|(e, _)| (e, 1.0))
            .collect();
        if !mine.is_empty() {
            push(mine, Cmp::Le, 1.0);
        }
    }
    let binaries: Vec<usize> = (0..n_edges).chain(f_offset..f_offset + m_schools).collect();
    CutoffModel { edges, n_edge_vars: n_edges, f_offset, y_offset, n_vars, rows, binaries }
}

impl CutoffModel {
    /// Whether some (y, f) completes the given 0/1 edge assignment into
    /// a feasible point of the constraint system. Works directly from
    /// the emitted rows: fixes the edge variables, tries both values of
    /// each school's fill flag, and propagates interval bounds on the
    /// school's cut-off variable.
    pub fn feasible_edges(&self, inst: &MarketInstance, edge_vals: &[f64]) -> bool {
        assert_eq!(edge_vals.len(), self.n_edge_vars);
        let m_schools = inst.n_schools();
        // Rows touching neither y nor f must hold outright.
        'rows: for row in &self.rows {
            let mut acc = 0.0;
            for &(v, c) in &row.coeffs {
                if v >= self.n_edge_vars {
                    continue 'rows;
                }
                acc += c * edge_vals[v];
            }
            let ok = match row.cmp {
                Cmp::Le => acc <= row.rhs + 1e-9,
                Cmp::Ge => acc >= row.rhs - 1e-9,
                Cmp::Eq => (acc - row.rhs).abs() <= 1e-9,
            };
            if !ok {
                return false;
            }
        }
        // Per school, check the y/f rows under both flag values.
        for s in 0..m_schools {
            let y_var = self.y_offset + s;
            let f_var = self.f_offset + s;
            let mut feasible_for_some_f = false;
            'flag: for f_val in [0.0, 1.0] {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for row in &self.rows {
                    let mut y_coef = 0.0;
                    let mut acc = 0.0;
                    let mut touches = false;
                    let mut foreign = false;
                    for &(v, c) in &row.coeffs {
                        if v == y_var {
                            y_coef += c;
                            touches = true;
                        } else if v == f_var {
                            acc += c * f_val;
                            touches = true;
                        } else if v < self.n_edge_vars {
                            acc += c * edge_vals[v];
                        } else {
                            foreign = true;
                            break;
                        }
                    }
                    if !touches || foreign {
                        continue;
                    }
                    if y_coef == 0.0 {
                        let ok = match row.cmp {
                            Cmp::Le => acc <= row.rhs + 1e-9,
                            Cmp::Ge => acc >= row.rhs - 1e-9,
                            Cmp::Eq => (acc - row.rhs).abs() <= 1e-9,
                        };
                        if !ok {
                            continue 'flag;
                        }
                        continue;
                    }
                    // y appears with coefficient +1 in every emitted row
                    match row.cmp {
                        Cmp::Le => hi = hi.min((row.rhs - acc) / y_coef),
                        Cmp::Ge => lo = lo.max((row.rhs - acc) / y_coef),
                        Cmp::Eq => {
                            lo = lo.max((row.rhs - acc) / y_coef);
                            hi = hi.min((row.rhs - acc) / y_coef);
                        }
                    }
                }
                if lo <= hi + 1e-9 {
                    feasible_for_some_f = true;
                    break 'flag;
                }
            }
            if !feasible_for_some_f {
                return false;
            }
        }
        true
    }

    pub fn feasible_matching(&self, inst: &MarketInstance, m: &Matching) -> bool {
        let mut edge_vals = vec![0.0; self.n_edge_vars];
        for (e, &(i, s)) in self.edges.iter().enumerate() {
            if m.school_of(i) == Some(s) {
                edge_vals[e] = 1.0;
            }
        }
        self.feasible_edges(inst, &edge_vals)
    }

    /// Assembles a 0/1 program over this feasibility system with the
    /// given objective on the edge variables plus optional extra rows.
    pub fn to_milp(&self, edge_objective: &[f64], extra_rows: Vec<crate::lp::Row>) -> Milp {
        assert_eq!(edge_objective.len(), self.n_edge_vars);
        let mut lp = LinearProgram::new(self.n_vars);
        lp.objective[..self.n_edge_vars].copy_from_slice(edge_objective);
        lp.rows = self.rows.clone();
        lp.rows.extend(extra_rows);
        Milp { lp, binaries: self.binaries.clone() }
    }

    pub fn matching_from_solution(&self, inst: &MarketInstance, x: &[f64]) -> Result<Matching> {
        let pairs: Vec<(Student, School)> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(e, _)| x[*e] > 0.5)
            .map(|(_, &pair)| pair)
            .collect();
        Matching::from_pairs(inst, &pairs)
    }
}

#[derive(Clone, Debug)]
pub enum PricingBackend {
    /// Exhaustive enumeration of the stable set; exact certificates,
    /// small instances only.
    Enumerate { budget: EnumBudget },
    /// Branch-and-bound over the cut-off encoding. `max_edges` guards
    /// against sizes the embedded solver cannot handle.
    Mip { cfg: MilpConfig, max_edges: usize },
}

impl Default for PricingBackend {
    fn default() -> Self {
        PricingBackend::Enumerate { budget: EnumBudget::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PricingVariant {
    /// Maximize the reduced cost directly.
    A,
    /// Minimize rank with a ζ-scaled dual bonus subject to strictly
    /// positive reduced cost; infeasibility certifies optimality.
    B,
}

#[derive(Clone, Debug)]
pub struct PricingOutcome {
    /// Improving candidates, best first, up to the requested batch.
    pub columns: Vec<Matching>,
    /// True when the search proves no improving column exists.
    pub certified_optimal: bool,
    /// Best reduced cost seen, when the backend computes it.
    pub best_value: Option<f64>,
}

/// Searches for weakly stable matchings with positive reduced cost.
pub fn price_columns(
    inst: &MarketInstance,
    duals: &Duals,
    variant: PricingVariant,
    zeta: f64,
    backend: &PricingBackend,
    batch: usize,
    stable_cache: Option<&[Matching]>,
) -> Result<PricingOutcome> {
    let view = DualsView::new(inst, duals);
    match backend {
        PricingBackend::Enumerate { budget } => {
            let owned;
            let stable: &[Matching] = match stable_cache {
                Some(cached) => cached,
                None => {
                    owned = oracle::enumerate_weakly_stable(inst, *budget)?.matchings;
                    &owned
                }
            };
            let mut scored: Vec<(f64, f64, &Matching)> = stable
                .iter()
                .map(|m| (view.reduced_cost(inst, m), view.bonus_objective(inst, m, zeta), m))
                .collect();
            let best_rc =
                scored.iter().map(|(rc, _, _)| *rc).fold(f64::NEG_INFINITY, f64::max);
            scored.retain(|(rc, _, _)| *rc >= EPS_STRICT);
            match variant {
                PricingVariant::A => scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap()),
                PricingVariant::B => scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap()),
            }
            let columns: Vec<Matching> =
                scored.iter().take(batch).map(|(_, _, m)| (*m).clone()).collect();
            Ok(PricingOutcome {
                certified_optimal: columns.is_empty(),
                best_value: if best_rc.is_finite() { Some(best_rc) } else { None },
                columns,
            })
        }
        PricingBackend::Mip { cfg, max_edges } => {
            if inst.n_edges() > *max_edges {
                return Err(Error::BudgetExceeded {
                    what: "mip pricing".into(),
                    detail: format!(
                        "{} edges exceed the embedded-solver gate of {max_edges}",
                        inst.n_edges()
                    ),
                });
            }
            let model = build_cutoff_constraints(inst);
            let (objective, extra_rows) = match variant {
                PricingVariant::A => {
                    // max rc = min of the negated edge weights; the
                    // constant delta is applied when reading values back
                    let obj: Vec<f64> = view.rc_edge_weight.iter().map(|w| -w).collect();
                    (obj, Vec::new())
                }
                PricingVariant::B => {
                    let obj: Vec<f64> = model
                        .edges
                        .iter()
                        .enumerate()
                        .map(|(e, &(i, s))| {
                            let mut w = f64::from(inst.rank_of(i, s).expect("edge"));
                            if view.max_mu > 0.0 {
                                w -= zeta * view.mu_edge[e] / view.max_mu;
                            }
                            w
                        })
                        .collect();
                    let rc_row = crate::lp::Row {
                        coeffs: view
                            .rc_edge_weight
                            .iter()
                            .enumerate()
                            .map(|(e, &w)| (e, w))
                            .collect(),
                        cmp: Cmp::Ge,
                        rhs: EPS_STRICT - view.delta,
                    };
                    (obj, vec![rc_row])
                }
            };
            let mut pool_cfg = cfg.clone();
            pool_cfg.pool_size = pool_cfg.pool_size.max(batch);
            let sol = solve_milp(&model.to_milp(&objective, extra_rows), &pool_cfg)?;
            let mut columns = Vec::new();
            let mut best_value: Option<f64> = None;
            for (x, _) in sol.pool.iter().rev() {
                let m = model.matching_from_solution(inst, x)?;
                let rc = view.reduced_cost(inst, &m);
                best_value = Some(best_value.map_or(rc, |b: f64| b.max(rc)));
                if rc >= EPS_STRICT && !columns.contains(&m) {
                    columns.push(m);
                }
                if columns.len() >= batch {
                    break;
                }
            }
            let certified_optimal = match variant {
                PricingVariant::A => {
                    sol.status == MilpStatus::Optimal
                        && sol
                            .best
                            .as_ref()
                            .map(|(_, obj)| -obj + view.delta < EPS_STRICT)
                            .unwrap_or(true)
                }
                PricingVariant::B => sol.status == MilpStatus::Infeasible,
            };
            Ok(PricingOutcome { columns, certified_optimal, best_value })
        }
    }
}

/// Single-column pricing: the best improving weakly stable matching, or
/// `None` when the current master solution is optimal over all of them.
pub fn solve_pricing(
    inst: &MarketInstance,
    duals: &Duals,
    variant: PricingVariant,
    zeta: f64,
    backend: &PricingBackend,
) -> Result<Option<Matching>> {
    let out = price_columns(inst, duals, variant, zeta, backend, 1, None)?;
    Ok(out.columns.into_iter().next())
}

#[derive(Clone, Debug)]
pub struct PirmesConfig {
    pub pricing: PricingBackend,
    pub variant: PricingVariant,
    /// Candidate columns requested per pricing round.
    pub batch_size: usize,
    /// `Some(0)` solves the master once over the warm support (the
    /// heuristic); `None` iterates until a certificate or limit.
    pub max_rounds: Option<usize>,
    pub time_limit: Duration,
    pub equal_treatment: bool,
    /// Post-processing policy applied to every generated column.
    pub resolve_policy: ResolvePolicy,
    pub seed: u64,
    pub master: MasterConfig,
}

impl Default for PirmesConfig {
    fn default() -> Self {
        PirmesConfig {
            pricing: PricingBackend::default(),
            variant: PricingVariant::B,
            batch_size: 500,
            max_rounds: None,
            time_limit: Duration::from_secs(600),
            equal_treatment: false,
            resolve_policy: ResolvePolicy::FirstFound,
            seed: 0,
            master: MasterConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PirmesStatus {
    /// Pricing certified the mixture optimal over all weakly stable
    /// matchings.
    OptimalCertified,
    TimeLimit,
    RoundLimit,
    /// Pricing produced only columns already in the support.
    Stalled,
    /// The base table cannot be covered by any ex-post stable mixture;
    /// the mechanism returns the base table unchanged.
    BaseNotCoverable,
}

#[derive(Clone, Debug)]
pub struct IterationLog {
    pub round: usize,
    pub support_size: usize,
    pub master_objective: f64,
    pub master_average_rank: f64,
    pub artificial_active: bool,
    pub columns_added: usize,
}

/// The lottery produced by the optimizer: exact weights over weakly
/// stable matchings of the original instance, the master duals, and the
/// run log. Re-expanding the support reproduces the returned table
/// exactly.
#[derive(Clone, Debug)]
pub struct LotterySolution {
    pub support: Vec<(Matching, Frac)>,
    /// Edge order of `mu`: the augmented instance's edges; the dummy
    /// school is the last index.
    pub edges: Vec<(Student, School)>,
    pub mu: Vec<f64>,
    pub delta: f64,
    pub objective_total_rank: f64,
    pub average_rank: f64,
    pub status: PirmesStatus,
    pub iterations: Vec<IterationLog>,
}

impl LotterySolution {
    /// Draws one matching from the lottery (the final step of the
    /// mechanism): a single uniform draw against cumulative weights.
    pub fn draw(&self, seed: u64) -> Option<Matching> {
        use rand::Rng;
        use rand::SeedableRng;
        if self.support.is_empty() {
            return None;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let u: f64 = rng.gen_range(0.0..1.0);
        let mut acc = 0.0;
        for (m, w) in &self.support {
            acc += w.to_f64().unwrap();
            if u < acc {
                return Some(m.clone());
            }
        }
        Some(self.support.last().unwrap().0.clone())
    }
}

/// Snaps LP weights to exact fractions summing to exactly 1. The
/// largest weight absorbs the rounding drift.
fn exact_weights(weights: &[f64]) -> Vec<Frac> {
    let mut fracs: Vec<Frac> = weights
        .iter()
        .map(|&w| Frac::new((w * LAMBDA_GRID as f64).round() as i128, LAMBDA_GRID))
        .collect();
    let total: Frac = fracs.iter().sum();
    let drift = Frac::from_integer(1) - total;
    if !drift.is_zero() {
        let (argmax, _) = fracs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("nonempty");
        fracs[argmax] += drift;
    }
    fracs
}

/// The full mechanism core: improve `p` to an ex-post stable mixture of
/// minimal average rank by column generation, then hand back the table
/// with its decomposition. When `p` cannot be covered (the artificial
/// column stays active and pricing cannot fix it), returns `p`
/// unchanged with [`PirmesStatus::BaseNotCoverable`].
pub fn run_pirmes(
    inst: &MarketInstance,
    p: &RandomMatching,
    warm_support: &[Matching],
    config: &PirmesConfig,
) -> Result<(RandomMatching, LotterySolution)> {
    let started = Instant::now();
    p.validate(inst)?;
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let aug = inst.augment_with_dummy();
    let p_aug = lift_random(&aug, p);
    let ete = if config.equal_treatment {
        let pairs = identical_pairs(&aug, &p_aug)?;
        if pairs.is_empty() {
            None
        } else {
            Some(pairs)
        }
    } else {
        None
    };

    let mut support: Vec<Matching> = Vec::new();
    let mut seen: HashSet<Matching> = HashSet::new();
    for m in warm_support {
        let lifted = lift_matching(&aug, m);
        let (stable, blocking) = is_weakly_stable(&aug, &lifted)?;
        if !stable {
            let (i, s) = blocking[0];
            return Err(Error::UnstableMatching {
                student: aug.student_id(i).to_string(),
                school: aug.school_id(s).to_string(),
            });
        }
        if seen.insert(lifted.clone()) {
            support.push(lifted);
        }
    }
    if support.is_empty() {
        // Bootstrap with one deterministic DA outcome.
        let tb = crate::mech::TieBreaking::identity(&aug, crate::mech::TieMode::Single);
        let strict = crate::mech::break_ties(&aug, &tb)?;
        let m = crate::mech::deferred_acceptance(&strict)?;
        seen.insert(m.clone());
        support.push(m);
    }

    let solver = DenseSimplex::default();
    let mut iterations: Vec<IterationLog> = Vec::new();
    // Stable-set cache for the enumerate backend.
    let mut stable_cache: Option<Vec<Matching>> = None;
    let mut round = 0usize;
    let mut master = solve_master(&aug, &support, &p_aug, ete.as_ref(), &config.master, &solver)?;
    let status: PirmesStatus = loop {
        iterations.push(IterationLog {
            round,
            support_size: support.len(),
            master_objective: master.objective,
            master_average_rank: master.objective / aug.n_students().max(1) as f64,
            artificial_active: master.status == MasterStatus::ArtificialActive,
            columns_added: 0,
        });
        if master.status == MasterStatus::InfeasibleWithoutArtificial {
            break PirmesStatus::BaseNotCoverable;
        }
        if config.max_rounds.map(|r| round >= r).unwrap_or(false) {
            break match master.status {
                MasterStatus::ArtificialActive => PirmesStatus::BaseNotCoverable,
                _ => PirmesStatus::RoundLimit,
            };
        }
        if started.elapsed() > config.time_limit {
            break match master.status {
                MasterStatus::ArtificialActive => PirmesStatus::BaseNotCoverable,
                _ => PirmesStatus::TimeLimit,
            };
        }
        if let (PricingBackend::Enumerate { budget }, None) = (&config.pricing, &stable_cache) {
            stable_cache = Some(oracle::enumerate_weakly_stable(&aug, *budget)?.matchings);
        }
        let zeta = master.objective / aug.n_students().max(1) as f64;
        let outcome = price_columns(
            &aug,
            &master.duals,
            config.variant,
            zeta,
            &config.pricing,
            config.batch_size,
            stable_cache.as_deref(),
        )?;
        if outcome.certified_optimal {
            break match master.status {
                MasterStatus::ArtificialActive => PirmesStatus::BaseNotCoverable,
                _ => PirmesStatus::OptimalCertified,
            };
        }
        // Post-process each candidate (cycle resolution keeps the
        // column weakly stable and can only improve it), then insert.
        let mut added = 0usize;
        for (k, candidate) in outcome.columns.iter().enumerate() {
            let resolved = resolve_to_constrained_efficient(
                &aug,
                candidate,
                config.resolve_policy,
                Some(sub_seed(config.seed, ((round as u64) << 16) | k as u64)),
            )?;
            if seen.insert(resolved.clone()) {
                support.push(resolved);
                added += 1;
            } else if seen.insert(candidate.clone()) {
                support.push(candidate.clone());
                added += 1;
            }
        }
        if let Some(last) = iterations.last_mut() {
            last.columns_added = added;
        }
        if added == 0 {
            break match master.status {
                MasterStatus::ArtificialActive => PirmesStatus::BaseNotCoverable,
                _ => PirmesStatus::Stalled,
            };
        }
        round += 1;
        master = solve_master(&aug, &support, &p_aug, ete.as_ref(), &config.master, &solver)?;
    };

    if status == PirmesStatus::BaseNotCoverable {
        let solution = LotterySolution {
            support: Vec::new(),
            edges: aug.edges(),
            mu: master.duals.mu.clone(),
            delta: master.duals.delta,
            objective_total_rank: f64::NAN,
            average_rank: market::average_rank(inst, p).to_f64().unwrap(),
            status,
            iterations,
        };
        return Ok((p.clone(), solution));
    }

    // Assemble the exact lottery from the final master weights.
    let mut picked: Vec<(Matching, f64)> = support
        .iter()
        .zip(&master.weights)
        .filter(|(_, &w)| w > 1e-12)
        .map(|(m, &w)| (m.clone(), w))
        .collect();
    if picked.is_empty() {
        let (best, w) = support
            .iter()
            .zip(&master.weights)
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("support nonempty");
        picked.push((best.clone(), *w));
    }
    let fracs = exact_weights(&picked.iter().map(|(_, w)| *w).collect::<Vec<_>>());
    let support_aug: Vec<(Matching, Frac)> =
        picked.into_iter().zip(fracs).map(|((m, _), f)| (m, f)).collect();
    let q_aug = RandomMatching::from_support(&aug, &support_aug)?;
    let q = restrict_random(inst, &q_aug);
    let support_orig: Vec<(Matching, Frac)> =
        support_aug.iter().map(|(m, w)| (restrict_matching(inst, m), *w)).collect();
    let average = market::average_rank(&aug, &q_aug);
    let solution = LotterySolution {
        support: support_orig,
        edges: aug.edges(),
        mu: master.duals.mu,
        delta: master.duals.delta,
        objective_total_rank: master.objective,
        average_rank: average.to_f64().unwrap(),
        status,
        iterations,
    };
    Ok((q, solution))
}

/// The heuristic: one master solve over the warm support, no pricing.
pub fn pirmes_heur(
    inst: &MarketInstance,
    p: &RandomMatching,
    warm_support: &[Matching],
    config: &PirmesConfig,
) -> Result<(RandomMatching, LotterySolution)> {
    let mut cfg = config.clone();
    cfg.max_rounds = Some(0);
    run_pirmes(inst, p, warm_support, &cfg)
}
