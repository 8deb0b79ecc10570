//! Stable improvement cycles: the envy graph over a weakly stable
//! matching, cycle detection and elimination, resolution to a
//! constrained-efficient matching, and selection of a best disjoint
//! cycle family via min-cost circulation.
//!
//! An arc (i, j) of the envy graph means: both students are matched,
//! i strictly prefers j's school to their own, and i belongs to the
//! highest priority class at that school among all students who prefer
//! it to their assignment (matched or not). Eliminating a cycle moves
//! every member to the school of their successor; the result stays
//! weakly stable and is strictly better for every member.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::flow::FlowNetwork;
use crate::market::{
    average_rank_matching, is_weakly_stable, Matching, MarketInstance, Student,
};
use crate::{Error, Frac, Result};

#[derive(Clone, Debug)]
pub struct EnvyGraph {
    /// arcs[i] = students whose school i may take, ascending.
    arcs: Vec<Vec<Student>>,
}

impl EnvyGraph {
    pub fn n_nodes(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs_from(&self, i: Student) -> &[Student] {
        &self.arcs[i]
    }

    pub fn arc_set(&self) -> Vec<(Student, Student)> {
        let mut out = Vec::new();
        for (i, targets) in self.arcs.iter().enumerate() {
            for &j in targets {
                out.push((i, j));
            }
        }
        out
    }

    pub fn has_arc(&self, i: Student, j: Student) -> bool {
        self.arcs[i].contains(&j)
    }
}

/// A cycle i_1 -> i_2 -> ... -> i_k -> i_1 in the envy graph; member
/// i_t receives the school of i_{t+1} on elimination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImprovementCycle {
    pub students: Vec<Student>,
}

impl ImprovementCycle {
    /// Canonical rotation starting at the smallest member, for
    /// comparisons and dedup.
    pub fn canonical(&self) -> ImprovementCycle {
        let k = self.students.len();
        let (min_pos, _) =
            self.students.iter().enumerate().min_by_key(|(_, &s)| s).expect("nonempty");
        let students = (0..k).map(|t| self.students[(min_pos + t) % k]).collect();
        ImprovementCycle { students }
    }
}

/// Builds the envy graph of a weakly stable matching. Errors when the
/// matching is not weakly stable.
pub fn build_envy_graph(inst: &MarketInstance, m: &Matching) -> Result<EnvyGraph> {
    let (stable, blocking) = is_weakly_stable(inst, m)?;
    if !stable {
        let (i, s) = blocking[0];
        return Err(Error::UnstableMatching {
            student: inst.student_id(i).to_string(),
            school: inst.school_id(s).to_string(),
        });
    }
    let n = inst.n_students();
    // Per school: best (lowest) priority class among ALL students who
    // strictly prefer it to their assignment, unmatched included.
    let mut best_envious_class: Vec<Option<u32>> = vec![None; inst.n_schools()];
    for i in 0..n {
        let assigned_rank = m.school_of(i).map(|s| inst.rank_of(i, s).expect("edge"));
        for &s in inst.pref(i) {
            let r = inst.rank_of(i, s).expect("edge");
            if assigned_rank.map(|ar| r < ar).unwrap_or(true) {
                let class = inst.priority_rank(i, s).expect("edge");
                best_envious_class[s] = Some(match best_envious_class[s] {
                    Some(c) => c.min(class),
                    None => class,
                });
            }
        }
    }
    let mut arcs = vec![Vec::new(); n];
    for i in 0..n {
        let Some(mi) = m.school_of(i) else { continue };
        let my_rank = inst.rank_of(i, mi).expect("edge");
        for j in 0..n {
            if i == j {
                continue;
            }
            let Some(mj) = m.school_of(j) else { continue };
            if !inst.is_edge(i, mj) {
                continue;
            }
            let r = inst.rank_of(i, mj).expect("edge");
            if r >= my_rank {
                continue;
            }
            let class = inst.priority_rank(i, mj).expect("edge");
            if Some(class) == best_envious_class[mj] {
                arcs[i].push(j);
            }
        }
        arcs[i].sort_unstable();
    }
    Ok(EnvyGraph { arcs })
}

/// Finds any directed cycle, or `None` iff the graph is acyclic.
/// Deterministic: DFS from the lowest student index with ascending
/// neighbor order.
pub fn find_cycle(g: &EnvyGraph) -> Option<ImprovementCycle> {
    let order: Vec<Student> = (0..g.n_nodes()).collect();
    find_cycle_with_order(g, &order)
}

/// As [`find_cycle`] but with start nodes and neighbors shuffled by a
/// seeded generator, so repeated resolutions explore different cycles.
pub fn find_cycle_seeded(g: &EnvyGraph, seed: u64) -> Option<ImprovementCycle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<Student> = (0..g.n_nodes()).collect();
    order.shuffle(&mut rng);
    find_cycle_with_order(g, &order)
}

fn find_cycle_with_order(g: &EnvyGraph, order: &[Student]) -> Option<ImprovementCycle> {
    let n = g.n_nodes();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut stack: Vec<(Student, usize)> = Vec::new();
    let mut path: Vec<Student> = Vec::new();
    for &start in order {
        if state[start] != 0 {
            continue;
        }
        stack.push((start, 0));
        path.push(start);
        state[start] = 1;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < g.arcs_from(node).len() {
                let target = g.arcs_from(node)[*next];
                *next += 1;
                match state[target] {
                    0 => {
                        state[target] = 1;
                        stack.push((target, 0));
                        path.push(target);
                    }
                    1 => {
                        let pos = path.iter().position(|&x| x == target).expect("on path");
                        return Some(ImprovementCycle { students: path[pos..].to_vec() });
                    }
                    _ => {}
                }
            } else {
                state[node] = 2;
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

/// Applies a family of pairwise student-disjoint cycles: each member
/// moves to the school of their successor. Errors if the cycles are
/// not disjoint or any arc is missing from the envy graph of `m`.
pub fn eliminate(
    inst: &MarketInstance,
    m: &Matching,
    cycles: &[ImprovementCycle],
) -> Result<Matching> {
    let g = build_envy_graph(inst, m)?;
    let mut seen = vec![false; inst.n_students()];
    for cycle in cycles {
        if cycle.students.len() < 2 {
            return Err(Error::InvalidCycle("cycle needs at least two students".into()));
        }
        for &i in &cycle.students {
            if seen[i] {
                return Err(Error::InvalidCycle(format!(
                    "student {} appears in two cycles",
                    inst.student_id(i)
                )));
            }
            seen[i] = true;
        }
        let k = cycle.students.len();
        for t in 0..k {
            let i = cycle.students[t];
            let j = cycle.students[(t + 1) % k];
            if !g.has_arc(i, j) {
                return Err(Error::InvalidCycle(format!(
                    "({}, {}) is not an envy arc",
                    inst.student_id(i),
                    inst.student_id(j)
                )));
            }
        }
    }
    let mut out = m.clone();
    for cycle in cycles {
        let k = cycle.students.len();
        let schools: Vec<_> =
            cycle.students.iter().map(|&i| m.school_of(i).expect("matched")).collect();
        for t in 0..k {
            out.set(cycle.students[t], Some(schools[(t + 1) % k]));
        }
    }
    debug_assert!(is_weakly_stable(inst, &out).map(|(s, _)| s).unwrap_or(false));
    Ok(out)
}

/// Which cycles a resolution step eliminates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolvePolicy {
    /// One cycle per step, the first found by depth-first search (or a
    /// seeded shuffle of it).
    FirstFound,
    /// A best disjoint family per step via min-cost circulation.
    GreedyBestSet,
}

/// One step of the improvement trace.
#[derive(Clone, Debug)]
pub struct ResolveStep {
    pub cycles: Vec<ImprovementCycle>,
    pub average_rank_after: Frac,
}

/// Eliminates cycles until none remain. The result is weakly stable,
/// weakly better for every student, and admits no further cycle.
pub fn resolve_to_constrained_efficient(
    inst: &MarketInstance,
    m: &Matching,
    policy: ResolvePolicy,
    seed: Option<u64>,
) -> Result<Matching> {
    resolve_with_trace(inst, m, policy, seed).map(|(m, _)| m)
}

pub fn resolve_with_trace(
    inst: &MarketInstance,
    m: &Matching,
    policy: ResolvePolicy,
    seed: Option<u64>,
) -> Result<(Matching, Vec<ResolveStep>)> {
    let mut current = m.clone();
    let mut trace = Vec::new();
    let mut step = 0u64;
    loop {
        let g = build_envy_graph(inst, &current)?;
        let cycles: Vec<ImprovementCycle> = match policy {
            ResolvePolicy::FirstFound => {
                let found = match seed {
                    Some(s) => find_cycle_seeded(&g, s.wrapping_add(step)),
                    None => find_cycle(&g),
                };
                found.into_iter().collect()
            }
            ResolvePolicy::GreedyBestSet => best_cycle_family(inst, &current, &g),
        };
        if cycles.is_empty() {
            return Ok((current, trace));
        }
        current = eliminate(inst, &current, &cycles)?;
        trace.push(ResolveStep {
            cycles,
            average_rank_after: average_rank_matching(inst, &current),
        });
        step += 1;
    }
}

/// A vertex-disjoint cycle family of maximal total rank improvement,
/// found as a minimum-cost circulation with unit arc and node
/// capacities. Costs are the (negative) per-arc rank changes; the
/// integral optimum decomposes into disjoint cycles.
pub fn best_disjoint_cycle_set(
    inst: &MarketInstance,
    m: &Matching,
) -> Result<Vec<ImprovementCycle>> {
    let g = build_envy_graph(inst, m)?;
    Ok(best_cycle_family(inst, m, &g))
}

fn best_cycle_family(
    inst: &MarketInstance,
    m: &Matching,
    g: &EnvyGraph,
) -> Vec<ImprovementCycle> {
    let n = g.n_nodes();
    // node 2i = in-port, 2i+1 = out-port, split arc enforces unit node
    // capacity.
    let mut net = FlowNetwork::new(2 * n);
    for i in 0..n {
        net.add_edge(2 * i, 2 * i + 1, 1, 0);
    }
    let mut arc_edges: Vec<(Student, Student, usize)> = Vec::new();
    for (i, j) in g.arc_set() {
        let mi = m.school_of(i).expect("matched");
        let mj = m.school_of(j).expect("matched");
        let delta = i64::from(inst.rank_of(i, mj).expect("edge"))
            - i64::from(inst.rank_of(i, mi).expect("edge"));
        let id = net.add_edge(2 * i + 1, 2 * j, 1, delta);
        arc_edges.push((i, j, id));
    }
    net.cancel_negative_cycles();
    let mut successor: Vec<Option<Student>> = vec![None; n];
    for &(i, j, id) in &arc_edges {
        if net.flow_on(id) > 0 {
            successor[i] = Some(j);
        }
    }
    let mut visited = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if visited[start] || successor[start].is_none() {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = start;
        while !visited[cur] {
            visited[cur] = true;
            cycle.push(cur);
            cur = successor[cur].expect("unit in/out degree closes the walk");
        }
        debug_assert_eq!(cur, start);
        out.push(ImprovementCycle { students: cycle }.canonical());
    }
    out
}
