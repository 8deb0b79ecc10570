//! Desk-scale ground truth: exhaustive enumeration of all weakly
//! stable matchings, exact ex-post-stability via a feasibility LP over
//! the full stable set, the exact constrained optimum, and the best
//! stable Pareto-improvement of a matching. Replaces the intractable
//! decision problems with brute force on small instances.

use num_traits::ToPrimitive;

use crate::lp::{Cmp, DenseSimplex, LinearProgram, LpSolver, LpStatus};
use crate::lottery::{
    solve_master, IdenticalPairs, LotterySolution, MasterConfig, MasterStatus, PirmesStatus,
};
use crate::market::{
    self, is_weakly_stable, lift_matching, lift_random, restrict_matching, restrict_random,
    total_rank, Matching, MarketInstance, RandomMatching, School, Student,
};
use crate::{Error, Frac, Result};

#[derive(Clone, Copy, Debug)]
pub struct EnumBudget {
    /// Cap on backtracking nodes before giving up.
    pub max_nodes: u64,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget { max_nodes: 20_000_000 }
    }
}

/// The complete list of weakly stable matchings of an instance.
#[derive(Clone, Debug)]
pub struct StableSet {
    pub matchings: Vec<Matching>,
    /// True when enumeration finished within budget; the checks below
    /// refuse to run on an incomplete set.
    pub complete: bool,
}

/// Enumerates every weakly stable matching by backtracking over
/// students in index order with blocking-pair pruning: a partial
/// assignment in which one decided student justifiedly envies another
/// can never complete to a weakly stable matching. Wastefulness is
/// settled by the authoritative full check at each leaf.
pub fn enumerate_weakly_stable(inst: &MarketInstance, budget: EnumBudget) -> Result<StableSet> {
    let n = inst.n_students();
    let mut out: Vec<Matching> = Vec::new();
    let mut assignment: Vec<Option<School>> = vec![None; n];
    let mut loads = vec![0u32; inst.n_schools()];
    let mut nodes: u64 = 0;

    fn conflicts(
        inst: &MarketInstance,
        assignment: &[Option<School>],
        decided: usize,
        i: Student,
        choice: Option<School>,
    ) -> bool {
        // (a) an earlier student envies `choice` and out-prioritizes i
        if let Some(s) = choice {
            let my_class = inst.priority_rank(i, s).expect("edge");
            for h in 0..decided {
                let h_rank = assignment[h].map(|hs| inst.rank_of(h, hs).expect("edge"));
                if let Ok(r_hs) = inst.rank_of(h, s) {
                    let envies = h_rank.map(|hr| r_hs < hr).unwrap_or(true);
                    if envies {
                        if let Ok(h_class) = inst.priority_rank(h, s) {
                            if h_class < my_class {
                                return true;
                            }
                        }
                    }
                }
            }
        }
        // (b) i envies an earlier student's school with higher priority
        let my_limit = choice.map(|s| inst.rank_of(i, s).expect("edge"));
        for &s in inst.pref(i) {
            let r = inst.rank_of(i, s).expect("edge");
            if my_limit.map(|lim| r >= lim).unwrap_or(false) {
                break;
            }
            let my_class = inst.priority_rank(i, s).expect("edge");
            for h in 0..decided {
                if assignment[h] == Some(s) {
                    if let Ok(h_class) = inst.priority_rank(h, s) {
                        if my_class < h_class {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    fn recurse(
        inst: &MarketInstance,
        i: usize,
        assignment: &mut Vec<Option<School>>,
        loads: &mut Vec<u32>,
        out: &mut Vec<Matching>,
        nodes: &mut u64,
        budget: &EnumBudget,
    ) -> Result<()> {
        *nodes += 1;
        if *nodes > budget.max_nodes {
            return Err(Error::BudgetExceeded {
                what: "stable-set enumeration".into(),
                detail: format!("node budget {} exhausted", budget.max_nodes),
            });
        }
        let n = inst.n_students();
        if i == n {
            let mut m = Matching::empty(n);
            for (k, a) in assignment.iter().enumerate() {
                m.set(k, *a);
            }
            let (stable, _) = is_weakly_stable(inst, &m)?;
            if stable {
                out.push(m);
            }
            return Ok(());
        }
        // try unassigned plus every school with remaining capacity
        let mut choices: Vec<Option<School>> = vec![None];
        for &s in inst.pref(i) {
            if loads[s] < inst.capacity(s) {
                choices.push(Some(s));
            }
        }
        for choice in choices {
            if conflicts(inst, assignment, i, i, choice) {
                continue;
            }
            assignment[i] = choice;
            if let Some(s) = choice {
                loads[s] += 1;
            }
            recurse(inst, i + 1, assignment, loads, out, nodes, budget)?;
            if let Some(s) = choice {
                loads[s] -= 1;
            }
            assignment[i] = None;
        }
        Ok(())
    }

    recurse(inst, 0, &mut assignment, &mut loads, &mut out, &mut nodes, &budget)?;
    out.sort();
    Ok(StableSet { matchings: out, complete: true })
}

/// Decides ex-post stability of `p` by LP feasibility over the complete
/// stable set: weights λ ≥ 0 with Σλ = 1 reproducing `p` edge-by-edge.
/// Returns a witness decomposition when one exists.
pub fn is_ex_post_stable(
    inst: &MarketInstance,
    p: &RandomMatching,
    stable_set: &StableSet,
) -> Result<(bool, Option<Vec<(Matching, f64)>>)> {
    if !stable_set.complete {
        return Err(Error::Config(
            "stable set is incomplete; the verdict would be unsound".into(),
        ));
    }
    p.validate(inst)?;
    if stable_set.matchings.is_empty() {
        return Ok((false, None));
    }
    let cols = &stable_set.matchings;
    let mut lp = LinearProgram::new(cols.len());
    for (i, s) in inst.edges() {
        let coeffs: Vec<(usize, f64)> = cols
            .iter()
            .enumerate()
            .filter(|(_, m)| m.school_of(i) == Some(s))
            .map(|(l, _)| (l, 1.0))
            .collect();
        lp.push_row(coeffs, Cmp::Eq, p.get(i, s).to_f64().unwrap());
    }
    lp.push_row((0..cols.len()).map(|l| (l, 1.0)).collect(), Cmp::Eq, 1.0);
    let sol = DenseSimplex::default().solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let witness: Vec<(Matching, f64)> = cols
                .iter()
                .zip(&sol.x)
                .filter(|(_, &w)| w > 1e-9)
                .map(|(m, &w)| (m.clone(), w))
                .collect();
            Ok((true, Some(witness)))
        }
        LpStatus::Infeasible => Ok((false, None)),
        LpStatus::Unbounded => Err(Error::Lp("feasibility lp unbounded".into())),
    }
}

/// Result of the exact optimization over the full stable set.
#[derive(Clone, Debug)]
pub struct OracleOptimum {
    pub p_ex_post_stable: bool,
    pub p_witness: Option<Vec<(Matching, f64)>>,
    pub outcome: OracleOutcome,
}

#[derive(Clone, Debug)]
pub enum OracleOutcome {
    /// No ex-post stable mixture weakly dominates `p`; the mechanism
    /// would return `p` unchanged.
    NotCoverable,
    Optimum {
        q: RandomMatching,
        solution: LotterySolution,
        /// True iff `p` is ex-post stable and no ex-post stable mixture
        /// strictly dominates it (the optimum value equals `p`'s).
        constrained_sd_efficient: bool,
    },
}

/// Solves the master exactly over the complete stable set: the ex-post
/// stable mixture of minimal average rank weakly dominating `p`.
/// Also answers the efficiency question for `p` itself.
pub fn exact_constrained_optimum(
    inst: &MarketInstance,
    p: &RandomMatching,
    stable_set: &StableSet,
    equal_treatment: Option<&IdenticalPairs>,
) -> Result<OracleOptimum> {
    if !stable_set.complete {
        return Err(Error::Config(
            "stable set is incomplete; the optimum would be unsound".into(),
        ));
    }
    p.validate(inst)?;
    let (p_stable, p_witness) = is_ex_post_stable(inst, p, stable_set)?;
    let aug = inst.augment_with_dummy();
    let p_aug = lift_random(&aug, p);
    let support: Vec<Matching> =
        stable_set.matchings.iter().map(|m| lift_matching(&aug, m)).collect();
    if support.is_empty() {
        return Ok(OracleOptimum {
            p_ex_post_stable: p_stable,
            p_witness,
            outcome: OracleOutcome::NotCoverable,
        });
    }
    let solver = DenseSimplex::default();
    let master =
        solve_master(&aug, &support, &p_aug, equal_treatment, &MasterConfig::default(), &solver)?;
    if master.status != MasterStatus::Optimal {
        return Ok(OracleOptimum {
            p_ex_post_stable: p_stable,
            p_witness,
            outcome: OracleOutcome::NotCoverable,
        });
    }
    // Assemble exact weights as the optimizer does.
    let picked: Vec<(Matching, f64)> = support
        .iter()
        .zip(&master.weights)
        .filter(|(_, &w)| w > 1e-12)
        .map(|(m, &w)| (m.clone(), w))
        .collect();
    let raw: Vec<f64> = picked.iter().map(|(_, w)| *w).collect();
    let fracs = exact_unit_weights(&raw);
    let support_aug: Vec<(Matching, Frac)> =
        picked.into_iter().zip(fracs).map(|((m, _), f)| (m, f)).collect();
    let q_aug = RandomMatching::from_support(&aug, &support_aug)?;
    let q = restrict_random(inst, &q_aug);
    let support_orig: Vec<(Matching, Frac)> =
        support_aug.iter().map(|(m, w)| (restrict_matching(inst, m), *w)).collect();
    let avg_q = market::average_rank(&aug, &q_aug).to_f64().unwrap();
    let avg_p = market::average_rank(&aug, &p_aug).to_f64().unwrap();
    let constrained_sd_efficient = p_stable && avg_q >= avg_p - 1e-6;
    let solution = LotterySolution {
        support: support_orig,
        edges: aug.edges(),
        mu: master.duals.mu,
        delta: master.duals.delta,
        objective_total_rank: master.objective,
        average_rank: avg_q,
        status: PirmesStatus::OptimalCertified,
        iterations: Vec::new(),
    };
    Ok(OracleOptimum {
        p_ex_post_stable: p_stable,
        p_witness,
        outcome: OracleOutcome::Optimum { q, solution, constrained_sd_efficient },
    })
}

fn exact_unit_weights(weights: &[f64]) -> Vec<Frac> {
    const GRID: i128 = 1_000_000_000_000;
    let mut fracs: Vec<Frac> =
        weights.iter().map(|&w| Frac::new((w * GRID as f64).round() as i128, GRID)).collect();
    let total: Frac = fracs.iter().sum();
    let drift = Frac::from_integer(1) - total;
    if drift != Frac::from_integer(0) {
        let (argmax, _) = fracs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .expect("nonempty");
        fracs[argmax] += drift;
    }
    fracs
}

/// Among all weakly stable matchings that weakly Pareto-dominate `m`
/// student-wise, one of minimum average rank (deterministic tie-break).
/// `m` itself always qualifies, so a result always exists.
pub fn best_stable_pareto_improvement(
    inst: &MarketInstance,
    m: &Matching,
    budget: EnumBudget,
) -> Result<Matching> {
    let (stable, blocking) = is_weakly_stable(inst, m)?;
    if !stable {
        let (i, s) = blocking[0];
        return Err(Error::UnstableMatching {
            student: inst.student_id(i).to_string(),
            school: inst.school_id(s).to_string(),
        });
    }
    let set = enumerate_weakly_stable(inst, budget)?;
    let rank_or_out = |mm: &Matching, i: Student| -> u32 {
        mm.school_of(i)
            .map(|s| inst.rank_of(i, s).expect("edge"))
            .unwrap_or(inst.pref(i).len() as u32 + 1)
    };
    let mut best: Option<&Matching> = None;
    for cand in &set.matchings {
        let dominates =
            (0..inst.n_students()).all(|i| rank_or_out(cand, i) <= rank_or_out(m, i));
        if !dominates {
            continue;
        }
        best = Some(match best {
            None => cand,
            Some(cur) => {
                let (a, b) = (total_rank(inst, cand), total_rank(inst, cur));
                if a < b || (a == b && cand < cur) {
                    cand
                } else {
                    cur
                }
            }
        });
    }
    Ok(best.expect("m itself dominates m").clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::average_rank_matching;
    use crate::testgen::{random_instance, SmallInstanceParams};

    /// Independent generate-all-then-filter pass, the oracle's oracle.
    fn brute_force_stable(inst: &MarketInstance) -> Vec<Matching> {
        let n = inst.n_students();
        let mut out = Vec::new();
        let mut assignment: Vec<Option<School>> = vec![None; n];
        fn go(
            inst: &MarketInstance,
            i: usize,
            assignment: &mut Vec<Option<School>>,
            out: &mut Vec<Matching>,
        ) {
            let n = inst.n_students();
            if i == n {
                let mut m = Matching::empty(n);
                for (k, a) in assignment.iter().enumerate() {
                    m.set(k, *a);
                }
                if m.validate(inst).is_ok() {
                    if let Ok((true, _)) = is_weakly_stable(inst, &m) {
                        out.push(m);
                    }
                }
                return;
            }
            assignment[i] = None;
            go(inst, i + 1, assignment, out);
            for &s in inst.pref(i) {
                assignment[i] = Some(s);
                go(inst, i + 1, assignment, out);
                assignment[i] = None;
            }
        }
        go(inst, 0, &mut assignment, &mut out);
        out.sort();
        out
    }

    #[test]
    fn quad_stable_set_contains_da_support_and_matches_brute_force() {
        let inst = fixtures::quad_market();
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        assert!(set.complete);
        for k in 1..=6 {
            assert!(set.matchings.contains(&fixtures::quad_m(k)), "matching {k} missing");
        }
        let brute = brute_force_stable(&inst);
        assert_eq!(set.matchings, brute);
        // regression: the quad instance has exactly this many weakly
        // stable matchings (computed here once, cross-checked above)
        assert_eq!(set.matchings.len(), 8);
    }

    #[test]
    fn single_pair_instance_has_one_stable_matching() {
        let inst = crate::market::MarketInstance::new(
            vec!["a".into()],
            vec!["x".into()],
            vec![1],
            vec![vec![0]],
            vec![vec![vec![0]]],
        );
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        assert_eq!(set.matchings.len(), 1);
        assert_eq!(set.matchings[0].school_of(0), Some(0));
    }

    #[test]
    fn enumeration_cross_validates_on_random_instances() {
        for seed in 0..60 {
            let inst = random_instance(
                seed,
                SmallInstanceParams { max_students: 5, ..SmallInstanceParams::default() },
            );
            let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
            let brute = brute_force_stable(&inst);
            assert_eq!(set.matchings, brute, "seed {seed}");
        }
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let inst = fixtures::octet_market();
        let err = enumerate_weakly_stable(&inst, EnumBudget { max_nodes: 3 });
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn augmented_stable_set_is_the_lifted_original_one() {
        for seed in 0..30 {
            let inst = random_instance(seed, SmallInstanceParams::default());
            let aug = inst.augment_with_dummy();
            let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
            let aug_set = enumerate_weakly_stable(&aug, EnumBudget::default()).unwrap();
            let mut lifted: Vec<Matching> =
                set.matchings.iter().map(|m| lift_matching(&aug, m)).collect();
            lifted.sort();
            assert_eq!(aug_set.matchings, lifted, "seed {seed}");
            for m in &aug_set.matchings {
                assert!(m.is_student_perfect(), "seed {seed}");
            }
        }
    }

    #[test]
    fn printed_mix_is_ex_post_stable_with_witness() {
        let inst = fixtures::quad_market();
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        let q = fixtures::quad_q(&inst);
        let (stable, witness) = is_ex_post_stable(&inst, &q, &set).unwrap();
        assert!(stable);
        let witness = witness.unwrap();
        // witness re-expands to q edge-wise
        for (i, s) in inst.edges() {
            let got: f64 = witness
                .iter()
                .filter(|(m, _)| m.school_of(i) == Some(s))
                .map(|(_, w)| w)
                .sum();
            let want = q.get(i, s).to_f64().unwrap();
            assert!((got - want).abs() < 1e-9, "edge ({i},{s}): {got} vs {want}");
        }
    }

    #[test]
    fn octet_half_mix_is_ex_post_stable() {
        let inst = fixtures::octet_market();
        for k in 1..=2 {
            let (stable, _) = is_weakly_stable(&inst, &fixtures::octet_m(k)).unwrap();
            assert!(stable, "fixture matching {k}");
        }
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        let p_prime = fixtures::octet_p_prime(&inst);
        let (stable, witness) = is_ex_post_stable(&inst, &p_prime, &set).unwrap();
        assert!(stable);
        assert!(witness.is_some());
    }

    #[test]
    fn point_mass_on_unstable_matching_is_not_ex_post_stable() {
        let inst = fixtures::quad_market();
        // 1 at their worst school while s_4 admits a lower-priority
        // student: (1, s_4) is a justified-envy blocking pair
        let m = Matching::from_pairs(&inst, &[(0, 1), (1, 0), (2, 2), (3, 3)]).unwrap();
        let (stable, _) = is_weakly_stable(&inst, &m).unwrap();
        assert!(!stable);
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        let (ex_post, witness) = is_ex_post_stable(&inst, &m.to_random(&inst), &set).unwrap();
        assert!(!ex_post);
        assert!(witness.is_none());
    }

    #[test]
    fn incomplete_stable_set_is_rejected() {
        let inst = fixtures::quad_market();
        let mut set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        set.complete = false;
        let q = fixtures::quad_q(&inst);
        assert!(is_ex_post_stable(&inst, &q, &set).is_err());
        assert!(exact_constrained_optimum(&inst, &q, &set, None).is_err());
    }

    #[test]
    fn exact_optimum_on_quad_reaches_printed_value() {
        let inst = fixtures::quad_market();
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        let p = fixtures::quad_p(&inst);
        let opt = exact_constrained_optimum(&inst, &p, &set, None).unwrap();
        assert!(opt.p_ex_post_stable);
        match opt.outcome {
            OracleOutcome::Optimum { solution, constrained_sd_efficient, .. } => {
                assert!((solution.average_rank - 1.5).abs() < 1e-6);
                assert!(!constrained_sd_efficient, "the lottery table is improvable");
            }
            OracleOutcome::NotCoverable => panic!("quad lottery is coverable"),
        }
    }

    #[test]
    fn strict_instance_point_mass_is_efficient() {
        let inst = fixtures::quad_market();
        let strict = crate::mech::break_ties(
            &inst,
            &crate::mech::TieBreaking::identity(&inst, crate::mech::TieMode::Single),
        )
        .unwrap();
        let m = crate::mech::deferred_acceptance(&strict).unwrap();
        let p = m.to_random(&strict);
        let set = enumerate_weakly_stable(&strict, EnumBudget::default()).unwrap();
        let opt = exact_constrained_optimum(&strict, &p, &set, None).unwrap();
        match opt.outcome {
            OracleOutcome::Optimum { q, constrained_sd_efficient, .. } => {
                assert!(constrained_sd_efficient);
                assert_eq!(q, p);
            }
            OracleOutcome::NotCoverable => panic!("point mass covers itself"),
        }
    }

    #[test]
    fn best_improvement_on_sextet_reaches_seven_sixths() {
        let inst = fixtures::sextet_market();
        let m = fixtures::sextet_start();
        let best = best_stable_pareto_improvement(&inst, &m, EnumBudget::default()).unwrap();
        assert_eq!(average_rank_matching(&inst, &best), Frac::new(7, 6));
    }

    #[test]
    fn constrained_efficient_matching_improves_to_itself() {
        let inst = fixtures::quad_market();
        let m2 = fixtures::quad_m(2);
        let best = best_stable_pareto_improvement(&inst, &m2, EnumBudget::default()).unwrap();
        assert_eq!(best, m2);
    }
}
