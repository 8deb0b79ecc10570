//! Property tests over seeded random markets: the cross-module
//! invariants that hold for every instance, not just the fixtures.

use proptest::prelude::*;

use num_traits::ToPrimitive;

use smartlot_core::experiments::paired_estimates;
use smartlot_core::lottery::{pirmes_heur, run_pirmes, PirmesConfig, PirmesStatus};
use smartlot_core::market::{
    average_rank, average_rank_matching, is_weakly_stable, sd_compare, Matching, RandomMatching,
    SdComparison,
};
use smartlot_core::mech::{
    break_ties, deferred_acceptance, exact_da_distribution, sample_tiebreakings, TieBreaking,
    TieMode,
};
use smartlot_core::oracle::{
    best_stable_pareto_improvement, enumerate_weakly_stable, exact_constrained_optimum,
    EnumBudget, OracleOutcome,
};
use smartlot_core::sic::{
    best_disjoint_cycle_set, build_envy_graph, eliminate, find_cycle,
    resolve_to_constrained_efficient, ResolvePolicy,
};
use smartlot_core::testgen::{random_instance, SmallInstanceParams};
use smartlot_core::Frac;

fn small(seed: u64) -> smartlot_core::market::MarketInstance {
    random_instance(seed, SmallInstanceParams::default())
}

/// A weakly stable matching of the weak instance, from DA under one
/// seeded tie-breaking.
fn stable_matching_of(
    inst: &smartlot_core::market::MarketInstance,
    seed: u64,
) -> Matching {
    let tb = sample_tiebreakings(inst, TieMode::Single, 1, seed).next().unwrap();
    let strict = break_ties(inst, &tb).unwrap();
    deferred_acceptance(&strict).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// DA under any tie-breaking has no blocking pair in the refined
    /// instance nor in the original weak one.
    #[test]
    fn da_outcomes_are_stable_in_both_instances(seed in 0u64..10_000) {
        let inst = small(seed);
        let tb = sample_tiebreakings(&inst, TieMode::Single, 1, seed).next().unwrap();
        let strict = break_ties(&inst, &tb).unwrap();
        let m = deferred_acceptance(&strict).unwrap();
        let (ok_strict, _) = is_weakly_stable(&strict, &m).unwrap();
        let (ok_weak, _) = is_weakly_stable(&inst, &m).unwrap();
        prop_assert!(ok_strict);
        prop_assert!(ok_weak);
    }

    /// Refinement never reverses strict priority.
    #[test]
    fn tie_breaking_only_refines(seed in 0u64..10_000) {
        let inst = small(seed);
        let tb = sample_tiebreakings(&inst, TieMode::Multiple, 1, seed).next().unwrap();
        let strict = break_ties(&inst, &tb).unwrap();
        for s in 0..inst.n_schools() {
            for i in 0..inst.n_students() {
                for j in 0..inst.n_students() {
                    let (a, b) = match (inst.priority_rank(i, s), inst.priority_rank(j, s)) {
                        (Ok(a), Ok(b)) => (a, b),
                        _ => continue,
                    };
                    if a < b {
                        prop_assert!(
                            strict.priority_rank(i, s).unwrap()
                                < strict.priority_rank(j, s).unwrap()
                        );
                    }
                }
            }
        }
    }

    /// The strict verdict is antisymmetric and weak dominance is
    /// transitive across tables built from stable supports.
    #[test]
    fn dominance_is_a_partial_order(seed in 0u64..5_000) {
        let inst = small(seed);
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        prop_assume!(set.matchings.len() >= 3);
        let pick = |k: usize| -> RandomMatching {
            let a = &set.matchings[k % set.matchings.len()];
            let b = &set.matchings[(k + 1) % set.matchings.len()];
            RandomMatching::from_support(
                &inst,
                &[(a.clone(), Frac::new(1, 2)), (b.clone(), Frac::new(1, 2))],
            )
            .unwrap()
        };
        let (x, y, z) = (pick(0), pick(1), pick(2));
        let strict_both = sd_compare(&inst, &x, &y).unwrap() == SdComparison::StrictlyDominates
            && sd_compare(&inst, &y, &x).unwrap() == SdComparison::StrictlyDominates;
        prop_assert!(!strict_both, "strict dominance in both directions");
        let weakly = |a: &RandomMatching, b: &RandomMatching| {
            matches!(
                sd_compare(&inst, a, b).unwrap(),
                SdComparison::StrictlyDominates
                    | SdComparison::Equal
                    | SdComparison::WeaklyDominatesNotStrictly
            )
        };
        if weakly(&x, &y) && weakly(&y, &z) {
            prop_assert!(weakly(&x, &z), "weak dominance must chain");
        }
        // strict dominance lowers the average rank
        if sd_compare(&inst, &x, &y).unwrap() == SdComparison::StrictlyDominates {
            prop_assert!(average_rank(&inst, &x) <= average_rank(&inst, &y));
        }
    }

    /// Cycle elimination keeps the matching weakly stable and strictly
    /// improves every member.
    #[test]
    fn elimination_improves_members_only(seed in 0u64..10_000) {
        let inst = small(seed);
        let m = stable_matching_of(&inst, seed);
        let g = build_envy_graph(&inst, &m).unwrap();
        let Some(cycle) = find_cycle(&g) else { return Ok(()) };
        let out = eliminate(&inst, &m, &[cycle.clone()]).unwrap();
        let (stable, _) = is_weakly_stable(&inst, &out).unwrap();
        prop_assert!(stable);
        for i in 0..inst.n_students() {
            let before = m.school_of(i).map(|s| inst.rank_of(i, s).unwrap());
            let after = out.school_of(i).map(|s| inst.rank_of(i, s).unwrap());
            if cycle.students.contains(&i) {
                prop_assert!(after.unwrap() < before.unwrap(), "member {i} must gain");
            } else {
                prop_assert_eq!(before, after, "bystander {} moved", i);
            }
        }
    }

    /// The best disjoint family gains at least as much as the single
    /// cycle the search finds, and resolution ends cycle-free at or
    /// above the exhaustive optimum.
    #[test]
    fn family_selection_and_resolution_bounds(seed in 0u64..5_000) {
        let inst = small(seed);
        let m = stable_matching_of(&inst, seed);
        let g = build_envy_graph(&inst, &m).unwrap();
        let family = best_disjoint_cycle_set(&inst, &m).unwrap();
        let family_gain = {
            let out = eliminate(&inst, &m, &family).unwrap();
            average_rank_matching(&inst, &m) - average_rank_matching(&inst, &out)
        };
        if let Some(single) = find_cycle(&g) {
            let out = eliminate(&inst, &m, &[single]).unwrap();
            let single_gain =
                average_rank_matching(&inst, &m) - average_rank_matching(&inst, &out);
            prop_assert!(family_gain >= single_gain);
        }
        for policy in [ResolvePolicy::FirstFound, ResolvePolicy::GreedyBestSet] {
            let resolved =
                resolve_to_constrained_efficient(&inst, &m, policy, Some(seed)).unwrap();
            let g2 = build_envy_graph(&inst, &resolved).unwrap();
            prop_assert!(find_cycle(&g2).is_none());
            let best =
                best_stable_pareto_improvement(&inst, &m, EnumBudget::default()).unwrap();
            prop_assert!(
                average_rank_matching(&inst, &resolved) >= average_rank_matching(&inst, &best)
            );
        }
    }

    /// Oracle optimum <= heuristic <= base average rank, and the
    /// full run certifies at the oracle value.
    #[test]
    fn optimizer_sandwich(seed in 0u64..3_000) {
        let inst = small(seed);
        let dist = exact_da_distribution(&inst, TieMode::Single, None).unwrap();
        let warm: Vec<Matching> = dist.support.iter().map(|(m, _)| m.clone()).collect();
        let base_avg = average_rank(&inst, &dist.prob).to_f64().unwrap();
        let (_, heur) = pirmes_heur(&inst, &dist.prob, &warm, &PirmesConfig::default()).unwrap();
        prop_assert_ne!(heur.status, PirmesStatus::BaseNotCoverable);
        let set = enumerate_weakly_stable(&inst, EnumBudget::default()).unwrap();
        let oracle = exact_constrained_optimum(&inst, &dist.prob, &set, None).unwrap();
        let oracle_avg = match oracle.outcome {
            OracleOutcome::Optimum { ref solution, .. } => solution.average_rank,
            OracleOutcome::NotCoverable => {
                return Err(TestCaseError::fail("lottery must cover itself"))
            }
        };
        prop_assert!(oracle_avg <= heur.average_rank + 1e-6);
        prop_assert!(heur.average_rank <= base_avg + 1e-6);
        let (_, full) = run_pirmes(&inst, &dist.prob, &warm, &PirmesConfig::default()).unwrap();
        prop_assert_eq!(full.status, PirmesStatus::OptimalCertified);
        prop_assert!((full.average_rank - oracle_avg).abs() <= 1e-6);
    }

    /// Paired draws: cycle resolution never hurts any student in any
    /// draw, so the per-student expected rank comparison holds
    /// sample-wise.
    #[test]
    fn paired_estimates_dominate_samplewise(seed in 0u64..5_000) {
        let inst = small(seed);
        let est = paired_estimates(&inst, 40, seed, TieMode::Single).unwrap();
        for i in 0..inst.n_students() {
            let da = smartlot_core::market::expected_rank_of_student(&inst, &est.da, i);
            let ee = smartlot_core::market::expected_rank_of_student(&inst, &est.ee, i);
            let ea = smartlot_core::market::expected_rank_of_student(&inst, &est.eada, i);
            prop_assert!(ee <= da, "student {} worse under cycle resolution", i);
            prop_assert!(ea <= da, "student {} worse under adjusted DA", i);
        }
    }

    /// Improving the cycle-resolved lottery keeps dominating it, and
    /// every certified output is ex-post stable by construction.
    #[test]
    fn improved_lottery_dominates_its_base(seed in 0u64..3_000) {
        let inst = small(seed);
        let est = paired_estimates(&inst, 60, seed, TieMode::Single).unwrap();
        let (q, sol) =
            run_pirmes(&inst, &est.ee, &est.warm_support, &PirmesConfig::default()).unwrap();
        prop_assert_eq!(sol.status, PirmesStatus::OptimalCertified);
        let verdict = sd_compare(&inst, &q, &est.ee).unwrap();
        prop_assert!(
            matches!(verdict, SdComparison::StrictlyDominates | SdComparison::Equal),
            "verdict {:?}", verdict
        );
        for (m, _) in &sol.support {
            let (stable, _) = is_weakly_stable(&inst, m).unwrap();
            prop_assert!(stable);
        }
        let rebuilt = RandomMatching::from_support(&inst, &sol.support).unwrap();
        prop_assert_eq!(rebuilt, q);
    }

    /// The identity refinement of an already strict instance is that
    /// instance; DA there is the unique student-optimal stable
    /// matching, which the optimizer returns unchanged.
    #[test]
    fn strict_instances_are_fixed_points(seed in 0u64..5_000) {
        let inst = small(seed);
        let strict = break_ties(
            &inst,
            &TieBreaking::identity(&inst, TieMode::Single),
        )
        .unwrap();
        let m = deferred_acceptance(&strict).unwrap();
        let p = m.to_random(&strict);
        let (q, sol) = run_pirmes(&strict, &p, &[m], &PirmesConfig::default()).unwrap();
        prop_assert_eq!(sol.status, PirmesStatus::OptimalCertified);
        prop_assert_eq!(q, p);
    }
}
