//! Baseline mechanisms: tie-breaking, student-proposing deferred
//! acceptance, exact and sampled lottery distributions, and the
//! simplified efficiency-adjusted variant.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::market::{is_weakly_stable, Matching, MarketInstance, RandomMatching, School, Student};
use crate::{Error, Frac, Result};

/// Default cap on the number of tie-breaking profiles the exact
/// distribution will enumerate (8! for the single lottery).
pub const DEFAULT_PERM_BUDGET: u128 = 40_320;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieMode {
    /// One lottery order shared by every school.
    Single,
    /// An independent lottery order per school.
    Multiple,
}

/// A concrete tie-breaking: permutations of the students, used to order
/// the members inside each indifference class. Earlier in the
/// permutation means higher refined priority; strict priorities between
/// classes are never reversed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TieBreaking {
    Single(Vec<Student>),
    Multiple(Vec<Vec<Student>>),
}

impl TieBreaking {
    pub fn identity(inst: &MarketInstance, mode: TieMode) -> Self {
        let perm: Vec<Student> = (0..inst.n_students()).collect();
        match mode {
            TieMode::Single => TieBreaking::Single(perm),
            TieMode::Multiple => TieBreaking::Multiple(vec![perm; inst.n_schools()]),
        }
    }

    pub fn validate(&self, inst: &MarketInstance) -> Result<()> {
        let check = |perm: &[Student]| -> Result<()> {
            let n = inst.n_students();
            if perm.len() != n {
                return Err(Error::Config(format!(
                    "tie-breaking permutation has length {}, expected {n}",
                    perm.len()
                )));
            }
            let mut seen = vec![false; n];
            for &i in perm {
                if i >= n || seen[i] {
                    return Err(Error::Config("tie-breaking is not a permutation".into()));
                }
                seen[i] = true;
            }
            Ok(())
        };
        match self {
            TieBreaking::Single(p) => check(p),
            TieBreaking::Multiple(ps) => {
                if ps.len() != inst.n_schools() {
                    return Err(Error::Config("one permutation per school required".into()));
                }
                ps.iter().try_for_each(|p| check(p))
            }
        }
    }
}

/// Refines every indifference class by the permutation order, yielding
/// an instance with strict (singleton-class) priorities.
pub fn break_ties(inst: &MarketInstance, tb: &TieBreaking) -> Result<MarketInstance> {
    tb.validate(inst)?;
    let n = inst.n_students();
    let position = |perm: &[Student]| {
        let mut pos = vec![0usize; n];
        for (k, &i) in perm.iter().enumerate() {
            pos[i] = k;
        }
        pos
    };
    let positions: Vec<Vec<usize>> = match tb {
        TieBreaking::Single(p) => vec![position(p)],
        TieBreaking::Multiple(ps) => ps.iter().map(|p| position(p)).collect(),
    };
    let mut priority = Vec::with_capacity(inst.n_schools());
    for s in 0..inst.n_schools() {
        let pos = match tb {
            TieBreaking::Single(_) => &positions[0],
            TieBreaking::Multiple(_) => &positions[s],
        };
        let mut classes = Vec::new();
        for class in inst.priority_classes(s) {
            let mut members = class.clone();
            members.sort_by_key(|&i| pos[i]);
            for i in members {
                classes.push(vec![i]);
            }
        }
        priority.push(classes);
    }
    Ok(MarketInstance::new(
        inst.student_ids().to_vec(),
        inst.school_ids().to_vec(),
        (0..inst.n_schools()).map(|s| inst.capacity(s)).collect(),
        (0..n).map(|i| inst.pref(i).to_vec()).collect(),
        priority,
    ))
}

/// Student-proposing deferred acceptance on strict priorities. Returns
/// the unique student-optimal stable matching. Students propose from a
/// queue with re-proposals appended at the back; the outcome does not
/// depend on that order, but fixing it makes traces reproducible.
pub fn deferred_acceptance(inst: &MarketInstance) -> Result<Matching> {
    da_with_rejection_log(inst).map(|(m, _)| m)
}

/// DA plus a per-school flag recording whether the school rejected any
/// proposal during the run. A school that never rejected is exactly a
/// school no student prefers to their final assignment.
fn da_with_rejection_log(inst: &MarketInstance) -> Result<(Matching, Vec<bool>)> {
    for s in 0..inst.n_schools() {
        if inst.priority_classes(s).iter().any(|c| c.len() > 1) {
            return Err(Error::NonStrictPriorities { school: inst.school_id(s).to_string() });
        }
    }
    let n = inst.n_students();
    let mut next_choice = vec![0usize; n];
    // held[s]: students currently held, unsorted; capacities are small
    // so a linear worst-pick scan is fine.
    let mut held: Vec<Vec<Student>> = vec![Vec::new(); inst.n_schools()];
    let mut rejected_any = vec![false; inst.n_schools()];
    let mut queue: std::collections::VecDeque<Student> = (0..n).collect();
    while let Some(i) = queue.pop_front() {
        let prefs = inst.pref(i);
        if next_choice[i] >= prefs.len() {
            continue; // exhausted: stays unmatched
        }
        let s = prefs[next_choice[i]];
        next_choice[i] += 1;
        held[s].push(i);
        if held[s].len() > inst.capacity(s) as usize {
            let (worst_idx, _) = held[s]
                .iter()
                .enumerate()
                .max_by_key(|(_, &j)| inst.priority_rank(j, s).expect("edge"))
                .expect("held nonempty");
            let loser = held[s].swap_remove(worst_idx);
            rejected_any[s] = true;
            queue.push_back(loser);
        }
    }
    let mut m = Matching::empty(n);
    for (s, students) in held.iter().enumerate() {
        for &i in students {
            m.set(i, Some(s));
        }
    }
    Ok((m, rejected_any))
}

/// The simplified efficiency-adjusted mechanism: repeatedly run DA,
/// permanently settle every student assigned to an underdemanded school
/// (one that rejected nobody in this round) along with unmatched
/// students, remove those schools and students, and rerun. The outcome
/// weakly Pareto-dominates DA for every student but may violate weak
/// stability of the original instance.
pub fn eada(inst: &MarketInstance) -> Result<Matching> {
    let n = inst.n_students();
    let mut settled: Vec<Option<Option<School>>> = vec![None; n];
    let mut active_students: Vec<bool> = vec![true; n];
    let mut active_schools: Vec<bool> = vec![true; inst.n_schools()];
    loop {
        let live: Vec<Student> = (0..n).filter(|&i| active_students[i]).collect();
        if live.is_empty() {
            break;
        }
        let sub = sub_instance(inst, &active_students, &active_schools);
        let (m, rejected_any) = da_with_rejection_log(&sub.instance)?;
        let mut settled_this_round = 0usize;
        for (local_s, &orig_s) in sub.school_back.iter().enumerate() {
            if !rejected_any[local_s] {
                for &local_i in &m.students_of(local_s) {
                    let orig_i = sub.student_back[local_i];
                    settled[orig_i] = Some(Some(orig_s));
                    active_students[orig_i] = false;
                    settled_this_round += 1;
                }
                active_schools[orig_s] = false;
            }
        }
        for (local_i, &orig_i) in sub.student_back.iter().enumerate() {
            if active_students[orig_i] && m.school_of(local_i).is_none() {
                settled[orig_i] = Some(None);
                active_students[orig_i] = false;
                settled_this_round += 1;
            }
        }
        if settled_this_round == 0 {
            // Unreachable for student-optimal outcomes; settle the rest
            // as matched to avoid looping on a malformed instance.
            for (local_i, &orig_i) in sub.student_back.iter().enumerate() {
                settled[orig_i] = Some(m.school_of(local_i).map(|ls| sub.school_back[ls]));
                active_students[orig_i] = false;
            }
        }
    }
    let mut out = Matching::empty(n);
    for (i, a) in settled.into_iter().enumerate() {
        out.set(i, a.unwrap_or(None));
    }
    out.validate(inst)?;
    Ok(out)
}

struct SubInstance {
    instance: MarketInstance,
    student_back: Vec<Student>,
    school_back: Vec<School>,
}

fn sub_instance(
    inst: &MarketInstance,
    active_students: &[bool],
    active_schools: &[bool],
) -> SubInstance {
    let student_back: Vec<Student> =
        (0..inst.n_students()).filter(|&i| active_students[i]).collect();
    let school_back: Vec<School> =
        (0..inst.n_schools()).filter(|&s| active_schools[s]).collect();
    let student_fwd: HashMap<Student, usize> =
        student_back.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let school_fwd: HashMap<School, usize> =
        school_back.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let pref = student_back
        .iter()
        .map(|&i| {
            inst.pref(i).iter().filter_map(|s| school_fwd.get(s).copied()).collect::<Vec<_>>()
        })
        .collect();
    let priority = school_back
        .iter()
        .map(|&s| {
            inst.priority_classes(s)
                .iter()
                .map(|class| {
                    class.iter().filter_map(|i| student_fwd.get(i).copied()).collect::<Vec<_>>()
                })
                .filter(|class: &Vec<usize>| !class.is_empty())
                .collect::<Vec<_>>()
        })
        .collect();
    SubInstance {
        instance: MarketInstance::new(
            student_back.iter().map(|&i| inst.student_id(i).to_string()).collect(),
            school_back.iter().map(|&s| inst.school_id(s).to_string()).collect(),
            school_back.iter().map(|&s| inst.capacity(s)).collect(),
            pref,
            priority,
        ),
        student_back,
        school_back,
    }
}

/// How a lottery distribution was obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Exact { n_profiles: u128 },
    Sampled { n_samples: u64, seed: u64 },
}

/// A lottery over DA outcomes: the edge-probability table together with
/// its explicit support. The table always equals the weight-averaged
/// edge indicators of the support, and weights sum to exactly 1.
#[derive(Clone, Debug)]
pub struct DaDistribution {
    pub prob: RandomMatching,
    pub support: Vec<(Matching, Frac)>,
    pub provenance: Provenance,
}

impl DaDistribution {
    fn from_counts(
        inst: &MarketInstance,
        counts: HashMap<Matching, u64>,
        total: u128,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut support: Vec<(Matching, Frac)> = counts
            .into_iter()
            .map(|(m, c)| (m, Frac::new(c as i128, total as i128)))
            .collect();
        support.sort_by(|a, b| a.0.cmp(&b.0));
        let prob = RandomMatching::from_support(inst, &support)?;
        Ok(DaDistribution { prob, support, provenance })
    }
}

/// Exact DA lottery distribution: iterates every tie-breaking profile
/// (all |N|! orders for the single lottery, all |N|!^|S| combinations
/// for independent lotteries), runs DA on each refinement, and weighs
/// outcomes by multiplicity. Exact rational arithmetic throughout.
pub fn exact_da_distribution(
    inst: &MarketInstance,
    mode: TieMode,
    budget: Option<u128>,
) -> Result<DaDistribution> {
    let budget = budget.unwrap_or(DEFAULT_PERM_BUDGET);
    let n = inst.n_students();
    let n_perms = factorial(n);
    let total: u128 = match mode {
        TieMode::Single => n_perms,
        TieMode::Multiple => {
            let mut acc: u128 = 1;
            for _ in 0..inst.n_schools() {
                acc = acc.saturating_mul(n_perms);
                if acc > budget {
                    break;
                }
            }
            acc
        }
    };
    if total > budget {
        return Err(Error::BudgetExceeded {
            what: "exact tie-breaking enumeration".into(),
            detail: format!("{total} profiles exceed budget {budget}; use the sampled variant"),
        });
    }
    let mut counts: HashMap<Matching, u64> = HashMap::new();
    match mode {
        TieMode::Single => {
            for perm in permutations(n) {
                let strict = break_ties(inst, &TieBreaking::Single(perm))?;
                let m = deferred_acceptance(&strict)?;
                *counts.entry(m).or_insert(0) += 1;
            }
        }
        TieMode::Multiple => {
            let perms: Vec<Vec<Student>> = permutations(n).collect();
            let m_schools = inst.n_schools();
            let mut index = vec![0usize; m_schools];
            loop {
                let profile: Vec<Vec<Student>> =
                    index.iter().map(|&k| perms[k].clone()).collect();
                let strict = break_ties(inst, &TieBreaking::Multiple(profile))?;
                let m = deferred_acceptance(&strict)?;
                *counts.entry(m).or_insert(0) += 1;
                if m_schools == 0 {
                    break;
                }
                let mut carry = 0usize;
                loop {
                    index[carry] += 1;
                    if index[carry] < perms.len() {
                        break;
                    }
                    index[carry] = 0;
                    carry += 1;
                    if carry == m_schools {
                        break;
                    }
                }
                if carry == m_schools {
                    break;
                }
            }
        }
    }
    DaDistribution::from_counts(inst, counts, total, Provenance::Exact { n_profiles: total })
}

/// Estimates the DA lottery by sampling uniform tie-breakings from a
/// seeded generator. Identical seeds give bit-identical distributions.
pub fn sample_da_distribution(
    inst: &MarketInstance,
    mode: TieMode,
    n_samples: u64,
    seed: u64,
) -> Result<DaDistribution> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let mut counts: HashMap<Matching, u64> = HashMap::new();
    for tb in sample_tiebreakings(inst, mode, n_samples, seed) {
        let strict = break_ties(inst, &tb)?;
        let m = deferred_acceptance(&strict)?;
        *counts.entry(m).or_insert(0) += 1;
    }
    DaDistribution::from_counts(
        inst,
        counts,
        u128::from(n_samples),
        Provenance::Sampled { n_samples, seed },
    )
}

/// The seeded tie-breaking stream behind [`sample_da_distribution`],
/// exposed so paired estimators (DA / cycle-resolved DA / adjusted DA)
/// can reuse identical draws.
pub fn sample_tiebreakings(
    inst: &MarketInstance,
    mode: TieMode,
    n_samples: u64,
    seed: u64,
) -> impl Iterator<Item = TieBreaking> + '_ {
    let n = inst.n_students();
    let m = inst.n_schools();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples).map(move |_| match mode {
        TieMode::Single => {
            let mut perm: Vec<Student> = (0..n).collect();
            perm.shuffle(&mut rng);
            TieBreaking::Single(perm)
        }
        TieMode::Multiple => {
            let mut profile = Vec::with_capacity(m);
            for _ in 0..m {
                let mut perm: Vec<Student> = (0..n).collect();
                perm.shuffle(&mut rng);
                profile.push(perm);
            }
            TieBreaking::Multiple(profile)
        }
    })
}

/// Derives an independent stream seed (splitmix64 step); used to give
/// sweep cells and parallel workers their own reproducible generators.
pub fn sub_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E3779B97F4A7C15);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Lexicographic permutations of 0..n.
pub fn permutations(n: usize) -> impl Iterator<Item = Vec<Student>> {
    let mut current: Option<Vec<Student>> = Some((0..n).collect());
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let perm = current.as_mut().unwrap();
        if perm.len() < 2 {
            current = None;
            return Some(out);
        }
        let mut i = perm.len() - 2;
        loop {
            if perm[i] < perm[i + 1] {
                let mut j = perm.len() - 1;
                while perm[j] <= perm[i] {
                    j -= 1;
                }
                perm.swap(i, j);
                perm[i + 1..].reverse();
                break;
            }
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
        }
        Some(out)
    })
}

/// Every DA outcome under a refinement must be weakly stable in the
/// original weak instance; used by tests and debug assertions.
pub fn assert_support_stable(inst: &MarketInstance, dist: &DaDistribution) -> Result<()> {
    for (m, _) in &dist.support {
        let (stable, blocking) = is_weakly_stable(inst, m)?;
        if !stable {
            let (i, s) = blocking[0];
            return Err(Error::UnstableMatching {
                student: inst.student_id(i).to_string(),
                school: inst.school_id(s).to_string(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::{average_rank, sd_compare, SdComparison};
    use num_traits::{Signed, ToPrimitive, Zero};

    #[test]
    fn break_ties_identity_refines_in_index_order() {
        let inst = fixtures::quad_market();
        let tb = TieBreaking::identity(&inst, TieMode::Single);
        let strict = break_ties(&inst, &tb).unwrap();
        // s1: [1,2] > 3 > 4 becomes 1 > 2 > 3 > 4
        assert_eq!(strict.priority_classes(0), &[vec![0], vec![1], vec![2], vec![3]]);
        assert!(strict.is_strict());
        let again =
            break_ties(&strict, &TieBreaking::identity(&strict, TieMode::Single)).unwrap();
        for s in 0..4 {
            assert_eq!(again.priority_classes(s), strict.priority_classes(s));
        }
    }

    #[test]
    fn break_ties_with_custom_permutation() {
        let inst = fixtures::quad_market();
        // order: student 2 first, then 1, then 4, then 3
        let strict = break_ties(&inst, &TieBreaking::Single(vec![1, 0, 3, 2])).unwrap();
        assert_eq!(strict.priority_classes(0), &[vec![1], vec![0], vec![2], vec![3]]);
    }

    #[test]
    fn da_identity_gives_second_fixture_matching() {
        let inst = fixtures::quad_market();
        let strict = break_ties(&inst, &TieBreaking::identity(&inst, TieMode::Single)).unwrap();
        let m = deferred_acceptance(&strict).unwrap();
        assert_eq!(m, fixtures::quad_m(2));
    }

    #[test]
    fn da_rejects_non_strict_input() {
        let inst = fixtures::quad_market();
        assert!(matches!(deferred_acceptance(&inst), Err(Error::NonStrictPriorities { .. })));
    }

    #[test]
    fn da_single_pair_matches() {
        let inst = crate::market::MarketInstance::new(
            vec!["a".into()],
            vec!["x".into()],
            vec![1],
            vec![vec![0]],
            vec![vec![vec![0]]],
        );
        let m = deferred_acceptance(&inst).unwrap();
        assert_eq!(m.school_of(0), Some(0));
    }

    #[test]
    fn da_swapped_permutation_gives_fifth_fixture_matching() {
        let inst = fixtures::quad_market();
        let strict = break_ties(&inst, &TieBreaking::Single(vec![1, 0, 3, 2])).unwrap();
        let m = deferred_acceptance(&strict).unwrap();
        assert_eq!(m, fixtures::quad_m(5));
    }

    #[test]
    fn exact_distribution_matches_printed_table() {
        let inst = fixtures::quad_market();
        let dist = exact_da_distribution(&inst, TieMode::Single, None).unwrap();
        assert_eq!(dist.provenance, Provenance::Exact { n_profiles: 24 });
        assert_eq!(dist.support.len(), 6);
        let expected: Vec<(Matching, Frac)> = vec![
            (fixtures::quad_m(1), Frac::new(1, 8)),
            (fixtures::quad_m(2), Frac::new(1, 8)),
            (fixtures::quad_m(3), Frac::new(1, 4)),
            (fixtures::quad_m(4), Frac::new(1, 4)),
            (fixtures::quad_m(5), Frac::new(1, 8)),
            (fixtures::quad_m(6), Frac::new(1, 8)),
        ];
        for (m, w) in &expected {
            let got = dist.support.iter().find(|(sm, _)| sm == m).expect("matching in support");
            assert_eq!(got.1, *w);
        }
        assert_eq!(dist.prob, fixtures::quad_p(&inst));
        let weight_sum: Frac = dist.support.iter().map(|(_, w)| *w).sum();
        assert_eq!(weight_sum, Frac::from_integer(1));
    }

    #[test]
    fn exact_distribution_on_strict_instance_is_point_mass() {
        let inst = fixtures::quad_market();
        let strict = break_ties(&inst, &TieBreaking::identity(&inst, TieMode::Single)).unwrap();
        let dist = exact_da_distribution(&strict, TieMode::Single, None).unwrap();
        assert_eq!(dist.support.len(), 1);
        assert_eq!(dist.support[0].1, Frac::from_integer(1));
        assert_eq!(dist.support[0].0, fixtures::quad_m(2));
    }

    #[test]
    fn exact_multiple_mode_exceeds_default_budget_on_quad() {
        let inst = fixtures::quad_market();
        assert!(matches!(
            exact_da_distribution(&inst, TieMode::Multiple, None),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn sampled_distribution_is_reproducible_and_close() {
        let inst = fixtures::quad_market();
        let d1 = sample_da_distribution(&inst, TieMode::Single, 1000, 7).unwrap();
        let d2 = sample_da_distribution(&inst, TieMode::Single, 1000, 7).unwrap();
        assert_eq!(d1.prob, d2.prob);
        assert_eq!(d1.support, d2.support);
        // within 5 sigma of the exact table (sigma ~ 0.0158 at p=1/2)
        let exact = fixtures::quad_p(&inst);
        for i in 0..4 {
            for s in 0..4 {
                let p = exact.get(i, s);
                let sigma = (p * (Frac::from_integer(1) - p) / Frac::from_integer(1000))
                    .to_f64()
                    .unwrap()
                    .sqrt();
                let diff = (d1.prob.get(i, s) - p).to_f64().unwrap().abs();
                assert!(
                    diff <= 5.0 * sigma + 1e-12,
                    "edge ({i},{s}): diff {diff} vs 5-sigma {}",
                    5.0 * sigma
                );
            }
        }
        assert_support_stable(&inst, &d1).unwrap();
    }

    #[test]
    fn single_sample_is_point_mass() {
        let inst = fixtures::quad_market();
        let d = sample_da_distribution(&inst, TieMode::Single, 1, 3).unwrap();
        assert_eq!(d.support.len(), 1);
        assert_eq!(d.support[0].1, Frac::from_integer(1));
    }

    #[test]
    fn sampling_converges_in_total_variation() {
        let inst = fixtures::quad_market();
        let exact = exact_da_distribution(&inst, TieMode::Single, None).unwrap();
        let tv = |d: &DaDistribution| -> f64 {
            let mut acc = Frac::zero();
            for (m, w) in &exact.support {
                let got = d
                    .support
                    .iter()
                    .find(|(sm, _)| sm == m)
                    .map(|(_, v)| *v)
                    .unwrap_or_else(Frac::zero);
                acc += (*w - got).abs();
            }
            for (m, w) in &d.support {
                if !exact.support.iter().any(|(sm, _)| sm == m) {
                    acc += *w;
                }
            }
            acc.to_f64().unwrap() / 2.0
        };
        let coarse = sample_da_distribution(&inst, TieMode::Single, 100, 11).unwrap();
        let fine = sample_da_distribution(&inst, TieMode::Single, 10_000, 11).unwrap();
        assert!(tv(&fine) < tv(&coarse), "tv {} !< {}", tv(&fine), tv(&coarse));
    }

    #[test]
    fn eada_on_quad_equals_da() {
        // Every tie-breaking of the quad instance gives a DA outcome
        // that is already student-Pareto-optimal.
        let inst = fixtures::quad_market();
        for perm in permutations(4) {
            let strict = break_ties(&inst, &TieBreaking::Single(perm)).unwrap();
            let da = deferred_acceptance(&strict).unwrap();
            let ea = eada(&strict).unwrap();
            assert_eq!(da, ea);
        }
    }

    #[test]
    fn eada_repairs_waiver_trio() {
        let inst = fixtures::waiver_trio();
        let da = deferred_acceptance(&inst).unwrap();
        let ranks = |m: &Matching| -> Vec<u32> {
            (0..3).map(|i| inst.rank_of(i, m.school_of(i).unwrap()).unwrap()).collect()
        };
        assert_eq!(ranks(&da), vec![2, 2, 3]);
        let ea = eada(&inst).unwrap();
        assert_eq!(ranks(&ea), vec![1, 1, 3]);
    }

    #[test]
    fn eada_weakly_dominates_da_studentwise() {
        let inst = fixtures::octet_market();
        for seed in 0..20 {
            let tb = sample_tiebreakings(&inst, TieMode::Single, 1, seed).next().unwrap();
            let strict = break_ties(&inst, &tb).unwrap();
            let da = deferred_acceptance(&strict).unwrap();
            let ea = eada(&strict).unwrap();
            for i in 0..inst.n_students() {
                let rank_of = |m: &Matching| {
                    m.school_of(i)
                        .map(|s| inst.rank_of(i, s).unwrap())
                        .unwrap_or(inst.pref(i).len() as u32 + 1)
                };
                assert!(rank_of(&ea) <= rank_of(&da), "student {i} worse after adjustment");
            }
        }
    }

    #[test]
    fn da_support_always_weakly_stable_in_weak_instance() {
        let inst = fixtures::octet_market();
        let d = sample_da_distribution(&inst, TieMode::Single, 200, 5).unwrap();
        assert_support_stable(&inst, &d).unwrap();
        let d = sample_da_distribution(&inst, TieMode::Multiple, 200, 5).unwrap();
        assert_support_stable(&inst, &d).unwrap();
    }

    #[test]
    fn exact_da_average_rank_matches_printed_value() {
        let inst = fixtures::quad_market();
        let dist = exact_da_distribution(&inst, TieMode::Single, None).unwrap();
        assert_eq!(average_rank(&inst, &dist.prob), Frac::new(13, 8));
        let q = fixtures::quad_q(&inst);
        assert_eq!(sd_compare(&inst, &q, &dist.prob).unwrap(), SdComparison::StrictlyDominates);
    }

    #[test]
    fn permutations_count_and_dedup() {
        let perms: Vec<_> = permutations(4).collect();
        assert_eq!(perms.len(), 24);
        let set: std::collections::HashSet<_> = perms.iter().cloned().collect();
        assert_eq!(set.len(), 24);
        assert_eq!(permutations(1).count(), 1);
        assert_eq!(permutations(0).count(), 1);
    }
}
