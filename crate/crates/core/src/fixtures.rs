//! Hand-checked instances shared across the test suites.

use crate::market::{Matching, MarketInstance, RandomMatching};
use crate::Frac;

/// Four students, four unit-capacity schools, tied top pairs.
///
/// ```text
/// 1: s1 > s3 > s4 > s2      s1: [1,2] > 3 > 4
/// 2: s1 > s4 > s3 > s2      s2: [3,4] > 1 > 2
/// 3: s2 > s3 > s4 > s1      s3: 2 > 4 > [1,3]
/// 4: s2 > s4 > s3 > s1      s4: 1 > 3 > [2,4]
/// ```
pub fn quad_market() -> MarketInstance {
    MarketInstance::new(
        vec!["1".into(), "2".into(), "3".into(), "4".into()],
        vec!["s1".into(), "s2".into(), "s3".into(), "s4".into()],
        vec![1, 1, 1, 1],
        vec![
            vec![0, 2, 3, 1],
            vec![0, 3, 2, 1],
            vec![1, 2, 3, 0],
            vec![1, 3, 2, 0],
        ],
        vec![
            vec![vec![0, 1], vec![2], vec![3]],
            vec![vec![2, 3], vec![0], vec![1]],
            vec![vec![1], vec![3], vec![0, 2]],
            vec![vec![0], vec![2], vec![1, 3]],
        ],
    )
}

/// The six weakly stable matchings the uniform single-lottery DA can
/// produce on [`quad_market`], numbered 1..=6.
pub fn quad_m(k: usize) -> Matching {
    let inst = quad_market();
    let pairs: [&[(usize, usize)]; 6] = [
        &[(0, 0), (1, 2), (2, 1), (3, 3)],
        &[(0, 0), (1, 3), (2, 1), (3, 2)],
        &[(0, 0), (1, 3), (2, 2), (3, 1)],
        &[(0, 2), (1, 0), (2, 1), (3, 3)],
        &[(0, 2), (1, 0), (2, 3), (3, 1)],
        &[(0, 3), (1, 0), (2, 2), (3, 1)],
    ];
    Matching::from_pairs(&inst, pairs[k - 1]).unwrap()
}

/// The uniform-lottery DA table on [`quad_market`]: every student gets
/// their first choice with probability 1/2, second with 3/8, third 1/8.
pub fn quad_p(inst: &MarketInstance) -> RandomMatching {
    let mut p = RandomMatching::zero(inst);
    for i in 0..4 {
        let prefs = inst.pref(i);
        p.set(i, prefs[0], Frac::new(1, 2));
        p.set(i, prefs[1], Frac::new(3, 8));
        p.set(i, prefs[2], Frac::new(1, 8));
    }
    p
}

/// The improved table on [`quad_market`]: first and second choices with
/// probability 1/2 each.
pub fn quad_q(inst: &MarketInstance) -> RandomMatching {
    let mut q = RandomMatching::zero(inst);
    for i in 0..4 {
        let prefs = inst.pref(i);
        q.set(i, prefs[0], Frac::new(1, 2));
        q.set(i, prefs[1], Frac::new(1, 2));
    }
    q
}

/// Eight students and eight unit schools with short lists; admits an
/// ex-post stable table that improves the second-choice mass of two
/// students over any ex-ante stable mechanism.
///
/// ```text
/// 1: s1 > s3 > s4 > s2      s1: [3,4] > [1,2]
/// 2: s1 > s4 > s3 > s2      s2: [1,2] > [3,4]
/// 3: s2 > s4 > s3 > s1      s3: 3 > 2 > [1,6] > 4
/// 4: s2 > s3 > s4 > s1      s4: 4 > 1 > [2,5] > 3
/// 5: s5 > s4 > s6           s5: [7,5]
/// 6: s7 > s3 > s8           s6: 7 > 5
/// 7: s5 > s6                s7: [6,8]
/// 8: s7 > s8                s8: 8 > 6
/// ```
pub fn octet_market() -> MarketInstance {
    MarketInstance::new(
        (1..=8).map(|i| i.to_string()).collect(),
        (1..=8).map(|j| format!("s{j}")).collect(),
        vec![1; 8],
        vec![
            vec![0, 2, 3, 1],
            vec![0, 3, 2, 1],
            vec![1, 3, 2, 0],
            vec![1, 2, 3, 0],
            vec![4, 3, 5],
            vec![6, 2, 7],
            vec![4, 5],
            vec![6, 7],
        ],
        vec![
            vec![vec![2, 3], vec![0, 1]],
            vec![vec![0, 1], vec![2, 3]],
            vec![vec![2], vec![1], vec![0, 5], vec![3]],
            vec![vec![3], vec![0], vec![1, 4], vec![2]],
            vec![vec![6, 4]],
            vec![vec![6], vec![4]],
            vec![vec![5, 7]],
            vec![vec![7], vec![5]],
        ],
    )
}

/// The two weakly stable matchings whose even mix is the
/// constrained-sd-efficient table on [`octet_market`], numbered 1..=2.
pub fn octet_m(k: usize) -> Matching {
    let inst = octet_market();
    let pairs: [&[(usize, usize)]; 2] = [
        &[(0, 0), (1, 3), (2, 1), (3, 2), (4, 5), (5, 6), (6, 4), (7, 7)],
        &[(0, 2), (1, 0), (2, 3), (3, 1), (4, 4), (5, 7), (6, 5), (7, 6)],
    ];
    Matching::from_pairs(&inst, pairs[k - 1]).unwrap()
}

/// The even mix of [`octet_m`] 1 and 2.
pub fn octet_p_prime(inst: &MarketInstance) -> RandomMatching {
    let half = Frac::new(1, 2);
    RandomMatching::from_support(inst, &[(octet_m(1), half), (octet_m(2), half)]).unwrap()
}

/// Six students, six unit schools; the showcase for greedy cycle
/// selection being suboptimal.
///
/// ```text
/// 1: s2 > s4                s1: 4 > [2,3]
/// 2: s1 > s2 > s3 > s5      s2: 5 > 1 > 2
/// 3: s1 > s3 > s6           s3: 6 > 2 > 3
/// 4: s4 > s1                s4: 1 > 4
/// 5: s5 > s2                s5: 2 > 5
/// 6: s6 > s3                s6: 3 > 6
/// ```
pub fn sextet_market() -> MarketInstance {
    MarketInstance::new(
        (1..=6).map(|i| i.to_string()).collect(),
        (1..=6).map(|j| format!("s{j}")).collect(),
        vec![1; 6],
        vec![
            vec![1, 3],
            vec![0, 1, 2, 4],
            vec![0, 2, 5],
            vec![3, 0],
            vec![4, 1],
            vec![5, 2],
        ],
        vec![
            vec![vec![3], vec![1, 2]],
            vec![vec![4], vec![0], vec![1]],
            vec![vec![5], vec![1], vec![2]],
            vec![vec![0], vec![3]],
            vec![vec![1], vec![4]],
            vec![vec![2], vec![5]],
        ],
    )
}

/// The weakly stable starting matching on [`sextet_market`] in which
/// every school holds a top-priority student.
pub fn sextet_start() -> Matching {
    let inst = sextet_market();
    Matching::from_pairs(&inst, &[(0, 3), (1, 4), (2, 5), (3, 0), (4, 1), (5, 2)]).unwrap()
}

/// Three students, three unit schools; the classic illustration of DA's
/// Pareto inefficiency that the waiver-based adjustment repairs.
///
/// ```text
/// 1: s2 > s1 > s3           s1: 1 > 3 > 2
/// 2: s1 > s2 > s3           s2: 2 > 1 > 3
/// 3: s1 > s2 > s3           s3: 1 > 2 > 3
/// ```
pub fn waiver_trio() -> MarketInstance {
    MarketInstance::new(
        vec!["i1".into(), "i2".into(), "i3".into()],
        vec!["s1".into(), "s2".into(), "s3".into()],
        vec![1, 1, 1],
        vec![vec![1, 0, 2], vec![0, 1, 2], vec![0, 1, 2]],
        vec![
            vec![vec![0], vec![2], vec![1]],
            vec![vec![1], vec![0], vec![2]],
            vec![vec![0], vec![1], vec![2]],
        ],
    )
}
