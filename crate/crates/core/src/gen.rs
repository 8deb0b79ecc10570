//! Instance construction: the synthetic market generator (correlated
//! utilities plus walk-zone priorities) and priority builders for raw
//! admission records with sibling and list-rank policies.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::market::{MarketInstance, School, Student};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub enum CapacityRule {
    /// Total capacity n split as evenly as possible: the first
    /// n mod m schools get one extra seat.
    EqualSplit,
    Uniform(u32),
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub n_students: usize,
    pub n_schools: usize,
    /// Correlation of student preferences: 1 = everyone shares the
    /// common taste, 0 = fully idiosyncratic.
    pub alpha: f64,
    /// Weight of locational proximity in utilities.
    pub beta: f64,
    pub seed: u64,
    pub capacity_rule: CapacityRule,
}

impl GenConfig {
    pub fn new(n_students: usize, n_schools: usize, alpha: f64, beta: f64, seed: u64) -> Self {
        GenConfig { n_students, n_schools, alpha, beta, seed, capacity_rule: CapacityRule::EqualSplit }
    }

    fn validate(&self) -> Result<()> {
        if self.n_students == 0 || self.n_schools == 0 {
            return Err(Error::Config("need at least one student and one school".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config("alpha and beta must lie in [0, 1]".into()));
        }
        if let CapacityRule::Uniform(0) = self.capacity_rule {
            return Err(Error::Config("uniform capacity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GenStats {
    /// Utility ties broken by school index (measure-zero, but counted).
    pub utility_ties: u64,
}

/// One standard normal per call via Box-Muller; each draw consumes a
/// fresh pair of uniforms so the stream is simple to replay.
fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates a synthetic market: student and school locations uniform
/// on the unit square, utilities
/// `U_ij = -beta * d(i, j) + (1 - beta) * (alpha * Z0_j + (1 - alpha) * Z_ij)`
/// with standard-normal noise, complete preference lists by decreasing
/// utility, and two walk-zone priority classes per school (students
/// whose closest school it is, then everyone else).
///
/// Draw order is fixed for reproducibility: student locations, school
/// locations, the common taste Z0 per school, then the idiosyncratic
/// noise row-major by (student, school).
pub fn generate(config: &GenConfig) -> Result<MarketInstance> {
    generate_full(config).map(|(inst, _)| inst)
}

pub fn generate_full(config: &GenConfig) -> Result<(MarketInstance, GenStats)> {
    config.validate()?;
    let n = config.n_students;
    let m = config.n_schools;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let student_loc: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let school_loc: Vec<(f64, f64)> = (0..m).map(|_| (rng.gen(), rng.gen())).collect();
    let z_common: Vec<f64> = (0..m).map(|_| box_muller(&mut rng)).collect();
    let mut utility = vec![vec![0.0f64; m]; n];
    for i in 0..n {
        for j in 0..m {
            let z = box_muller(&mut rng);
            let d = dist(student_loc[i], school_loc[j]);
            utility[i][j] = -config.beta * d
                + (1.0 - config.beta) * (config.alpha * z_common[j] + (1.0 - config.alpha) * z);
        }
    }
    let mut stats = GenStats::default();
    let mut pref: Vec<Vec<School>> = Vec::with_capacity(n);
    for u_row in &utility {
        let mut order: Vec<School> = (0..m).collect();
        order.sort_by(|&a, &b| {
            u_row[b].partial_cmp(&u_row[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        for w in order.windows(2) {
            if u_row[w[0]] == u_row[w[1]] {
                stats.utility_ties += 1;
            }
        }
        pref.push(order);
    }
    // Walk zone: the school closest to the student (lowest index wins
    // exact distance ties).
    let mut walk_zone: Vec<Vec<Student>> = vec![Vec::new(); m];
    for i in 0..n {
        let closest = (0..m)
            .min_by(|&a, &b| {
                dist(student_loc[i], school_loc[a])
                    .partial_cmp(&dist(student_loc[i], school_loc[b]))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("at least one school");
        walk_zone[closest].push(i);
    }
    let priority: Vec<Vec<Vec<Student>>> = (0..m)
        .map(|s| {
            let zone = walk_zone[s].clone();
            let rest: Vec<Student> = (0..n).filter(|i| !walk_zone[s].contains(i)).collect();
            let mut classes = Vec::new();
            if !zone.is_empty() {
                classes.push(zone);
            }
            if !rest.is_empty() {
                classes.push(rest);
            }
            classes
        })
        .collect();
    let capacity: Vec<u32> = match config.capacity_rule {
        CapacityRule::Uniform(c) => vec![c; m],
        CapacityRule::EqualSplit => {
            let base = (n / m) as u32;
            let extra = n % m;
            (0..m).map(|s| base + u32::from(s < extra)).collect()
        }
    };
    let capacity = fix_zero_capacities(capacity);
    let inst = MarketInstance::new(
        (1..=n).map(|i| i.to_string()).collect(),
        (1..=m).map(|j| format!("s{j}")).collect(),
        capacity,
        pref,
        priority,
    );
    debug_assert!(inst.validate().is_empty());
    Ok((inst, stats))
}

fn fix_zero_capacities(capacity: Vec<u32>) -> Vec<u32> {
    capacity.into_iter().map(|c| c.max(1)).collect()
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// One family's row of an admission-records table.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRecord {
    pub family: String,
    /// Ordered school choices, best first, duplicate-free.
    pub choices: Vec<String>,
    /// Schools where the family already has a sibling enrolled.
    pub siblings: Vec<String>,
    /// Home-to-school distances; carried through for reporting, not
    /// used by the two distance policies below (both work on list
    /// ranks).
    pub distances: Vec<(String, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiblingRule {
    /// Families with an enrolled sibling get the single topmost class.
    Sib,
    NoSib,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceRule {
    /// One indifference class per preference-rank value: students who
    /// list the school higher outrank those who list it lower.
    RelDist,
    /// Two classes: students ranking the school in their first three
    /// choices, then everyone ranking it fourth or worse.
    Dist3,
}

/// Builds a market from raw records: strict family preferences as
/// listed, school priorities from the sibling and list-rank policies.
/// School capacities come with the school list.
pub fn estonian_priorities(
    records: &[RawRecord],
    schools: &[(String, u32)],
    sibling_rule: SiblingRule,
    distance_rule: DistanceRule,
) -> Result<MarketInstance> {
    if records.is_empty() {
        return Err(Error::Parse("no records".into()));
    }
    let school_index: HashMap<&str, usize> =
        schools.iter().enumerate().map(|(k, (id, _))| (id.as_str(), k)).collect();
    let mut pref: Vec<Vec<School>> = Vec::with_capacity(records.len());
    for r in records {
        if r.choices.is_empty() {
            return Err(Error::Parse(format!("family {} lists no choices", r.family)));
        }
        let mut list = Vec::with_capacity(r.choices.len());
        for c in &r.choices {
            let &s = school_index.get(c.as_str()).ok_or_else(|| {
                Error::Parse(format!("family {} lists unknown school {c}", r.family))
            })?;
            if list.contains(&s) {
                return Err(Error::Parse(format!(
                    "family {} lists school {c} more than once",
                    r.family
                )));
            }
            list.push(s);
        }
        pref.push(list);
    }
    let mut priority: Vec<Vec<Vec<Student>>> = Vec::with_capacity(schools.len());
    for (s, (sid, _)) in schools.iter().enumerate() {
        // students listing s, with their 1-based list rank of s
        let mut listed: Vec<(Student, usize)> = Vec::new();
        for (i, list) in pref.iter().enumerate() {
            if let Some(pos) = list.iter().position(|&x| x == s) {
                listed.push((i, pos + 1));
            }
        }
        let has_sibling = |i: Student| records[i].siblings.iter().any(|x| x == sid);
        let mut classes: Vec<Vec<Student>> = Vec::new();
        if sibling_rule == SiblingRule::Sib {
            let sib_class: Vec<Student> =
                listed.iter().filter(|&&(i, _)| has_sibling(i)).map(|&(i, _)| i).collect();
            if !sib_class.is_empty() {
                classes.push(sib_class);
            }
            listed.retain(|&(i, _)| !has_sibling(i));
        }
        match distance_rule {
            DistanceRule::RelDist => {
                let mut by_rank: Vec<usize> =
                    listed.iter().map(|&(_, rank)| rank).collect::<Vec<_>>();
                by_rank.sort_unstable();
                by_rank.dedup();
                for rank in by_rank {
                    classes.push(
                        listed
                            .iter()
                            .filter(|&&(_, r)| r == rank)
                            .map(|&(i, _)| i)
                            .collect(),
                    );
                }
            }
            DistanceRule::Dist3 => {
                let top: Vec<Student> =
                    listed.iter().filter(|&&(_, r)| r <= 3).map(|&(i, _)| i).collect();
                let rest: Vec<Student> =
                    listed.iter().filter(|&&(_, r)| r > 3).map(|&(i, _)| i).collect();
                if !top.is_empty() {
                    classes.push(top);
                }
                if !rest.is_empty() {
                    classes.push(rest);
                }
            }
        }
        priority.push(classes);
    }
    let inst = MarketInstance::new(
        records.iter().map(|r| r.family.clone()).collect(),
        schools.iter().map(|(id, _)| id.clone()).collect(),
        schools.iter().map(|&(_, c)| c).collect(),
        pref,
        priority,
    );
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(Error::Parse(format!("records produce an invalid market: {}", violations[0])));
    }
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(family: &str, choices: &[&str], siblings: &[&str]) -> RawRecord {
        RawRecord {
            family: family.into(),
            choices: choices.iter().map(|s| s.to_string()).collect(),
            siblings: siblings.iter().map(|s| s.to_string()).collect(),
            distances: Vec::new(),
        }
    }

    #[test]
    fn fully_correlated_tastes_align_preferences() {
        let cfg = GenConfig::new(10, 4, 1.0, 0.0, 42);
        let inst = generate(&cfg).unwrap();
        let first = inst.pref(0).to_vec();
        for i in 1..10 {
            assert_eq!(inst.pref(i), &first[..]);
        }
    }

    #[test]
    fn pure_distance_preferences_start_at_walk_zone() {
        let cfg = GenConfig::new(12, 5, 0.0, 1.0, 7);
        let inst = generate(&cfg).unwrap();
        // each student's first choice is their walk-zone school, which
        // by construction holds them in its first priority class
        for i in 0..12 {
            let top = inst.pref(i)[0];
            assert_eq!(inst.priority_rank(i, top).unwrap(), 1, "student {i}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::new(20, 6, 0.4, 0.3, 123);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        for i in 0..20 {
            assert_eq!(a.pref(i), b.pref(i));
        }
        for s in 0..6 {
            assert_eq!(a.priority_classes(s), b.priority_classes(s));
            assert_eq!(a.capacity(s), b.capacity(s));
        }
    }

    #[test]
    fn walk_zone_priorities_have_at_most_two_classes() {
        let cfg = GenConfig::new(30, 5, 0.5, 0.5, 9);
        let inst = generate(&cfg).unwrap();
        for s in 0..5 {
            assert!(inst.n_priority_classes(s) <= 2);
        }
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn equal_split_capacities_sum_to_students() {
        let cfg = GenConfig::new(40, 8, 0.2, 0.2, 1);
        let inst = generate(&cfg).unwrap();
        let total: u32 = (0..8).map(|s| inst.capacity(s)).sum();
        assert_eq!(total, 40);
        assert_eq!(inst.capacity(0), 5);
        // uneven split
        let cfg = GenConfig::new(10, 4, 0.2, 0.2, 1);
        let inst = generate(&cfg).unwrap();
        let caps: Vec<u32> = (0..4).map(|s| inst.capacity(s)).collect();
        assert_eq!(caps, vec![3, 3, 2, 2]);
    }

    #[test]
    fn sibling_and_rank_policies_from_worked_example() {
        // school s: a lists it first with a sibling, b first, c fourth
        let records = vec![
            record("a", &["s", "x", "y", "z"], &["s"]),
            record("b", &["s", "x", "y", "z"], &[]),
            record("c", &["x", "y", "z", "s"], &[]),
        ];
        let schools = vec![
            ("s".to_string(), 1u32),
            ("x".to_string(), 1),
            ("y".to_string(), 1),
            ("z".to_string(), 1),
        ];
        let sib_dist3 =
            estonian_priorities(&records, &schools, SiblingRule::Sib, DistanceRule::Dist3)
                .unwrap();
        assert_eq!(sib_dist3.priority_classes(0), &[vec![0], vec![1], vec![2]]);
        let nosib_reldist =
            estonian_priorities(&records, &schools, SiblingRule::NoSib, DistanceRule::RelDist)
                .unwrap();
        assert_eq!(nosib_reldist.priority_classes(0), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn same_rank_listers_form_single_class_under_reldist() {
        let records = vec![
            record("a", &["s", "x"], &[]),
            record("b", &["s", "y"], &[]),
            record("c", &["s", "z"], &[]),
        ];
        let schools = vec![
            ("s".to_string(), 2u32),
            ("x".to_string(), 1),
            ("y".to_string(), 1),
            ("z".to_string(), 1),
        ];
        let inst =
            estonian_priorities(&records, &schools, SiblingRule::NoSib, DistanceRule::RelDist)
                .unwrap();
        assert_eq!(inst.priority_classes(0), &[vec![0, 1, 2]]);
    }

    #[test]
    fn reldist_refines_dist3_per_school() {
        // same sibling handling on both sides; the rank partition is
        // always nested inside the top3/rest partition
        let mut records = Vec::new();
        let school_names = ["s1", "s2", "s3", "s4", "s5"];
        for f in 0..12 {
            let mut choices: Vec<&str> = school_names.to_vec();
            choices.rotate_left(f % 5);
            let siblings: &[&str] =
                if f % 3 == 0 { &["s2"] } else { &[] };
            records.push(record(&format!("f{f}"), &choices, siblings));
        }
        let schools: Vec<(String, u32)> =
            school_names.iter().map(|s| (s.to_string(), 3u32)).collect();
        for sib in [SiblingRule::Sib, SiblingRule::NoSib] {
            let fine = estonian_priorities(&records, &schools, sib, DistanceRule::RelDist).unwrap();
            let coarse = estonian_priorities(&records, &schools, sib, DistanceRule::Dist3).unwrap();
            for s in 0..school_names.len() {
                let class_of = |inst: &MarketInstance, i: usize| {
                    inst.priority_rank(i, s).ok()
                };
                for i in 0..records.len() {
                    for j in 0..records.len() {
                        let (fi, fj) = (class_of(&fine, i), class_of(&fine, j));
                        let (ci, cj) = (class_of(&coarse, i), class_of(&coarse, j));
                        if fi.is_some() && fi == fj {
                            assert_eq!(ci, cj, "school {s}: {i} and {j} split by coarse rule");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_school_in_record_is_a_parse_error() {
        let records = vec![record("a", &["nope"], &[])];
        let schools = vec![("s".to_string(), 1u32)];
        assert!(matches!(
            estonian_priorities(&records, &schools, SiblingRule::NoSib, DistanceRule::RelDist),
            Err(Error::Parse(_))
        ));
    }
}
