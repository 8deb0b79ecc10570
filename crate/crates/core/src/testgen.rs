//! Seeded random small instances for property tests and the
//! acceptance suite. Not part of the public contract.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::market::MarketInstance;

#[derive(Clone, Copy, Debug)]
pub struct SmallInstanceParams {
    pub max_students: usize,
    pub max_schools: usize,
    pub max_capacity: u32,
    /// Probability that a student finds any given school acceptable.
    pub edge_density: f64,
}

impl Default for SmallInstanceParams {
    fn default() -> Self {
        SmallInstanceParams { max_students: 6, max_schools: 4, max_capacity: 2, edge_density: 0.8 }
    }
}

/// A random well-formed instance with random ties: random preference
/// lists and a random ordered partition of each school's acceptable
/// students into indifference classes.
pub fn random_instance(seed: u64, params: SmallInstanceParams) -> MarketInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=params.max_students);
    let m = rng.gen_range(1..=params.max_schools);
    let mut pref: Vec<Vec<usize>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut list: Vec<usize> =
            (0..m).filter(|_| rng.gen_bool(params.edge_density)).collect();
        if list.is_empty() {
            list.push(rng.gen_range(0..m));
        }
        // random order
        for k in (1..list.len()).rev() {
            let j = rng.gen_range(0..=k);
            list.swap(k, j);
        }
        pref.push(list);
    }
    let mut priority: Vec<Vec<Vec<usize>>> = Vec::with_capacity(m);
    for s in 0..m {
        let mut acceptable: Vec<usize> =
            (0..n).filter(|&i| pref[i].contains(&s)).collect();
        for k in (1..acceptable.len()).rev() {
            let j = rng.gen_range(0..=k);
            acceptable.swap(k, j);
        }
        // random ordered partition: each student either joins the
        // current class or starts a new one
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for i in acceptable {
            if classes.is_empty() || rng.gen_bool(0.5) {
                classes.push(vec![i]);
            } else {
                classes.last_mut().unwrap().push(i);
            }
        }
        priority.push(classes);
    }
    let capacity = (0..m).map(|_| rng.gen_range(1..=params.max_capacity)).collect();
    let inst = MarketInstance::new(
        (0..n).map(|i| format!("i{}", i + 1)).collect(),
        (0..m).map(|s| format!("s{}", s + 1)).collect(),
        capacity,
        pref,
        priority,
    );
    debug_assert!(inst.validate().is_empty());
    inst
}
