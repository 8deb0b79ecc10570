//! The experiment harness: paired per-draw estimates of the baseline
//! mechanisms, per-method reports, and parameter sweeps over generated
//! markets.
//!
//! All estimates for one instance share the same tie-breaking draws, so
//! per-draw dominance relations (cycle resolution never hurts a
//! student) hold sample-wise, not only in expectation.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_traits::ToPrimitive;

use crate::gen::{generate, GenConfig};
use crate::lottery::{
    pirmes_heur, run_pirmes, LotterySolution, PirmesConfig, PirmesStatus,
};
use crate::market::{
    expected_rank_of_student, is_weakly_stable, Matching, MarketInstance, RandomMatching,
};
use crate::mech::{
    break_ties, deferred_acceptance, eada, sample_tiebreakings, sub_seed, TieMode,
};
use crate::sic::{resolve_to_constrained_efficient, ResolvePolicy};
use crate::{Error, Frac, Result, EPS_SD};

/// Per-method metrics, always measured against the paired DA estimate.
#[derive(Clone, Debug)]
pub struct MethodReport {
    pub method: String,
    pub average_rank: f64,
    /// Fraction of students whose expected rank improves on DA.
    pub frac_improving: f64,
    /// Mean rank improvement among improving students (0 if none).
    pub avg_improvement: f64,
    /// Expected blocking pairs of the lottery, when a decomposition is
    /// available.
    pub expected_blocking_pairs: Option<f64>,
    pub runtime: Duration,
    pub status: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseMethod {
    Da,
    Ee,
    Eada,
}

impl BaseMethod {
    fn label(self) -> &'static str {
        match self {
            BaseMethod::Da => "DA",
            BaseMethod::Ee => "EE",
            BaseMethod::Eada => "EADA",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Method {
    Da,
    Ee,
    Eada,
    PirmesHeur { base: BaseMethod },
    PirmesCg { base: BaseMethod },
    /// Column generation with `extra` additional sampled matchings in
    /// the warm support.
    PirmesN { base: BaseMethod, extra: u64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Da => "DA".into(),
            Method::Ee => "EE".into(),
            Method::Eada => "EADA".into(),
            Method::PirmesHeur { base } => format!("{}-PIRMES-heur", base.label()),
            Method::PirmesCg { base } => format!("{}-PIRMES-CG", base.label()),
            Method::PirmesN { base, extra } => format!("{}-PIRMES-{extra}", base.label()),
        }
    }

    /// Parses labels like `DA`, `EE`, `EADA`, `DA-PIRMES-heur`,
    /// `EE-PIRMES-CG`, `DA-PIRMES-1000`.
    pub fn parse(text: &str) -> Result<Method> {
        let t = text.trim();
        match t.to_uppercase().as_str() {
            "DA" => return Ok(Method::Da),
            "EE" => return Ok(Method::Ee),
            "EADA" => return Ok(Method::Eada),
            _ => {}
        }
        let parts: Vec<&str> = t.split('-').collect();
        if parts.len() == 3 && parts[1].eq_ignore_ascii_case("PIRMES") {
            let base = match parts[0].to_uppercase().as_str() {
                "DA" => BaseMethod::Da,
                "EE" => BaseMethod::Ee,
                "EADA" => BaseMethod::Eada,
                other => return Err(Error::Config(format!("unknown base method {other}"))),
            };
            return match parts[2].to_lowercase().as_str() {
                "heur" => Ok(Method::PirmesHeur { base }),
                "cg" => Ok(Method::PirmesCg { base }),
                n => n
                    .parse::<u64>()
                    .map(|extra| Method::PirmesN { base, extra })
                    .map_err(|_| Error::Config(format!("unknown method {text}"))),
            };
        }
        Err(Error::Config(format!("unknown method {text}")))
    }
}

#[derive(Clone, Debug)]
pub struct MethodParams {
    pub n_samples: u64,
    pub seed: u64,
    pub tie_mode: TieMode,
    pub pirmes: PirmesConfig,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams {
            n_samples: 1000,
            seed: 0,
            tie_mode: TieMode::Single,
            pirmes: PirmesConfig::default(),
        }
    }
}

/// The three baseline estimates from one shared stream of tie-breaking
/// draws, plus the warm support (sampled DA matchings and their
/// cycle-resolved improvements).
#[derive(Clone, Debug)]
pub struct PairedEstimates {
    pub da: RandomMatching,
    pub ee: RandomMatching,
    pub eada: RandomMatching,
    pub da_support: Vec<(Matching, Frac)>,
    pub ee_support: Vec<(Matching, Frac)>,
    pub eada_support: Vec<(Matching, Frac)>,
    pub warm_support: Vec<Matching>,
}

pub fn paired_estimates(
    inst: &MarketInstance,
    n_samples: u64,
    seed: u64,
    tie_mode: TieMode,
) -> Result<PairedEstimates> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()));
    }
    let mut da_counts: HashMap<Matching, u64> = HashMap::new();
    let mut ee_counts: HashMap<Matching, u64> = HashMap::new();
    let mut eada_counts: HashMap<Matching, u64> = HashMap::new();
    for (k, tb) in sample_tiebreakings(inst, tie_mode, n_samples, seed).enumerate() {
        let strict = break_ties(inst, &tb)?;
        let da_m = deferred_acceptance(&strict)?;
        let ee_m = resolve_to_constrained_efficient(
            inst,
            &da_m,
            ResolvePolicy::FirstFound,
            Some(sub_seed(seed, 0x5EED_0000 ^ k as u64)),
        )?;
        let eada_m = eada(&strict)?;
        *da_counts.entry(da_m).or_insert(0) += 1;
        *ee_counts.entry(ee_m).or_insert(0) += 1;
        *eada_counts.entry(eada_m).or_insert(0) += 1;
    }
    let to_support = |counts: HashMap<Matching, u64>| -> Vec<(Matching, Frac)> {
        let mut v: Vec<(Matching, Frac)> = counts
            .into_iter()
            .map(|(m, c)| (m, Frac::new(c as i128, n_samples as i128)))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let da_support = to_support(da_counts);
    let ee_support = to_support(ee_counts);
    let eada_support = to_support(eada_counts);
    let da = RandomMatching::from_support(inst, &da_support)?;
    let ee = RandomMatching::from_support(inst, &ee_support)?;
    let eada_table = RandomMatching::from_support(inst, &eada_support)?;
    let mut warm_support: Vec<Matching> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (m, _) in da_support.iter().chain(ee_support.iter()) {
        if seen.insert(m.clone()) {
            warm_support.push(m.clone());
        }
    }
    Ok(PairedEstimates {
        da,
        ee,
        eada: eada_table,
        da_support,
        ee_support,
        eada_support,
        warm_support,
    })
}

/// Expected number of blocking pairs of a lottery with the given
/// decomposition.
pub fn expected_blocking_pairs(
    inst: &MarketInstance,
    decomposition: &[(Matching, Frac)],
) -> Result<f64> {
    if decomposition.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut acc = 0.0;
    for (m, w) in decomposition {
        let (_, blocking) = is_weakly_stable(inst, m)?;
        acc += w.to_f64().unwrap() * blocking.len() as f64;
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Metrics {
    pub average_rank: f64,
    pub frac_improving: f64,
    pub avg_improvement: f64,
    pub expected_blocking_pairs: Option<f64>,
}

/// Per-student comparison of `q` against `base`: a student improves
/// when their expected rank drops by more than the tolerance; the
/// average improvement is taken over improving students only.
pub fn compute_metrics(
    inst: &MarketInstance,
    base: &RandomMatching,
    q: &RandomMatching,
    decomposition: Option<&[(Matching, Frac)]>,
) -> Result<Metrics> {
    base.validate(inst)?;
    q.validate(inst)?;
    let n = inst.n_students();
    let mut improvers = 0usize;
    let mut total_gain = 0.0;
    let mut total_rank = 0.0;
    for i in 0..n {
        let before = expected_rank_of_student(inst, base, i).to_f64().unwrap();
        let after = expected_rank_of_student(inst, q, i).to_f64().unwrap();
        total_rank += after;
        if before - after > EPS_SD {
            improvers += 1;
            total_gain += before - after;
        }
    }
    let expected_bp = match decomposition {
        Some(d) => Some(expected_blocking_pairs(inst, d)?),
        None => None,
    };
    Ok(Metrics {
        average_rank: if n == 0 { 0.0 } else { total_rank / n as f64 },
        frac_improving: if n == 0 { 0.0 } else { improvers as f64 / n as f64 },
        avg_improvement: if improvers == 0 { 0.0 } else { total_gain / improvers as f64 },
        expected_blocking_pairs: expected_bp,
    })
}

#[derive(Clone, Debug)]
pub struct MethodOutcome {
    pub table: RandomMatching,
    pub report: MethodReport,
    pub decomposition: Option<Vec<(Matching, Frac)>>,
    pub lottery: Option<LotterySolution>,
}

/// Runs one method on one instance. The lottery methods take their base
/// table from the shared paired estimates and their warm support from
/// the sampled DA matchings plus cycle resolutions.
pub fn run_method(
    inst: &MarketInstance,
    method: &Method,
    params: &MethodParams,
) -> Result<MethodOutcome> {
    let started = Instant::now();
    let est = paired_estimates(inst, params.n_samples, params.seed, params.tie_mode)?;
    run_method_with_estimates(inst, method, params, &est, started)
}

/// As [`run_method`] with precomputed estimates, so one instance can be
/// evaluated under several methods with identical draws.
pub fn run_method_with_estimates(
    inst: &MarketInstance,
    method: &Method,
    params: &MethodParams,
    est: &PairedEstimates,
    started: Instant,
) -> Result<MethodOutcome> {
    let (table, decomposition, lottery, status) = match method {
        Method::Da => (est.da.clone(), Some(est.da_support.clone()), None, "ok".to_string()),
        Method::Ee => (est.ee.clone(), Some(est.ee_support.clone()), None, "ok".to_string()),
        Method::Eada => {
            (est.eada.clone(), Some(est.eada_support.clone()), None, "ok".to_string())
        }
        Method::PirmesHeur { base } | Method::PirmesCg { base } | Method::PirmesN { base, .. } => {
            let base_table = match base {
                BaseMethod::Da => &est.da,
                BaseMethod::Ee => &est.ee,
                BaseMethod::Eada => &est.eada,
            };
            let mut warm = est.warm_support.clone();
            if let Method::PirmesN { extra, .. } = method {
                let extra_seed = sub_seed(params.seed, 0xA11_0C0DE);
                let more = paired_estimates(inst, *extra, extra_seed, params.tie_mode)?;
                let mut seen: std::collections::HashSet<Matching> =
                    warm.iter().cloned().collect();
                for m in more.warm_support {
                    if seen.insert(m.clone()) {
                        warm.push(m);
                    }
                }
            }
            let (q, sol) = match method {
                Method::PirmesHeur { .. } => pirmes_heur(inst, base_table, &warm, &params.pirmes)?,
                _ => run_pirmes(inst, base_table, &warm, &params.pirmes)?,
            };
            let status = crate::io::status_label(sol.status).to_string();
            let decomposition = if sol.status == PirmesStatus::BaseNotCoverable {
                // the base table is returned unchanged; its own support
                // is the only decomposition we can offer
                match base {
                    BaseMethod::Da => Some(est.da_support.clone()),
                    BaseMethod::Ee => Some(est.ee_support.clone()),
                    BaseMethod::Eada => Some(est.eada_support.clone()),
                }
            } else {
                Some(sol.support.clone())
            };
            (q, decomposition, Some(sol), status)
        }
    };
    let metrics = compute_metrics(inst, &est.da, &table, decomposition.as_deref())?;
    let report = MethodReport {
        method: method.label(),
        average_rank: metrics.average_rank,
        frac_improving: metrics.frac_improving,
        avg_improvement: metrics.avg_improvement,
        expected_blocking_pairs: metrics.expected_blocking_pairs,
        runtime: started.elapsed(),
        status,
    };
    Ok(MethodOutcome { table, report, decomposition, lottery })
}

#[derive(Clone, Debug)]
pub struct SweepGrid {
    /// (students, schools) sizes.
    pub sizes: Vec<(usize, usize)>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// One instance per seed in every cell.
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug)]
pub struct SweepCell {
    pub n_students: usize,
    pub n_schools: usize,
    pub alpha: f64,
    pub beta: f64,
    pub method: String,
    pub runs: usize,
    pub failures: usize,
    pub mean: Metrics,
    /// 25th and 75th percentiles of (average_rank, frac_improving,
    /// avg_improvement).
    pub iqr_average_rank: (f64, f64),
    pub iqr_frac_improving: (f64, f64),
    pub iqr_avg_improvement: (f64, f64),
    pub statuses: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    /// One machine-readable row per (cell, method).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,m,alpha,beta,method,runs,failures,avg_rank_mean,avg_rank_q25,avg_rank_q75,\
             frac_improving_mean,frac_improving_q25,frac_improving_q75,\
             avg_improvement_mean,avg_improvement_q25,avg_improvement_q75,\
             expected_bp_mean,statuses\n",
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                c.n_students,
                c.n_schools,
                c.alpha,
                c.beta,
                c.method,
                c.runs,
                c.failures,
                c.mean.average_rank,
                c.iqr_average_rank.0,
                c.iqr_average_rank.1,
                c.mean.frac_improving,
                c.iqr_frac_improving.0,
                c.iqr_frac_improving.1,
                c.mean.avg_improvement,
                c.iqr_avg_improvement.0,
                c.iqr_avg_improvement.1,
                c.mean
                    .expected_blocking_pairs
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into()),
                c.statuses.join(";"),
            ));
        }
        out
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Evaluates every method on every grid cell; one generated instance
/// per (size, alpha, beta, seed), shared across methods. Per-cell
/// failures are recorded and the sweep continues. `n_workers` > 1
/// spreads instances over threads; results are merged in deterministic
/// key order regardless.
pub fn sweep(
    grid: &SweepGrid,
    methods: &[Method],
    params: &MethodParams,
    n_workers: usize,
) -> Result<SweepTable> {
    if grid.sizes.is_empty() || grid.alphas.is_empty() || grid.betas.is_empty()
        || grid.seeds.is_empty()
    {
        return Err(Error::Config("sweep grid has an empty dimension".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    let mut jobs: Vec<(usize, usize, f64, f64, u64)> = Vec::new();
    for &(n, m) in &grid.sizes {
        for &alpha in &grid.alphas {
            for &beta in &grid.betas {
                for &seed in &grid.seeds {
                    jobs.push((n, m, alpha, beta, seed));
                }
            }
        }
    }
    type JobResult = Vec<(String, std::result::Result<Metrics, String>)>;
    let run_job = |&(n, m, alpha, beta, seed): &(usize, usize, f64, f64, u64)| -> JobResult {
        let cfg = GenConfig::new(n, m, alpha, beta, seed);
        let inst = match generate(&cfg) {
            Ok(inst) => inst,
            Err(e) => {
                return methods.iter().map(|mm| (mm.label(), Err(e.to_string()))).collect()
            }
        };
        let mut local_params = params.clone();
        local_params.seed = sub_seed(params.seed, seed);
        let started = Instant::now();
        let est = match paired_estimates(
            &inst,
            local_params.n_samples,
            local_params.seed,
            local_params.tie_mode,
        ) {
            Ok(est) => est,
            Err(e) => {
                return methods.iter().map(|mm| (mm.label(), Err(e.to_string()))).collect()
            }
        };
        methods
            .iter()
            .map(|method| {
                let r = run_method_with_estimates(&inst, method, &local_params, &est, started)
                    .map(|o| Metrics {
                        average_rank: o.report.average_rank,
                        frac_improving: o.report.frac_improving,
                        avg_improvement: o.report.avg_improvement,
                        expected_blocking_pairs: o.report.expected_blocking_pairs,
                    })
                    .map_err(|e| e.to_string());
                (method.label(), r)
            })
            .collect()
    };
    let results: Vec<JobResult> = if n_workers <= 1 || jobs.len() <= 1 {
        jobs.iter().map(run_job).collect()
    } else {
        let workers = n_workers.min(jobs.len());
        let mut slots: Vec<Option<JobResult>> = vec![None; jobs.len()];
        std::thread::scope(|scope| {
            let chunks: Vec<Vec<usize>> = (0..workers)
                .map(|w| (w..jobs.len()).step_by(workers).collect())
                .collect();
            let mut handles = Vec::new();
            for chunk in chunks {
                let jobs_ref = &jobs;
                let run = &run_job;
                handles.push(scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|idx| (idx, run(&jobs_ref[idx])))
                        .collect::<Vec<_>>()
                }));
            }
            for h in handles {
                for (idx, r) in h.join().expect("worker panicked") {
                    slots[idx] = Some(r);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every job filled")).collect()
    };

    // Aggregate per (size, alpha, beta, method) over seeds.
    let mut cells: Vec<SweepCell> = Vec::new();
    for &(n, m) in &grid.sizes {
        for &alpha in &grid.alphas {
            for &beta in &grid.betas {
                for method in methods {
                    let label = method.label();
                    let mut samples: Vec<Metrics> = Vec::new();
                    let mut statuses: Vec<String> = Vec::new();
                    let mut failures = 0usize;
                    for (job, result) in jobs.iter().zip(&results) {
                        if job.0 != n || job.1 != m || job.2 != alpha || job.3 != beta {
                            continue;
                        }
                        let (_, r) = result
                            .iter()
                            .find(|(l, _)| *l == label)
                            .expect("method evaluated for every job");
                        match r {
                            Ok(metrics) => {
                                samples.push(*metrics);
                                statuses.push("ok".into());
                            }
                            Err(e) => {
                                failures += 1;
                                statuses.push(e.clone());
                            }
                        }
                    }
                    let collect = |f: fn(&Metrics) -> f64| -> Vec<f64> {
                        let mut v: Vec<f64> = samples.iter().map(f).collect();
                        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        v
                    };
                    let ranks = collect(|x| x.average_rank);
                    let fracs = collect(|x| x.frac_improving);
                    let imprs = collect(|x| x.avg_improvement);
                    let mean = Metrics {
                        average_rank: mean_of(&ranks),
                        frac_improving: mean_of(&fracs),
                        avg_improvement: mean_of(&imprs),
                        expected_blocking_pairs: {
                            let bps: Vec<f64> = samples
                                .iter()
                                .filter_map(|x| x.expected_blocking_pairs)
                                .collect();
                            if bps.is_empty() {
                                None
                            } else {
                                Some(bps.iter().sum::<f64>() / bps.len() as f64)
                            }
                        },
                    };
                    cells.push(SweepCell {
                        n_students: n,
                        n_schools: m,
                        alpha,
                        beta,
                        method: label,
                        runs: samples.len(),
                        failures,
                        mean,
                        iqr_average_rank: (percentile(&ranks, 0.25), percentile(&ranks, 0.75)),
                        iqr_frac_improving: (percentile(&fracs, 0.25), percentile(&fracs, 0.75)),
                        iqr_avg_improvement: (percentile(&imprs, 0.25), percentile(&imprs, 0.75)),
                        statuses,
                    });
                }
            }
        }
    }
    Ok(SweepTable { cells })
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::lottery::PricingBackend;
    use crate::mech::exact_da_distribution;
    use crate::oracle::EnumBudget;

    fn desk_params(n_samples: u64, seed: u64) -> MethodParams {
        MethodParams {
            n_samples,
            seed,
            tie_mode: TieMode::Single,
            pirmes: PirmesConfig {
                pricing: PricingBackend::Enumerate { budget: EnumBudget::default() },
                ..PirmesConfig::default()
            },
        }
    }

    #[test]
    fn metrics_on_printed_tables() {
        let inst = fixtures::quad_market();
        let p = fixtures::quad_p(&inst);
        let q = fixtures::quad_q(&inst);
        let decomposition =
            vec![(fixtures::quad_m(3), Frac::new(1, 2)), (fixtures::quad_m(4), Frac::new(1, 2))];
        let m = compute_metrics(&inst, &p, &q, Some(&decomposition)).unwrap();
        assert!((m.average_rank - 1.5).abs() < 1e-12);
        assert!((m.frac_improving - 1.0).abs() < 1e-12);
        assert!((m.avg_improvement - 0.125).abs() < 1e-12);
        assert_eq!(m.expected_blocking_pairs, Some(0.0));
    }

    #[test]
    fn metrics_of_base_against_itself_are_zero() {
        let inst = fixtures::quad_market();
        let p = fixtures::quad_p(&inst);
        let m = compute_metrics(&inst, &p, &p, None).unwrap();
        assert_eq!(m.frac_improving, 0.0);
        assert_eq!(m.avg_improvement, 0.0);
        assert!(m.expected_blocking_pairs.is_none());
    }

    #[test]
    fn blocking_pairs_require_decomposition() {
        let inst = fixtures::quad_market();
        assert!(matches!(expected_blocking_pairs(&inst, &[]), Err(Error::EmptySupport)));
    }

    #[test]
    fn ee_on_quad_equals_da() {
        // every tie-breaking gives a student-optimal outcome, so cycle
        // resolution never fires and the estimates coincide
        let inst = fixtures::quad_market();
        let est = paired_estimates(&inst, 200, 3, TieMode::Single).unwrap();
        assert_eq!(est.da, est.ee);
        let outcome = run_method(&inst, &Method::Ee, &desk_params(200, 3)).unwrap();
        assert_eq!(outcome.report.frac_improving, 0.0);
    }

    #[test]
    fn pirmes_cg_on_quad_beats_da_for_everyone() {
        let inst = fixtures::quad_market();
        let outcome = run_method(
            &inst,
            &Method::PirmesCg { base: BaseMethod::Da },
            &desk_params(500, 1),
        )
        .unwrap();
        assert_eq!(outcome.report.status, "optimal-certified");
        assert!(outcome.report.frac_improving > 0.9);
        assert_eq!(outcome.report.expected_blocking_pairs, Some(0.0));
        // close to the exact optimum 1.5 (sampled base, so only near)
        assert!(outcome.report.average_rank < 1.56, "{}", outcome.report.average_rank);
    }

    #[test]
    fn point_mass_method_with_single_sample() {
        let inst = fixtures::quad_market();
        let outcome = run_method(&inst, &Method::Da, &desk_params(1, 9)).unwrap();
        assert_eq!(outcome.decomposition.as_ref().unwrap().len(), 1);
        assert_eq!(outcome.report.frac_improving, 0.0);
    }

    #[test]
    fn dominance_chain_on_sampled_quad() {
        let inst = fixtures::quad_market();
        let params = desk_params(300, 5);
        let est = paired_estimates(&inst, 300, params.seed, TieMode::Single).unwrap();
        let started = Instant::now();
        let labels = [
            Method::PirmesCg { base: BaseMethod::Da },
            Method::PirmesHeur { base: BaseMethod::Da },
            Method::Ee,
            Method::Da,
        ];
        let mut ranks = Vec::new();
        for method in &labels {
            let o =
                run_method_with_estimates(&inst, method, &params, &est, started).unwrap();
            ranks.push(o.report.average_rank);
        }
        for w in ranks.windows(2) {
            assert!(w[0] <= w[1] + 1e-9, "chain broken: {ranks:?}");
        }
    }

    #[test]
    fn exact_da_matches_sampled_estimate_in_the_limit_shape() {
        // smoke: at 2000 samples every exact support matching appears
        let inst = fixtures::quad_market();
        let exact = exact_da_distribution(&inst, TieMode::Single, None).unwrap();
        let est = paired_estimates(&inst, 2000, 11, TieMode::Single).unwrap();
        for (m, _) in &exact.support {
            assert!(est.da_support.iter().any(|(sm, _)| sm == m));
        }
    }

    #[test]
    fn adjusted_da_reports_positive_blocking_pairs_when_unstable() {
        // the trio instance is strict: every draw gives the same
        // adjusted outcome, which blocks through the waived school
        let inst = fixtures::waiver_trio();
        let outcome = run_method(&inst, &Method::Eada, &desk_params(50, 2)).unwrap();
        let bp = outcome.report.expected_blocking_pairs.unwrap();
        assert!(bp > 0.0, "expected blocking pairs, got {bp}");
        // while the DA baseline itself never blocks
        let outcome = run_method(&inst, &Method::Da, &desk_params(50, 2)).unwrap();
        assert_eq!(outcome.report.expected_blocking_pairs, Some(0.0));
    }

    #[test]
    fn method_labels_round_trip() {
        for m in [
            Method::Da,
            Method::Ee,
            Method::Eada,
            Method::PirmesHeur { base: BaseMethod::Da },
            Method::PirmesCg { base: BaseMethod::Ee },
            Method::PirmesN { base: BaseMethod::Da, extra: 1000 },
        ] {
            assert_eq!(Method::parse(&m.label()).unwrap(), m);
        }
        assert!(Method::parse("bogus").is_err());
    }

    #[test]
    fn one_cell_sweep_is_deterministic() {
        let grid = SweepGrid {
            sizes: vec![(8, 3)],
            alphas: vec![0.4],
            betas: vec![0.2],
            seeds: vec![1, 2],
        };
        let methods = vec![Method::Da, Method::Ee];
        let params = desk_params(100, 7);
        let a = sweep(&grid, &methods, &params, 1).unwrap();
        let b = sweep(&grid, &methods, &params, 2).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.cells.len(), 2);
        assert_eq!(a.cells[0].runs, 2);
        // csv has one line per cell plus the header
        assert_eq!(a.to_csv().lines().count(), 3);
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let grid = SweepGrid {
            sizes: vec![(4, 2)],
            alphas: vec![0.0],
            betas: vec![0.0],
            seeds: vec![1],
        };
        // a method that must fail at this size: enumerate pricing with
        // a tiny node budget
        let mut params = desk_params(50, 1);
        params.pirmes.pricing = PricingBackend::Enumerate { budget: EnumBudget { max_nodes: 1 } };
        let methods = vec![Method::Da, Method::PirmesCg { base: BaseMethod::Da }];
        let table = sweep(&grid, &methods, &params, 1).unwrap();
        let da_cell = table.cells.iter().find(|c| c.method == "DA").unwrap();
        assert_eq!(da_cell.failures, 0);
        let cg_cell = table.cells.iter().find(|c| c.method == "DA-PIRMES-CG").unwrap();
        assert_eq!(cg_cell.failures, 1);
        assert!(cg_cell.statuses[0].contains("budget"));
    }
}
