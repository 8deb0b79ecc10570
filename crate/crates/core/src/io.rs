//! Serialization: the canonical versioned instance document, lottery
//! distribution files, solution bundles, matching files, and the
//! delimited records format for raw admission data.
//!
//! Probabilities and weights serialize as exact fractions "num/den";
//! the parser also accepts plain decimals and integers.

use std::collections::HashMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::gen::RawRecord;
use crate::lottery::{IterationLog, LotterySolution, PirmesStatus};
use crate::market::{Matching, MarketInstance, RandomMatching};
use crate::mech::{DaDistribution, Provenance};
use crate::{Error, Frac, Result};

pub const INSTANCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    version: u32,
    students: Vec<String>,
    schools: Vec<SchoolDoc>,
    /// student id -> ordered school-id list
    preferences: HashMap<String, Vec<String>>,
    /// school id -> ordered classes (outer order = decreasing priority)
    priorities: HashMap<String, Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    metadata: HashMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SchoolDoc {
    id: String,
    capacity: Option<u32>,
}

/// Formats a fraction as "num/den" ("0" and integers stay plain).
pub fn format_frac(v: Frac) -> String {
    if v.is_integer() {
        format!("{}", v.numer())
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

/// Parses "num/den", integers, and decimal strings (exactly, via
/// scaling by a power of ten).
pub fn parse_frac(text: &str) -> Result<Frac> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let n: i128 = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad fraction numerator in {text:?}")))?;
        let d: i128 = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad fraction denominator in {text:?}")))?;
        if d == 0 {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Frac::new(n, d));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let digits = frac.len() as u32;
        if digits > 18 {
            return Err(Error::Parse(format!("too many decimal digits in {text:?}")));
        }
        let scale = 10i128.pow(digits);
        let negative = whole.starts_with('-');
        let w: i128 = if whole == "-" || whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| Error::Parse(format!("bad decimal in {text:?}")))?
        };
        let f: i128 =
            frac.parse().map_err(|_| Error::Parse(format!("bad decimal in {text:?}")))?;
        let magnitude = w.abs() * scale + f;
        return Ok(Frac::new(if negative { -magnitude } else { magnitude }, scale));
    }
    let n: i128 = text.parse().map_err(|_| Error::Parse(format!("bad number {text:?}")))?;
    Ok(Frac::from_integer(n))
}

pub fn serialize_instance(inst: &MarketInstance) -> String {
    let doc = InstanceDoc {
        version: INSTANCE_FORMAT_VERSION,
        students: inst.student_ids().to_vec(),
        schools: (0..inst.n_schools())
            .map(|s| SchoolDoc {
                id: inst.school_id(s).to_string(),
                capacity: Some(inst.capacity(s)),
            })
            .collect(),
        preferences: (0..inst.n_students())
            .map(|i| {
                (
                    inst.student_id(i).to_string(),
                    inst.pref(i).iter().map(|&s| inst.school_id(s).to_string()).collect(),
                )
            })
            .collect(),
        priorities: (0..inst.n_schools())
            .map(|s| {
                (
                    inst.school_id(s).to_string(),
                    inst.priority_classes(s)
                        .iter()
                        .map(|c| c.iter().map(|&i| inst.student_id(i).to_string()).collect())
                        .collect(),
                )
            })
            .collect(),
        metadata: HashMap::new(),
    };
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}

pub fn parse_instance(text: &str) -> Result<MarketInstance> {
    let doc: InstanceDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance document: {e}")))?;
    if doc.version != INSTANCE_FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported instance format version {} (expected {INSTANCE_FORMAT_VERSION})",
            doc.version
        )));
    }
    let mut seen = HashSet::new();
    for id in &doc.students {
        if !seen.insert(id.clone()) {
            return Err(Error::Parse(format!("duplicate student id {id}")));
        }
    }
    let student_index: HashMap<&str, usize> =
        doc.students.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
    let mut school_ids = Vec::new();
    let mut capacity = Vec::new();
    let mut seen = HashSet::new();
    for s in &doc.schools {
        if !seen.insert(s.id.clone()) {
            return Err(Error::Parse(format!("duplicate school id {}", s.id)));
        }
        let c = s
            .capacity
            .ok_or_else(|| Error::Parse(format!("school {} is missing a capacity", s.id)))?;
        school_ids.push(s.id.clone());
        capacity.push(c);
    }
    let school_index: HashMap<&str, usize> =
        school_ids.iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
    let mut pref = vec![Vec::new(); doc.students.len()];
    for (sid, list) in &doc.preferences {
        let &i = student_index
            .get(sid.as_str())
            .ok_or_else(|| Error::Parse(format!("preferences name unknown student {sid}")))?;
        pref[i] = list
            .iter()
            .map(|name| {
                school_index.get(name.as_str()).copied().ok_or_else(|| {
                    Error::Parse(format!("student {sid} lists unknown school {name}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
    }
    let mut priority = vec![Vec::new(); school_ids.len()];
    for (school, classes) in &doc.priorities {
        let &s = school_index
            .get(school.as_str())
            .ok_or_else(|| Error::Parse(format!("priorities name unknown school {school}")))?;
        priority[s] = classes
            .iter()
            .map(|class| {
                class
                    .iter()
                    .map(|sid| {
                        student_index.get(sid.as_str()).copied().ok_or_else(|| {
                            Error::Parse(format!("school {school} ranks unknown student {sid}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(MarketInstance::new(doc.students, school_ids, capacity, pref, priority))
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeProbDoc {
    student: String,
    school: String,
    prob: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightedMatchingDoc {
    weight: String,
    assignment: HashMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ProvenanceDoc {
    Exact { n_profiles: String },
    Sampled { n_samples: u64, seed: u64 },
    Computed,
}

#[derive(Debug, Serialize, Deserialize)]
struct DistributionDoc {
    version: u32,
    edges: Vec<EdgeProbDoc>,
    support: Vec<WeightedMatchingDoc>,
    provenance: ProvenanceDoc,
}

fn matching_to_doc(inst: &MarketInstance, m: &Matching) -> HashMap<String, String> {
    m.pairs()
        .into_iter()
        .map(|(i, s)| (inst.student_id(i).to_string(), inst.school_id(s).to_string()))
        .collect()
}

fn matching_from_doc(
    inst: &MarketInstance,
    doc: &HashMap<String, String>,
) -> Result<Matching> {
    let student_index: HashMap<&str, usize> =
        inst.student_ids().iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
    let school_index: HashMap<&str, usize> =
        inst.school_ids().iter().enumerate().map(|(k, v)| (v.as_str(), k)).collect();
    let mut pairs = Vec::new();
    for (sid, school) in doc {
        let &i = student_index
            .get(sid.as_str())
            .ok_or_else(|| Error::Parse(format!("assignment names unknown student {sid}")))?;
        let &s = school_index
            .get(school.as_str())
            .ok_or_else(|| Error::Parse(format!("assignment names unknown school {school}")))?;
        pairs.push((i, s));
    }
    Matching::from_pairs(inst, &pairs)
}

pub fn serialize_distribution(inst: &MarketInstance, dist: &DaDistribution) -> String {
    let doc = DistributionDoc {
        version: INSTANCE_FORMAT_VERSION,
        edges: random_to_edges(inst, &dist.prob),
        support: dist
            .support
            .iter()
            .map(|(m, w)| WeightedMatchingDoc {
                weight: format_frac(*w),
                assignment: matching_to_doc(inst, m),
            })
            .collect(),
        provenance: match dist.provenance {
            Provenance::Exact { n_profiles } => {
                ProvenanceDoc::Exact { n_profiles: n_profiles.to_string() }
            }
            Provenance::Sampled { n_samples, seed } => ProvenanceDoc::Sampled { n_samples, seed },
        },
    };
    serde_json::to_string_pretty(&doc).expect("distribution serializes")
}

fn random_to_edges(inst: &MarketInstance, p: &RandomMatching) -> Vec<EdgeProbDoc> {
    use num_traits::Zero;
    inst.edges()
        .into_iter()
        .filter(|&(i, s)| !p.get(i, s).is_zero())
        .map(|(i, s)| EdgeProbDoc {
            student: inst.student_id(i).to_string(),
            school: inst.school_id(s).to_string(),
            prob: format_frac(p.get(i, s)),
        })
        .collect()
}

/// Parses a distribution file. The support is required; the edge table
/// is cross-checked against the re-expanded support when present.
pub fn parse_distribution(
    inst: &MarketInstance,
    text: &str,
) -> Result<(RandomMatching, Vec<(Matching, Frac)>)> {
    let doc: DistributionDoc = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("distribution document: {e}")))?;
    if doc.support.is_empty() {
        return Err(Error::Parse("distribution has an empty support".into()));
    }
    let mut support = Vec::new();
    for wm in &doc.support {
        let m = matching_from_doc(inst, &wm.assignment)?;
        support.push((m, parse_frac(&wm.weight)?));
    }
    let prob = RandomMatching::from_support(inst, &support)?;
    for e in &doc.edges {
        let i = inst
            .student_ids()
            .iter()
            .position(|x| x == &e.student)
            .ok_or_else(|| Error::Parse(format!("edge names unknown student {}", e.student)))?;
        let s = inst
            .school_ids()
            .iter()
            .position(|x| x == &e.school)
            .ok_or_else(|| Error::Parse(format!("edge names unknown school {}", e.school)))?;
        let v = parse_frac(&e.prob)?;
        if v != prob.get(i, s) {
            return Err(Error::Parse(format!(
                "edge ({}, {}) disagrees with support re-expansion",
                e.student, e.school
            )));
        }
    }
    Ok((prob, support))
}

#[derive(Debug, Serialize, Deserialize)]
struct MatchingFileDoc {
    version: u32,
    assignment: HashMap<String, String>,
}

pub fn serialize_matching(inst: &MarketInstance, m: &Matching) -> String {
    let doc = MatchingFileDoc {
        version: INSTANCE_FORMAT_VERSION,
        assignment: matching_to_doc(inst, m),
    };
    serde_json::to_string_pretty(&doc).expect("matching serializes")
}

pub fn parse_matching(inst: &MarketInstance, text: &str) -> Result<Matching> {
    let doc: MatchingFileDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("matching document: {e}")))?;
    matching_from_doc(inst, &doc.assignment)
}

#[derive(Debug, Serialize, Deserialize)]
struct DualDoc {
    student: String,
    school: String,
    mu: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct IterationDoc {
    round: usize,
    support_size: usize,
    master_objective: f64,
    master_average_rank: f64,
    artificial_active: bool,
    columns_added: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolutionDoc {
    version: u32,
    status: String,
    average_rank: f64,
    objective_total_rank: f64,
    edges: Vec<EdgeProbDoc>,
    decomposition: Vec<WeightedMatchingDoc>,
    duals: Vec<DualDoc>,
    delta: f64,
    iterations: Vec<IterationDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    drawn: Option<HashMap<String, String>>,
}

/// Emits the full optimizer output bundle: the improved table, its
/// decomposition, duals, iteration log, and optionally a drawn
/// matching.
pub fn serialize_solution(
    inst: &MarketInstance,
    q: &RandomMatching,
    sol: &LotterySolution,
    drawn: Option<&Matching>,
) -> String {
    let aug_names: Vec<String> = {
        // dual edges live on the augmented instance: last school index
        // maps to the reserved unassigned label
        let mut names: Vec<String> = inst.school_ids().to_vec();
        names.push("@unassigned".into());
        names
    };
    let doc = SolutionDoc {
        version: INSTANCE_FORMAT_VERSION,
        status: format!("{:?}", sol.status),
        average_rank: sol.average_rank,
        objective_total_rank: sol.objective_total_rank,
        edges: random_to_edges(inst, q),
        decomposition: sol
            .support
            .iter()
            .map(|(m, w)| WeightedMatchingDoc {
                weight: format_frac(*w),
                assignment: matching_to_doc(inst, m),
            })
            .collect(),
        duals: sol
            .edges
            .iter()
            .zip(&sol.mu)
            .map(|(&(i, s), &mu)| DualDoc {
                student: inst.student_id(i).to_string(),
                school: aug_names[s].clone(),
                mu,
            })
            .collect(),
        delta: sol.delta,
        iterations: sol
            .iterations
            .iter()
            .map(|l: &IterationLog| IterationDoc {
                round: l.round,
                support_size: l.support_size,
                master_objective: l.master_objective,
                master_average_rank: l.master_average_rank,
                artificial_active: l.artificial_active,
                columns_added: l.columns_added,
            })
            .collect(),
        drawn: drawn.map(|m| matching_to_doc(inst, m)),
    };
    serde_json::to_string_pretty(&doc).expect("solution serializes")
}

pub fn status_label(status: PirmesStatus) -> &'static str {
    match status {
        PirmesStatus::OptimalCertified => "optimal-certified",
        PirmesStatus::TimeLimit => "time-limit",
        PirmesStatus::RoundLimit => "round-limit",
        PirmesStatus::Stalled => "stalled",
        PirmesStatus::BaseNotCoverable => "base-not-coverable",
    }
}

/// Parses the delimited schools table: header `school,capacity`, one
/// school per line.
pub fn parse_schools_csv(text: &str) -> Result<Vec<(String, u32)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.to_lowercase().starts_with("school") {
            continue;
        }
        let mut parts = line.split(',');
        let id = parts
            .next()
            .filter(|s| !s.trim().is_empty())
            .ok_or_else(|| Error::Parse(format!("line {}: missing school id", lineno + 1)))?;
        let cap: u32 = parts
            .next()
            .ok_or_else(|| {
                Error::Parse(format!("line {}: school {} is missing a capacity", lineno + 1, id))
            })?
            .trim()
            .parse()
            .map_err(|_| {
                Error::Parse(format!("line {}: bad capacity for school {}", lineno + 1, id))
            })?;
        out.push((id.trim().to_string(), cap));
    }
    if out.is_empty() {
        return Err(Error::Parse("no schools in table".into()));
    }
    Ok(out)
}

/// Parses the delimited records table: header
/// `family,choices,siblings,distances`; choices and siblings are
/// `|`-separated school ids, distances are `school:value` pairs.
pub fn parse_records_csv(text: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 0 && line.to_lowercase().starts_with("family") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Parse(format!(
                "line {}: expected family,choices[,siblings[,distances]]",
                lineno + 1
            )));
        }
        let family = fields[0].trim().to_string();
        let choices: Vec<String> = fields[1]
            .split('|')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if choices.is_empty() {
            return Err(Error::Parse(format!(
                "line {}: family {family} lists no choices",
                lineno + 1
            )));
        }
        let siblings: Vec<String> = fields
            .get(2)
            .map(|f| {
                f.split('|').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
            })
            .unwrap_or_default();
        let mut distances = Vec::new();
        if let Some(f) = fields.get(3) {
            for pair in f.split('|').map(str::trim).filter(|s| !s.is_empty()) {
                let (school, value) = pair.split_once(':').ok_or_else(|| {
                    Error::Parse(format!("line {}: bad distance entry {pair:?}", lineno + 1))
                })?;
                let v: f64 = value.trim().parse().map_err(|_| {
                    Error::Parse(format!("line {}: bad distance value {value:?}", lineno + 1))
                })?;
                distances.push((school.trim().to_string(), v));
            }
        }
        out.push(RawRecord { family, choices, siblings, distances });
    }
    if out.is_empty() {
        return Err(Error::Parse("no records in table".into()));
    }
    Ok(out)
}
