//! School-choice lottery engine.
//!
//! The crate models many-to-one matching markets with strict student
//! preferences and weak (tied) school priorities, and provides:
//!
//! * the market vocabulary: instances, matchings, random matchings,
//!   weak stability, stochastic dominance, rank statistics ([`market`]);
//! * baseline mechanisms: deferred acceptance under single or multiple
//!   tie-breaking, exact and sampled lottery distributions, and a
//!   simplified efficiency-adjusted DA ([`mech`]);
//! * stable improvement cycles: envy graphs, cycle detection and
//!   elimination, and a best-disjoint-cycle selection via min-cost
//!   circulation ([`sic`]);
//! * the lottery optimizer: a master LP over weakly stable matchings,
//!   two pricing variants with a cut-off-rank stability encoding, and
//!   the full column-generation loop ([`lottery`]);
//! * a desk-scale oracle that enumerates all weakly stable matchings
//!   and solves the same problems exactly ([`oracle`]);
//! * synthetic and record-based instance construction ([`gen`]),
//!   serialization ([`io`]), and an experiment harness ([`experiments`]).

pub mod experiments;
pub mod gen;
pub mod io;
pub mod lottery;
pub mod lp;
pub mod market;
pub mod mech;
pub mod milp;
pub mod oracle;
pub mod sic;

mod flow;

#[doc(hidden)]
pub mod fixtures;
#[doc(hidden)]
pub mod testgen;

use std::fmt;

/// Exact fraction used for probabilities and rank statistics.
///
/// Enumeration-born values (tie-breaking lotteries, fixture tables) are
/// exact; solver output is snapped to a 1e-9 grid before entering this
/// type, which keeps denominators small enough that i128 arithmetic
/// never overflows at the instance sizes this crate targets.
pub type Frac = num_rational::Ratio<i128>;

/// Tolerance for stochastic-dominance and improvement comparisons.
pub const EPS_SD: f64 = 1e-9;

/// Tolerance for LP-derived quantities (weights, duals, objectives).
pub const EPS_LP: f64 = 1e-6;

pub fn eps_sd_frac() -> Frac {
    Frac::new(1, 1_000_000_000)
}

#[derive(Debug)]
pub enum Error {
    /// The (student, school) pair is not mutually acceptable.
    NotAnEdge { student: String, school: String },
    /// An operation requiring strict priorities met an indifference class.
    NonStrictPriorities { school: String },
    InvalidMatching(String),
    InvalidRandomMatching(String),
    DimensionMismatch(String),
    /// A weakly stable matching was required.
    UnstableMatching { student: String, school: String },
    InvalidCycle(String),
    BudgetExceeded { what: String, detail: String },
    EmptySupport,
    Lp(String),
    Config(String),
    Parse(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotAnEdge { student, school } => {
                write!(f, "not an edge: student {student} does not list school {school}")
            }
            Error::NonStrictPriorities { school } => {
                write!(f, "school {school} has tied priorities; strict priorities required")
            }
            Error::InvalidMatching(msg) => write!(f, "invalid matching: {msg}"),
            Error::InvalidRandomMatching(msg) => write!(f, "invalid random matching: {msg}"),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::UnstableMatching { student, school } => {
                write!(f, "matching is not weakly stable: ({student}, {school}) blocks")
            }
            Error::InvalidCycle(msg) => write!(f, "invalid improvement cycle: {msg}"),
            Error::BudgetExceeded { what, detail } => {
                write!(f, "enumeration budget exceeded for {what}: {detail}")
            }
            Error::EmptySupport => write!(f, "support contains no matchings"),
            Error::Lp(msg) => write!(f, "lp solver: {msg}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
