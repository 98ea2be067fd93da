use thiserror::Error;

use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("network has no links")]
    EmptyNetwork,
    #[error("link {link} references vertex {vertex}, but the graph has {num_vertices} vertices")]
    DanglingVertex {
        link: usize,
        vertex: usize,
        num_vertices: usize,
    },
    #[error("link {0} is a self-loop")]
    SelfLoop(usize),
    #[error("link {0} lists itself in its conflict set")]
    SelfConflict(usize),
    #[error("conflict sets are asymmetric: link {from} lists link {to}, but link {to} does not list link {from}")]
    AsymmetricConflict { from: usize, to: usize },
    #[error("link {link} references unknown link {other}")]
    UnknownLink { link: usize, other: usize },
    #[error("k-hop interference requires k >= 1")]
    InvalidHopCount,
    #[error("{what}: enumeration of {count} items exceeds the cap of {cap}")]
    EnumerationLimit {
        what: &'static str,
        count: u128,
        cap: u128,
    },
    #[error("{what}: expected {expected} entries, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid radio for link {link}: {reason}")]
    InvalidRadio { link: usize, reason: String },
    #[error("power {power} is not a configured level")]
    NotALevel { power: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("horizon of {slots} slots is too short for a stability verdict (need at least {min})")]
    HorizonTooShort { slots: u64, min: u64 },
    #[error("slot {slot}: {source}")]
    AtSlot {
        slot: u64,
        #[source]
        source: Box<Error>,
    },
    #[error("linear program failed: {0}")]
    Solver(#[from] SolverError),
    #[error("scenario: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error (or the error wrapped by [`Error::AtSlot`]) is an
    /// enumeration cap.
    pub fn is_enumeration_limit(&self) -> bool {
        match self {
            Error::EnumerationLimit { .. } => true,
            Error::AtSlot { source, .. } => source.is_enumeration_limit(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
