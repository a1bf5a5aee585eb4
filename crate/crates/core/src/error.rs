use thiserror::Error;

use crate::taxonomy::{NodeId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("duplicate node `{0}`")]
    DuplicateNode(NodeId),
    #[error("duplicate edge `{parent}` -> `{child}`")]
    DuplicateEdge { parent: NodeId, child: NodeId },
    #[error("node id must be non-empty")]
    EmptyNodeId,
    #[error("invalid taxonomy: {}", render_violations(.0))]
    InvalidTaxonomy(Vec<Violation>),
    #[error("importance {0} outside [-1, 1]")]
    ImportanceOutOfRange(f64),

    #[error("aggregation over an empty tuple")]
    EmptyInput,

    #[error(
        "incoherent input at `{node}`: importance {actual} but children aggregate to {expected}"
    )]
    IncoherentInput {
        node: NodeId,
        expected: f64,
        actual: f64,
    },
    #[error("conflicting assignment at `{node}`: {first} vs {second}")]
    ConflictingAssignment {
        node: NodeId,
        first: f64,
        second: f64,
    },
    #[error("propagated importance {value} at `{node}` falls outside [-1, 1]")]
    RangeViolation { node: NodeId, value: f64 },

    #[error("`{0}` is not a property node of the taxonomy")]
    NotAPropertyNode(NodeId),
    #[error("no evaluator registered for property `{0}`")]
    MissingEvaluator(String),
    #[error("selection threshold {0} outside [-1, 1]")]
    InvalidThreshold(f64),

    #[error("taxonomy has no property nodes")]
    NoPropertyNodes,
    #[error("property node `{0}` has no importance")]
    MissingImportance(NodeId),
    #[error("no satisfaction degree for property node `{0}`")]
    MissingSatisfaction(NodeId),
    #[error("satisfaction degree {value} for `{node}` outside [-1, 1]")]
    SatisfactionOutOfRange { node: NodeId, value: f64 },

    #[error("ratio undefined for member `{member}`: {numerator} requests over zero {denominator}")]
    UndefinedRatio {
        member: String,
        numerator: u64,
        denominator: &'static str,
    },
    #[error("unknown member `{0}`")]
    UnknownMember(String),
    #[error("task distribution is empty")]
    EmptyDistribution,
    #[error("distribution supports differ: {left} vs {right} points")]
    SupportMismatch { left: usize, right: usize },
    #[error("invalid domain configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed event at {index}: {reason}")]
    MalformedEvent { index: usize, reason: String },

    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("unsupported schema version {0}")]
    SchemaVersionUnsupported(u32),
}

/// Document parse failure with enough location to find the offending record.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at {location}: {message}")]
pub struct ParseError {
    /// `line:column` for syntax errors, a field path such as `nodes[2].importance` otherwise.
    pub location: String,
    pub message: String,
}

impl ParseError {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            location: location.into(),
            message: message.into(),
        }
    }
}

fn render_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
