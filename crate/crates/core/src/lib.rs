//! Value taxonomies as importance-annotated DAGs.
//!
//! A [`ValueTaxonomy`] relates abstract value concepts (label nodes) to verifiable
//! properties (leaf property nodes), each optionally carrying an importance in
//! `[-1, 1]`. On top of that the crate provides:
//!
//! * [`aggregation`]: the mean operator and a sampling harness for averaging laws;
//! * [`propagation`]: fixpoint importance propagation and coherence checking;
//! * [`context`]: context-based taxonomies built from per-context property importances;
//! * [`alignment`]: importance-weighted alignment of behaviour with a taxonomy;
//! * [`mutual_aid`]: a mutual-aid community domain with satisfaction degrees from event logs;
//! * [`io`]: JSON documents, JSON-lines event logs and DOT export.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! `f64`, with `F32` variants for single precision.

pub mod aggregation;
pub mod alignment;
pub mod context;
pub mod error;
pub mod holder;
pub mod io;
pub mod mutual_aid;
pub mod propagation;
pub mod scalar;
pub mod taxonomy;

pub use aggregation::{AggregationOperator, Law, LawReport, Mean, TupleSampler};
pub use alignment::{
    align, align_in_context, align_with_context, explain, AlignmentScheme, SatisfactionProvider,
};
pub use context::{build_context_taxonomy, context_holds, select_nodes, SelectionStrategy};
pub use error::{Error, ParseError, Result};
pub use holder::HolderRef;
pub use propagation::{check_coherence, propagate, CoherenceReport, PropagationFailure};
pub use scalar::{Scalar, Tolerance};
pub use taxonomy::{Edge, Node, NodeId, NodeKind, TaxonomyBuilder, ValidationReport, Violation};

pub type ValueTaxonomy = taxonomy::ValueTaxonomy<f64>;
pub type ValueTaxonomyF32 = taxonomy::ValueTaxonomy<f32>;
pub type Importance = taxonomy::Importance<f64>;
pub type ImportanceF32 = taxonomy::Importance<f32>;
pub type HolderRegistry = holder::HolderRegistry<f64>;
pub type HolderRegistryF32 = holder::HolderRegistry<f32>;
pub type ContextSpec = context::ContextSpec<f64>;
pub type ContextSpecF32 = context::ContextSpec<f32>;
pub type ContextTaxonomy = context::ContextTaxonomy<f64>;
pub type PropagationResult = propagation::PropagationResult<f64>;
pub type AlignmentReport = alignment::AlignmentReport<f64>;
pub type AlignmentReportF32 = alignment::AlignmentReport<f32>;
pub type DomainConfig = mutual_aid::DomainConfig<f64>;
pub type DomainConfigF32 = mutual_aid::DomainConfig<f32>;
pub type CommunityProvider = mutual_aid::CommunityProvider<f64>;
