//! Alignment of an entity's behaviour with a taxonomy: the importance-weighted average
//! of how well the behaviour satisfies each property node.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::context::{build_context_taxonomy, ContextSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::taxonomy::{Importance, Node, NodeId, ValueTaxonomy};

/// Degree to which `entity`'s behaviour satisfies (positive) or violates (negative) the
/// property behind `node`, in `[-1, 1]`.
pub trait SatisfactionProvider<T> {
    fn satisfaction(&self, entity: &str, node: &Node) -> Result<T>;
}

/// Fixed degrees keyed by property node, the same for every entity.
impl<T: Scalar> SatisfactionProvider<T> for BTreeMap<NodeId, T> {
    fn satisfaction(&self, _entity: &str, node: &Node) -> Result<T> {
        self.get(&node.id)
            .copied()
            .ok_or_else(|| Error::MissingSatisfaction(node.id.clone()))
    }
}

/// Adapts a closure `(entity, node) -> Result<T>`.
pub struct FnProvider<F>(pub F);

impl<T, F: Fn(&str, &Node) -> Result<T>> SatisfactionProvider<T> for FnProvider<F> {
    fn satisfaction(&self, entity: &str, node: &Node) -> Result<T> {
        (self.0)(entity, node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignmentScheme {
    /// `Σ I(p)·sd(e,p) / |N_φ|`.
    #[default]
    MeanWeighted,
    /// `Σ paths(p)·I(p)·sd(e,p) / |N_φ|`, not renormalised.
    PathWeighted,
}

impl fmt::Display for AlignmentScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlignmentScheme::MeanWeighted => "mean",
            AlignmentScheme::PathWeighted => "path",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyContribution<T> {
    pub node: NodeId,
    pub satisfaction: T,
    pub importance: T,
    pub paths: u64,
    pub contribution: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport<T> {
    pub entity: String,
    pub scheme: AlignmentScheme,
    pub score: T,
    /// One entry per property node, in ascending id order.
    pub per_property: Vec<PropertyContribution<T>>,
    /// Largest path count among the property nodes. Path-weighted scores lie in
    /// `[-max_paths, max_paths]`; mean-weighted scores in `[-1, 1]`.
    pub max_paths: u64,
}

pub fn align<T: Scalar>(
    entity: &str,
    taxonomy: &ValueTaxonomy<T>,
    provider: &impl SatisfactionProvider<T>,
    scheme: AlignmentScheme,
) -> Result<AlignmentReport<T>> {
    let paths = taxonomy.all_paths_counts()?;
    let mut per_property = Vec::new();
    for node in taxonomy.property_nodes() {
        let importance = taxonomy
            .importance(&node.id)
            .ok_or_else(|| Error::MissingImportance(node.id.clone()))?;
        let satisfaction = provider.satisfaction(entity, node)?;
        if satisfaction.is_nan() || satisfaction.abs() > T::one() {
            return Err(Error::SatisfactionOutOfRange {
                node: node.id.clone(),
                value: satisfaction.as_f64(),
            });
        }
        let weight = match scheme {
            AlignmentScheme::MeanWeighted => T::one(),
            AlignmentScheme::PathWeighted => {
                T::from_u64(paths[&node.id]).unwrap_or_else(T::max_value)
            }
        };
        per_property.push(PropertyContribution {
            node: node.id.clone(),
            satisfaction,
            importance,
            paths: paths[&node.id],
            contribution: weight * importance * satisfaction,
        });
    }
    if per_property.is_empty() {
        return Err(Error::NoPropertyNodes);
    }
    let total: T = per_property.iter().map(|p| p.contribution).sum();
    let score = total / T::from_count(per_property.len());
    let max_paths = per_property.iter().map(|p| p.paths).max().unwrap_or(1);
    Ok(AlignmentReport {
        entity: entity.to_owned(),
        scheme,
        score,
        per_property,
        max_paths,
    })
}

/// Aligns against every property node of `general`, weighted by `ctx`'s importances.
///
/// Unlike aligning with the built context taxonomy, properties with zero or negative
/// context importance take part, so behaviour that satisfies a detested property
/// lowers the score.
pub fn align_with_context<T: Scalar>(
    entity: &str,
    general: &ValueTaxonomy<T>,
    ctx: &ContextSpec<T>,
    provider: &impl SatisfactionProvider<T>,
    scheme: AlignmentScheme,
) -> Result<AlignmentReport<T>> {
    general.validate().into_result()?;
    let importances = ctx.importances_for(general)?;
    let weighted = general.with_importance(importances.into_iter().map(|(id, v)| {
        (
            id,
            Importance::new(v).expect("context importances are in range"),
        )
    }))?;
    align(entity, &weighted, provider, scheme)
}

/// Aligns against the taxonomy built for `ctx`, so only selected properties count.
pub fn align_in_context<T: Scalar>(
    entity: &str,
    general: &ValueTaxonomy<T>,
    ctx: &ContextSpec<T>,
    provider: &impl SatisfactionProvider<T>,
    scheme: AlignmentScheme,
) -> Result<AlignmentReport<T>> {
    let built = build_context_taxonomy(general, ctx)?;
    align(entity, &built.taxonomy, provider, scheme)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation<T> {
    /// Contributions by decreasing magnitude, ties by node id.
    pub rows: Vec<PropertyContribution<T>>,
    pub total: T,
    pub score: T,
}

pub fn explain<T: Scalar>(report: &AlignmentReport<T>) -> Explanation<T> {
    let mut rows = report.per_property.clone();
    rows.sort_by(|a, b| {
        b.contribution
            .abs()
            .partial_cmp(&a.contribution.abs())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.node.cmp(&b.node))
    });
    let total = rows.iter().map(|r| r.contribution).sum();
    Explanation {
        rows,
        total,
        score: report.score,
    }
}
