//! Context-based taxonomies: keep the branches of a general taxonomy that lead to the
//! property nodes relevant in a context, then propagate context importances upward.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::propagation::{propagate, PropagationFailure};
use crate::scalar::Scalar;
use crate::taxonomy::{Importance, NodeId, ValueTaxonomy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionStrategy<T> {
    /// Keep nodes whose importance is strictly above the threshold.
    PositiveThreshold(T),
    /// Exact two-cluster 1-D k-means; keep the cluster with the higher mean.
    KMeansTwo,
}

impl<T: Scalar> Default for SelectionStrategy<T> {
    fn default() -> Self {
        Self::PositiveThreshold(T::zero())
    }
}

impl<T: Scalar> SelectionStrategy<T> {
    pub fn threshold(threshold: T) -> Result<Self> {
        if threshold.is_nan() || threshold.abs() > T::one() {
            return Err(Error::InvalidThreshold(threshold.as_f64()));
        }
        Ok(Self::PositiveThreshold(threshold))
    }
}

/// A context: the properties that must hold for it to apply, and how important each
/// property node of the general taxonomy is within it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSpec<T> {
    pub id: String,
    pub defining_properties: BTreeSet<String>,
    /// Entries may be negative (detested in this context); missing entries count as 0.
    pub property_importance: BTreeMap<NodeId, Importance<T>>,
    pub selection: SelectionStrategy<T>,
}

impl<T: Scalar> ContextSpec<T> {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            defining_properties: BTreeSet::new(),
            property_importance: BTreeMap::new(),
            selection: SelectionStrategy::default(),
        }
    }

    pub fn with_importance(mut self, node: &str, value: T) -> Result<Self> {
        self.property_importance
            .insert(NodeId::new(node)?, Importance::new(value)?);
        Ok(self)
    }

    pub fn with_defining_property(mut self, property: impl Into<String>) -> Self {
        self.defining_properties.insert(property.into());
        self
    }

    pub fn with_selection(mut self, selection: SelectionStrategy<T>) -> Self {
        self.selection = selection;
        self
    }

    /// Importance of every property node of `general` in this context, defaulting to 0.
    /// Fails if the context names something that is not a property node of `general`.
    pub fn importances_for(&self, general: &ValueTaxonomy<T>) -> Result<BTreeMap<NodeId, T>> {
        for id in self.property_importance.keys() {
            if !general.node(id).is_some_and(|n| n.is_property()) {
                return Err(Error::NotAPropertyNode(id.clone()));
            }
        }
        Ok(general
            .property_nodes()
            .map(|n| {
                let value = self
                    .property_importance
                    .get(&n.id)
                    .map_or(T::zero(), |i| i.get());
                (n.id.clone(), value)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContextWarning {
    /// No property node was selected; the built taxonomy is empty.
    EmptySelection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextTaxonomy<T> {
    pub taxonomy: ValueTaxonomy<T>,
    pub selected: BTreeSet<NodeId>,
    pub warnings: Vec<ContextWarning>,
}

/// Builds the context taxonomy of `ctx` over `general`.
///
/// The result holds the selected property nodes, every node on a path from a root of
/// `general` to one of them, and all of `general`'s edges among those nodes. Only the
/// selected property nodes start with an importance (the context one); the rest is
/// propagated. Importances stored in `general` are ignored.
pub fn build_context_taxonomy<T: Scalar>(
    general: &ValueTaxonomy<T>,
    ctx: &ContextSpec<T>,
) -> Result<ContextTaxonomy<T>> {
    general.validate().into_result()?;
    let importances = ctx.importances_for(general)?;
    let selected = select_nodes(&importances, ctx.selection)?;
    if selected.is_empty() {
        return Ok(ContextTaxonomy {
            taxonomy: ValueTaxonomy::empty(),
            selected,
            warnings: vec![ContextWarning::EmptySelection],
        });
    }

    let mut keep = selected.clone();
    for id in &selected {
        keep.extend(general.ancestors(id)?);
    }
    let seeded = general
        .induced(&keep)
        .with_importance(selected.iter().map(|id| {
            (
                id.clone(),
                Importance::new(importances[id]).expect("in range"),
            )
        }))?;
    let propagated = propagate(&seeded).map_err(|f: PropagationFailure<T>| f.error)?;
    Ok(ContextTaxonomy {
        taxonomy: propagated.taxonomy,
        selected,
        warnings: Vec::new(),
    })
}

/// Picks the relevant nodes from an importance mapping.
pub fn select_nodes<T: Scalar>(
    importances: &BTreeMap<NodeId, T>,
    strategy: SelectionStrategy<T>,
) -> Result<BTreeSet<NodeId>> {
    match strategy {
        SelectionStrategy::PositiveThreshold(threshold) => Ok(importances
            .iter()
            .filter(|(_, v)| **v > threshold)
            .map(|(id, _)| id.clone())
            .collect()),
        SelectionStrategy::KMeansTwo => {
            if importances.is_empty() {
                return Err(Error::EmptyInput);
            }
            let values: Vec<T> = importances.values().copied().collect();
            let cut = kmeans_two_cut(&values);
            Ok(importances
                .iter()
                .filter(|(_, v)| **v >= cut)
                .map(|(id, _)| id.clone())
                .collect())
        }
    }
}

/// Lower bound of the higher cluster of the optimal 2-means partition of `values`.
///
/// In one dimension an optimal partition is a split of the sorted values, so every
/// split between two distinct values is scored by within-cluster sum of squares; ties
/// keep the lowest split. With a single distinct value there is nothing to split and
/// the cut admits everything.
fn kmeans_two_cut<T: Scalar>(values: &[T]) -> T {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("importances are never NaN"));
    let n = sorted.len();
    let mut prefix = vec![(T::zero(), T::zero()); n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = (prefix[i].0 + v, prefix[i].1 + v * v);
    }
    let sse = |lo: usize, hi: usize| {
        let count = T::from_count(hi - lo);
        let sum = prefix[hi].0 - prefix[lo].0;
        let sq = prefix[hi].1 - prefix[lo].1;
        sq - sum * sum / count
    };
    let mut best: Option<(T, usize)> = None;
    for k in 1..n {
        if sorted[k - 1] == sorted[k] {
            continue;
        }
        let cost = sse(0, k) + sse(k, n);
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, k));
        }
    }
    match best {
        Some((_, k)) => sorted[k],
        None => sorted[0],
    }
}

/// Evaluates named properties against a world state of type `W`.
type Evaluator<W> = Box<dyn Fn(&W) -> bool + Send + Sync>;

pub struct PropertyEvaluators<W> {
    evaluators: BTreeMap<String, Evaluator<W>>,
}

impl<W> Default for PropertyEvaluators<W> {
    fn default() -> Self {
        Self {
            evaluators: BTreeMap::new(),
        }
    }
}

impl<W> PropertyEvaluators<W> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        property: impl Into<String>,
        f: impl Fn(&W) -> bool + Send + Sync + 'static,
    ) {
        self.evaluators.insert(property.into(), Box::new(f));
    }

    pub fn evaluate(&self, property: &str, world: &W) -> Result<bool> {
        let f = self
            .evaluators
            .get(property)
            .ok_or_else(|| Error::MissingEvaluator(property.to_owned()))?;
        Ok(f(world))
    }
}

/// Whether every defining property of `ctx` holds in `world`. Vacuously true for
/// contexts without defining properties.
pub fn context_holds<T, W>(
    ctx: &ContextSpec<T>,
    evaluators: &PropertyEvaluators<W>,
    world: &W,
) -> Result<bool> {
    // Resolve every evaluator first so a missing one is reported even after a false.
    let results: Vec<bool> = ctx
        .defining_properties
        .iter()
        .map(|p| evaluators.evaluate(p, world))
        .collect::<Result<_>>()?;
    Ok(results.into_iter().all(|b| b))
}
