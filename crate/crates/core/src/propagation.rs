//! Fixpoint propagation of importance through a taxonomy under the mean operator,
//! plus a standalone coherence check for any aggregation operator.
//!
//! Each outer pass walks the graph depth-first from the roots (children in ascending
//! id order, every node once per pass) and applies to every visited node `n` with
//! children `C`, assigned children `C'` and unassigned children `C''`:
//!
//! * `n` assigned, `C'' = ∅`: `I(n)` must equal `mean(C)`.
//! * `n` assigned, `C'' = {c}`: `I(c) = I(n)·|C| − ΣC'`.
//! * `n` assigned, `|C''| > 1`, nothing below `C''` assigned: every `c ∈ C''` gets
//!   `(I(n)·|C| − ΣC') / |C''|`.
//! * `n` unassigned, `C'' = ∅`: `I(n) = mean(C')`.
//! * `n` unassigned, `C' ≠ ∅`, nothing below `C''` assigned: `I(n) = mean(C')` and
//!   every `c ∈ C''` gets the same value.
//!
//! Passes repeat until one assigns nothing.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::aggregation::{AggregationOperator, Mean};
use crate::error::Error;
use crate::scalar::{Scalar, Tolerance};
use crate::taxonomy::{Importance, NodeId, ValueTaxonomy};

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult<T> {
    /// Input taxonomy with its importance mapping extended.
    pub taxonomy: ValueTaxonomy<T>,
    /// Newly assigned values in assignment order.
    pub assigned: Vec<(NodeId, T)>,
    /// Outer passes run, including the final pass that assigned nothing.
    pub iterations: usize,
}

/// A failed run. `assigned` holds what was derived before the failure was detected.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct PropagationFailure<T: std::fmt::Debug> {
    #[source]
    pub error: Error,
    pub assigned: Vec<(NodeId, T)>,
    pub iterations: usize,
}

impl<T: std::fmt::Debug> From<PropagationFailure<T>> for Error {
    fn from(failure: PropagationFailure<T>) -> Self {
        failure.error
    }
}

pub fn propagate<T: Scalar>(
    taxonomy: &ValueTaxonomy<T>,
) -> Result<PropagationResult<T>, PropagationFailure<T>> {
    propagate_with_tolerance(taxonomy, T::coherence_tolerance())
}

pub fn propagate_with_tolerance<T: Scalar>(
    taxonomy: &ValueTaxonomy<T>,
    tolerance: Tolerance<T>,
) -> Result<PropagationResult<T>, PropagationFailure<T>> {
    let mut run = Run::new(taxonomy, tolerance);
    let fail = |run: Run<'_, T>, error: Error| PropagationFailure {
        error,
        assigned: run.assigned,
        iterations: run.iterations,
    };
    if let Err(e) = taxonomy.validate().into_result() {
        return Err(fail(run, e));
    }
    let roots = taxonomy.roots_unchecked();
    let limit = taxonomy.len() + 1;
    loop {
        run.iterations += 1;
        let before = run.assigned.len();
        if let Err(e) = run.pass(&roots) {
            return Err(fail(run, e));
        }
        if run.assigned.len() == before {
            break;
        }
        debug_assert!(
            run.iterations <= limit,
            "every non-final pass assigns a new node"
        );
    }
    let importance = run.values.iter().map(|(id, v)| {
        (
            id.clone(),
            Importance::new(*v).expect("values are range-checked on assignment"),
        )
    });
    let out = taxonomy
        .with_importance(importance)
        .expect("only known nodes are assigned");
    Ok(PropagationResult {
        taxonomy: out,
        assigned: run.assigned,
        iterations: run.iterations,
    })
}

struct Run<'a, T> {
    taxonomy: &'a ValueTaxonomy<T>,
    tolerance: Tolerance<T>,
    values: BTreeMap<NodeId, T>,
    original: BTreeSet<NodeId>,
    assigned: Vec<(NodeId, T)>,
    iterations: usize,
}

impl<'a, T: Scalar> Run<'a, T> {
    fn new(taxonomy: &'a ValueTaxonomy<T>, tolerance: Tolerance<T>) -> Self {
        let values: BTreeMap<NodeId, T> = taxonomy
            .importances()
            .iter()
            .map(|(id, i)| (id.clone(), i.get()))
            .collect();
        let original = values.keys().cloned().collect();
        Self {
            taxonomy,
            tolerance,
            values,
            original,
            assigned: Vec::new(),
            iterations: 0,
        }
    }

    fn pass(&mut self, roots: &BTreeSet<NodeId>) -> Result<(), Error> {
        let mut visited = BTreeSet::new();
        let mut stack: Vec<NodeId> = roots.iter().rev().cloned().collect();
        while let Some(node) = stack.pop() {
            if !visited.insert(node.clone()) {
                continue;
            }
            self.visit(&node)?;
            let children = self.taxonomy.children_unchecked(&node);
            stack.extend(
                children
                    .iter()
                    .rev()
                    .filter(|c| !visited.contains(*c))
                    .cloned(),
            );
        }
        Ok(())
    }

    fn visit(&mut self, node: &NodeId) -> Result<(), Error> {
        let children = self.taxonomy.children_unchecked(node);
        if children.is_empty() {
            return Ok(());
        }
        let (set, unset): (Vec<&NodeId>, Vec<&NodeId>) =
            children.iter().partition(|c| self.values.contains_key(*c));
        let set_values: Vec<T> = set.iter().map(|c| self.values[*c]).collect();
        let unset: Vec<NodeId> = unset.into_iter().cloned().collect();

        match self.values.get(node).copied() {
            Some(value) => {
                if unset.is_empty() {
                    self.check(node, value, &set, &set_values)
                } else if unset.len() == 1 || !self.any_assigned_below(&unset) {
                    let share = Mean
                        .invert(value, &set_values, unset.len())
                        .expect("mean inverts for at least one unknown");
                    unset.iter().try_for_each(|c| self.assign(c, share))
                } else {
                    Ok(())
                }
            }
            None => {
                if set.is_empty() {
                    return Ok(());
                }
                let mean = Mean.apply(&set_values)?;
                if unset.is_empty() {
                    self.assign(node, mean)
                } else if !self.any_assigned_below(&unset) {
                    self.assign(node, mean)?;
                    unset.iter().try_for_each(|c| self.assign(c, mean))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn any_assigned_below(&self, nodes: &[NodeId]) -> bool {
        nodes.iter().any(|n| {
            self.taxonomy
                .descendants_unchecked(n)
                .iter()
                .any(|d| self.values.contains_key(d))
        })
    }

    /// Coherence of a fully assigned parent. A mismatch among user-supplied values is
    /// incoherent input; one involving a derived value means two propagation routes
    /// disagree.
    fn check(
        &self,
        node: &NodeId,
        value: T,
        children: &[&NodeId],
        child_values: &[T],
    ) -> Result<(), Error> {
        let expected = Mean.apply(child_values)?;
        if self.tolerance.eq(value, expected) {
            return Ok(());
        }
        let derived_child = children.iter().position(|c| !self.original.contains(*c));
        let error = match derived_child {
            Some(at) => {
                let others: Vec<T> = child_values
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != at)
                    .map(|(_, v)| *v)
                    .collect();
                let implied = Mean.invert(value, &others, 1).expect("one unknown");
                Error::ConflictingAssignment {
                    node: children[at].clone(),
                    first: child_values[at].as_f64(),
                    second: implied.as_f64(),
                }
            }
            None if !self.original.contains(node) => Error::ConflictingAssignment {
                node: node.clone(),
                first: value.as_f64(),
                second: expected.as_f64(),
            },
            None => Error::IncoherentInput {
                node: node.clone(),
                expected: expected.as_f64(),
                actual: value.as_f64(),
            },
        };
        Err(error)
    }

    fn assign(&mut self, node: &NodeId, value: T) -> Result<(), Error> {
        let bound = T::one() + self.tolerance.absolute;
        if value.is_nan() || value.abs() > bound {
            return Err(Error::RangeViolation {
                node: node.clone(),
                value: value.as_f64(),
            });
        }
        // Rounding noise at the boundary is snapped back into range.
        let value = value.max(-T::one()).min(T::one());
        if let Some(&existing) = self.values.get(node) {
            if self.tolerance.eq(existing, value) {
                return Ok(());
            }
            return Err(Error::ConflictingAssignment {
                node: node.clone(),
                first: existing.as_f64(),
                second: value.as_f64(),
            });
        }
        self.values.insert(node.clone(), value);
        self.assigned.push((node.clone(), value));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceViolation<T> {
    pub parent: NodeId,
    pub expected: T,
    pub actual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport<T> {
    pub violations: Vec<CoherenceViolation<T>>,
    /// Parents whose own or some child's importance is unassigned.
    pub unevaluable: Vec<NodeId>,
    /// Violating nodes whose importance alone explains every violation: replacing it
    /// with the aggregate of its children would leave the taxonomy coherent. A single
    /// corrupted value shows up here even though its parents' equations break too.
    pub culprits: Vec<NodeId>,
}

impl<T> CoherenceReport<T> {
    pub fn is_coherent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares every parent's importance with `op` over its children.
pub fn check_coherence<T: Scalar>(
    taxonomy: &ValueTaxonomy<T>,
    op: &impl AggregationOperator<T>,
    tolerance: Tolerance<T>,
) -> CoherenceReport<T> {
    let mut violations = Vec::new();
    let mut unevaluable = Vec::new();
    for id in taxonomy.node_ids() {
        let children = taxonomy.children_unchecked(id);
        if children.is_empty() {
            continue;
        }
        let child_values: Option<Vec<T>> =
            children.iter().map(|c| taxonomy.importance(c)).collect();
        let (Some(actual), Some(child_values)) = (taxonomy.importance(id), child_values) else {
            unevaluable.push(id.clone());
            continue;
        };
        let Ok(expected) = op.apply(&child_values) else {
            unevaluable.push(id.clone());
            continue;
        };
        if !tolerance.eq(actual, expected) {
            violations.push(CoherenceViolation {
                parent: id.clone(),
                expected,
                actual,
            });
        }
    }
    let culprits = violations
        .iter()
        .filter(|v| repair_restores_coherence(taxonomy, op, tolerance, v, &violations))
        .map(|v| v.parent.clone())
        .collect();
    CoherenceReport {
        violations,
        unevaluable,
        culprits,
    }
}

fn repair_restores_coherence<T: Scalar>(
    taxonomy: &ValueTaxonomy<T>,
    op: &impl AggregationOperator<T>,
    tolerance: Tolerance<T>,
    candidate: &CoherenceViolation<T>,
    violations: &[CoherenceViolation<T>],
) -> bool {
    let node = &candidate.parent;
    let parents = taxonomy
        .parents(node)
        .expect("node comes from the taxonomy");
    if violations
        .iter()
        .any(|v| v.parent != *node && !parents.contains(&v.parent))
    {
        return false;
    }
    parents.iter().all(|p| {
        let values: Option<Vec<T>> = taxonomy
            .children_unchecked(p)
            .iter()
            .map(|c| {
                if c == node {
                    Some(candidate.expected)
                } else {
                    taxonomy.importance(c)
                }
            })
            .collect();
        match (
            taxonomy.importance(p),
            values.and_then(|v| op.apply(&v).ok()),
        ) {
            (Some(actual), Some(expected)) => tolerance.eq(actual, expected),
            _ => true,
        }
    })
}
