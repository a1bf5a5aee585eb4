//! Value taxonomies: importance-annotated DAGs of label and property nodes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Identifier of a node, unique within one taxonomy. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyNodeId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for NodeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl TryFrom<String> for NodeId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl TryFrom<&str> for NodeId {
    type Error = Error;
    fn try_from(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> String {
        id.0
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Importance of a node, always in `[-1, 1]`: -1 detested, 0 indifferent, 1 utmost importance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Importance<T>(T);

impl<T: Scalar> Importance<T> {
    pub fn new(value: T) -> Result<Self> {
        if value.is_nan() || value < -T::one() || value > T::one() {
            return Err(Error::ImportanceOutOfRange(value.as_f64()));
        }
        Ok(Self(value))
    }

    pub fn get(self) -> T {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// Abstract value concept with no direct computational meaning.
    Label { text: String },
    /// Verifiable property; `property_id` refers into a property catalog.
    Property { property_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl Node {
    pub fn label(id: NodeId, text: impl Into<String>) -> Self {
        Self {
            id,
            kind: NodeKind::Label { text: text.into() },
        }
    }

    pub fn property(id: NodeId, property_id: impl Into<String>) -> Self {
        Self {
            id,
            kind: NodeKind::Property {
                property_id: property_id.into(),
            },
        }
    }

    pub fn is_property(&self) -> bool {
        matches!(self.kind, NodeKind::Property { .. })
    }

    pub fn property_id(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Property { property_id } => Some(property_id),
            NodeKind::Label { .. } => None,
        }
    }

    pub fn label_text(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Label { text } => Some(text),
            NodeKind::Property { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub parent: NodeId,
    pub child: NodeId,
}

impl Edge {
    pub fn new(parent: NodeId, child: NodeId) -> Self {
        Self { parent, child }
    }
}

/// A structural rule broken by a candidate taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    DanglingEdge {
        parent: NodeId,
        child: NodeId,
        missing: NodeId,
    },
    DuplicateEdge {
        parent: NodeId,
        child: NodeId,
    },
    PropertyNodeNotLeaf {
        node: NodeId,
        child: NodeId,
    },
    /// Nodes along one cycle, starting and ending at the same node.
    CycleDetected {
        cycle: Vec<NodeId>,
    },
    ImportanceForUnknownNode {
        node: NodeId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingEdge {
                parent,
                child,
                missing,
            } => {
                write!(f, "DanglingEdge: edge `{parent}` -> `{child}` references missing node `{missing}`")
            }
            Violation::DuplicateEdge { parent, child } => {
                write!(
                    f,
                    "DuplicateEdge: `{parent}` -> `{child}` appears more than once"
                )
            }
            Violation::PropertyNodeNotLeaf { node, child } => {
                write!(
                    f,
                    "PropertyNodeNotLeaf: property node `{node}` has child `{child}`"
                )
            }
            Violation::CycleDetected { cycle } => {
                let path: Vec<&str> = cycle.iter().map(NodeId::as_str).collect();
                write!(f, "CycleDetected: {}", path.join(" -> "))
            }
            Violation::ImportanceForUnknownNode { node } => {
                write!(
                    f,
                    "ImportanceForUnknownNode: importance given for missing node `{node}`"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidTaxonomy(self.violations))
        }
    }
}

/// An importance-annotated DAG `(N, E, I)` of label and property nodes.
///
/// Instances built through [`TaxonomyBuilder::build`] or [`ValueTaxonomy::from_parts`] are
/// valid; [`ValueTaxonomy::from_parts_unchecked`] admits arbitrary candidates so that
/// [`ValueTaxonomy::validate`] can report on them. Queries that depend on the graph
/// being a DAG re-check validity and return [`Error::InvalidTaxonomy`] otherwise.
#[derive(Debug, Clone)]
pub struct ValueTaxonomy<T> {
    nodes: BTreeMap<NodeId, Node>,
    edges: Vec<Edge>,
    importance: BTreeMap<NodeId, Importance<T>>,
    children: BTreeMap<NodeId, BTreeSet<NodeId>>,
    parents: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl<T: PartialEq> PartialEq for ValueTaxonomy<T> {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges.iter().collect::<BTreeSet<_>>()
                == other.edges.iter().collect::<BTreeSet<_>>()
            && self.importance == other.importance
    }
}

impl<T: Scalar> Default for ValueTaxonomy<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Scalar> ValueTaxonomy<T> {
    pub fn empty() -> Self {
        Self {
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            importance: BTreeMap::new(),
            children: BTreeMap::new(),
            parents: BTreeMap::new(),
        }
    }

    /// Builds and validates a taxonomy from its parts.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = Node>,
        edges: impl IntoIterator<Item = Edge>,
        importance: impl IntoIterator<Item = (NodeId, Importance<T>)>,
    ) -> Result<Self> {
        let taxonomy = Self::from_parts_unchecked(nodes, edges, importance)?;
        taxonomy.validate().into_result()?;
        Ok(taxonomy)
    }

    /// Assembles a candidate without structural validation. Only duplicate node ids
    /// are rejected, since a node map cannot represent them.
    pub fn from_parts_unchecked(
        nodes: impl IntoIterator<Item = Node>,
        edges: impl IntoIterator<Item = Edge>,
        importance: impl IntoIterator<Item = (NodeId, Importance<T>)>,
    ) -> Result<Self> {
        let mut node_map = BTreeMap::new();
        for node in nodes {
            if node_map.contains_key(&node.id) {
                return Err(Error::DuplicateNode(node.id));
            }
            node_map.insert(node.id.clone(), node);
        }
        let edges: Vec<Edge> = edges.into_iter().collect();
        let mut children: BTreeMap<NodeId, BTreeSet<NodeId>> = node_map
            .keys()
            .map(|id| (id.clone(), BTreeSet::new()))
            .collect();
        let mut parents = children.clone();
        for edge in &edges {
            children
                .entry(edge.parent.clone())
                .or_default()
                .insert(edge.child.clone());
            parents
                .entry(edge.child.clone())
                .or_default()
                .insert(edge.parent.clone());
        }
        Ok(Self {
            nodes: node_map,
            edges,
            importance: importance.into_iter().collect(),
            children,
            parents,
        })
    }

    pub fn builder() -> TaxonomyBuilder<T> {
        TaxonomyBuilder::new()
    }

    /// Checks every structural rule; violations are data, never an `Err`.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen = BTreeSet::new();
        let mut reported_dupes = BTreeSet::new();
        for edge in &self.edges {
            for end in [&edge.parent, &edge.child] {
                if !self.nodes.contains_key(end) {
                    violations.push(Violation::DanglingEdge {
                        parent: edge.parent.clone(),
                        child: edge.child.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if !seen.insert(edge) && reported_dupes.insert(edge) {
                violations.push(Violation::DuplicateEdge {
                    parent: edge.parent.clone(),
                    child: edge.child.clone(),
                });
            }
            if self.nodes.get(&edge.parent).is_some_and(Node::is_property) {
                violations.push(Violation::PropertyNodeNotLeaf {
                    node: edge.parent.clone(),
                    child: edge.child.clone(),
                });
            }
        }
        if let Some(cycle) = self.find_cycle() {
            violations.push(Violation::CycleDetected { cycle });
        }
        for id in self.importance.keys() {
            if !self.nodes.contains_key(id) {
                violations.push(Violation::ImportanceForUnknownNode { node: id.clone() });
            }
        }
        violations.sort();
        violations.dedup();
        ValidationReport { violations }
    }

    fn require_valid(&self) -> Result<()> {
        self.validate().into_result()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> + '_ {
        self.nodes.keys()
    }

    pub fn property_nodes(&self) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.values().filter(|n| n.is_property())
    }

    /// Distinct edges in ascending `(parent, child)` order.
    pub fn edge_set(&self) -> BTreeSet<&Edge> {
        self.edges.iter().collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edge_set().into_iter()
    }

    pub fn importance(&self, id: &NodeId) -> Option<T> {
        self.importance.get(id).map(|i| i.get())
    }

    pub fn importances(&self) -> &BTreeMap<NodeId, Importance<T>> {
        &self.importance
    }

    /// Nodes with no incoming edge.
    pub fn roots(&self) -> Result<BTreeSet<NodeId>> {
        self.require_valid()?;
        Ok(self.roots_unchecked())
    }

    pub(crate) fn roots_unchecked(&self) -> BTreeSet<NodeId> {
        self.nodes
            .keys()
            .filter(|id| self.parents.get(*id).is_none_or(BTreeSet::is_empty))
            .cloned()
            .collect()
    }

    pub fn children(&self, id: &NodeId) -> Result<&BTreeSet<NodeId>> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.clone()));
        }
        Ok(&self.children[id])
    }

    pub fn parents(&self, id: &NodeId) -> Result<&BTreeSet<NodeId>> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.clone()));
        }
        Ok(&self.parents[id])
    }

    pub(crate) fn children_unchecked(&self, id: &NodeId) -> &BTreeSet<NodeId> {
        &self.children[id]
    }

    /// All strict ancestors of `id`.
    pub fn ancestors(&self, id: &NodeId) -> Result<BTreeSet<NodeId>> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.clone()));
        }
        Ok(self.reach(id, &self.parents))
    }

    /// All strict descendants of `id`.
    pub fn descendants(&self, id: &NodeId) -> Result<BTreeSet<NodeId>> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.clone()));
        }
        Ok(self.reach(id, &self.children))
    }

    pub(crate) fn descendants_unchecked(&self, id: &NodeId) -> BTreeSet<NodeId> {
        self.reach(id, &self.children)
    }

    fn reach(
        &self,
        start: &NodeId,
        adjacency: &BTreeMap<NodeId, BTreeSet<NodeId>>,
    ) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<&NodeId> = vec![start];
        while let Some(current) = stack.pop() {
            for next in adjacency.get(current).into_iter().flatten() {
                if out.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
        out
    }

    /// Number of distinct directed paths from any root to `id`; 1 for a root.
    pub fn paths_count(&self, id: &NodeId) -> Result<u64> {
        if !self.nodes.contains_key(id) {
            return Err(Error::UnknownNode(id.clone()));
        }
        Ok(self.all_paths_counts()?[id])
    }

    /// [`ValueTaxonomy::paths_count`] for every node at once. Saturates at `u64::MAX`.
    pub fn all_paths_counts(&self) -> Result<BTreeMap<NodeId, u64>> {
        self.require_valid()?;
        let mut counts = BTreeMap::new();
        for id in self.topological_order_unchecked() {
            let parents = &self.parents[&id];
            let count = if parents.is_empty() {
                1
            } else {
                parents
                    .iter()
                    .fold(0u64, |acc, p| acc.saturating_add(counts[p]))
            };
            counts.insert(id, count);
        }
        Ok(counts)
    }

    /// Parents before children; ties in ascending id order.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        self.require_valid()?;
        Ok(self.topological_order_unchecked())
    }

    /// Kahn's algorithm over known nodes. Nodes on a cycle are left out.
    fn topological_order_unchecked(&self) -> Vec<NodeId> {
        let mut indegree: BTreeMap<&NodeId, usize> = self
            .nodes
            .keys()
            .map(|id| {
                let known = self.parents[id]
                    .iter()
                    .filter(|p| self.nodes.contains_key(*p))
                    .count();
                (id, known)
            })
            .collect();
        let mut ready: VecDeque<&NodeId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop_front() {
            order.push(id.clone());
            for child in &self.children[id] {
                if let Some(d) = indegree.get_mut(child) {
                    *d -= 1;
                    if *d == 0 {
                        ready.push_back(child);
                    }
                }
            }
        }
        order
    }

    fn find_cycle(&self) -> Option<Vec<NodeId>> {
        let ordered: BTreeSet<NodeId> = self.topological_order_unchecked().into_iter().collect();
        let start = self.nodes.keys().find(|id| !ordered.contains(*id))?;
        // Every node left over by Kahn's algorithm has a parent that is also left over,
        // so walking parents must revisit a node.
        let mut path = vec![start.clone()];
        let mut position = BTreeMap::from([(start.clone(), 0usize)]);
        let mut current = start.clone();
        loop {
            let next = self.parents[&current]
                .iter()
                .find(|p| self.nodes.contains_key(*p) && !ordered.contains(*p))?
                .clone();
            if let Some(&at) = position.get(&next) {
                let mut cycle: Vec<NodeId> = path[at..].to_vec();
                cycle.reverse();
                cycle.push(cycle[0].clone());
                return Some(cycle);
            }
            position.insert(next.clone(), path.len());
            path.push(next.clone());
            current = next;
        }
    }

    /// Same structure with the importance mapping replaced.
    pub fn with_importance(
        &self,
        importance: impl IntoIterator<Item = (NodeId, Importance<T>)>,
    ) -> Result<Self> {
        let importance: BTreeMap<NodeId, Importance<T>> = importance.into_iter().collect();
        if let Some(unknown) = importance.keys().find(|id| !self.nodes.contains_key(*id)) {
            return Err(Error::UnknownNode(unknown.clone()));
        }
        Ok(Self {
            importance,
            ..self.clone()
        })
    }

    /// Subgraph induced by `keep`: those nodes and every edge between two of them.
    pub(crate) fn induced(&self, keep: &BTreeSet<NodeId>) -> Self {
        let nodes = self
            .nodes
            .values()
            .filter(|n| keep.contains(&n.id))
            .cloned();
        let edges = self
            .edge_set()
            .into_iter()
            .filter(|e| keep.contains(&e.parent) && keep.contains(&e.child))
            .cloned()
            .collect::<Vec<_>>();
        Self::from_parts_unchecked(nodes, edges, std::iter::empty())
            .expect("node ids are unique in the source taxonomy")
    }
}

/// Fluent constructor. Duplicate nodes or edges are recorded as errors and reported by
/// [`TaxonomyBuilder::build`] instead of being silently merged.
#[derive(Debug, Clone)]
pub struct TaxonomyBuilder<T> {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    importance: Vec<(NodeId, Importance<T>)>,
    errors: Vec<Error>,
}

impl<T: Scalar> Default for TaxonomyBuilder<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> TaxonomyBuilder<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            importance: Vec::new(),
            errors: Vec::new(),
        }
    }

    fn id(&mut self, id: &str) -> Option<NodeId> {
        match NodeId::new(id) {
            Ok(id) => Some(id),
            Err(e) => {
                self.errors.push(e);
                None
            }
        }
    }

    fn push_node(&mut self, node: Node) {
        if self.nodes.iter().any(|n| n.id == node.id) {
            self.errors.push(Error::DuplicateNode(node.id));
        } else {
            self.nodes.push(node);
        }
    }

    pub fn label(mut self, id: &str, text: &str) -> Self {
        if let Some(id) = self.id(id) {
            self.push_node(Node::label(id, text));
        }
        self
    }

    pub fn property(mut self, id: &str, property_id: &str) -> Self {
        if let Some(id) = self.id(id) {
            self.push_node(Node::property(id, property_id));
        }
        self
    }

    pub fn edge(mut self, parent: &str, child: &str) -> Self {
        if let (Some(parent), Some(child)) = (self.id(parent), self.id(child)) {
            let edge = Edge::new(parent, child);
            if self.edges.contains(&edge) {
                self.errors.push(Error::DuplicateEdge {
                    parent: edge.parent,
                    child: edge.child,
                });
            } else {
                self.edges.push(edge);
            }
        }
        self
    }

    pub fn importance(mut self, id: &str, value: T) -> Self {
        match (self.id(id), Importance::new(value)) {
            (Some(id), Ok(value)) => self.importance.push((id, value)),
            (_, Err(e)) => self.errors.push(e),
            _ => {}
        }
        self
    }

    pub fn build(self) -> Result<ValueTaxonomy<T>> {
        if let Some(e) = self.errors.into_iter().next() {
            return Err(e);
        }
        ValueTaxonomy::from_parts(self.nodes, self.edges, self.importance)
    }
}
