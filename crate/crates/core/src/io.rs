//! Document formats: taxonomies and contexts as JSON, event logs as JSON lines,
//! alignment reports as JSON or a text table, and Graphviz DOT export.
//!
//! Serialisation is deterministic: nodes and edges are written in ascending id order
//! and importances use the shortest decimal that reads back to the same value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignmentReport, Explanation};
use crate::context::{ContextSpec, SelectionStrategy};
use crate::error::{Error, ParseError, Result};
use crate::mutual_aid::{Event, EventKind};
use crate::scalar::Scalar;
use crate::taxonomy::{Edge, Importance, Node, NodeId, NodeKind, ValueTaxonomy, Violation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyDocument {
    pub schema_version: u32,
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    /// `"label"` or `"property"`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub parent: String,
    pub child: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextDocument {
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub defining_properties: Vec<String>,
    #[serde(default)]
    pub property_importance: BTreeMap<String, f64>,
    #[serde(default)]
    pub selection: SelectionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase", deny_unknown_fields)]
pub enum SelectionRecord {
    Positive {
        #[serde(default)]
        threshold: f64,
    },
    #[serde(rename = "kmeans2")]
    KMeans2,
}

impl Default for SelectionRecord {
    fn default() -> Self {
        Self::Positive { threshold: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub kind: EventKindRecord,
    pub member: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKindRecord {
    Request,
    Offer,
    VolunteerChosen,
    TaskAssigned,
}

impl From<EventKindRecord> for EventKind {
    fn from(k: EventKindRecord) -> Self {
        match k {
            EventKindRecord::Request => EventKind::Request,
            EventKindRecord::Offer => EventKind::Offer,
            EventKindRecord::VolunteerChosen => EventKind::VolunteerChosen,
            EventKindRecord::TaskAssigned => EventKind::TaskAssigned,
        }
    }
}

impl From<EventKind> for EventKindRecord {
    fn from(k: EventKind) -> Self {
        match k {
            EventKind::Request => EventKindRecord::Request,
            EventKind::Offer => EventKindRecord::Offer,
            EventKind::VolunteerChosen => EventKindRecord::VolunteerChosen,
            EventKind::TaskAssigned => EventKindRecord::TaskAssigned,
        }
    }
}

fn syntax_error(e: serde_json::Error) -> ParseError {
    ParseError::new(format!("{}:{}", e.line(), e.column()), e.to_string())
}

#[derive(Deserialize)]
struct Versioned {
    schema_version: Option<u32>,
}

fn check_version(text: &str) -> Result<()> {
    let v: Versioned = serde_json::from_str(text).map_err(syntax_error)?;
    match v.schema_version {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(other) => Err(Error::SchemaVersionUnsupported(other)),
        None => Err(ParseError::new("schema_version", "missing field `schema_version`").into()),
    }
}

fn importance_at<T: Scalar>(value: f64, location: String) -> Result<Importance<T>> {
    let converted = T::from_f64(value).filter(|v| v.is_finite());
    converted
        .and_then(|v| Importance::new(v).ok())
        .ok_or_else(|| {
            ParseError::new(location, format!("importance {value} outside [-1, 1]")).into()
        })
}

fn node_id_at(id: &str, location: String) -> Result<NodeId> {
    NodeId::new(id).map_err(|_| ParseError::new(location, "node id must be non-empty").into())
}

pub fn parse_taxonomy<T: Scalar>(text: &str) -> Result<ValueTaxonomy<T>> {
    check_version(text)?;
    let doc: TaxonomyDocument = serde_json::from_str(text).map_err(syntax_error)?;
    taxonomy_from_document(&doc)
}

pub fn taxonomy_from_document<T: Scalar>(doc: &TaxonomyDocument) -> Result<ValueTaxonomy<T>> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionUnsupported(doc.schema_version));
    }
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    let mut importance = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, record) in doc.nodes.iter().enumerate() {
        let at = |field: &str| format!("nodes[{i}].{field}");
        let id = node_id_at(&record.id, at("id"))?;
        if !seen.insert(id.clone()) {
            return Err(ParseError::new(at("id"), format!("duplicate node id `{id}`")).into());
        }
        let kind = match (
            record.kind.as_str(),
            &record.label_text,
            &record.property_id,
        ) {
            ("label", Some(text), None) => NodeKind::Label { text: text.clone() },
            ("property", None, Some(pid)) => NodeKind::Property {
                property_id: pid.clone(),
            },
            ("label", _, _) => {
                return Err(ParseError::new(
                    at("label_text"),
                    "label nodes need `label_text` and no `property_id`",
                )
                .into())
            }
            ("property", _, _) => {
                return Err(ParseError::new(
                    at("property_id"),
                    "property nodes need `property_id` and no `label_text`",
                )
                .into())
            }
            (other, _, _) => {
                return Err(
                    ParseError::new(at("kind"), format!("unknown node kind `{other}`")).into(),
                )
            }
        };
        if let Some(value) = record.importance {
            importance.push((id.clone(), importance_at::<T>(value, at("importance"))?));
        }
        nodes.push(Node { id, kind });
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for (i, record) in doc.edges.iter().enumerate() {
        let parent = node_id_at(&record.parent, format!("edges[{i}].parent"))?;
        let child = node_id_at(&record.child, format!("edges[{i}].child"))?;
        edges.push(Edge::new(parent, child));
    }
    let taxonomy = ValueTaxonomy::from_parts_unchecked(nodes, edges.clone(), importance)?;
    if let Some(violation) = taxonomy.validate().violations.into_iter().next() {
        let edge_at = |parent: &NodeId, child: &NodeId| {
            edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.parent == *parent && e.child == *child)
                .map(|(i, _)| format!("edges[{i}]"))
                .next_back()
                .unwrap_or_else(|| "edges".into())
        };
        let location = match &violation {
            Violation::DanglingEdge { parent, child, .. }
            | Violation::DuplicateEdge { parent, child }
            | Violation::PropertyNodeNotLeaf {
                node: parent,
                child,
            } => edge_at(parent, child),
            Violation::CycleDetected { cycle } => edge_at(&cycle[0], &cycle[1]),
            Violation::ImportanceForUnknownNode { .. } => "nodes".into(),
        };
        return Err(ParseError::new(location, violation.to_string()).into());
    }
    Ok(taxonomy)
}

pub fn taxonomy_to_document<T: Scalar>(taxonomy: &ValueTaxonomy<T>) -> TaxonomyDocument {
    let nodes = taxonomy
        .nodes()
        .map(|n| NodeRecord {
            id: n.id.to_string(),
            kind: if n.is_property() { "property" } else { "label" }.into(),
            label_text: n.label_text().map(str::to_owned),
            property_id: n.property_id().map(str::to_owned),
            importance: taxonomy.importance(&n.id).map(Scalar::to_decimal),
        })
        .collect();
    let edges = taxonomy
        .edges()
        .map(|e| EdgeRecord {
            parent: e.parent.to_string(),
            child: e.child.to_string(),
        })
        .collect();
    TaxonomyDocument {
        schema_version: SCHEMA_VERSION,
        nodes,
        edges,
    }
}

pub fn serialize_taxonomy<T: Scalar>(taxonomy: &ValueTaxonomy<T>) -> String {
    to_pretty(&taxonomy_to_document(taxonomy))
}

fn to_pretty(value: &impl Serialize) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("documents always serialise");
    out.push('\n');
    out
}

pub fn parse_context<T: Scalar>(text: &str) -> Result<ContextSpec<T>> {
    check_version(text)?;
    let doc: ContextDocument = serde_json::from_str(text).map_err(syntax_error)?;
    context_from_document(&doc)
}

pub fn context_from_document<T: Scalar>(doc: &ContextDocument) -> Result<ContextSpec<T>> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionUnsupported(doc.schema_version));
    }
    let mut spec = ContextSpec::new(doc.id.clone());
    spec.defining_properties = doc.defining_properties.iter().cloned().collect();
    for (node, &value) in &doc.property_importance {
        let at = format!("property_importance.{node}");
        let id = node_id_at(node, at.clone())?;
        spec.property_importance
            .insert(id, importance_at::<T>(value, at)?);
    }
    spec.selection = match doc.selection {
        SelectionRecord::Positive { threshold } => T::from_f64(threshold)
            .and_then(|t| SelectionStrategy::threshold(t).ok())
            .ok_or_else(|| {
                ParseError::new(
                    "selection.threshold",
                    format!("threshold {threshold} outside [-1, 1]"),
                )
            })?,
        SelectionRecord::KMeans2 => SelectionStrategy::KMeansTwo,
    };
    Ok(spec)
}

pub fn context_to_document<T: Scalar>(spec: &ContextSpec<T>) -> ContextDocument {
    ContextDocument {
        schema_version: SCHEMA_VERSION,
        id: spec.id.clone(),
        defining_properties: spec.defining_properties.iter().cloned().collect(),
        property_importance: spec
            .property_importance
            .iter()
            .map(|(k, v)| (k.to_string(), v.get().to_decimal()))
            .collect(),
        selection: match spec.selection {
            SelectionStrategy::PositiveThreshold(t) => SelectionRecord::Positive {
                threshold: t.to_decimal(),
            },
            SelectionStrategy::KMeansTwo => SelectionRecord::KMeans2,
        },
    }
}

pub fn serialize_context<T: Scalar>(spec: &ContextSpec<T>) -> String {
    to_pretty(&context_to_document(spec))
}

/// One JSON object per line; blank lines are skipped. `MalformedEvent::index` is the
/// 1-based line number. Timestamps must not decrease.
pub fn parse_event_log(text: &str) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    let mut last = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedEvent {
                index: line_no,
                reason: e.to_string(),
            })?;
        if record.member.is_empty() {
            return Err(Error::MalformedEvent {
                index: line_no,
                reason: "empty member id".into(),
            });
        }
        if last.is_some_and(|t| record.timestamp < t) {
            return Err(Error::MalformedEvent {
                index: line_no,
                reason: format!(
                    "timestamp {} precedes {}",
                    record.timestamp,
                    last.unwrap_or_default()
                ),
            });
        }
        last = Some(record.timestamp);
        events.push(Event::new(
            record.kind.into(),
            record.member,
            record.timestamp,
        ));
    }
    Ok(events)
}

pub fn serialize_event_log(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| {
            let record = EventRecord {
                kind: e.kind.into(),
                member: e.member.clone(),
                timestamp: e.timestamp,
            };
            serde_json::to_string(&record).expect("events always serialise") + "\n"
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReportDocument {
    pub entity: String,
    pub scheme: String,
    pub score: f64,
    pub max_paths: u64,
    pub per_property: Vec<ContributionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRecord {
    pub node: String,
    pub satisfaction: f64,
    pub importance: f64,
    pub paths: u64,
    pub contribution: f64,
}

pub fn report_to_document<T: Scalar>(report: &AlignmentReport<T>) -> AlignmentReportDocument {
    AlignmentReportDocument {
        entity: report.entity.clone(),
        scheme: report.scheme.to_string(),
        score: report.score.to_decimal(),
        max_paths: report.max_paths,
        per_property: report
            .per_property
            .iter()
            .map(|p| ContributionRecord {
                node: p.node.to_string(),
                satisfaction: p.satisfaction.to_decimal(),
                importance: p.importance.to_decimal(),
                paths: p.paths,
                contribution: p.contribution.to_decimal(),
            })
            .collect(),
    }
}

pub fn serialize_report<T: Scalar>(report: &AlignmentReport<T>) -> String {
    to_pretty(&report_to_document(report))
}

/// Plain-text table of an explained report, numbers to six decimals.
pub fn render_explanation<T: Scalar>(
    report: &AlignmentReport<T>,
    explanation: &Explanation<T>,
) -> String {
    let width = explanation
        .rows
        .iter()
        .map(|r| r.node.as_str().len())
        .max()
        .unwrap_or(4)
        .max(8);
    let mut out = String::new();
    let _ = writeln!(out, "entity: {}", report.entity);
    let _ = writeln!(out, "scheme: {}", report.scheme);
    let _ = writeln!(
        out,
        "{:<width$}  {:>10}  {:>10}  {:>5}  {:>12}",
        "property", "importance", "sd", "paths", "contribution"
    );
    for row in &explanation.rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>10.6}  {:>10.6}  {:>5}  {:>12.6}",
            row.node.as_str(),
            row.importance.as_f64(),
            row.satisfaction.as_f64(),
            row.paths,
            row.contribution.as_f64(),
        );
    }
    let _ = writeln!(
        out,
        "sum of contributions: {:.6}",
        explanation.total.as_f64()
    );
    let _ = writeln!(out, "alignment: {:.6}", report.score.as_f64());
    out
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Graphviz digraph: label nodes as circles, property nodes as squares, importance
/// under each name.
pub fn export_dot<T: Scalar>(taxonomy: &ValueTaxonomy<T>) -> Result<String> {
    taxonomy.validate().into_result()?;
    let mut out = String::from("digraph taxonomy {\n");
    for node in taxonomy.nodes() {
        let (shape, name) = match &node.kind {
            NodeKind::Label { text } => ("circle", text.clone()),
            NodeKind::Property { property_id } if property_id == node.id.as_str() => {
                ("square", property_id.clone())
            }
            NodeKind::Property { property_id } => {
                ("square", format!("{} ({property_id})", node.id))
            }
        };
        let value = taxonomy
            .importance(&node.id)
            .map_or_else(|| "unassigned".to_owned(), |v| format!("{:.6}", v.as_f64()));
        let _ = writeln!(
            out,
            "    {} [shape={shape}, label={}];",
            dot_quote(node.id.as_str()),
            dot_quote(&format!("{name}\n{value}"))
        );
    }
    for edge in taxonomy.edges() {
        let _ = writeln!(
            out,
            "    {} -> {};",
            dot_quote(edge.parent.as_str()),
            dot_quote(edge.child.as_str())
        );
    }
    out.push_str("}\n");
    Ok(out)
}
