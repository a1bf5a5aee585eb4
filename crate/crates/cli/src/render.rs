//! Plain-text tables. Numbers always carry six decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};
use valtax::propagation::CoherenceReport;
use valtax::{ContextTaxonomy, NodeId, PropagationResult, ValueTaxonomy};

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

pub fn taxonomy(t: &ValueTaxonomy) -> String {
    let width = t
        .node_ids()
        .map(|id| id.as_str().len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = format!("{:<width$}  {:<8}  {:>10}\n", "node", "kind", "importance");
    for node in t.nodes() {
        let kind = if node.is_property() {
            "property"
        } else {
            "label"
        };
        let value = t.importance(&node.id).map_or_else(|| "-".to_owned(), fixed);
        let _ = writeln!(out, "{:<width$}  {kind:<8}  {value:>10}", node.id.as_str());
    }
    out
}

pub fn propagation(result: &PropagationResult) -> String {
    let mut out = taxonomy(&result.taxonomy);
    let _ = writeln!(out, "passes: {}", result.iterations);
    out.push_str(&partial_assignments(&result.assigned));
    out
}

pub fn partial_assignments(assigned: &[(NodeId, f64)]) -> String {
    assigned
        .iter()
        .map(|(id, v)| format!("assigned {id} = {}\n", fixed(*v)))
        .collect()
}

pub fn coherence(report: &CoherenceReport<f64>) -> String {
    let mut out = String::new();
    if report.is_coherent() {
        out.push_str("coherent\n");
    }
    for v in &report.violations {
        let _ = writeln!(
            out,
            "incoherent {}: importance {} but children average {}",
            v.parent,
            fixed(v.actual),
            fixed(v.expected)
        );
    }
    for id in &report.culprits {
        let _ = writeln!(
            out,
            "culprit {id}: fixing this value alone restores coherence"
        );
    }
    for id in &report.unevaluable {
        let _ = writeln!(out, "unevaluable {id}: importance missing on it or a child");
    }
    out
}

pub fn coherence_json(report: &CoherenceReport<f64>) -> Value {
    json!({
        "coherent": report.is_coherent(),
        "violations": report.violations.iter().map(|v| json!({
            "parent": v.parent.as_str(),
            "expected": v.expected,
            "actual": v.actual,
        })).collect::<Vec<_>>(),
        "culprits": report.culprits.iter().map(NodeId::as_str).collect::<Vec<_>>(),
        "unevaluable": report.unevaluable.iter().map(NodeId::as_str).collect::<Vec<_>>(),
    })
}

pub fn context(id: &str, built: &ContextTaxonomy) -> String {
    let selected: Vec<&str> = built.selected.iter().map(NodeId::as_str).collect();
    let mut out = format!(
        "context {id}: selected {}\n",
        if selected.is_empty() {
            "nothing".into()
        } else {
            selected.join(", ")
        }
    );
    out.push_str(&taxonomy(&built.taxonomy));
    out
}

pub fn paths(counts: &BTreeMap<NodeId, u64>) -> String {
    let width = counts
        .keys()
        .map(|id| id.as_str().len())
        .max()
        .unwrap_or(4)
        .max(4);
    let mut out = format!("{:<width$}  paths\n", "node");
    for (id, n) in counts {
        let _ = writeln!(out, "{:<width$}  {n}", id.as_str());
    }
    out
}
