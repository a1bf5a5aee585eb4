//! The mutual-aid example on built-in data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::json;
use valtax::aggregation::{check_all_laws, DEFAULT_TRIALS};
use valtax::io as docs;
use valtax::mutual_aid::{self, community_context, elderly_support_context, fairness_taxonomy};
use valtax::{AlignmentScheme, HolderRef, HolderRegistry, Mean, NodeId, Result};

use crate::{render, Format};

const COMMUNITY_LOG: &str = include_str!("../fixtures/community_log.jsonl");
const LAW_SEED: u64 = 2024;

fn golden_sd() -> BTreeMap<NodeId, f64> {
    [("p1", 0.5), ("p3", 0.9)]
        .into_iter()
        .map(|(k, v)| (NodeId::new(k).expect("non-empty"), v))
        .collect()
}

pub fn run(format: Format) -> Result<String> {
    let general = fairness_taxonomy::<f64>();
    let mut registry = HolderRegistry::new();
    registry.put(HolderRef::own("community")?, general.clone())?;

    let golden_ctx = valtax::ContextSpec::new("golden")
        .with_importance("p1", 1.0)?
        .with_importance("p2", 0.0)?
        .with_importance("p3", 0.5)?;
    let golden = valtax::align_in_context(
        "community",
        &general,
        &golden_ctx,
        &golden_sd(),
        AlignmentScheme::MeanWeighted,
    )?;

    let contexts = [community_context::<f64>(), elderly_support_context::<f64>()];
    let built = contexts
        .iter()
        .map(|ctx| valtax::build_context_taxonomy(&general, ctx))
        .collect::<Result<Vec<_>>>()?;
    for b in &built {
        let report = valtax::check_coherence(&b.taxonomy, &Mean, valtax::Tolerance::default());
        debug_assert!(report.is_coherent());
    }

    let events = docs::parse_event_log(COMMUNITY_LOG)?;
    let state = mutual_aid::ingest(&events)?;
    let provider = valtax::CommunityProvider::new(state, valtax::DomainConfig::default())?;
    let observed = valtax::align_in_context(
        "community",
        &general,
        &contexts[0],
        &provider,
        AlignmentScheme::MeanWeighted,
    )?;

    let laws = check_all_laws::<f64>(&Mean, LAW_SEED, DEFAULT_TRIALS);
    let paths = general.all_paths_counts()?;

    Ok(match format {
        Format::Machine => {
            let doc = |s: String| {
                serde_json::from_str::<serde_json::Value>(&s).expect("documents are valid JSON")
            };
            let value = json!({
                "golden_alignment": doc(docs::serialize_report(&golden)),
                "contexts": contexts.iter().zip(&built).map(|(ctx, b)| json!({
                    "id": ctx.id,
                    "selected": b.selected.iter().map(NodeId::as_str).collect::<Vec<_>>(),
                    "taxonomy": doc(docs::serialize_taxonomy(&b.taxonomy)),
                })).collect::<Vec<_>>(),
                "community_log": {
                    "events": events.len(),
                    "alignment": doc(docs::serialize_report(&observed)),
                },
                "mean_laws": laws.iter().map(|r| json!({ "law": r.law.to_string(), "passed": r.passed, "trials": r.trials })).collect::<Vec<_>>(),
                "paths": paths.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
            });
            crate::machine(&value)
        }
        Format::Text => {
            let mut out = String::new();
            out.push_str("== golden alignment: sd p1 0.5, p3 0.9; importance p1 1, p3 0.5 ==\n");
            out.push_str(&docs::render_explanation(
                &golden,
                &valtax::explain(&golden),
            ));
            for (ctx, b) in contexts.iter().zip(&built) {
                let _ = writeln!(out, "\n== context {} ==", ctx.id);
                out.push_str(&render::context(&ctx.id, b));
            }
            let _ = writeln!(
                out,
                "\n== community log: {} events under context c ==",
                events.len()
            );
            out.push_str(&docs::render_explanation(
                &observed,
                &valtax::explain(&observed),
            ));
            let _ = writeln!(
                out,
                "\n== mean aggregation laws, {DEFAULT_TRIALS} trials =="
            );
            for r in &laws {
                let _ = writeln!(out, "{}: {}", r.law, if r.passed { "pass" } else { "FAIL" });
            }
            out.push_str("\n== paths in the general taxonomy ==\n");
            out.push_str(&render::paths(&paths));
            out
        }
    })
}
