mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valtax::context::select_nodes;
use valtax::io::{parse_taxonomy, serialize_taxonomy};
use valtax::mutual_aid::{difference_satisfaction, ingest, ratio_satisfaction, Event, EventKind};
use valtax::{
    align, check_coherence, propagate, AlignmentScheme, Mean, NodeId, SelectionStrategy, Tolerance,
};

use common::{id, name, uniform, Dag, Tree};

fn coherent_tree(seed: u64, max_nodes: usize) -> (Tree, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    let tree = Tree::random(&mut rng, n);
    let leaf: Vec<f64> = (0..n).map(|_| uniform(&mut rng)).collect();
    let values = tree.recursive_mean(&leaf);
    (tree, values)
}

fn sse(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn propagation_never_changes_given_values(seed in any::<u64>(), keep in 0.0f64..1.0) {
        let (tree, values) = coherent_tree(seed, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let partial: Vec<Option<f64>> = values.iter().map(|v| rng.gen_bool(keep).then_some(*v)).collect();
        let t = tree.taxonomy(&partial);
        if let Ok(out) = propagate(&t) {
            for (i, v) in partial.iter().enumerate() {
                if let Some(v) = v {
                    prop_assert_eq!(out.taxonomy.importance(&id(&name(i))), Some(*v));
                }
            }
            let complete = out.taxonomy.node_ids().all(|n| out.taxonomy.importance(n).is_some());
            if complete {
                prop_assert!(check_coherence(&out.taxonomy, &Mean, Tolerance::default()).is_coherent());
            }
        }
    }

    #[test]
    fn erased_internal_value_is_restored(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (tree, values) = coherent_tree(seed, 30);
        let internal = tree.internal();
        let target = internal[pick.index(internal.len())];
        let mut partial: Vec<Option<f64>> = values.iter().map(|v| Some(*v)).collect();
        partial[target] = None;
        let out = propagate(&tree.taxonomy(&partial)).map_err(|f| TestCaseError::fail(f.error.to_string()))?;
        let restored = out.taxonomy.importance(&id(&name(target))).unwrap();
        prop_assert!((restored - values[target]).abs() <= 1e-9);
    }

    #[test]
    fn propagated_tree_order_does_not_matter(seed in any::<u64>()) {
        // Same tree, node ids assigned in reverse, must give the same values.
        let (tree, values) = coherent_tree(seed, 25);
        let leaves: Vec<Option<f64>> = (0..tree.len()).map(|i| tree.is_leaf(i).then_some(values[i])).collect();
        let forward = propagate(&tree.taxonomy(&leaves)).unwrap().taxonomy;
        let n = tree.len();
        let mut b = valtax::taxonomy::TaxonomyBuilder::<f64>::new();
        let rename = |i: usize| format!("r{:02}", n - 1 - i);
        for (i, leaf) in leaves.iter().enumerate() {
            b = if tree.is_leaf(i) { b.property(&rename(i), "x") } else { b.label(&rename(i), "x") };
            if let Some(v) = leaf {
                b = b.importance(&rename(i), *v);
            }
        }
        for (i, p) in tree.parent.iter().enumerate() {
            if let Some(p) = p {
                b = b.edge(&rename(*p), &rename(i));
            }
        }
        let reversed = propagate(&b.build().unwrap()).unwrap().taxonomy;
        for i in 0..n {
            let a = forward.importance(&id(&name(i))).unwrap();
            let r = reversed.importance(&id(&rename(i))).unwrap();
            prop_assert!((a - r).abs() <= 1e-9);
        }
    }

    #[test]
    fn kmeans_split_is_optimal(values in prop::collection::vec(-1.0f64..=1.0, 1..=10)) {
        let map: BTreeMap<NodeId, f64> = values.iter().enumerate().map(|(i, v)| (id(&name(i)), *v)).collect();
        let chosen = select_nodes(&map, SelectionStrategy::KMeansTwo).unwrap();
        let split = |inside: &dyn Fn(usize) -> bool| {
            let (a, b): (Vec<usize>, Vec<usize>) = (0..values.len()).partition(|&i| inside(i));
            (a.iter().map(|&i| values[i]).collect::<Vec<f64>>(), b.iter().map(|&i| values[i]).collect::<Vec<f64>>())
        };
        let (sel, rest) = split(&|i| chosen.contains(&id(&name(i))));
        prop_assert!(!sel.is_empty());
        let best = (0u32..1 << values.len())
            .map(|mask| {
                let (a, b) = split(&|i| mask & (1 << i) != 0);
                sse(&a) + sse(&b)
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!(sse(&sel) + sse(&rest) <= best + 1e-9);
        if !rest.is_empty() {
            let min_sel = sel.iter().copied().fold(f64::INFINITY, f64::min);
            let max_rest = rest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min_sel > max_rest);
        }
    }

    #[test]
    fn alignment_is_monotone_in_satisfaction(seed in any::<u64>(), bump in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = Dag::random(&mut rng, 6, 8);
        let props: Vec<usize> = (dag.labels..dag.len()).collect();
        let importance: BTreeMap<usize, f64> = props.iter().map(|&p| (p, uniform(&mut rng))).collect();
        let t = dag.taxonomy(&importance);
        let mut sd: BTreeMap<NodeId, f64> = props.iter().map(|&p| (id(&name(p)), uniform(&mut rng))).collect();
        let target = props[rng.gen_range(0..props.len())];
        let before = align("e", &t, &sd, AlignmentScheme::MeanWeighted).unwrap().score;
        let entry = sd.get_mut(&id(&name(target))).unwrap();
        *entry = (*entry + bump).min(1.0);
        let after = align("e", &t, &sd, AlignmentScheme::MeanWeighted).unwrap().score;
        if importance[&target] > 0.0 {
            prop_assert!(after >= before - 1e-12);
        } else {
            prop_assert!(after <= before + 1e-12);
        }
    }

    #[test]
    fn alignment_ignores_property_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = Dag::random(&mut rng, 5, 10);
        let props: Vec<usize> = (dag.labels..dag.len()).collect();
        let importance: BTreeMap<usize, f64> = props.iter().map(|&p| (p, uniform(&mut rng))).collect();
        let sd: BTreeMap<NodeId, f64> = props.iter().map(|&p| (id(&name(p)), uniform(&mut rng))).collect();
        let base = align("e", &dag.taxonomy(&importance), &sd, AlignmentScheme::PathWeighted).unwrap().score;

        // Rebuild with property ids permuted: each property keeps its parents, importance and sd.
        let mut perm = props.clone();
        perm.shuffle(&mut rng);
        let relabel = |i: usize| if dag.is_property(i) { perm[i - dag.labels] } else { i };
        let edges: BTreeSet<(usize, usize)> = dag.edges.iter().map(|&(p, c)| (p, relabel(c))).collect();
        let shuffled = Dag { edges, ..dag.clone() };
        let moved: BTreeMap<usize, f64> = importance.iter().map(|(&p, &v)| (relabel(p), v)).collect();
        let moved_sd: BTreeMap<NodeId, f64> =
            props.iter().map(|&p| (id(&name(relabel(p))), sd[&id(&name(p))])).collect();
        let permuted = align("e", &shuffled.taxonomy(&moved), &moved_sd, AlignmentScheme::PathWeighted).unwrap().score;
        prop_assert!((base - permuted).abs() <= 1e-12);
    }

    #[test]
    fn taxonomy_documents_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dag = Dag::random(&mut rng, 8, 8);
        let mut values = BTreeMap::new();
        for i in 0..dag.len() {
            if rng.gen_bool(0.5) {
                values.insert(i, uniform(&mut rng));
            }
        }
        let t = dag.taxonomy(&values);
        let back: valtax::ValueTaxonomy = parse_taxonomy(&serialize_taxonomy(&t)).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn ingest_ignores_event_order(kinds in prop::collection::vec((0u8..4, 0usize..4), 0..60), seed in any::<u64>()) {
        let events: Vec<Event> = kinds
            .iter()
            .enumerate()
            .map(|(t, &(k, m))| {
                let kind = [EventKind::Request, EventKind::Offer, EventKind::VolunteerChosen, EventKind::TaskAssigned][k as usize];
                Event::new(kind, format!("m{m}"), t as u64)
            })
            .collect();
        let mut shuffled = events.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(ingest(&events).unwrap(), ingest(&shuffled).unwrap());
    }

    #[test]
    fn satisfaction_mappings_are_monotone(a in 0.0f64..6.0, b in 0.0f64..6.0, eps in 0.01f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(ratio_satisfaction(lo, 5.0) <= ratio_satisfaction(hi, 5.0));
        let (dlo, dhi) = (lo / 6.0, hi / 6.0);
        prop_assert!(difference_satisfaction(dlo, eps, 1.0) >= difference_satisfaction(dhi, eps, 1.0));
        for v in [ratio_satisfaction(a, 5.0), difference_satisfaction(dlo, eps, 1.0)] {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn single_precision_tracks_double(seed in any::<u64>()) {
        let (tree, values) = coherent_tree(seed, 20);
        let mut b = valtax::taxonomy::TaxonomyBuilder::<f32>::new();
        for (i, v) in values.iter().enumerate() {
            b = if tree.is_leaf(i) {
                b.property(&name(i), &name(i)).importance(&name(i), *v as f32)
            } else {
                b.label(&name(i), &name(i))
            };
        }
        for (i, p) in tree.parent.iter().enumerate() {
            if let Some(p) = p {
                b = b.edge(&name(*p), &name(i));
            }
        }
        let out = propagate(&b.build().unwrap()).unwrap();
        for (i, want) in values.iter().enumerate() {
            let got = out.taxonomy.importance(&id(&name(i))).unwrap();
            prop_assert!((f64::from(got) - want).abs() <= 1e-5);
        }
    }
}
