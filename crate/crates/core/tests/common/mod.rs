//! Random taxonomy generators and brute-force oracles shared by the test targets.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use valtax::taxonomy::TaxonomyBuilder;
use valtax::{NodeId, ValueTaxonomy};

pub fn id(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

pub fn name(i: usize) -> String {
    format!("n{i:02}")
}

/// A rooted tree as a parent array: `parent[0]` is `None`, `parent[i] < i` otherwise.
#[derive(Debug, Clone)]
pub struct Tree {
    pub parent: Vec<Option<usize>>,
}

impl Tree {
    pub fn random(rng: &mut impl Rng, n: usize) -> Self {
        let parent = (0..n)
            .map(|i| (i > 0).then(|| rng.gen_range(0..i)))
            .collect();
        Self { parent }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&c| self.parent[c] == Some(i))
            .collect()
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.children(i).is_empty()
    }

    pub fn internal(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_leaf(i)).collect()
    }

    /// Leaves become property nodes, everything else label nodes.
    pub fn taxonomy(&self, values: &[Option<f64>]) -> ValueTaxonomy {
        let mut b = TaxonomyBuilder::new();
        for i in 0..self.len() {
            b = if self.is_leaf(i) {
                b.property(&name(i), &name(i))
            } else {
                b.label(&name(i), &name(i))
            };
        }
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                b = b.edge(&name(*p), &name(i));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if let Some(v) = v {
                b = b.importance(&name(i), *v);
            }
        }
        b.build().unwrap()
    }

    /// Value of every node when leaves carry `leaf` and each internal node is the
    /// plain average of its children, computed recursively.
    pub fn recursive_mean(&self, leaf: &[f64]) -> Vec<f64> {
        fn go(t: &Tree, i: usize, leaf: &[f64], out: &mut Vec<f64>) -> f64 {
            let children = t.children(i);
            let v = if children.is_empty() {
                leaf[i]
            } else {
                let total: f64 = children.iter().map(|&c| go(t, c, leaf, out)).sum();
                total / children.len() as f64
            };
            out[i] = v;
            v
        }
        let mut out = vec![f64::NAN; self.len()];
        go(self, 0, leaf, &mut out);
        out
    }
}

/// Random DAG: label nodes first, property nodes after, edges only from lower to
/// higher label index, and from labels to properties.
#[derive(Debug, Clone)]
pub struct Dag {
    pub labels: usize,
    pub properties: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl Dag {
    pub fn random(rng: &mut impl Rng, max_labels: usize, max_properties: usize) -> Self {
        let labels = rng.gen_range(1..=max_labels);
        let properties = rng.gen_range(1..=max_properties);
        let mut edges = BTreeSet::new();
        for i in 1..labels {
            if rng.gen_bool(0.85) {
                for _ in 0..rng.gen_range(1..=2) {
                    edges.insert((rng.gen_range(0..i), i));
                }
            }
        }
        for p in 0..properties {
            for _ in 0..rng.gen_range(1..=3) {
                edges.insert((rng.gen_range(0..labels), labels + p));
            }
        }
        Self {
            labels,
            properties,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.labels + self.properties
    }

    pub fn is_property(&self, i: usize) -> bool {
        i >= self.labels
    }

    pub fn taxonomy(&self, values: &BTreeMap<usize, f64>) -> ValueTaxonomy {
        let mut b = TaxonomyBuilder::new();
        for i in 0..self.len() {
            b = if self.is_property(i) {
                b.property(&name(i), &format!("prop-{i}"))
            } else {
                b.label(&name(i), &format!("label \"{i}\""))
            };
        }
        for (p, c) in &self.edges {
            b = b.edge(&name(*p), &name(*c));
        }
        for (i, v) in values {
            b = b.importance(&name(*i), *v);
        }
        b.build().unwrap()
    }

    /// Number of distinct root-to-node paths, by enumerating them.
    pub fn enumerate_paths(&self, target: usize) -> u64 {
        let roots = (0..self.len()).filter(|&i| !self.edges.iter().any(|&(_, c)| c == i));
        fn walk(d: &Dag, at: usize, target: usize) -> u64 {
            if at == target {
                return 1;
            }
            d.edges
                .iter()
                .filter(|&&(p, _)| p == at)
                .map(|&(_, c)| walk(d, c, target))
                .sum()
        }
        roots.map(|r| walk(self, r, target)).sum()
    }
}

pub fn uniform(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}
