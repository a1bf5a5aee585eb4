//! Which entity holds which taxonomy, including beliefs about others' values.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::taxonomy::ValueTaxonomy;

/// `holder`'s own values when `subject` is `None`, otherwise what `holder` believes
/// `subject` values. Either side may name an individual or a collective.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HolderRef {
    holder: String,
    subject: Option<String>,
}

impl HolderRef {
    pub fn own(holder: impl Into<String>) -> Result<Self> {
        Self::new(holder, None::<String>)
    }

    pub fn belief(holder: impl Into<String>, subject: impl Into<String>) -> Result<Self> {
        Self::new(holder, Some(subject))
    }

    pub fn new(holder: impl Into<String>, subject: Option<impl Into<String>>) -> Result<Self> {
        let holder = holder.into();
        if holder.is_empty() {
            return Err(Error::InvalidConfig("holder must be non-empty".into()));
        }
        Ok(Self {
            holder,
            subject: subject.map(Into::into),
        })
    }

    pub fn holder(&self) -> &str {
        &self.holder
    }

    pub fn subject(&self) -> Option<&str> {
        self.subject.as_deref()
    }
}

/// At most one taxonomy per `(holder, subject)` pair. Single writer, many readers.
#[derive(Debug, Clone, Default)]
pub struct HolderRegistry<T> {
    entries: BTreeMap<HolderRef, ValueTaxonomy<T>>,
}

impl<T: Scalar> HolderRegistry<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Stores `taxonomy` for `key`, returning whatever it replaces.
    pub fn put(
        &mut self,
        key: HolderRef,
        taxonomy: ValueTaxonomy<T>,
    ) -> Result<Option<ValueTaxonomy<T>>> {
        taxonomy.validate().into_result()?;
        Ok(self.entries.insert(key, taxonomy))
    }

    pub fn get(&self, key: &HolderRef) -> Option<&ValueTaxonomy<T>> {
        self.entries.get(key)
    }

    pub fn remove(&mut self, key: &HolderRef) -> Option<ValueTaxonomy<T>> {
        self.entries.remove(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HolderRef, &ValueTaxonomy<T>)> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::{Edge, Node, NodeId, TaxonomyBuilder};

    fn small(label: &str) -> ValueTaxonomy<f64> {
        TaxonomyBuilder::new().label("v", label).build().unwrap()
    }

    #[test]
    fn put_then_get() {
        let mut reg = HolderRegistry::new();
        let key = HolderRef::own("communityC").unwrap();
        reg.put(key.clone(), small("fairness")).unwrap();
        assert_eq!(reg.get(&key), Some(&small("fairness")));
    }

    #[test]
    fn unknown_ref_is_absent() {
        let reg = HolderRegistry::<f64>::new();
        assert!(reg.get(&HolderRef::own("nobody").unwrap()).is_none());
    }

    #[test]
    fn belief_does_not_shadow_own() {
        let mut reg = HolderRegistry::new();
        let own = HolderRef::own("x").unwrap();
        let about_y = HolderRef::belief("x", "y").unwrap();
        reg.put(own.clone(), small("mine")).unwrap();
        reg.put(about_y.clone(), small("theirs")).unwrap();
        assert_eq!(reg.get(&own), Some(&small("mine")));
        assert_eq!(reg.get(&about_y), Some(&small("theirs")));
    }

    #[test]
    fn latest_put_wins() {
        let mut reg = HolderRegistry::new();
        let key = HolderRef::own("x").unwrap();
        reg.put(key.clone(), small("first")).unwrap();
        let replaced = reg.put(key.clone(), small("second")).unwrap();
        assert_eq!(replaced, Some(small("first")));
        assert_eq!(reg.get(&key), Some(&small("second")));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn invalid_taxonomy_rejected() {
        let id = |s: &str| NodeId::new(s).unwrap();
        let bad = ValueTaxonomy::<f64>::from_parts_unchecked(
            [Node::label(id("a"), "a"), Node::label(id("b"), "b")],
            [Edge::new(id("a"), id("b")), Edge::new(id("b"), id("a"))],
            [],
        )
        .unwrap();
        let mut reg = HolderRegistry::new();
        assert!(matches!(
            reg.put(HolderRef::own("x").unwrap(), bad),
            Err(Error::InvalidTaxonomy(_))
        ));
    }

    #[test]
    fn empty_holder_rejected() {
        assert!(HolderRef::own("").is_err());
    }
}
