use std::collections::BTreeMap;

use serde::Serialize;

use crate::knowledge::Fact;

/// Set of ground facts, each stamped with the sequence number of its
/// assertion (used for recency in conflict resolution).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkingMemory {
    facts: BTreeMap<Fact, u64>,
}

impl WorkingMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `fact`; returns false (keeping the original stamp) when it is
    /// already present.
    pub fn insert(&mut self, fact: Fact, seq: u64) -> bool {
        if self.facts.contains_key(&fact) {
            return false;
        }
        self.facts.insert(fact, seq);
        true
    }

    pub fn remove(&mut self, fact: &Fact) -> bool {
        self.facts.remove(fact).is_some()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains_key(fact)
    }

    pub fn seq_of(&self, fact: &Fact) -> Option<u64> {
        self.facts.get(fact).copied()
    }

    /// Facts in sorted order.
    pub fn facts(&self) -> std::collections::btree_map::Keys<'_, Fact, u64> {
        self.facts.keys()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }
}

impl Serialize for WorkingMemory {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.facts.keys())
    }
}
