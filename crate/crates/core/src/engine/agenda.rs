//! Agenda construction and conflict resolution.

use std::cell::OnceCell;
use std::cmp::Ordering;

use super::memory::WorkingMemory;
use crate::knowledge::{match_conditions, Bindings, ProductionRule};

/// A rule instantiation eligible to fire.
#[derive(Debug, Clone)]
pub struct Activation<'a> {
    pub rule: &'a ProductionRule,
    pub bindings: Bindings,
    /// Highest assertion stamp among the facts matched by positive conditions.
    pub recency: u64,
    digest: OnceCell<String>,
}

impl<'a> Activation<'a> {
    pub fn new(rule: &'a ProductionRule, bindings: Bindings, recency: u64) -> Self {
        Self {
            rule,
            bindings,
            recency,
            digest: OnceCell::new(),
        }
    }

    /// Canonical serialization of the bindings, computed on first use.
    pub fn digest(&self) -> &str {
        self.digest.get_or_init(|| self.bindings.digest())
    }

    /// Strict total priority order; `Greater` means fires first.
    ///
    /// Salience (higher first), then specificity (more conditions first),
    /// then recency (newer first), then rule id (lexicographically smaller
    /// first), then the bindings' canonical serialization (smaller first).
    pub fn priority_cmp(&self, other: &Activation<'_>) -> Ordering {
        self.rule
            .salience
            .cmp(&other.rule.salience)
            .then(self.rule.conditions.len().cmp(&other.rule.conditions.len()))
            .then(self.recency.cmp(&other.recency))
            .then(other.rule.id.cmp(&self.rule.id))
            .then_with(|| other.digest().cmp(self.digest()))
    }
}

/// Picks the unique maximum of the agenda.
pub fn conflict_resolve<'x, 'a>(agenda: &'x [Activation<'a>]) -> Option<&'x Activation<'a>> {
    agenda.iter().max_by(|a, b| a.priority_cmp(b))
}

/// Every (rule, bindings) whose conditions hold in `wm`, minus those for
/// which `is_refracted` returns true.
pub fn build_agenda<'a, F>(rules: &'a [ProductionRule], wm: &WorkingMemory, is_refracted: F) -> Vec<Activation<'a>>
where
    F: Fn(&ProductionRule, &Bindings) -> bool,
{
    let mut agenda = Vec::new();
    for rule in rules {
        for bindings in match_conditions(&rule.conditions, wm.facts()) {
            if is_refracted(rule, &bindings) {
                continue;
            }
            let recency = rule
                .positive_conditions()
                .filter_map(|p| p.instantiate(&bindings))
                .filter_map(|f| wm.seq_of(&f))
                .max()
                .unwrap_or(0);
            agenda.push(Activation::new(rule, bindings, recency));
        }
    }
    agenda
}
