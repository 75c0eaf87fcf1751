use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Connection, Session};
use crate::catalog::{Origin, UnitKind};
use crate::dsl::FormalRequirement;
use crate::knowledge::{Symbol, Value};
use crate::validator::{Mistake, Recommendation, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub rule_id: Symbol,
    pub seq: u64,
}

/// A scheme instance together with everything codegen needs to know about
/// its unit, so the description stands alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDescription {
    pub instance_id: Symbol,
    pub unit_id: Symbol,
    pub kind: UnitKind,
    pub origin: Origin,
    #[serde(default)]
    pub capabilities: BTreeSet<Symbol>,
    #[serde(default)]
    pub params: BTreeMap<Symbol, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_by: Option<ProvenanceEntry>,
    /// Rules linked to the instance's unit in the session KB.
    #[serde(default)]
    pub linked_rules: BTreeSet<Symbol>,
}

/// Result of the validation run a description was checked against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationStamp {
    pub passed: bool,
    /// Set when generation was requested despite failed validation.
    #[serde(default)]
    pub forced: bool,
    pub checked_against: Vec<Symbol>,
    #[serde(default)]
    pub mistakes: Vec<Mistake>,
    #[serde(default)]
    pub recommendations: Vec<Recommendation>,
}

impl From<&ValidationReport> for ValidationStamp {
    fn from(report: &ValidationReport) -> Self {
        Self {
            passed: report.passed,
            forced: false,
            checked_against: report.checked_against.clone(),
            mistakes: report.mistakes.clone(),
            recommendations: report.recommendations.clone(),
        }
    }
}

/// Formalized description of an MBMS project: the input of code generation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectDescription {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Symbol>,
    #[serde(default)]
    pub instances: Vec<InstanceDescription>,
    #[serde(default)]
    pub connections: Vec<Connection>,
    #[serde(default)]
    pub provenance: Vec<ProvenanceEntry>,
    #[serde(default)]
    pub kb_version: u64,
    #[serde(default)]
    pub requirement_log: Vec<FormalRequirement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationStamp>,
}

impl ProjectDescription {
    pub(super) fn from_session(session: &Session) -> Self {
        let kb = session.kb();
        let catalog = session.catalog();
        let instances = session
            .scheme()
            .instances
            .iter()
            .map(|inst| {
                let unit = catalog
                    .unit(&inst.unit_id)
                    .expect("invariant: scheme units exist in the session catalog");
                InstanceDescription {
                    instance_id: inst.instance_id.clone(),
                    unit_id: inst.unit_id.clone(),
                    kind: unit.kind,
                    origin: unit.origin.clone(),
                    capabilities: unit.capabilities.clone(),
                    params: inst.param_values.clone(),
                    created_by: session.created_by(&inst.instance_id).cloned(),
                    linked_rules: kb.rules_linked_to(&inst.unit_id).map(|r| r.id.clone()).collect(),
                }
            })
            .collect();
        let goal = session
            .requirement_log()
            .iter()
            .filter(|r| r.kind() == &Value::sym("goal"))
            .find_map(|r| r.get("name").and_then(Value::as_symbol).cloned());
        Self {
            goal,
            instances,
            connections: session.scheme().connections.clone(),
            provenance: session
                .trace()
                .iter()
                .map(|f| ProvenanceEntry {
                    rule_id: f.rule_id.clone(),
                    seq: f.seq,
                })
                .collect(),
            kb_version: kb.version(),
            requirement_log: session.requirement_log().to_vec(),
            validation: None,
        }
    }

    /// Unit kind counts, in kind order.
    pub fn kind_counts(&self) -> BTreeMap<UnitKind, usize> {
        let mut counts = BTreeMap::new();
        for inst in &self.instances {
            *counts.entry(inst.kind).or_insert(0) += 1;
        }
        counts
    }

    pub fn instance(&self, id: &Symbol) -> Option<&InstanceDescription> {
        self.instances.iter().find(|i| &i.instance_id == id)
    }

    pub fn with_validation(mut self, stamp: ValidationStamp) -> Self {
        self.validation = Some(stamp);
        self
    }
}
