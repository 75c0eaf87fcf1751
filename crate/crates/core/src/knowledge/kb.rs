//! The knowledge base: rules, frames, versioning, editing, persistence and
//! subset export.
//!
//! A `KnowledgeBase` is an immutable value. Every editing operation returns a
//! new KB whose `version` is one higher than its input's.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::frame::{flatten_frame, Frame, FrameError, FrameKind};
use super::pattern::{Term, Var};
use super::rule::{ProductionRule, RuleError};
use super::value::{Symbol, Value};
use crate::canon::{self, CanonError};
use crate::catalog::Catalog;

/// Archive schema understood by this build.
pub const ARCHIVE_SCHEMA: u32 = 1;

/// Condition attributes whose literal values scope a rule to a capability.
const SCOPING_ATTRIBUTES: [&str; 2] = ["capability", "method"];

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("duplicate rule id `{0}`")]
    DuplicateRuleId(Symbol),
    #[error("duplicate frame name `{0}`")]
    DuplicateFrame(Symbol),
    #[error("unbound action variable {0}")]
    UnboundActionVariable(Var),
    #[error("malformed rule: {0}")]
    MalformedRule(String),
    #[error("malformed frame `{frame}`: {detail}")]
    MalformedFrame { frame: Symbol, detail: String },
    #[error("unknown rule `{0}`")]
    UnknownRule(Symbol),
    #[error("unknown unit `{0}`")]
    UnknownUnit(Symbol),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("export selector selects no rules")]
    EmptySelection,
    #[error("unsupported archive schema {found} (expected {ARCHIVE_SCHEMA})")]
    UnsupportedSchema { found: u32 },
    #[error("archive format: {0}")]
    Format(#[from] CanonError),
}

impl From<RuleError> for KbError {
    fn from(e: RuleError) -> Self {
        match e {
            RuleError::UnboundActionVariable(v) => KbError::UnboundActionVariable(v),
            RuleError::Malformed(m) => KbError::MalformedRule(m),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    rules: Vec<ProductionRule>,
    frames: Vec<Frame>,
    version: u64,
    meta: BTreeMap<String, String>,
}

/// Which part of a KB to export.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportSelector {
    #[serde(default)]
    pub rule_ids: BTreeSet<Symbol>,
    #[serde(default)]
    pub capabilities: BTreeSet<Symbol>,
    #[serde(default)]
    pub all: bool,
}

impl ExportSelector {
    pub fn all() -> Self {
        Self {
            all: true,
            ..Self::default()
        }
    }

    pub fn capabilities<I: IntoIterator<Item = Symbol>>(caps: I) -> Self {
        Self {
            capabilities: caps.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn rule_ids<I: IntoIterator<Item = Symbol>>(ids: I) -> Self {
        Self {
            rule_ids: ids.into_iter().collect(),
            ..Self::default()
        }
    }
}

/// Serialized knowledge base. Its bytes are the canonical archive document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbArchive {
    kb: KnowledgeBase,
}

impl KbArchive {
    pub fn knowledge_base(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn into_knowledge_base(self) -> KnowledgeBase {
        self.kb
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.kb.to_archive_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KbError> {
        Ok(Self {
            kb: KnowledgeBase::from_archive_bytes(bytes)?,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ArchiveDoc {
    schema: u32,
    version: u64,
    #[serde(default)]
    meta: BTreeMap<String, String>,
    #[serde(default)]
    rules: Vec<ProductionRule>,
    #[serde(default)]
    frames: Vec<Frame>,
}

impl KnowledgeBase {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a KB from parts, checking id uniqueness, rule well-formedness
    /// and slot facets. Inheritance cycles are not rejected here; they
    /// surface from [`KnowledgeBase::resolve_frame`].
    pub fn from_parts(
        rules: Vec<ProductionRule>,
        frames: Vec<Frame>,
        version: u64,
    ) -> Result<Self, KbError> {
        let mut ids = HashSet::new();
        for rule in &rules {
            if !ids.insert(&rule.id) {
                return Err(KbError::DuplicateRuleId(rule.id.clone()));
            }
            rule.validate()?;
        }
        let mut names = HashSet::new();
        for frame in &frames {
            if !names.insert(&frame.name) {
                return Err(KbError::DuplicateFrame(frame.name.clone()));
            }
            check_frame(frame)?;
        }
        Ok(Self {
            rules,
            frames,
            version,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: &str) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn rules(&self) -> &[ProductionRule] {
        &self.rules
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn rule(&self, id: &Symbol) -> Option<&ProductionRule> {
        self.rules.iter().find(|r| &r.id == id)
    }

    pub fn frame(&self, name: &Symbol) -> Option<&Frame> {
        self.frames.iter().find(|f| &f.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.frames.is_empty()
    }

    /// Appends a rule. Validates id uniqueness and action-variable closure.
    pub fn add_rule(&self, rule: ProductionRule) -> Result<KnowledgeBase, KbError> {
        if self.rule(&rule.id).is_some() {
            return Err(KbError::DuplicateRuleId(rule.id));
        }
        rule.validate()?;
        let mut next = self.clone();
        next.rules.push(rule);
        next.version += 1;
        Ok(next)
    }

    /// Unions `unit_ids` into the rule's linked units.
    pub fn link_rule_to_units(
        &self,
        rule_id: &Symbol,
        unit_ids: &BTreeSet<Symbol>,
        catalog: &Catalog,
    ) -> Result<KnowledgeBase, KbError> {
        if self.rule(rule_id).is_none() {
            return Err(KbError::UnknownRule(rule_id.clone()));
        }
        if let Some(missing) = unit_ids.iter().find(|u| catalog.unit(u).is_none()) {
            return Err(KbError::UnknownUnit(missing.clone()));
        }
        let mut next = self.clone();
        let rule = next
            .rules
            .iter_mut()
            .find(|r| &r.id == rule_id)
            .expect("checked above");
        rule.linked_units.extend(unit_ids.iter().cloned());
        next.version += 1;
        Ok(next)
    }

    /// Checks that every linked unit exists in `catalog`.
    pub fn check_links(&self, catalog: &Catalog) -> Result<(), KbError> {
        for rule in &self.rules {
            if let Some(missing) = rule.linked_units.iter().find(|u| catalog.unit(u).is_none()) {
                return Err(KbError::UnknownUnit(missing.clone()));
            }
        }
        Ok(())
    }

    /// The named frame, flattened along its is-a chain.
    pub fn resolve_frame(&self, name: &Symbol) -> Result<Frame, KbError> {
        let frame = self
            .frame(name)
            .ok_or_else(|| FrameError::UnknownFrame(name.clone()))?;
        self.flatten(frame)
    }

    /// Flattens an arbitrary frame against this KB's frames.
    pub fn flatten(&self, frame: &Frame) -> Result<Frame, KbError> {
        Ok(flatten_frame(frame, |n| self.frame(n))?)
    }

    /// Rules whose linked units include `unit_id`, in KB order.
    pub fn rules_linked_to<'a>(&'a self, unit_id: &'a Symbol) -> impl Iterator<Item = &'a ProductionRule> {
        self.rules.iter().filter(move |r| r.linked_units.contains(unit_id))
    }

    /// Non-fatal authoring issues, e.g. pattern frames without slots (which
    /// match every scheme).
    pub fn warnings(&self) -> Vec<String> {
        self.frames
            .iter()
            .filter(|f| f.kind == FrameKind::Pattern && f.slots.is_empty())
            .map(|f| format!("pattern frame `{}` has no slots and matches every scheme", f.name))
            .collect()
    }

    /// Exports part of the KB.
    ///
    /// With `all`, the whole KB. Otherwise the rules named in `rule_ids`,
    /// plus rules mentioning any symbol in `capabilities`; a capability
    /// selection also carries every rule not scoped to a particular
    /// capability or method (goal, structure and termination rules), since
    /// the scoped rules depend on them. Frames exported are all prototype and
    /// pattern frames and every frame on their is-a chains.
    pub fn export_subset(&self, selector: &ExportSelector) -> Result<KbArchive, KbError> {
        if selector.all {
            return Ok(KbArchive { kb: self.clone() });
        }
        let picked: BTreeSet<&Symbol> = self
            .rules
            .iter()
            .filter(|r| {
                selector.rule_ids.contains(&r.id)
                    || selector.capabilities.iter().any(|c| r.mentions(c))
            })
            .map(|r| &r.id)
            .collect();
        if picked.is_empty() {
            return Err(KbError::EmptySelection);
        }
        let with_generic = !selector.capabilities.is_empty();
        let rules: Vec<ProductionRule> = self
            .rules
            .iter()
            .filter(|r| picked.contains(&r.id) || (with_generic && !is_capability_scoped(r)))
            .cloned()
            .collect();

        let mut keep: BTreeSet<&Symbol> = BTreeSet::new();
        for frame in self
            .frames
            .iter()
            .filter(|f| matches!(f.kind, FrameKind::Prototype | FrameKind::Pattern))
        {
            let mut cursor = Some(frame);
            while let Some(f) = cursor {
                if !keep.insert(&f.name) {
                    break;
                }
                cursor = f.isa.as_ref().and_then(|p| self.frame(p));
            }
        }
        let frames = self
            .frames
            .iter()
            .filter(|f| keep.contains(&f.name))
            .cloned()
            .collect();

        Ok(KbArchive {
            kb: KnowledgeBase {
                rules,
                frames,
                version: self.version,
                meta: self.meta.clone(),
            },
        })
    }

    /// Imports an archive. Into an empty KB this reproduces the archive as
    /// is; otherwise rules and frames are appended (conflicting ids fail) and
    /// the version moves past both inputs.
    pub fn import(&self, archive: &KbArchive) -> Result<KnowledgeBase, KbError> {
        let incoming = &archive.kb;
        if self.is_empty() {
            let mut kb = incoming.clone();
            kb.version = kb.version.max(self.version);
            return Ok(kb);
        }
        let mut rules = self.rules.clone();
        rules.extend(incoming.rules.iter().cloned());
        let mut frames = self.frames.clone();
        frames.extend(incoming.frames.iter().cloned());
        let mut kb = KnowledgeBase::from_parts(rules, frames, self.version.max(incoming.version) + 1)?;
        kb.meta = self.meta.clone();
        for (k, v) in &incoming.meta {
            kb.meta.entry(k.clone()).or_insert_with(|| v.clone());
        }
        Ok(kb)
    }

    pub fn to_archive_bytes(&self) -> Vec<u8> {
        let doc = ArchiveDoc {
            schema: ARCHIVE_SCHEMA,
            version: self.version,
            meta: self.meta.clone(),
            rules: self.rules.clone(),
            frames: self.frames.clone(),
        };
        canon::to_bytes(&doc).expect("knowledge base always serializes")
    }

    /// Parses an archive and checks every KB invariant, including acyclic
    /// inheritance.
    pub fn from_archive_bytes(bytes: &[u8]) -> Result<Self, KbError> {
        let doc: ArchiveDoc = canon::from_slice(bytes)?;
        if doc.schema != ARCHIVE_SCHEMA {
            return Err(KbError::UnsupportedSchema { found: doc.schema });
        }
        let mut kb = KnowledgeBase::from_parts(doc.rules, doc.frames, doc.version)?;
        kb.meta = doc.meta;
        for frame in &kb.frames {
            kb.flatten(frame)?;
        }
        Ok(kb)
    }
}

fn check_frame(frame: &Frame) -> Result<(), KbError> {
    let malformed = |detail: String| KbError::MalformedFrame {
        frame: frame.name.clone(),
        detail,
    };
    let mut names = HashSet::new();
    for slot in &frame.slots {
        if !names.insert(&slot.name) {
            return Err(malformed(format!("slot `{}` declared twice", slot.name)));
        }
        if !slot.is_well_formed() {
            return Err(malformed(format!(
                "slot `{}` has cardinality {} with required={}",
                slot.name, slot.cardinality, slot.required
            )));
        }
    }
    if frame.message.is_some() && frame.kind != FrameKind::Pattern {
        return Err(malformed("only pattern frames carry a message".into()));
    }
    Ok(())
}

/// A rule reacts to one particular capability or method when a positive
/// condition tests a scoping attribute against a literal.
fn is_capability_scoped(rule: &ProductionRule) -> bool {
    rule.positive_conditions().any(|p| {
        matches!(&p.attribute, Term::Const(Value::Symbol(a)) if SCOPING_ATTRIBUTES.contains(&a.as_str()))
            && matches!(p.value, Term::Const(_))
    })
}
