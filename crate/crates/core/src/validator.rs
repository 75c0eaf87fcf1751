//! Scheme validation against prototype and pattern frames.
//!
//! The current scheme is encoded as an instance frame whose values are
//! counts: `<kind>_count` for every unit kind, `link_<a>__<b>` for every
//! pair of kinds joined by at least one connection (kinds in byte order) and
//! `param_<instance>_<slot>` for every parameter value. Prototype frames state
//! obligations over these values and yield mistakes; pattern frames describe
//! anti-patterns and yield recommendations when they match.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, UnitKind};
use crate::engine::{Connection, ProjectDescription, SchemeGraph};
use crate::knowledge::{Constraint, Frame, FrameKind, KbError, KnowledgeBase, Slot, Symbol, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MistakeCode {
    MissingRequiredUnit,
    CardinalityViolation,
    MissingConnection,
    ConstraintViolation,
}

impl MistakeCode {
    pub fn as_str(self) -> &'static str {
        match self {
            MistakeCode::MissingRequiredUnit => "MISSING_REQUIRED_UNIT",
            MistakeCode::CardinalityViolation => "CARDINALITY_VIOLATION",
            MistakeCode::MissingConnection => "MISSING_CONNECTION",
            MistakeCode::ConstraintViolation => "CONSTRAINT_VIOLATION",
        }
    }
}

impl fmt::Display for MistakeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mistake {
    pub code: MistakeCode,
    /// Instance-frame slot the mistake is about.
    pub subject: Symbol,
    pub source_frame: Symbol,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub source_frame: Symbol,
    pub message: String,
    /// Instances of the unit kinds the pattern speaks about.
    #[serde(default)]
    pub subjects: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mistakes: Vec<Mistake>,
    pub recommendations: Vec<Recommendation>,
    pub checked_against: Vec<Symbol>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("expected a {expected} frame, `{frame}` is a {found} frame")]
    KindMismatch {
        frame: Symbol,
        expected: FrameKind,
        found: FrameKind,
    },
    #[error("cannot resolve frame: {0}")]
    Frame(String),
    #[error("scheme references unknown unit `{0}`")]
    UnknownUnit(Symbol),
}

impl From<KbError> for ValidationError {
    fn from(e: KbError) -> Self {
        ValidationError::Frame(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotClass {
    Count(UnitKind),
    Link(UnitKind, UnitKind),
    Param,
    Other,
}

fn classify(name: &str) -> SlotClass {
    if name.starts_with("param_") {
        SlotClass::Param
    } else if let Some(pair) = name.strip_prefix("link_") {
        match pair.split_once("__") {
            Some((a, b)) => match (UnitKind::from_name(a), UnitKind::from_name(b)) {
                (Some(a), Some(b)) => SlotClass::Link(a, b),
                _ => SlotClass::Other,
            },
            None => SlotClass::Other,
        }
    } else if let Some(kind) = name.strip_suffix("_count").and_then(UnitKind::from_name) {
        SlotClass::Count(kind)
    } else {
        SlotClass::Other
    }
}

pub fn count_slot(kind: UnitKind) -> Symbol {
    Symbol::new(format!("{}_count", kind.as_str())).expect("kind names are symbols")
}

/// Slot name for connections between two kinds, independent of direction.
pub fn link_slot(a: UnitKind, b: UnitKind) -> Symbol {
    let (a, b) = if a.as_str() <= b.as_str() { (a, b) } else { (b, a) };
    Symbol::new(format!("link_{}__{}", a.as_str(), b.as_str())).expect("kind names are symbols")
}

pub fn param_slot(instance: &Symbol, slot: &Symbol) -> Symbol {
    Symbol::new(format!("param_{instance}_{slot}")).expect("symbols joined by `_` are symbols")
}

struct InstanceView<'a> {
    id: &'a Symbol,
    kind: UnitKind,
    params: &'a BTreeMap<Symbol, Value>,
}

fn build_instance_frame(instances: &[InstanceView<'_>], connections: &[Connection]) -> Frame {
    let mut frame = Frame::new("current_scheme", FrameKind::Instance);
    for kind in UnitKind::ALL {
        let n = instances.iter().filter(|i| i.kind == kind).count();
        frame.values.insert(count_slot(kind), Value::Integer(n as i64));
    }
    let kind_of: BTreeMap<&Symbol, UnitKind> = instances.iter().map(|i| (i.id, i.kind)).collect();
    for c in connections {
        if let (Some(a), Some(b)) = (kind_of.get(&c.from_instance), kind_of.get(&c.to_instance)) {
            let entry = frame.values.entry(link_slot(*a, *b)).or_insert(Value::Integer(0));
            if let Value::Integer(n) = entry {
                *n += 1;
            }
        }
    }
    for inst in instances {
        for (slot, value) in inst.params {
            frame.values.insert(param_slot(inst.id, slot), value.clone());
        }
    }
    frame
}

/// Encodes the scheme as an instance frame.
pub fn scheme_to_frame(scheme: &SchemeGraph, catalog: &Catalog) -> Result<Frame, ValidationError> {
    let views = scheme
        .instances
        .iter()
        .map(|i| {
            let unit = catalog
                .unit(&i.unit_id)
                .ok_or_else(|| ValidationError::UnknownUnit(i.unit_id.clone()))?;
            Ok(InstanceView {
                id: &i.instance_id,
                kind: unit.kind,
                params: &i.param_values,
            })
        })
        .collect::<Result<Vec<_>, ValidationError>>()?;
    Ok(build_instance_frame(&views, &scheme.connections))
}

/// Encodes a project description as an instance frame. Descriptions carry
/// unit kinds, so no catalog is needed.
pub fn description_to_frame(pd: &ProjectDescription) -> Frame {
    let views: Vec<InstanceView<'_>> = pd
        .instances
        .iter()
        .map(|i| InstanceView {
            id: &i.instance_id,
            kind: i.kind,
            params: &i.params,
        })
        .collect();
    build_instance_frame(&views, &pd.connections)
}

/// The value a slot takes on the instance frame. Count and link slots
/// default to zero.
fn effective_value<'a>(instance: &'a Frame, slot: &Symbol) -> Option<std::borrow::Cow<'a, Value>> {
    match instance.values.get(slot) {
        Some(v) => Some(std::borrow::Cow::Borrowed(v)),
        None => match classify(slot.as_str()) {
            SlotClass::Count(_) | SlotClass::Link(..) => Some(std::borrow::Cow::Owned(Value::Integer(0))),
            _ => None,
        },
    }
}

/// Integer value, or presence (1) / absence (0) for non-integers.
fn measure(value: Option<&Value>) -> i64 {
    match value {
        Some(Value::Integer(n)) => *n,
        Some(_) => 1,
        None => 0,
    }
}

fn count_of(instance: &Frame, kind: UnitKind) -> i64 {
    measure(effective_value(instance, &count_slot(kind)).as_deref())
}

fn constraint_holds(instance: &Frame, slot: &Symbol, constraint: &Constraint) -> bool {
    let value = effective_value(instance, slot);
    let m = measure(value.as_deref());
    match constraint {
        Constraint::Present => m > 0,
        Constraint::Absent => m == 0,
        Constraint::Equals(expected) => value.as_deref() == Some(expected),
        Constraint::OneOf(options) => value.as_deref().is_some_and(|v| options.contains(v)),
        Constraint::CountRange { lo, hi } => m >= *lo && hi.is_none_or(|hi| m <= hi),
        Constraint::ConnectedTo(target) => {
            let (SlotClass::Count(kind), Some(target)) =
                (classify(slot.as_str()), UnitKind::from_name(target.as_str()))
            else {
                return false;
            };
            m == 0 || measure(effective_value(instance, &link_slot(kind, target)).as_deref()) >= 1
        }
    }
}

fn type_matches(instance: &Frame, slot: &Slot) -> bool {
    match instance.values.get(&slot.name) {
        Some(v) => slot.value_type.admits(v),
        None => true,
    }
}

fn check_slot(instance: &Frame, prototype: &Frame, slot: &Slot) -> Option<Mistake> {
    let class = classify(slot.name.as_str());
    if let SlotClass::Link(a, b) = class {
        if count_of(instance, a) == 0 || count_of(instance, b) == 0 {
            return None;
        }
    }
    let value = effective_value(instance, &slot.name);
    let m = measure(value.as_deref());
    let mistake = |code: MistakeCode, message: String| Mistake {
        code,
        subject: slot.name.clone(),
        source_frame: prototype.name.clone(),
        message,
    };
    if slot.required && m <= 0 {
        return Some(match class {
            SlotClass::Count(kind) => mistake(
                MistakeCode::MissingRequiredUnit,
                format!("the scheme needs a {} unit", kind.as_str()),
            ),
            SlotClass::Link(a, b) => mistake(
                MistakeCode::MissingConnection,
                format!("no connection between {} and {}", a.as_str(), b.as_str()),
            ),
            _ => mistake(
                MistakeCode::CardinalityViolation,
                format!("`{}` is required but absent", slot.name),
            ),
        });
    }
    if !slot.cardinality.contains(m.max(0) as u64) {
        return Some(mistake(
            MistakeCode::CardinalityViolation,
            format!("`{}` is {m}, expected {}", slot.name, slot.cardinality),
        ));
    }
    if !type_matches(instance, slot) {
        return Some(mistake(
            MistakeCode::ConstraintViolation,
            format!("`{}` does not hold a {:?} value", slot.name, slot.value_type),
        ));
    }
    if let Some(constraint) = &slot.constraint {
        let optional_absent = !slot.required && value.is_none();
        if !optional_absent && !constraint_holds(instance, &slot.name, constraint) {
            return Some(mistake(
                MistakeCode::ConstraintViolation,
                format!("`{}` violates {constraint}", slot.name),
            ));
        }
    }
    None
}

/// Checks an instance frame against a flattened prototype frame. At most
/// one mistake per slot, ordered by slot name.
pub fn check_prototype(instance: &Frame, prototype: &Frame) -> Result<Vec<Mistake>, ValidationError> {
    expect_kind(instance, FrameKind::Instance)?;
    expect_kind(prototype, FrameKind::Prototype)?;
    let mut mistakes: Vec<Mistake> = prototype
        .slots
        .iter()
        .filter_map(|slot| check_slot(instance, prototype, slot))
        .collect();
    mistakes.sort_by(|a, b| a.subject.cmp(&b.subject));
    Ok(mistakes)
}

/// A recommendation iff every slot constraint of `pattern` holds on
/// `instance`. A pattern without slots always matches. Subjects are left
/// empty; [`validate`] fills them in from the scheme.
pub fn match_pattern_frame(instance: &Frame, pattern: &Frame) -> Result<Option<Recommendation>, ValidationError> {
    expect_kind(instance, FrameKind::Instance)?;
    expect_kind(pattern, FrameKind::Pattern)?;
    let holds = pattern.slots.iter().all(|slot| {
        let value = effective_value(instance, &slot.name);
        let type_ok = value.as_deref().is_none_or(|v| slot.value_type.admits(v));
        let card_ok = !slot.required || measure(value.as_deref()) > 0;
        type_ok
            && card_ok
            && slot
                .constraint
                .as_ref()
                .is_none_or(|c| constraint_holds(instance, &slot.name, c))
    });
    Ok(holds.then(|| Recommendation {
        source_frame: pattern.name.clone(),
        message: pattern.message.clone().unwrap_or_default(),
        subjects: Vec::new(),
    }))
}

fn expect_kind(frame: &Frame, expected: FrameKind) -> Result<(), ValidationError> {
    if frame.kind == expected {
        Ok(())
    } else {
        Err(ValidationError::KindMismatch {
            frame: frame.name.clone(),
            expected,
            found: frame.kind,
        })
    }
}

fn pattern_kinds(pattern: &Frame) -> BTreeSet<UnitKind> {
    pattern
        .slots
        .iter()
        .filter_map(|s| match classify(s.name.as_str()) {
            SlotClass::Count(k) => Some(k),
            _ => None,
        })
        .collect()
}

fn check_frames(
    instance: &Frame,
    kinds: &[(Symbol, UnitKind)],
    kb: &KnowledgeBase,
) -> Result<ValidationReport, ValidationError> {
    let parents: BTreeSet<&Symbol> = kb
        .frames()
        .iter()
        .filter(|f| f.kind == FrameKind::Prototype)
        .filter_map(|f| f.isa.as_ref())
        .collect();
    let mut frames: Vec<&Frame> = kb
        .frames()
        .iter()
        .filter(|f| match f.kind {
            FrameKind::Prototype => !parents.contains(&f.name),
            FrameKind::Pattern => true,
            FrameKind::Instance => false,
        })
        .collect();
    frames.sort_by(|a, b| a.name.cmp(&b.name));

    let mut report = ValidationReport {
        mistakes: Vec::new(),
        recommendations: Vec::new(),
        checked_against: Vec::new(),
        passed: true,
    };
    for frame in frames {
        let resolved = kb.resolve_frame(&frame.name)?;
        report.checked_against.push(frame.name.clone());
        match resolved.kind {
            FrameKind::Prototype => report.mistakes.extend(check_prototype(instance, &resolved)?),
            FrameKind::Pattern => {
                if let Some(mut rec) = match_pattern_frame(instance, &resolved)? {
                    let wanted = pattern_kinds(&resolved);
                    rec.subjects = kinds
                        .iter()
                        .filter(|(_, k)| wanted.contains(k))
                        .map(|(id, _)| id.clone())
                        .collect();
                    report.recommendations.push(rec);
                }
            }
            FrameKind::Instance => {}
        }
    }
    report.passed = report.mistakes.is_empty();
    Ok(report)
}

/// Validates a scheme against every leaf prototype frame and every pattern
/// frame of `kb`. A prototype that another prototype inherits from is
/// checked only through its descendants.
pub fn validate(scheme: &SchemeGraph, kb: &KnowledgeBase, catalog: &Catalog) -> Result<ValidationReport, ValidationError> {
    let instance = scheme_to_frame(scheme, catalog)?;
    let kinds: Vec<(Symbol, UnitKind)> = scheme
        .instances
        .iter()
        .map(|i| {
            let kind = catalog.unit(&i.unit_id).expect("checked by scheme_to_frame").kind;
            (i.instance_id.clone(), kind)
        })
        .collect();
    check_frames(&instance, &kinds, kb)
}

/// Same as [`validate`] for a stored project description.
pub fn validate_description(pd: &ProjectDescription, kb: &KnowledgeBase) -> Result<ValidationReport, ValidationError> {
    let instance = description_to_frame(pd);
    let kinds: Vec<(Symbol, UnitKind)> = pd.instances.iter().map(|i| (i.instance_id.clone(), i.kind)).collect();
    check_frames(&instance, &kinds, kb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::UnitInstance;
    use crate::knowledge::{Cardinality, SlotType};

    fn inst(id: &str, unit: &str) -> UnitInstance {
        UnitInstance {
            instance_id: Symbol::lit(id),
            unit_id: Symbol::lit(unit),
            param_values: BTreeMap::new(),
        }
    }

    #[test]
    fn empty_scheme_has_zero_counts() {
        let frame = scheme_to_frame(&SchemeGraph::default(), &Catalog::builtin()).unwrap();
        assert_eq!(frame.values.len(), UnitKind::ALL.len());
        assert!(frame.values.values().all(|v| v == &Value::Integer(0)));
    }

    #[test]
    fn link_slots_are_unordered() {
        assert_eq!(
            link_slot(UnitKind::Solver, UnitKind::ModelRuntime),
            link_slot(UnitKind::ModelRuntime, UnitKind::Solver)
        );
        assert_eq!(
            link_slot(UnitKind::Solver, UnitKind::ModelRuntime).as_str(),
            "link_model_runtime__solver"
        );
    }

    #[test]
    fn cardinality_violation_on_two_model_bases() {
        let scheme = SchemeGraph {
            instances: vec![inst("u1", "unit_model_base"), inst("u2", "unit_model_base")],
            connections: vec![],
        };
        let frame = scheme_to_frame(&scheme, &Catalog::builtin()).unwrap();
        let proto = Frame::new("p", FrameKind::Prototype)
            .slot(Slot::new("model_base_count", SlotType::Integer).required(Cardinality::ONE));
        let mistakes = check_prototype(&frame, &proto).unwrap();
        assert_eq!(mistakes.len(), 1);
        assert_eq!(mistakes[0].code, MistakeCode::CardinalityViolation);
    }

    #[test]
    fn missing_required_unit() {
        let frame = scheme_to_frame(&SchemeGraph::default(), &Catalog::builtin()).unwrap();
        let proto = Frame::new("p", FrameKind::Prototype)
            .slot(Slot::new("solver_count", SlotType::Integer).required(Cardinality::at_least(1)));
        let mistakes = check_prototype(&frame, &proto).unwrap();
        assert_eq!(mistakes[0].code, MistakeCode::MissingRequiredUnit);
        assert_eq!(mistakes[0].subject.as_str(), "solver_count");
    }

    #[test]
    fn pattern_frames() {
        let scheme = SchemeGraph {
            instances: vec![inst("u1", "unit_simplex_solver")],
            connections: vec![],
        };
        let frame = scheme_to_frame(&scheme, &Catalog::builtin()).unwrap();
        let pattern = Frame::new("solver_without_runtime", FrameKind::Pattern)
            .slot(
                Slot::new("solver_count", SlotType::Integer)
                    .with_constraint(Constraint::CountRange { lo: 1, hi: None }),
            )
            .slot(Slot::new("model_runtime_count", SlotType::Integer).with_constraint(Constraint::Equals(Value::Integer(0))))
            .message("add a model runtime");
        let rec = match_pattern_frame(&frame, &pattern).unwrap().unwrap();
        assert_eq!(rec.message, "add a model runtime");

        let empty = scheme_to_frame(&SchemeGraph::default(), &Catalog::builtin()).unwrap();
        assert!(match_pattern_frame(&empty, &pattern).unwrap().is_none());

        let vacuous = Frame::new("v", FrameKind::Pattern);
        assert!(match_pattern_frame(&empty, &vacuous).unwrap().is_some());

        let err = match_pattern_frame(&empty, &Frame::new("x", FrameKind::Prototype)).unwrap_err();
        assert!(matches!(err, ValidationError::KindMismatch { .. }));
    }

    #[test]
    fn connected_to() {
        let scheme = SchemeGraph {
            instances: vec![inst("u1", "unit_simplex_solver"), inst("u2", "unit_model_runtime")],
            connections: vec![],
        };
        let catalog = Catalog::builtin();
        let mut frame = scheme_to_frame(&scheme, &catalog).unwrap();
        let c = Constraint::ConnectedTo(Symbol::lit("model_runtime"));
        assert!(!constraint_holds(&frame, &Symbol::lit("solver_count"), &c));
        frame
            .values
            .insert(link_slot(UnitKind::Solver, UnitKind::ModelRuntime), Value::Integer(1));
        assert!(constraint_holds(&frame, &Symbol::lit("solver_count"), &c));
    }
}
