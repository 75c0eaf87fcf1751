//! Frames: slot structures with facets and single is-a inheritance.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::{Symbol, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    /// Obligations a scheme must meet; violations become mistakes.
    Prototype,
    /// Anti-patterns; a match becomes a recommendation.
    Pattern,
    /// A concrete variant carrying slot values.
    Instance,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::Prototype => "prototype",
            FrameKind::Pattern => "pattern",
            FrameKind::Instance => "instance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotType {
    Symbol,
    Text,
    Integer,
    Decimal,
    Boolean,
    InstanceRef,
}

impl SlotType {
    /// Whether `value` is admissible for this type. Instance references are
    /// symbols.
    pub fn admits(self, value: &Value) -> bool {
        matches!(
            (self, value),
            (SlotType::Symbol | SlotType::InstanceRef, Value::Symbol(_))
                | (SlotType::Text, Value::Text(_))
                | (SlotType::Integer, Value::Integer(_))
                | (SlotType::Decimal, Value::Decimal(_))
                | (SlotType::Boolean, Value::Boolean(_))
        )
    }
}

/// `[min, max]`; `max == None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cardinality {
    pub min: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<u64>,
}

impl Cardinality {
    pub const ONE: Cardinality = Cardinality { min: 1, max: Some(1) };
    pub const OPTIONAL: Cardinality = Cardinality { min: 0, max: Some(1) };

    pub fn at_least(min: u64) -> Self {
        Self { min, max: None }
    }

    pub fn range(min: u64, max: u64) -> Self {
        Self { min, max: Some(max) }
    }

    pub fn is_valid(&self) -> bool {
        self.max.is_none_or(|max| self.min <= max)
    }

    pub fn contains(&self, n: u64) -> bool {
        n >= self.min && self.max.is_none_or(|max| n <= max)
    }
}

impl Default for Cardinality {
    fn default() -> Self {
        Cardinality::ONE
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.max {
            Some(max) => write!(f, "[{}, {}]", self.min, max),
            None => write!(f, "[{}, *]", self.min),
        }
    }
}

/// Closed set of slot predicates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Present,
    Absent,
    Equals(Value),
    OneOf(Vec<Value>),
    ConnectedTo(Symbol),
    CountRange {
        lo: i64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<i64>,
    },
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Present => f.write_str("present"),
            Constraint::Absent => f.write_str("absent"),
            Constraint::Equals(v) => write!(f, "equals({v})"),
            Constraint::OneOf(vs) => {
                let parts: Vec<String> = vs.iter().map(ToString::to_string).collect();
                write!(f, "one-of({})", parts.join(", "))
            }
            Constraint::ConnectedTo(k) => write!(f, "connected-to({k})"),
            Constraint::CountRange { lo, hi: Some(hi) } => write!(f, "count-range({lo}, {hi})"),
            Constraint::CountRange { lo, hi: None } => write!(f, "count-range({lo}, *)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: Symbol,
    #[serde(rename = "type")]
    pub value_type: SlotType,
    #[serde(default)]
    pub cardinality: Cardinality,
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Constraint>,
}

impl Slot {
    pub fn new(name: &str, value_type: SlotType) -> Self {
        Self {
            name: Symbol::lit(name),
            value_type,
            cardinality: Cardinality::OPTIONAL,
            required: false,
            default: None,
            constraint: None,
        }
    }

    pub fn required(mut self, cardinality: Cardinality) -> Self {
        self.required = true;
        self.cardinality = cardinality;
        self
    }

    pub fn with_cardinality(mut self, cardinality: Cardinality) -> Self {
        self.cardinality = cardinality;
        self
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn with_default(mut self, value: Value) -> Self {
        self.default = Some(value);
        self
    }

    /// `min ≤ max` and `required ⇒ min ≥ 1`.
    pub fn is_well_formed(&self) -> bool {
        self.cardinality.is_valid() && (!self.required || self.cardinality.min >= 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub name: Symbol,
    pub kind: FrameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isa: Option<Symbol>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slots: Vec<Slot>,
    /// Slot values; used by instance frames.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<Symbol, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Frame {
    pub fn new(name: &str, kind: FrameKind) -> Self {
        Self {
            name: Symbol::lit(name),
            kind,
            isa: None,
            slots: Vec::new(),
            values: BTreeMap::new(),
            message: None,
        }
    }

    pub fn isa(mut self, parent: &str) -> Self {
        self.isa = Some(Symbol::lit(parent));
        self
    }

    pub fn slot(mut self, slot: Slot) -> Self {
        self.slots.push(slot);
        self
    }

    pub fn message(mut self, text: &str) -> Self {
        self.message = Some(text.to_string());
        self
    }

    pub fn find_slot(&self, name: &str) -> Option<&Slot> {
        self.slots.iter().find(|s| s.name.as_str() == name)
    }

    pub fn value(&self, name: &str) -> Option<&Value> {
        self.values.iter().find(|(k, _)| k.as_str() == name).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("unknown frame `{0}`")]
    UnknownFrame(Symbol),
    #[error("cyclic inheritance: {}", display_cycle(.0))]
    CyclicInheritance(Vec<Symbol>),
}

fn display_cycle(cycle: &[Symbol]) -> String {
    cycle.iter().map(Symbol::as_str).collect::<Vec<_>>().join(" -> ")
}

/// Flattens `frame` against the frames reachable through `lookup`.
///
/// Slots are inherited along the is-a chain; a descendant slot with the same
/// name replaces the ancestor's slot wholesale and keeps its position, new
/// slots are appended. Kind, parent link and message come from `frame`.
pub fn flatten_frame<'a, F>(frame: &Frame, lookup: F) -> Result<Frame, FrameError>
where
    F: Fn(&Symbol) -> Option<&'a Frame>,
{
    let mut chain: Vec<&Frame> = vec![frame];
    let mut seen: Vec<&Symbol> = vec![&frame.name];
    let mut cursor = frame;
    while let Some(parent_name) = &cursor.isa {
        if let Some(pos) = seen.iter().position(|n| *n == parent_name) {
            let mut cycle: Vec<Symbol> = seen[pos..].iter().map(|s| (*s).clone()).collect();
            cycle.push(parent_name.clone());
            return Err(FrameError::CyclicInheritance(cycle));
        }
        let parent = lookup(parent_name).ok_or_else(|| FrameError::UnknownFrame(parent_name.clone()))?;
        seen.push(&parent.name);
        chain.push(parent);
        cursor = parent;
    }

    let mut slots: Vec<Slot> = Vec::new();
    let mut values = BTreeMap::new();
    for ancestor in chain.iter().rev() {
        for slot in &ancestor.slots {
            match slots.iter_mut().find(|s| s.name == slot.name) {
                Some(existing) => *existing = slot.clone(),
                None => slots.push(slot.clone()),
            }
        }
        values.extend(ancestor.values.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    Ok(Frame {
        name: frame.name.clone(),
        kind: frame.kind,
        isa: frame.isa.clone(),
        slots,
        values,
        message: frame.message.clone(),
    })
}
