//! Ground values, symbols and facts.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::canon;

/// Raised when a string is not a well-formed symbol or variable.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid symbol `{0}`: expected [a-z][a-z0-9_]*")]
pub struct InvalidSymbol(pub String);

pub(crate) fn is_symbol_text(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// A lowercase identifier: `[a-z][a-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(text: impl Into<String>) -> Result<Self, InvalidSymbol> {
        let text = text.into();
        if is_symbol_text(&text) {
            Ok(Self(text.into()))
        } else {
            Err(InvalidSymbol(text))
        }
    }

    /// Builds a symbol from text known to be valid. Panics otherwise; meant
    /// for literals baked into the crate.
    pub fn lit(text: &str) -> Self {
        Self::new(text).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Symbol {
    type Err = InvalidSymbol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl AsRef<str> for Symbol {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Symbol::new(text).map_err(de::Error::custom)
    }
}

/// A finite decimal with a total order. Negative zero is folded into zero so
/// that equality, hashing and the canonical rendering agree.
#[derive(Debug, Clone, Copy)]
pub struct Decimal(f64);

impl Decimal {
    pub fn new(value: f64) -> Option<Self> {
        if value.is_finite() {
            Some(Self(if value == 0.0 { 0.0 } else { value }))
        } else {
            None
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Decimal {}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for Decimal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl fmt::Display for Decimal {
    /// Always carries a fraction so it reads back as a decimal.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = canon::format_decimal(self.0);
        if text.contains('.') {
            f.write_str(&text)
        } else {
            write!(f, "{text}.0")
        }
    }
}

/// A ground value. Never contains a variable.
///
/// Serialized form: symbols as bare strings, integers and booleans as JSON
/// scalars, text as `{"text": ..}` and decimals as `{"decimal": ..}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Symbol(Symbol),
    Text(String),
    Integer(i64),
    Decimal(Decimal),
    Boolean(bool),
}

impl Value {
    pub fn sym(text: &str) -> Self {
        Value::Symbol(Symbol::lit(text))
    }

    pub fn text(text: impl Into<String>) -> Self {
        Value::Text(text.into())
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            Value::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Value::Integer(i) => Some(*i),
            _ => None,
        }
    }

    /// Name of the value's type, matching slot value types.
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Symbol(_) => "symbol",
            Value::Text(_) => "text",
            Value::Integer(_) => "integer",
            Value::Decimal(_) => "decimal",
            Value::Boolean(_) => "boolean",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Symbol(s) => write!(f, "{s}"),
            Value::Text(t) => write!(f, "{t:?}"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Decimal(d) => write!(f, "{d}"),
            Value::Boolean(b) => write!(f, "{b}"),
        }
    }
}

impl From<Symbol> for Value {
    fn from(s: Symbol) -> Self {
        Value::Symbol(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Integer(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Symbol(s) => serializer.serialize_str(s.as_str()),
            Value::Text(t) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("text", t)?;
                map.end()
            }
            Value::Integer(i) => serializer.serialize_i64(*i),
            Value::Decimal(d) => {
                let mut map = serializer.serialize_map(Some(1))?;
                map.serialize_entry("decimal", &d.get())?;
                map.end()
            }
            Value::Boolean(b) => serializer.serialize_bool(*b),
        }
    }
}

/// Intermediate form shared by `Value` and `Term` decoding: a bare string may
/// be a symbol or (for terms) a variable.
pub(crate) enum RawScalar {
    Str(String),
    Value(Value),
}

struct RawScalarVisitor;

impl<'de> Visitor<'de> for RawScalarVisitor {
    type Value = RawScalar;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a symbol string, integer, boolean, {\"text\": ..} or {\"decimal\": ..}")
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<RawScalar, E> {
        Ok(RawScalar::Value(Value::Boolean(v)))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<RawScalar, E> {
        Ok(RawScalar::Value(Value::Integer(v)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<RawScalar, E> {
        i64::try_from(v)
            .map(|i| RawScalar::Value(Value::Integer(i)))
            .map_err(|_| E::custom("integer out of range"))
    }

    fn visit_f64<E: de::Error>(self, _v: f64) -> Result<RawScalar, E> {
        Err(E::custom("bare decimals are not allowed; use {\"decimal\": ..}"))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<RawScalar, E> {
        Ok(RawScalar::Str(v.to_string()))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawScalar, A::Error> {
        let key: String = map
            .next_key()?
            .ok_or_else(|| de::Error::custom("empty object is not a value"))?;
        let value = match key.as_str() {
            "text" => Value::Text(map.next_value()?),
            "decimal" => {
                let raw: f64 = map.next_value()?;
                Value::Decimal(
                    Decimal::new(raw).ok_or_else(|| de::Error::custom("non-finite decimal"))?,
                )
            }
            other => return Err(de::Error::unknown_field(other, &["text", "decimal"])),
        };
        if map.next_key::<String>()?.is_some() {
            return Err(de::Error::custom("tagged value must have exactly one key"));
        }
        Ok(RawScalar::Value(value))
    }
}

pub(crate) fn deserialize_raw_scalar<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> Result<RawScalar, D::Error> {
    deserializer.deserialize_any(RawScalarVisitor)
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match deserialize_raw_scalar(deserializer)? {
            RawScalar::Value(v) => Ok(v),
            RawScalar::Str(s) => Symbol::new(s).map(Value::Symbol).map_err(de::Error::custom),
        }
    }
}

/// An entity–attribute–value triple. All positions are ground.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub entity: Symbol,
    pub attribute: Symbol,
    pub value: Value,
}

impl Fact {
    pub fn new(entity: Symbol, attribute: Symbol, value: impl Into<Value>) -> Self {
        Self {
            entity,
            attribute,
            value: value.into(),
        }
    }

    /// Shorthand for literal facts in tests and built-in data.
    pub fn lit(entity: &str, attribute: &str, value: Value) -> Self {
        Self::new(Symbol::lit(entity), Symbol::lit(attribute), value)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.entity, self.attribute, self.value)
    }
}
