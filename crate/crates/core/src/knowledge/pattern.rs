//! Condition patterns, variable bindings and the matcher.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use super::value::{deserialize_raw_scalar, is_symbol_text, Fact, InvalidSymbol, RawScalar, Symbol, Value};
use crate::canon;

/// A pattern variable, written `?name`. The stored name excludes the `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    /// Accepts `name` or `?name`.
    pub fn new(name: &str) -> Result<Self, InvalidSymbol> {
        let bare = name.strip_prefix('?').unwrap_or(name);
        if is_symbol_text(bare) {
            Ok(Self(bare.into()))
        } else {
            Err(InvalidSymbol(name.to_string()))
        }
    }

    pub fn lit(name: &str) -> Self {
        Self::new(name).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl Serialize for Var {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Var {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        if !text.starts_with('?') {
            return Err(de::Error::custom(format!("variable `{text}` must start with `?`")));
        }
        Var::new(&text).map_err(de::Error::custom)
    }
}

/// One position of a pattern: a literal value or a variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Value),
    Var(Var),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Var::lit(name))
    }

    pub fn sym(text: &str) -> Self {
        Term::Const(Value::sym(text))
    }

    /// Parses the compact test notation: `?x` is a variable, anything else a
    /// symbol.
    pub fn parse(text: &str) -> Self {
        if text.starts_with('?') {
            Term::var(text)
        } else {
            Term::sym(text)
        }
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    /// Resolves the term under `bindings`; `None` for an unbound variable.
    pub fn resolve(&self, bindings: &Bindings) -> Option<Value> {
        match self {
            Term::Const(v) => Some(v.clone()),
            Term::Var(v) => bindings.get(v).cloned(),
        }
    }

    /// Allocation-free pre-check: false when unification would surely fail.
    fn admits(&self, value: &Value, bindings: &Bindings) -> bool {
        match self {
            Term::Const(c) => c == value,
            Term::Var(v) => bindings.get(v).is_none_or(|bound| bound == value),
        }
    }

    fn admits_symbol(&self, symbol: &Symbol, bindings: &Bindings) -> bool {
        let same = |v: &Value| matches!(v, Value::Symbol(s) if s == symbol);
        match self {
            Term::Const(c) => same(c),
            Term::Var(v) => bindings.get(v).is_none_or(same),
        }
    }

    fn unify(&self, value: &Value, bindings: &mut Bindings) -> bool {
        match self {
            Term::Const(c) => c == value,
            Term::Var(v) => match bindings.get(v) {
                Some(bound) => bound == value,
                None => {
                    bindings.insert(v.clone(), value.clone());
                    true
                }
            },
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(v) => write!(f, "{v}"),
            Term::Var(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Term::Const(v) => v.serialize(serializer),
            Term::Var(v) => v.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match deserialize_raw_scalar(deserializer)? {
            RawScalar::Value(v) => Ok(Term::Const(v)),
            RawScalar::Str(s) if s.starts_with('?') => {
                Var::new(&s).map(Term::Var).map_err(de::Error::custom)
            }
            RawScalar::Str(s) => Symbol::new(s)
                .map(|s| Term::Const(Value::Symbol(s)))
                .map_err(de::Error::custom),
        }
    }
}

/// Variable bindings produced by a match. Ordered, so that binding sets
/// compare lexicographically by (variable, value).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bindings(BTreeMap<Var, Value>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &Var) -> Option<&Value> {
        self.0.get(var)
    }

    pub fn insert(&mut self, var: Var, value: Value) -> Option<Value> {
        self.0.insert(var, value)
    }

    pub fn contains(&self, var: &Var) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Value)> {
        self.0.iter()
    }

    /// Compact canonical serialization, used for tie-breaking and refraction.
    pub fn digest(&self) -> String {
        canon::to_compact_string(self).expect("bindings always serialize")
    }
}

impl<const N: usize> From<[(&str, Value); N]> for Bindings {
    fn from(pairs: [(&str, Value); N]) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (Var::lit(k), v)).collect())
    }
}

impl FromIterator<(Var, Value)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (Var, Value)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// A condition over one fact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern {
    pub entity: Term,
    pub attribute: Term,
    pub value: Term,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negated: bool,
}

impl Pattern {
    pub fn new(entity: Term, attribute: Term, value: Term) -> Self {
        Self {
            entity,
            attribute,
            value,
            negated: false,
        }
    }

    /// Compact constructor: `Pattern::of("?e", "kind", "solver")`.
    pub fn of(entity: &str, attribute: &str, value: &str) -> Self {
        Self::new(Term::parse(entity), Term::parse(attribute), Term::parse(value))
    }

    pub fn negate(mut self) -> Self {
        self.negated = true;
        self
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.entity, &self.attribute, &self.value]
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.terms().into_iter().filter_map(Term::as_var)
    }

    /// Ground fact for this pattern under `bindings`, if every position
    /// resolves and the entity and attribute resolve to symbols.
    pub fn instantiate(&self, bindings: &Bindings) -> Option<Fact> {
        let entity = self.entity.resolve(bindings)?.as_symbol()?.clone();
        let attribute = self.attribute.resolve(bindings)?.as_symbol()?.clone();
        let value = self.value.resolve(bindings)?;
        Some(Fact {
            entity,
            attribute,
            value,
        })
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "({}, {}, {})", self.entity, self.attribute, self.value)
    }
}

/// Unifies a non-negated pattern with a fact under the incoming bindings.
/// Returns the extended bindings, or `None` on mismatch. The input is never
/// modified.
pub fn match_pattern(pattern: &Pattern, fact: &Fact, bindings: &Bindings) -> Option<Bindings> {
    debug_assert!(!pattern.negated, "match_pattern called on a negated pattern");
    if !pattern.entity.admits_symbol(&fact.entity, bindings)
        || !pattern.attribute.admits_symbol(&fact.attribute, bindings)
        || !pattern.value.admits(&fact.value, bindings)
    {
        return None;
    }
    let mut out = bindings.clone();
    let entity = Value::Symbol(fact.entity.clone());
    let attribute = Value::Symbol(fact.attribute.clone());
    if pattern.entity.unify(&entity, &mut out)
        && pattern.attribute.unify(&attribute, &mut out)
        && pattern.value.unify(&fact.value, &mut out)
    {
        Some(out)
    } else {
        None
    }
}

fn matches_any<'a>(
    pattern: &Pattern,
    facts: impl IntoIterator<Item = &'a Fact>,
    bindings: &Bindings,
) -> bool {
    let positive = Pattern {
        negated: false,
        ..pattern.clone()
    };
    facts
        .into_iter()
        .any(|f| match_pattern(&positive, f, bindings).is_some())
}

/// Every consistent binding set satisfying the conditions over `facts`.
///
/// Positive patterns are joined left to right; negated patterns are then
/// checked for zero matches under each candidate (unbound variables inside a
/// negated pattern act as wildcards). Results come in join order over the
/// iteration order of `facts`; distinct fact tuples never yield equal
/// bindings, so there are no duplicates.
pub fn match_conditions<'a, I>(conditions: &[Pattern], facts: I) -> Vec<Bindings>
where
    I: IntoIterator<Item = &'a Fact>,
    I::IntoIter: Clone,
{
    let facts = facts.into_iter();
    let mut partial = vec![Bindings::new()];
    for pattern in conditions.iter().filter(|p| !p.negated) {
        let mut next = Vec::new();
        for bindings in &partial {
            next.extend(
                facts
                    .clone()
                    .filter_map(|fact| match_pattern(pattern, fact, bindings)),
            );
        }
        partial = next;
        if partial.is_empty() {
            return partial;
        }
    }
    let negated: Vec<&Pattern> = conditions.iter().filter(|p| p.negated).collect();
    partial.retain(|b| negated.iter().all(|p| !matches_any(p, facts.clone(), b)));
    partial
}
