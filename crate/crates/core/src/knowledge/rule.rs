//! Production rules and their actions.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::pattern::{Pattern, Term, Var};
use super::value::{Symbol, Value};

/// Right-hand-side step of a production rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Adds the fact built from the pattern.
    Assert(Pattern),
    /// Removes the fact built from the pattern, if present.
    Retract(Pattern),
    /// Creates a fresh unit instance and binds its id to `bind`.
    InstantiateUnit {
        unit: Term,
        #[serde(rename = "as")]
        bind: Var,
    },
    /// Wires two instance ports.
    Connect {
        from: Term,
        from_port: Symbol,
        to: Term,
        to_port: Symbol,
    },
    /// Sets a unit instance parameter.
    SetParam {
        instance: Term,
        slot: Term,
        value: Term,
    },
    /// Ends the current inference run after this firing.
    RequestNextRequirement,
    /// Ends the session.
    Halt,
}

impl Action {
    /// Variables the action reads. The `bind` variable of `InstantiateUnit`
    /// is written, not read.
    pub fn used_vars(&self) -> Vec<&Var> {
        match self {
            Action::Assert(p) | Action::Retract(p) => p.vars().collect(),
            Action::InstantiateUnit { unit, .. } => unit.as_var().into_iter().collect(),
            Action::Connect { from, to, .. } => [from, to].into_iter().filter_map(Term::as_var).collect(),
            Action::SetParam {
                instance,
                slot,
                value,
            } => [instance, slot, value]
                .into_iter()
                .filter_map(Term::as_var)
                .collect(),
            Action::RequestNextRequirement | Action::Halt => Vec::new(),
        }
    }

    fn terms(&self) -> Vec<&Term> {
        match self {
            Action::Assert(p) | Action::Retract(p) => p.terms().to_vec(),
            Action::InstantiateUnit { unit, .. } => vec![unit],
            Action::Connect { from, to, .. } => vec![from, to],
            Action::SetParam {
                instance,
                slot,
                value,
            } => vec![instance, slot, value],
            Action::RequestNextRequirement | Action::Halt => Vec::new(),
        }
    }

    fn symbols(&self) -> Vec<&Symbol> {
        let mut out: Vec<&Symbol> = self
            .terms()
            .into_iter()
            .filter_map(|t| match t {
                Term::Const(Value::Symbol(s)) => Some(s),
                _ => None,
            })
            .collect();
        if let Action::Connect {
            from_port, to_port, ..
        } = self
        {
            out.push(from_port);
            out.push(to_port);
        }
        out
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Assert(p) => write!(f, "assert {p}"),
            Action::Retract(p) => write!(f, "retract {p}"),
            Action::InstantiateUnit { unit, bind } => write!(f, "instantiate {unit} as {bind}"),
            Action::Connect {
                from,
                from_port,
                to,
                to_port,
            } => write!(f, "connect {from}.{from_port} -> {to}.{to_port}"),
            Action::SetParam {
                instance,
                slot,
                value,
            } => write!(f, "set {instance}.{slot} = {value}"),
            Action::RequestNextRequirement => f.write_str("request next requirement"),
            Action::Halt => f.write_str("halt"),
        }
    }
}

/// Why a rule failed validation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("action variable {0} is not bound by any positive condition")]
    UnboundActionVariable(Var),
    #[error("malformed rule: {0}")]
    Malformed(String),
}

/// A condition → action production.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionRule {
    pub id: Symbol,
    #[serde(default)]
    pub salience: i64,
    pub conditions: Vec<Pattern>,
    pub actions: Vec<Action>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub linked_units: BTreeSet<Symbol>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub doc: String,
}

/// Attributes whose facts are owned by the engine.
pub const RESERVED_ATTRIBUTES: [&str; 2] = ["instance_of", "unit_kind"];

impl ProductionRule {
    pub fn new(id: &str, conditions: Vec<Pattern>, actions: Vec<Action>) -> Self {
        Self {
            id: Symbol::lit(id),
            salience: 0,
            conditions,
            actions,
            linked_units: BTreeSet::new(),
            doc: String::new(),
        }
    }

    pub fn with_salience(mut self, salience: i64) -> Self {
        self.salience = salience;
        self
    }

    pub fn positive_conditions(&self) -> impl Iterator<Item = &Pattern> {
        self.conditions.iter().filter(|p| !p.negated)
    }

    /// Checks the structural invariants that do not depend on a KB: at least
    /// one positive condition, well-typed literals, and variable closure of
    /// the actions.
    pub fn validate(&self) -> Result<(), RuleError> {
        if self.positive_conditions().next().is_none() {
            return Err(RuleError::Malformed(format!(
                "rule `{}` needs at least one non-negated condition",
                self.id
            )));
        }
        if self.actions.is_empty() {
            return Err(RuleError::Malformed(format!("rule `{}` has no actions", self.id)));
        }
        for p in &self.conditions {
            check_pattern_shape(p)?;
        }
        let mut bound: HashSet<&Var> = self.positive_conditions().flat_map(Pattern::vars).collect();
        for action in &self.actions {
            for var in action.used_vars() {
                if !bound.contains(var) {
                    return Err(RuleError::UnboundActionVariable(var.clone()));
                }
            }
            match action {
                Action::Assert(p) | Action::Retract(p) => {
                    if p.negated {
                        return Err(RuleError::Malformed(format!(
                            "action pattern {p} cannot be negated"
                        )));
                    }
                    check_pattern_shape(p)?;
                    if let Term::Const(Value::Symbol(a)) = &p.attribute {
                        if RESERVED_ATTRIBUTES.contains(&a.as_str()) {
                            return Err(RuleError::Malformed(format!(
                                "attribute `{a}` is maintained by the engine"
                            )));
                        }
                    }
                }
                Action::InstantiateUnit { unit, bind } => {
                    if matches!(unit, Term::Const(v) if v.as_symbol().is_none()) {
                        return Err(RuleError::Malformed(format!("unit id {unit} is not a symbol")));
                    }
                    if bound.contains(bind) {
                        return Err(RuleError::Malformed(format!(
                            "instance variable {bind} is already bound"
                        )));
                    }
                    bound.insert(bind);
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Whether any condition or action mentions `symbol` as a literal.
    pub fn mentions(&self, symbol: &Symbol) -> bool {
        let in_conditions = self.conditions.iter().any(|p| {
            p.terms()
                .into_iter()
                .any(|t| matches!(t, Term::Const(Value::Symbol(s)) if s == symbol))
        });
        in_conditions || self.actions.iter().any(|a| a.symbols().contains(&symbol))
    }
}

fn check_pattern_shape(p: &Pattern) -> Result<(), RuleError> {
    for (pos, term) in [("entity", &p.entity), ("attribute", &p.attribute)] {
        if let Term::Const(v) = term {
            if v.as_symbol().is_none() {
                return Err(RuleError::Malformed(format!(
                    "{pos} position of {p} must be a symbol or variable"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consume() -> Action {
        Action::Assert(Pattern::of("?r", "status", "consumed"))
    }

    #[test]
    fn closure_accepts_bound_and_instance_vars() {
        let rule = ProductionRule::new(
            "select_lp_solver",
            vec![
                Pattern::of("?r", "kind", "solver_requirement"),
                Pattern::of("?mr", "instance_of", "unit_model_runtime"),
            ],
            vec![
                Action::InstantiateUnit {
                    unit: Term::sym("unit_simplex_solver"),
                    bind: Var::lit("s"),
                },
                Action::Connect {
                    from: Term::var("mr"),
                    from_port: Symbol::lit("solvers"),
                    to: Term::var("s"),
                    to_port: Symbol::lit("invocation"),
                },
                consume(),
            ],
        );
        assert_eq!(rule.validate(), Ok(()));
    }

    #[test]
    fn unbound_action_variable_named() {
        let rule = ProductionRule::new(
            "bad",
            vec![Pattern::of("?r", "kind", "goal")],
            vec![Action::SetParam {
                instance: Term::var("u"),
                slot: Term::sym("x"),
                value: Term::sym("y"),
            }],
        );
        assert_eq!(rule.validate(), Err(RuleError::UnboundActionVariable(Var::lit("u"))));
    }

    #[test]
    fn negated_only_variables_do_not_bind() {
        let rule = ProductionRule::new(
            "bad",
            vec![
                Pattern::of("?r", "kind", "goal"),
                Pattern::of("?r", "owner", "?o").negate(),
            ],
            vec![Action::Assert(Pattern::of("?o", "seen", "yes"))],
        );
        assert_eq!(rule.validate(), Err(RuleError::UnboundActionVariable(Var::lit("o"))));
    }

    #[test]
    fn needs_positive_condition() {
        let rule = ProductionRule::new(
            "bad",
            vec![Pattern::of("a", "b", "c").negate()],
            vec![Action::Halt],
        );
        assert!(matches!(rule.validate(), Err(RuleError::Malformed(_))));
    }

    #[test]
    fn reserved_attribute_rejected() {
        let rule = ProductionRule::new(
            "bad",
            vec![Pattern::of("?u", "kind", "x")],
            vec![Action::Retract(Pattern::of("?u", "instance_of", "y"))],
        );
        assert!(matches!(rule.validate(), Err(RuleError::Malformed(_))));
    }

    #[test]
    fn mentions_scans_conditions_and_actions() {
        let rule = ProductionRule::new(
            "r",
            vec![Pattern::of("?r", "method", "simplex")],
            vec![Action::Assert(Pattern::of("?r", "implies", "linear_programming"))],
        );
        assert!(rule.mentions(&Symbol::lit("simplex")));
        assert!(rule.mentions(&Symbol::lit("linear_programming")));
        assert!(!rule.mentions(&Symbol::lit("genetic_algorithm")));
    }

    #[test]
    fn action_json_shape() {
        let json = r#"[{"instantiate_unit":{"unit":"unit_x","as":"?u"}},"halt",{"connect":{"from":"?a","from_port":"p","to":"?u","to_port":"q"}}]"#;
        let actions: Vec<Action> = serde_json::from_str(json).unwrap();
        assert_eq!(actions[1], Action::Halt);
        assert_eq!(serde_json::to_string(&actions).unwrap(), json);
    }
}
