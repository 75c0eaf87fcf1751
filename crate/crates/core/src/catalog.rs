//! Catalog of MBMS building blocks.
//!
//! Each unit is a formal description of an existing software module: its
//! kind, the capabilities it offers, its ports and its parameter slots. The
//! built-in catalog covers the standard MBMS blocks (model base, model
//! directory, development environment, runtime, solvers, links to the data
//! and knowledge subsystems, user interface). Client catalogs add external
//! products on top.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canon::{self, CanonError};
use crate::knowledge::{Cardinality, Constraint, Slot, SlotType, Symbol, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    ModelBase,
    ModelDirectory,
    ModelDevEnv,
    ModelRuntime,
    Solver,
    DataMgmtLink,
    KnowledgeMgmtLink,
    DssUserInterface,
    ExternalSystem,
}

impl UnitKind {
    pub const ALL: [UnitKind; 9] = [
        UnitKind::ModelBase,
        UnitKind::ModelDirectory,
        UnitKind::ModelDevEnv,
        UnitKind::ModelRuntime,
        UnitKind::Solver,
        UnitKind::DataMgmtLink,
        UnitKind::KnowledgeMgmtLink,
        UnitKind::DssUserInterface,
        UnitKind::ExternalSystem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::ModelBase => "model_base",
            UnitKind::ModelDirectory => "model_directory",
            UnitKind::ModelDevEnv => "model_dev_env",
            UnitKind::ModelRuntime => "model_runtime",
            UnitKind::Solver => "solver",
            UnitKind::DataMgmtLink => "data_mgmt_link",
            UnitKind::KnowledgeMgmtLink => "knowledge_mgmt_link",
            UnitKind::DssUserInterface => "dss_user_interface",
            UnitKind::ExternalSystem => "external_system",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Provides,
    Requires,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: Symbol,
    pub direction: Direction,
    #[serde(rename = "interface")]
    pub interface_id: Symbol,
    /// Allowed number of connections on this port.
    #[serde(default)]
    pub multiplicity: Cardinality,
}

impl Port {
    pub fn provides(name: &str, interface: &str) -> Self {
        Self {
            name: Symbol::lit(name),
            direction: Direction::Provides,
            interface_id: Symbol::lit(interface),
            multiplicity: Cardinality::ONE,
        }
    }

    pub fn requires(name: &str, interface: &str) -> Self {
        Self {
            direction: Direction::Requires,
            ..Self::provides(name, interface)
        }
    }

    pub fn multiplicity(mut self, multiplicity: Cardinality) -> Self {
        self.multiplicity = multiplicity;
        self
    }
}

/// True iff one port provides and the other requires the same interface.
pub fn check_compatibility(a: &Port, b: &Port) -> bool {
    a.direction != b.direction && a.interface_id == b.interface_id
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Builtin,
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub id: Symbol,
    pub kind: UnitKind,
    #[serde(default)]
    pub capabilities: BTreeSet<Symbol>,
    #[serde(default)]
    pub ports: Vec<Port>,
    #[serde(default)]
    pub params: Vec<Slot>,
    pub origin: Origin,
}

impl Unit {
    fn builtin(id: &str, kind: UnitKind, capabilities: &[&str]) -> Self {
        Self {
            id: Symbol::lit(id),
            kind,
            capabilities: capabilities.iter().map(|c| Symbol::lit(c)).collect(),
            ports: Vec::new(),
            params: Vec::new(),
            origin: Origin::Builtin,
        }
    }

    fn port(mut self, port: Port) -> Self {
        self.ports.push(port);
        self
    }

    fn param(mut self, slot: Slot) -> Self {
        self.params.push(slot);
        self
    }

    pub fn find_port(&self, name: &Symbol) -> Option<&Port> {
        self.ports.iter().find(|p| &p.name == name)
    }

    pub fn find_param(&self, name: &Symbol) -> Option<&Slot> {
        self.params.iter().find(|s| &s.name == name)
    }

    pub fn product_name(&self) -> Option<&str> {
        match &self.origin {
            Origin::External(name) => Some(name),
            Origin::Builtin => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog format: {0}")]
    Format(String),
    #[error("duplicate unit id `{0}`")]
    DuplicateUnitId(Symbol),
    #[error("unit `{unit}` port `{port}` uses undeclared interface `{interface}`")]
    UndeclaredInterface {
        unit: Symbol,
        port: Symbol,
        interface: Symbol,
    },
}

impl From<CanonError> for CatalogError {
    fn from(e: CanonError) -> Self {
        CatalogError::Format(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default)]
    interfaces: BTreeSet<Symbol>,
    #[serde(default)]
    units: Vec<Unit>,
}

impl Catalog {
    /// The fixed built-in catalog.
    pub fn builtin() -> Catalog {
        let interfaces = [
            "cae_link",
            "data_access",
            "knowledge_access",
            "model_catalog",
            "model_execution",
            "model_storage",
            "solver_invocation",
            "user_dialog",
        ];
        let category = Slot::new("category", SlotType::Symbol).with_constraint(Constraint::OneOf(
            ["strategic", "tactical", "operational", "analytical"]
                .into_iter()
                .map(Value::sym)
                .collect(),
        ));
        let solver = |id: &str, capability: &str| {
            Unit::builtin(id, UnitKind::Solver, &[capability])
                .port(Port::provides("invocation", "solver_invocation"))
                .param(Slot::new("algorithm", SlotType::Symbol))
                .param(Slot::new("max_iterations", SlotType::Integer))
        };
        let units = vec![
            Unit::builtin("unit_model_base", UnitKind::ModelBase, &["model_storage"])
                .port(Port::provides("definition", "model_storage"))
                .port(Port::provides("execution", "model_execution"))
                .port(Port::provides("catalog", "model_catalog"))
                .param(category)
                .param(Slot::new("model", SlotType::Symbol)),
            Unit::builtin("unit_model_directory", UnitKind::ModelDirectory, &["model_lookup"])
                .port(Port::requires("models", "model_catalog")),
            Unit::builtin("unit_model_dev_env", UnitKind::ModelDevEnv, &["mdl"])
                .port(Port::requires("models", "model_storage"))
                .port(Port::requires("knowledge", "knowledge_access"))
                .port(Port::requires("cae", "cae_link").multiplicity(Cardinality::at_least(0))),
            Unit::builtin("unit_model_runtime", UnitKind::ModelRuntime, &["mml"])
                .port(Port::requires("models", "model_execution"))
                .port(Port::requires("solvers", "solver_invocation").multiplicity(Cardinality::at_least(1)))
                .port(Port::requires("data", "data_access"))
                .port(Port::requires("knowledge", "knowledge_access"))
                .port(Port::provides("dialog", "user_dialog"))
                .param(Slot::new("method", SlotType::Symbol)),
            Unit::builtin("unit_data_mgmt_link", UnitKind::DataMgmtLink, &["data_management"])
                .port(Port::provides("data", "data_access")),
            Unit::builtin("unit_knowledge_mgmt_link", UnitKind::KnowledgeMgmtLink, &["knowledge_management"])
                .port(Port::provides("knowledge", "knowledge_access").multiplicity(Cardinality::at_least(1))),
            Unit::builtin("unit_dss_user_interface", UnitKind::DssUserInterface, &["user_dialog"])
                .port(Port::requires("runtime", "user_dialog")),
            solver("unit_simplex_solver", "linear_programming"),
            solver("unit_stochastic_solver", "stochastic_programming"),
            solver("unit_nonlinear_solver", "nonlinear_programming"),
            solver("unit_evolutionary_solver", "genetic_algorithm"),
        ];
        let catalog = Catalog {
            interfaces: interfaces.into_iter().map(Symbol::lit).collect(),
            units,
        };
        debug_assert!(catalog.check().is_ok());
        catalog
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn interfaces(&self) -> &BTreeSet<Symbol> {
        &self.interfaces
    }

    pub fn unit(&self, id: &Symbol) -> Option<&Unit> {
        self.units.iter().find(|u| &u.id == id)
    }

    /// Units offering `capability`, ordered by id.
    pub fn find_units(&self, capability: &Symbol) -> Vec<&Unit> {
        let mut found: Vec<&Unit> = self
            .units
            .iter()
            .filter(|u| u.capabilities.contains(capability))
            .collect();
        found.sort_by(|a, b| a.id.cmp(&b.id));
        found
    }

    /// Parses a catalog document and merges it over the built-in catalog.
    /// An empty document yields the built-in catalog.
    pub fn load(document: &[u8]) -> Result<Catalog, CatalogError> {
        Self::builtin().merge_document(document)
    }

    /// Merges a catalog document's interfaces and units into this catalog.
    pub fn merge_document(&self, document: &[u8]) -> Result<Catalog, CatalogError> {
        if document.iter().all(u8::is_ascii_whitespace) {
            return Ok(self.clone());
        }
        let extra: Catalog = canon::from_slice(document)?;
        let mut merged = self.clone();
        merged.interfaces.extend(extra.interfaces);
        merged.units.extend(extra.units);
        merged.check()?;
        Ok(merged)
    }

    /// Checks catalog invariants.
    pub fn check(&self) -> Result<(), CatalogError> {
        let mut ids = HashSet::new();
        for unit in &self.units {
            if !ids.insert(&unit.id) {
                return Err(CatalogError::DuplicateUnitId(unit.id.clone()));
            }
            if (unit.kind == UnitKind::ExternalSystem) != matches!(unit.origin, Origin::External(_)) {
                return Err(CatalogError::Format(format!(
                    "unit `{}`: external_system units must have an external origin and vice versa",
                    unit.id
                )));
            }
            let mut ports = HashSet::new();
            for port in &unit.ports {
                if !ports.insert(&port.name) {
                    return Err(CatalogError::Format(format!(
                        "unit `{}` declares port `{}` twice",
                        unit.id, port.name
                    )));
                }
                if !port.multiplicity.is_valid() {
                    return Err(CatalogError::Format(format!(
                        "unit `{}` port `{}` has multiplicity {}",
                        unit.id, port.name, port.multiplicity
                    )));
                }
                if !self.interfaces.contains(&port.interface_id) {
                    return Err(CatalogError::UndeclaredInterface {
                        unit: unit.id.clone(),
                        port: port.name.clone(),
                        interface: port.interface_id.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canon::to_bytes(self).expect("catalog always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_one_directory() {
        let cat = Catalog::builtin();
        let dirs = cat.units().iter().filter(|u| u.kind == UnitKind::ModelDirectory).count();
        assert_eq!(dirs, 1);
    }

    #[test]
    fn builtin_one_unit_per_structural_kind() {
        let cat = Catalog::builtin();
        for kind in UnitKind::ALL {
            let n = cat.units().iter().filter(|u| u.kind == kind).count();
            match kind {
                UnitKind::Solver => assert!(n >= 1),
                UnitKind::ExternalSystem => assert_eq!(n, 0),
                _ => assert_eq!(n, 1, "{kind}"),
            }
        }
    }

    #[test]
    fn simplex_solver_does_lp() {
        let cat = Catalog::builtin();
        let unit = cat.unit(&Symbol::lit("unit_simplex_solver")).unwrap();
        assert!(unit.capabilities.contains(&Symbol::lit("linear_programming")));
    }

    #[test]
    fn builtin_is_self_consistent() {
        Catalog::builtin().check().unwrap();
    }

    #[test]
    fn find_units_by_capability() {
        let cat = Catalog::builtin();
        let ids = |cap: &str| -> Vec<String> {
            cat.find_units(&Symbol::lit(cap)).iter().map(|u| u.id.to_string()).collect()
        };
        assert_eq!(ids("linear_programming"), ["unit_simplex_solver"]);
        assert_eq!(ids("mdl"), ["unit_model_dev_env"]);
        assert_eq!(ids("mml"), ["unit_model_runtime"]);
        assert!(ids("nonexistent_cap").is_empty());
    }

    #[test]
    fn compatibility_definition() {
        let p = Port::provides("a", "model_access");
        let r = Port::requires("b", "model_access");
        assert!(check_compatibility(&p, &r));
        assert!(check_compatibility(&r, &p));
        assert!(!check_compatibility(&p, &p.clone()));
        assert!(!check_compatibility(&p, &Port::requires("b", "other")));
    }

    #[test]
    fn load_adds_external_unit() {
        let doc = br#"{"units": [{"id": "ext_anylogic", "kind": "external_system",
            "capabilities": ["simulation"], "origin": {"external": "AnyLogic"},
            "ports": [{"name": "session", "direction": "provides", "interface": "cae_link"}]}]}"#;
        let cat = Catalog::load(doc).unwrap();
        let unit = cat.unit(&Symbol::lit("ext_anylogic")).unwrap();
        assert_eq!(unit.product_name(), Some("AnyLogic"));
        assert_eq!(cat.units().len(), Catalog::builtin().units().len() + 1);
        assert_eq!(unit.ports[0].multiplicity, Cardinality::ONE);
    }

    #[test]
    fn load_identity_and_errors() {
        assert_eq!(Catalog::load(b"").unwrap(), Catalog::builtin());
        assert_eq!(Catalog::load(b"{}").unwrap(), Catalog::builtin());

        let dup = br#"{"units": [{"id": "unit_simplex_solver", "kind": "solver", "origin": "builtin"}]}"#;
        assert!(matches!(Catalog::load(dup), Err(CatalogError::DuplicateUnitId(_))));

        let undeclared = br#"{"units": [{"id": "ext_x", "kind": "external_system", "origin": {"external": "X"},
            "ports": [{"name": "p", "direction": "provides", "interface": "telepathy"}]}]}"#;
        assert!(matches!(
            Catalog::load(undeclared),
            Err(CatalogError::UndeclaredInterface { .. })
        ));

        assert!(matches!(Catalog::load(b"{not json"), Err(CatalogError::Format(_))));
    }

    #[test]
    fn external_kind_needs_external_origin() {
        let doc = br#"{"units": [{"id": "ext_x", "kind": "external_system", "origin": "builtin"}]}"#;
        assert!(matches!(Catalog::load(doc), Err(CatalogError::Format(_))));
    }
}
