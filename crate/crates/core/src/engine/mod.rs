//! Forward-chaining synthesis engine.
//!
//! A [`Session`] consumes formal requirements one at a time. Each submission
//! asserts the requirement's facts and runs the production system to a
//! fixpoint; rules instantiate catalog units, wire their ports and set their
//! parameters. A requirement counts as processed only when some rule asserts
//! `(reqId, status, consumed)`; otherwise the session stops in
//! `missing_rule` until the KB is extended and the run retried.

mod agenda;
mod description;
mod memory;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use agenda::{build_agenda, conflict_resolve, Activation};
pub use description::{InstanceDescription, ProjectDescription, ProvenanceEntry, ValidationStamp};
pub use memory::WorkingMemory;

use crate::catalog::{check_compatibility, Catalog};
use crate::dsl::{formalize, FormalRequirement, RawRequirement, ReqIdGen};
use crate::knowledge::{
    Action, Bindings, Fact, KnowledgeBase, Pattern, Symbol, Term, Value, RESERVED_ATTRIBUTES,
};

/// Hard ceiling on firings per fixpoint run.
pub const MAX_FIRINGS_PER_RUN: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitInstance {
    pub instance_id: Symbol,
    pub unit_id: Symbol,
    #[serde(default)]
    pub param_values: BTreeMap<Symbol, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub from_instance: Symbol,
    pub from_port: Symbol,
    pub to_instance: Symbol,
    pub to_port: Symbol,
}

impl Connection {
    fn touches(&self, instance: &Symbol, port: &Symbol) -> bool {
        (&self.from_instance == instance && &self.from_port == port)
            || (&self.to_instance == instance && &self.to_port == port)
    }

    fn same_edge(&self, other: &Connection) -> bool {
        self == other
            || (self.from_instance == other.to_instance
                && self.from_port == other.to_port
                && self.to_instance == other.from_instance
                && self.to_port == other.from_port)
    }
}

/// Wired unit instances.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeGraph {
    pub instances: Vec<UnitInstance>,
    pub connections: Vec<Connection>,
}

impl SchemeGraph {
    pub fn instance(&self, id: &Symbol) -> Option<&UnitInstance> {
        self.instances.iter().find(|i| &i.instance_id == id)
    }

    /// Removes an instance and every connection touching it.
    pub fn without_instance(&self, id: &Symbol) -> SchemeGraph {
        SchemeGraph {
            instances: self.instances.iter().filter(|i| &i.instance_id != id).cloned().collect(),
            connections: self
                .connections
                .iter()
                .filter(|c| &c.from_instance != id && &c.to_instance != id)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Firing {
    pub seq: u64,
    pub rule_id: Symbol,
    pub bindings: Bindings,
    /// The rule's actions with every resolvable term replaced by its value.
    pub actions_applied: Vec<Action>,
}

/// Errors raised while applying rule actions. Any of them fails the session.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("incompatible connection: {0}")]
    IncompatibleConnection(String),
    #[error("action references unknown unit `{0}`")]
    UnknownUnitInAction(String),
    #[error("action references unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("action does not produce a ground fact: {0}")]
    NonGroundAction(String),
    #[error("attribute `{0}` is maintained by the engine")]
    ReservedAttribute(Symbol),
    #[error("more than {MAX_FIRINGS_PER_RUN} firings in one run")]
    RunawayRuleSet,
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::IncompatibleConnection(_) => "incompatible_connection",
            EngineError::UnknownUnitInAction(_) => "unknown_unit_in_action",
            EngineError::UnknownInstance(_) => "unknown_instance",
            EngineError::InvalidParam(_) => "invalid_param",
            EngineError::NonGroundAction(_) => "non_ground_action",
            EngineError::ReservedAttribute(_) => "reserved_attribute",
            EngineError::RunawayRuleSet => "runaway_rule_set",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingRequirement,
    MissingRule { req_id: Symbol },
    Halted,
    Failed { error: String, detail: String },
}

impl SessionStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SessionStatus::AwaitingRequirement => "awaiting_requirement",
            SessionStatus::MissingRule { .. } => "missing_rule",
            SessionStatus::Halted => "halted",
            SessionStatus::Failed { .. } => "failed",
        }
    }

    fn failed(err: &EngineError) -> Self {
        SessionStatus::Failed {
            error: err.code().to_string(),
            detail: err.to_string(),
        }
    }
}

/// Misuse of the session state machine.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("session is {} and cannot accept requirements", .0.name())]
    NotAwaiting(SessionStatus),
    #[error("session is {} and has no missing rule to retry", .0.name())]
    NotRetryable(SessionStatus),
    #[error("session is {} and cannot be described", .0.name())]
    NotDescribable(SessionStatus),
    #[error("requirement id `{0}` already used in this session")]
    DuplicateRequirementId(Symbol),
}

/// Result of one submission or retry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineOutcome {
    pub status: SessionStatus,
    pub firings: Vec<Firing>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    kb: Arc<KnowledgeBase>,
    catalog: Arc<Catalog>,
    wm: WorkingMemory,
    scheme: SchemeGraph,
    trace: Vec<Firing>,
    status: SessionStatus,
    refractory: HashMap<Symbol, HashSet<Bindings>>,
    created_by: BTreeMap<Symbol, ProvenanceEntry>,
    requirement_log: Vec<FormalRequirement>,
    req_ids: ReqIdGen,
    next_instance: u64,
    next_fact_seq: u64,
    next_firing_seq: u64,
    /// Distinct binding sets seen on any agenda; bounds the firing count.
    observed_bindings: BTreeSet<Bindings>,
    last_error: Option<EngineError>,
}

/// Inverse operations of one firing, replayed backwards if an action fails.
#[derive(Default)]
struct Journal {
    inserted: Vec<Fact>,
    removed: Vec<(Fact, u64)>,
    params: Vec<(usize, Symbol, Option<Value>)>,
    instances: usize,
    connections: usize,
    next_instance: u64,
    next_fact_seq: u64,
}

#[derive(Default)]
struct Control {
    halt: bool,
    yield_run: bool,
}

impl Session {
    /// Empty working memory, empty scheme, awaiting the first requirement.
    pub fn new(kb: Arc<KnowledgeBase>, catalog: Arc<Catalog>) -> Self {
        Self {
            id: "local".to_string(),
            kb,
            catalog,
            wm: WorkingMemory::new(),
            scheme: SchemeGraph::default(),
            trace: Vec::new(),
            status: SessionStatus::AwaitingRequirement,
            refractory: HashMap::new(),
            created_by: BTreeMap::new(),
            requirement_log: Vec::new(),
            req_ids: ReqIdGen::new(),
            next_instance: 1,
            next_fact_seq: 1,
            next_firing_seq: 1,
            observed_bindings: BTreeSet::new(),
            last_error: None,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> &SessionStatus {
        &self.status
    }

    pub fn scheme(&self) -> &SchemeGraph {
        &self.scheme
    }

    pub fn working_memory(&self) -> &WorkingMemory {
        &self.wm
    }

    pub fn trace(&self) -> &[Firing] {
        &self.trace
    }

    pub fn kb(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn requirement_log(&self) -> &[FormalRequirement] {
        &self.requirement_log
    }

    /// Number of distinct binding sets that appeared on any agenda so far.
    pub fn observed_binding_count(&self) -> usize {
        self.observed_bindings.len()
    }

    /// Seeds working memory directly. Meant for tests and tooling that drive
    /// the engine without requirements.
    pub fn assert_fact(&mut self, fact: Fact) {
        let seq = self.next_fact_seq;
        if self.wm.insert(fact, seq) {
            self.next_fact_seq += 1;
        }
    }

    /// Formalizes a statement with this session's id generator and submits it.
    pub fn submit_statement(&mut self, raw: &RawRequirement) -> Result<EngineOutcome, SessionError> {
        self.ensure_awaiting()?;
        let req = formalize(raw, &mut self.req_ids);
        self.submit_requirement(req)
    }

    pub fn submit_requirement(&mut self, req: FormalRequirement) -> Result<EngineOutcome, SessionError> {
        self.ensure_awaiting()?;
        if self.requirement_log.iter().any(|r| r.req_id == req.req_id) {
            return Err(SessionError::DuplicateRequirementId(req.req_id));
        }
        self.req_ids.claim(&req.req_id);
        for fact in &req.facts {
            self.assert_fact(fact.clone());
        }
        self.requirement_log.push(req);
        let (firings, halted) = self.run();
        self.settle_status(halted);
        Ok(EngineOutcome {
            status: self.status.clone(),
            firings,
        })
    }

    /// Re-runs inference for the pending requirement against a newer KB.
    /// Working memory, scheme, trace and refraction history are kept.
    pub fn retry(&mut self, kb: Arc<KnowledgeBase>) -> Result<EngineOutcome, SessionError> {
        if !matches!(self.status, SessionStatus::MissingRule { .. }) {
            return Err(SessionError::NotRetryable(self.status.clone()));
        }
        self.kb = kb;
        let (firings, halted) = self.run();
        self.settle_status(halted);
        Ok(EngineOutcome {
            status: self.status.clone(),
            firings,
        })
    }

    /// Runs the recognize-act cycle until the agenda empties, a rule halts or
    /// yields, or an action fails.
    pub fn run_to_fixpoint(&mut self) -> Result<Vec<Firing>, EngineError> {
        let (firings, halted) = self.run();
        if halted {
            self.status = SessionStatus::Halted;
        }
        match &self.status {
            SessionStatus::Failed { .. } => Err(self.last_error.clone().expect("failure recorded")),
            _ => Ok(firings),
        }
    }

    fn ensure_awaiting(&self) -> Result<(), SessionError> {
        match self.status {
            SessionStatus::AwaitingRequirement => Ok(()),
            _ => Err(SessionError::NotAwaiting(self.status.clone())),
        }
    }

    fn settle_status(&mut self, halted: bool) {
        if matches!(self.status, SessionStatus::Failed { .. }) {
            return;
        }
        let Some(req) = self.requirement_log.last() else {
            return;
        };
        let consumed = Fact::new(req.req_id.clone(), Symbol::lit("status"), Value::sym("consumed"));
        self.status = if !self.wm.contains(&consumed) {
            SessionStatus::MissingRule {
                req_id: req.req_id.clone(),
            }
        } else if halted || req.is_done() {
            SessionStatus::Halted
        } else {
            SessionStatus::AwaitingRequirement
        };
    }

    fn run(&mut self) -> (Vec<Firing>, bool) {
        let kb = Arc::clone(&self.kb);
        let mut firings = Vec::new();
        loop {
            let agenda = build_agenda(kb.rules(), &self.wm, |rule, bindings| {
                self.refractory.get(&rule.id).is_some_and(|seen| seen.contains(bindings))
            });
            for activation in &agenda {
                if !self.observed_bindings.contains(&activation.bindings) {
                    self.observed_bindings.insert(activation.bindings.clone());
                }
            }
            let Some(chosen) = conflict_resolve(&agenda) else {
                return (firings, false);
            };
            if firings.len() >= MAX_FIRINGS_PER_RUN {
                self.fail(EngineError::RunawayRuleSet);
                return (firings, false);
            }
            let rule = chosen.rule;
            let bindings = chosen.bindings.clone();
            drop(agenda);
            let seq = self.next_firing_seq;
            let mut journal = self.open_journal();
            match self.apply(&rule.id, seq, &bindings, &rule.actions, &mut journal) {
                Ok((applied, control)) => {
                    self.next_firing_seq += 1;
                    self.refractory.entry(rule.id.clone()).or_default().insert(bindings.clone());
                    let firing = Firing {
                        seq,
                        rule_id: rule.id.clone(),
                        bindings,
                        actions_applied: applied,
                    };
                    self.trace.push(firing.clone());
                    firings.push(firing);
                    if control.halt {
                        return (firings, true);
                    }
                    if control.yield_run {
                        return (firings, false);
                    }
                }
                Err(err) => {
                    self.roll_back(journal);
                    self.fail(err);
                    return (firings, false);
                }
            }
        }
    }

    fn fail(&mut self, err: EngineError) {
        self.status = SessionStatus::failed(&err);
        self.last_error = Some(err);
    }

    fn open_journal(&self) -> Journal {
        Journal {
            instances: self.scheme.instances.len(),
            connections: self.scheme.connections.len(),
            next_instance: self.next_instance,
            next_fact_seq: self.next_fact_seq,
            ..Journal::default()
        }
    }

    fn roll_back(&mut self, journal: Journal) {
        for (idx, slot, old) in journal.params.into_iter().rev() {
            let params = &mut self.scheme.instances[idx].param_values;
            match old {
                Some(v) => params.insert(slot, v),
                None => params.remove(&slot),
            };
        }
        self.scheme.instances.truncate(journal.instances);
        self.scheme.connections.truncate(journal.connections);
        for fact in journal.inserted.into_iter().rev() {
            self.wm.remove(&fact);
        }
        for (fact, seq) in journal.removed.into_iter().rev() {
            self.wm.insert(fact, seq);
        }
        self.next_instance = journal.next_instance;
        self.next_fact_seq = journal.next_fact_seq;
    }

    fn insert_fact(&mut self, fact: Fact, journal: &mut Journal) {
        if self.wm.insert(fact.clone(), self.next_fact_seq) {
            self.next_fact_seq += 1;
            journal.inserted.push(fact);
        }
    }

    fn apply(
        &mut self,
        rule_id: &Symbol,
        firing_seq: u64,
        bindings: &Bindings,
        actions: &[Action],
        journal: &mut Journal,
    ) -> Result<(Vec<Action>, Control), EngineError> {
        let mut control = Control::default();
        let mut b = bindings.clone();
        let mut applied = Vec::with_capacity(actions.len());
        let mut created = Vec::new();
        for action in actions {
            let ground = match action {
                Action::Assert(p) => {
                    let fact = ground_fact(p, &b)?;
                    self.insert_fact(fact, journal);
                    Action::Assert(resolve_pattern(p, &b))
                }
                Action::Retract(p) => {
                    let fact = ground_fact(p, &b)?;
                    if let Some(seq) = self.wm.seq_of(&fact) {
                        self.wm.remove(&fact);
                        journal.removed.push((fact, seq));
                    }
                    Action::Retract(resolve_pattern(p, &b))
                }
                Action::InstantiateUnit { unit, bind } => {
                    let unit_id = resolve_symbol(unit, &b)
                        .ok_or_else(|| EngineError::UnknownUnitInAction(unit.to_string()))?;
                    let kind = self
                        .catalog
                        .unit(&unit_id)
                        .ok_or_else(|| EngineError::UnknownUnitInAction(unit_id.to_string()))?
                        .kind;
                    let instance_id =
                        Symbol::new(format!("u{}", self.next_instance)).expect("u<digits> is a symbol");
                    self.next_instance += 1;
                    self.scheme.instances.push(UnitInstance {
                        instance_id: instance_id.clone(),
                        unit_id: unit_id.clone(),
                        param_values: BTreeMap::new(),
                    });
                    for (attr, value) in [
                        ("instance_of", Value::Symbol(unit_id.clone())),
                        ("unit_kind", Value::sym(kind.as_str())),
                    ] {
                        self.insert_fact(Fact::new(instance_id.clone(), Symbol::lit(attr), value), journal);
                    }
                    b.insert(bind.clone(), Value::Symbol(instance_id.clone()));
                    created.push(instance_id);
                    Action::InstantiateUnit {
                        unit: Term::Const(Value::Symbol(unit_id)),
                        bind: bind.clone(),
                    }
                }
                Action::Connect {
                    from,
                    from_port,
                    to,
                    to_port,
                } => {
                    let from_id = resolve_symbol(from, &b)
                        .ok_or_else(|| EngineError::UnknownInstance(from.to_string()))?;
                    let to_id =
                        resolve_symbol(to, &b).ok_or_else(|| EngineError::UnknownInstance(to.to_string()))?;
                    let conn = Connection {
                        from_instance: from_id,
                        from_port: from_port.clone(),
                        to_instance: to_id,
                        to_port: to_port.clone(),
                    };
                    self.connect(conn.clone())?;
                    Action::Connect {
                        from: Term::Const(Value::Symbol(conn.from_instance)),
                        from_port: conn.from_port,
                        to: Term::Const(Value::Symbol(conn.to_instance)),
                        to_port: conn.to_port,
                    }
                }
                Action::SetParam {
                    instance,
                    slot,
                    value,
                } => {
                    let inst_id = resolve_symbol(instance, &b)
                        .ok_or_else(|| EngineError::UnknownInstance(instance.to_string()))?;
                    let slot_name = resolve_symbol(slot, &b)
                        .ok_or_else(|| EngineError::InvalidParam(format!("slot {slot} is not a symbol")))?;
                    let value = value
                        .resolve(&b)
                        .ok_or_else(|| EngineError::NonGroundAction(action.to_string()))?;
                    let (idx, old) = self.set_param(&inst_id, &slot_name, value.clone())?;
                    journal.params.push((idx, slot_name.clone(), old));
                    Action::SetParam {
                        instance: Term::Const(Value::Symbol(inst_id)),
                        slot: Term::Const(Value::Symbol(slot_name)),
                        value: Term::Const(value),
                    }
                }
                Action::RequestNextRequirement => {
                    control.yield_run = true;
                    Action::RequestNextRequirement
                }
                Action::Halt => {
                    control.halt = true;
                    Action::Halt
                }
            };
            applied.push(ground);
        }
        for instance in created {
            self.created_by.insert(
                instance,
                ProvenanceEntry {
                    rule_id: rule_id.clone(),
                    seq: firing_seq,
                },
            );
        }
        Ok((applied, control))
    }

    fn connect(&mut self, conn: Connection) -> Result<(), EngineError> {
        let scheme = &mut self.scheme;
        let catalog = &self.catalog;
        let port_of = |scheme: &SchemeGraph, instance: &Symbol, port: &Symbol| {
            let inst = scheme
                .instance(instance)
                .ok_or_else(|| EngineError::UnknownInstance(instance.to_string()))?;
            let unit = catalog
                .unit(&inst.unit_id)
                .ok_or_else(|| EngineError::UnknownUnitInAction(inst.unit_id.to_string()))?;
            unit.find_port(port).cloned().ok_or_else(|| {
                EngineError::IncompatibleConnection(format!(
                    "unit `{}` (instance {instance}) has no port `{port}`",
                    inst.unit_id
                ))
            })
        };
        let a = port_of(scheme, &conn.from_instance, &conn.from_port)?;
        let b = port_of(scheme, &conn.to_instance, &conn.to_port)?;
        if !check_compatibility(&a, &b) {
            return Err(EngineError::IncompatibleConnection(format!(
                "{}.{} ({:?} {}) cannot connect to {}.{} ({:?} {})",
                conn.from_instance,
                conn.from_port,
                a.direction,
                a.interface_id,
                conn.to_instance,
                conn.to_port,
                b.direction,
                b.interface_id
            )));
        }
        if scheme.connections.iter().any(|c| c.same_edge(&conn)) {
            return Ok(());
        }
        for (instance, port) in [(&conn.from_instance, &a), (&conn.to_instance, &b)] {
            let used = scheme.connections.iter().filter(|c| c.touches(instance, &port.name)).count() as u64;
            if port.multiplicity.max.is_some_and(|max| used + 1 > max) {
                return Err(EngineError::IncompatibleConnection(format!(
                    "port {instance}.{} allows at most {} connection(s)",
                    port.name,
                    port.multiplicity.max.unwrap_or_default()
                )));
            }
        }
        scheme.connections.push(conn);
        Ok(())
    }

    /// Returns the instance index and the previous value of the slot.
    fn set_param(&mut self, instance: &Symbol, slot: &Symbol, value: Value) -> Result<(usize, Option<Value>), EngineError> {
        let idx = self
            .scheme
            .instances
            .iter()
            .position(|i| &i.instance_id == instance)
            .ok_or_else(|| EngineError::UnknownInstance(instance.to_string()))?;
        let inst = &mut self.scheme.instances[idx];
        let unit = self
            .catalog
            .unit(&inst.unit_id)
            .ok_or_else(|| EngineError::UnknownUnitInAction(inst.unit_id.to_string()))?;
        let param = unit.find_param(slot).ok_or_else(|| {
            EngineError::InvalidParam(format!("unit `{}` has no parameter `{slot}`", unit.id))
        })?;
        if !param.value_type.admits(&value) {
            return Err(EngineError::InvalidParam(format!(
                "parameter `{slot}` of `{}` does not accept {} value {value}",
                unit.id,
                value.type_name()
            )));
        }
        Ok((idx, inst.param_values.insert(slot.clone(), value)))
    }

    /// Self-contained snapshot of the design so far.
    pub fn project_description(&self) -> Result<ProjectDescription, SessionError> {
        match self.status {
            SessionStatus::AwaitingRequirement | SessionStatus::Halted => {}
            _ => return Err(SessionError::NotDescribable(self.status.clone())),
        }
        Ok(ProjectDescription::from_session(self))
    }

    pub(crate) fn created_by(&self, instance: &Symbol) -> Option<&ProvenanceEntry> {
        self.created_by.get(instance)
    }
}

fn resolve_symbol(term: &Term, bindings: &Bindings) -> Option<Symbol> {
    term.resolve(bindings)?.as_symbol().cloned()
}

fn resolve_pattern(p: &Pattern, bindings: &Bindings) -> Pattern {
    let resolve = |t: &Term| t.resolve(bindings).map(Term::Const).unwrap_or_else(|| t.clone());
    Pattern {
        entity: resolve(&p.entity),
        attribute: resolve(&p.attribute),
        value: resolve(&p.value),
        negated: p.negated,
    }
}

fn ground_fact(p: &Pattern, bindings: &Bindings) -> Result<Fact, EngineError> {
    let fact = p
        .instantiate(bindings)
        .ok_or_else(|| EngineError::NonGroundAction(p.to_string()))?;
    if RESERVED_ATTRIBUTES.contains(&fact.attribute.as_str()) {
        return Err(EngineError::ReservedAttribute(fact.attribute));
    }
    Ok(fact)
}
