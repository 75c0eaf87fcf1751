//! Independent reference implementations for engine checks: a brute-force
//! matcher, a naive iterate-until-stable fixpoint and an exhaustive
//! enumeration of firing orders. Nothing here calls the engine's matcher.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use mbms_core::engine::Session;
use mbms_core::{Action, Catalog, Fact, KnowledgeBase, Pattern, ProductionRule, Symbol, Term, Value};
use proptest::prelude::*;

pub type Env = BTreeMap<String, Value>;

const ENTITIES: [&str; 4] = ["a", "b", "c", "d"];
const ATTRIBUTES: [&str; 3] = ["p", "q", "r"];
const VARS: [&str; 3] = ["?x", "?y", "?z"];

#[derive(Debug, Clone)]
pub struct Instance {
    pub kb: KnowledgeBase,
    pub facts: Vec<Fact>,
    pub confluent: bool,
}

fn term_strategy(consts: &'static [&'static str]) -> impl Strategy<Value = Term> {
    prop_oneof![
        prop::sample::select(VARS.to_vec()).prop_map(Term::var),
        prop::sample::select(consts.to_vec()).prop_map(Term::sym),
    ]
}

fn pattern_strategy() -> impl Strategy<Value = Pattern> {
    (
        term_strategy(&ENTITIES),
        prop::sample::select(ATTRIBUTES.to_vec()),
        term_strategy(&ENTITIES),
    )
        .prop_map(|(e, a, v)| Pattern::new(e, Term::sym(a), v))
}

fn fact_strategy() -> impl Strategy<Value = Fact> {
    (
        prop::sample::select(ENTITIES.to_vec()),
        prop::sample::select(ATTRIBUTES.to_vec()),
        prop::sample::select(ENTITIES.to_vec()),
    )
        .prop_map(|(e, a, v)| Fact::lit(e, a, Value::sym(v)))
}

/// Replaces variables that the positive conditions do not bind with
/// constants, so every generated rule passes the closure check.
fn close_over(p: Pattern, bound: &BTreeSet<String>) -> Pattern {
    let fix = |t: Term| match &t {
        Term::Var(v) if !bound.contains(&v.to_string()) => Term::sym("a"),
        _ => t,
    };
    Pattern::new(fix(p.entity), p.attribute, fix(p.value))
}

fn rule_strategy(index: usize, confluent: bool) -> impl Strategy<Value = ProductionRule> {
    (
        prop::collection::vec(pattern_strategy(), 1..=2),
        prop::collection::vec(pattern_strategy(), 0..=1),
        prop::collection::vec((pattern_strategy(), any::<bool>()), 1..=2),
        -1i64..=1,
    )
        .prop_map(move |(pos, neg, acts, salience)| {
            let bound: BTreeSet<String> = pos.iter().flat_map(|p| p.vars().map(|v| v.to_string())).collect();
            let mut conditions = pos;
            if !confluent {
                conditions.extend(neg.into_iter().map(Pattern::negate));
            }
            let actions = acts
                .into_iter()
                .map(|(p, retract)| {
                    let p = close_over(p, &bound);
                    if retract && !confluent {
                        Action::Retract(p)
                    } else {
                        Action::Assert(p)
                    }
                })
                .collect();
            ProductionRule::new(&format!("rule{index}"), conditions, actions).with_salience(salience)
        })
}

/// Up to 5 rules and 15 facts. Confluent instances have no negation and no
/// retraction, so their final memory is order independent.
pub fn instance_strategy() -> impl Strategy<Value = Instance> {
    any::<bool>().prop_flat_map(|confluent| sized_instance_strategy(5, 15, confluent))
}

pub fn sized_instance_strategy(max_rules: usize, max_facts: usize, confluent: bool) -> impl Strategy<Value = Instance> {
    {
        (
            (1usize..=max_rules).prop_flat_map(move |n| (0..n).map(|i| rule_strategy(i, confluent)).collect::<Vec<_>>()),
            prop::collection::vec(fact_strategy(), 0..=max_facts),
        )
            .prop_map(move |(rules, facts)| {
                let kb = KnowledgeBase::from_parts(rules, vec![], 1)
                    .expect("generated rules are well formed")
                    .with_meta("confluent", if confluent { "true" } else { "false" });
                Instance { kb, facts, confluent }
            })
    }
}

fn resolve(t: &Term, env: &Env) -> Option<Value> {
    match t {
        Term::Const(v) => Some(v.clone()),
        Term::Var(v) => env.get(&v.to_string()).cloned(),
    }
}

fn unify(t: &Term, value: &Value, env: &mut Env) -> bool {
    match t {
        Term::Const(c) => c == value,
        Term::Var(v) => match env.get(&v.to_string()) {
            Some(bound) => bound == value,
            None => {
                env.insert(v.to_string(), value.clone());
                true
            }
        },
    }
}

fn fits(p: &Pattern, f: &Fact, env: &Env) -> Option<Env> {
    let mut env = env.clone();
    (unify(&p.entity, &Value::Symbol(f.entity.clone()), &mut env)
        && unify(&p.attribute, &Value::Symbol(f.attribute.clone()), &mut env)
        && unify(&p.value, &f.value, &mut env))
    .then_some(env)
}

/// Every environment satisfying the conditions, by trying each fact for
/// each positive condition and then testing negations.
pub fn brute_force_match(conditions: &[Pattern], facts: &BTreeSet<Fact>) -> BTreeSet<Env> {
    let positives: Vec<&Pattern> = conditions.iter().filter(|p| !p.negated).collect();
    let negatives: Vec<&Pattern> = conditions.iter().filter(|p| p.negated).collect();
    let mut envs = vec![Env::new()];
    for p in positives {
        envs = envs
            .iter()
            .flat_map(|env| facts.iter().filter_map(|f| fits(p, f, env)).collect::<Vec<_>>())
            .collect();
    }
    envs.into_iter()
        .filter(|env| !negatives.iter().any(|n| facts.iter().any(|f| fits(n, f, env).is_some())))
        .collect()
}

fn ground(p: &Pattern, env: &Env) -> Fact {
    let sym = |t: &Term| match resolve(t, env) {
        Some(Value::Symbol(s)) => s,
        other => panic!("non-symbol in entity/attribute: {other:?}"),
    };
    Fact::new(sym(&p.entity), sym(&p.attribute), resolve(&p.value, env).expect("closed rule"))
}

fn apply(rule: &ProductionRule, env: &Env, memory: &mut BTreeSet<Fact>) {
    for action in &rule.actions {
        match action {
            Action::Assert(p) => {
                memory.insert(ground(p, env));
            }
            Action::Retract(p) => {
                memory.remove(&ground(p, env));
            }
            _ => unreachable!("generated rules only assert and retract"),
        }
    }
}

/// Fires every new (rule, environment) pair found in a sweep over all rules,
/// and repeats until a sweep finds nothing new. Valid for monotonic rules.
pub fn naive_fixpoint(rules: &[ProductionRule], facts: &[Fact]) -> BTreeSet<Fact> {
    let mut memory: BTreeSet<Fact> = facts.iter().cloned().collect();
    let mut fired: BTreeSet<(usize, Env)> = BTreeSet::new();
    loop {
        let mut changed = false;
        for (i, rule) in rules.iter().enumerate() {
            for env in brute_force_match(&rule.conditions, &memory) {
                if fired.insert((i, env.clone())) {
                    apply(rule, &env, &mut memory);
                    changed = true;
                }
            }
        }
        if !changed {
            return memory;
        }
    }
}

type State = (BTreeSet<Fact>, BTreeSet<(usize, Env)>);

/// Final memories reachable under every possible agenda choice, or `None`
/// when the search visits more than `budget` distinct states.
pub fn all_final_memories(
    rules: &[ProductionRule],
    facts: &[Fact],
    budget: usize,
) -> Option<BTreeSet<BTreeSet<Fact>>> {
    fn go(
        rules: &[ProductionRule],
        state: State,
        memo: &mut HashMap<State, BTreeSet<BTreeSet<Fact>>>,
        budget: usize,
    ) -> Option<BTreeSet<BTreeSet<Fact>>> {
        if let Some(hit) = memo.get(&state) {
            return Some(hit.clone());
        }
        if memo.len() >= budget {
            return None;
        }
        let (memory, fired) = &state;
        let mut finals = BTreeSet::new();
        let mut any = false;
        for (i, rule) in rules.iter().enumerate() {
            for env in brute_force_match(&rule.conditions, memory) {
                if fired.contains(&(i, env.clone())) {
                    continue;
                }
                any = true;
                let mut next_mem = memory.clone();
                apply(rule, &env, &mut next_mem);
                let mut next_fired = fired.clone();
                next_fired.insert((i, env));
                finals.extend(go(rules, (next_mem, next_fired), memo, budget)?);
            }
        }
        if !any {
            finals.insert(memory.clone());
        }
        memo.insert(state, finals.clone());
        Some(finals)
    }
    go(rules, (facts.iter().cloned().collect(), BTreeSet::new()), &mut HashMap::new(), budget)
}

pub struct EngineRun {
    pub memory: BTreeSet<Fact>,
    pub firings: usize,
    pub observed_bindings: usize,
}

pub fn run_engine(instance: &Instance) -> EngineRun {
    let mut session = Session::new(Arc::new(instance.kb.clone()), Arc::new(Catalog::builtin()));
    for f in &instance.facts {
        session.assert_fact(f.clone());
    }
    let firings = session.run_to_fixpoint().expect("assert/retract rules cannot fail").len();
    EngineRun {
        memory: session.working_memory().facts().cloned().collect(),
        firings,
        observed_bindings: session.observed_binding_count(),
    }
}

/// Oracle agreement for confluent instances and the refractoriness bound for
/// all instances.
pub fn check_instance(instance: &Instance) -> Result<(), String> {
    let run = run_engine(instance);
    let rules = instance.kb.rules();
    let bound = rules.len() * run.observed_bindings;
    if run.firings > bound {
        return Err(format!("{} firings exceed bound {bound}", run.firings));
    }
    if instance.confluent {
        let oracle = naive_fixpoint(rules, &instance.facts);
        if run.memory != oracle {
            return Err(format!("engine memory {:?} != oracle {:?}", run.memory, oracle));
        }
    }
    Ok(())
}

pub fn symbol(s: &str) -> Symbol {
    Symbol::lit(s)
}
