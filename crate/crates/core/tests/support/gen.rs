//! Generators for requirement scripts and frame hierarchies.

#![allow(dead_code)]

use mbms_core::dsl::{ExternalKind, ModelCategory, RawRequirement, Statement};
use mbms_core::{Decimal, Frame, FrameKind, Slot, SlotType, Symbol, Value};
use proptest::prelude::*;

pub fn ident() -> impl Strategy<Value = Symbol> {
    "[a-z][a-z0-9_]{0,10}".prop_map(|s| Symbol::new(s).unwrap())
}

/// Any printable text, including quotes, backslashes and non-ASCII.
fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[ -~]{0,16}",
        "[\"\\\\a-z ]{0,8}",
        any::<String>().prop_map(|s| s.chars().filter(|c| !c.is_control()).take(12).collect()),
    ]
}

fn decimal() -> impl Strategy<Value = Decimal> {
    prop_oneof![
        (-1_000_000i64..1_000_000, 0u32..6).prop_map(|(n, scale)| n as f64 / 10f64.powi(scale as i32)),
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
    ]
    .prop_map(|f| Decimal::new(f).unwrap())
}

fn param_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        ident().prop_map(Value::Symbol),
        any::<i64>().prop_map(Value::Integer),
        decimal().prop_map(Value::Decimal),
        text().prop_map(Value::Text),
    ]
}

pub fn statement() -> impl Strategy<Value = Statement> {
    prop_oneof![
        ident().prop_map(Statement::Goal),
        (prop::sample::select(ModelCategory::ALL.to_vec()), ident())
            .prop_map(|(category, name)| Statement::RequireModel { category, name }),
        ident().prop_map(Statement::RequireMethod),
        ident().prop_map(Statement::RequireSolver),
        (prop::sample::select(vec![ExternalKind::Cae, ExternalKind::Solver]), text())
            .prop_map(|(kind, product)| Statement::IntegrateExternal { kind, product }),
        (ident(), ident(), param_value()).prop_map(|(target, slot, value)| Statement::Param { target, slot, value }),
        Just(Statement::Done),
    ]
}

pub fn statements() -> impl Strategy<Value = Vec<RawRequirement>> {
    prop::collection::vec(statement().prop_map(RawRequirement::new), 0..12)
}

/// Source-like text that is often, but not always, a valid script.
pub fn noisy_script() -> impl Strategy<Value = String> {
    let fragment = prop_oneof![
        Just("goal ".to_string()),
        Just("require ".to_string()),
        Just("model ".to_string()),
        Just("tactical ".to_string()),
        Just("method ".to_string()),
        Just("solver ".to_string()),
        Just("integrate external ".to_string()),
        Just("cae ".to_string()),
        Just("param ".to_string()),
        Just("done\n".to_string()),
        Just(".".to_string()),
        Just("=".to_string()),
        Just("\"".to_string()),
        Just("\\".to_string()),
        Just("# note\n".to_string()),
        Just("\n".to_string()),
        "[a-z0-9_]{1,6} ?",
        "[-+]?[0-9]{0,3}\\.?[0-9]{0,3}",
        "[ -~]{1,3}",
        Just("é ".to_string()),
        Just("\u{1F600}".to_string()),
    ];
    prop::collection::vec(fragment, 0..24).prop_map(|parts| parts.concat())
}

/// Frame names `f0..fn`.
fn frame_name(i: usize) -> String {
    format!("f{i}")
}

fn slot(name_pool: usize) -> impl Strategy<Value = Slot> {
    (
        0..name_pool,
        prop::sample::select(vec![SlotType::Integer, SlotType::Symbol, SlotType::Text, SlotType::Boolean]),
        any::<bool>(),
    )
        .prop_map(|(n, ty, required)| {
            let s = Slot::new(&format!("s{n}"), ty);
            if required {
                s.required(mbms_core::Cardinality::ONE)
            } else {
                s
            }
        })
}

fn frame(i: usize, parent: Option<usize>) -> impl Strategy<Value = Frame> {
    (
        prop::collection::vec(slot(6), 0..4),
        prop::collection::btree_map(0..6usize, any::<i64>(), 0..3),
        prop::sample::select(vec![FrameKind::Prototype, FrameKind::Pattern, FrameKind::Instance]),
    )
        .prop_map(move |(slots, values, kind)| {
            let mut f = Frame::new(&frame_name(i), kind);
            if let Some(p) = parent {
                f = f.isa(&frame_name(p));
            }
            let mut seen = std::collections::BTreeSet::new();
            for s in slots {
                if seen.insert(s.name.clone()) {
                    f = f.slot(s);
                }
            }
            f.values = values
                .into_iter()
                .map(|(k, v)| (Symbol::new(format!("s{k}")).unwrap(), Value::Integer(v)))
                .collect();
            f
        })
}

/// A forest: frame `i` has no parent or a parent with a smaller index.
pub fn acyclic_hierarchy() -> impl Strategy<Value = Vec<Frame>> {
    (1usize..10)
        .prop_flat_map(|n| {
            (0..n)
                .map(|i| {
                    if i == 0 {
                        Just(None).boxed()
                    } else {
                        prop::option::of(0..i).boxed()
                    }
                })
                .collect::<Vec<_>>()
        })
        .prop_flat_map(|parents| {
            parents
                .into_iter()
                .enumerate()
                .map(|(i, p)| frame(i, p))
                .collect::<Vec<_>>()
        })
}

/// A hierarchy containing a cycle `f0 -> f1 -> .. -> f{k-1} -> f0`, plus
/// tail frames whose chains lead into the cycle. Returns the frames and the
/// number of frames on the cycle.
pub fn cyclic_hierarchy() -> impl Strategy<Value = (Vec<Frame>, usize)> {
    (1usize..6, 0usize..5)
        .prop_flat_map(|(cycle, tail)| {
            let frames: Vec<_> = (0..cycle + tail)
                .map(|i| {
                    let parent = if i < cycle { (i + 1) % cycle } else { i - 1 };
                    frame(i, Some(parent))
                })
                .collect();
            (frames, Just(cycle))
        })
}
