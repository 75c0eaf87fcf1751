#![allow(dead_code)]

use std::sync::Arc;

use mbms_core::codegen::{canonical_manifest, FileSet, TemplateSet};
use mbms_core::dsl::parse_requirements;
use mbms_core::engine::Session;
use mbms_core::pipeline::{generate, stamped_description, submit_all};
use mbms_core::{shipped, Catalog, KnowledgeBase};

pub fn shipped_kb() -> KnowledgeBase {
    shipped::knowledge_base().unwrap()
}

pub fn shipped_catalog() -> Catalog {
    shipped::catalog().unwrap()
}

/// Runs the golden script to completion; panics on any stop.
pub fn golden_session_with(kb: KnowledgeBase) -> Session {
    let mut session = Session::new(Arc::new(kb), Arc::new(shipped_catalog()));
    let raws = parse_requirements(shipped::GOLDEN_REQUIREMENTS).unwrap();
    assert_eq!(submit_all(&mut session, &raws).unwrap(), None);
    session
}

pub fn golden_session() -> Session {
    golden_session_with(shipped_kb())
}

pub fn golden_scaffold_with(kb: KnowledgeBase) -> FileSet {
    let (pd, _) = stamped_description(&golden_session_with(kb)).unwrap();
    generate(pd, false, &TemplateSet::default()).unwrap()
}

pub fn golden_manifest_with(kb: KnowledgeBase) -> Vec<u8> {
    let (pd, _) = stamped_description(&golden_session_with(kb)).unwrap();
    canonical_manifest(&pd)
}
