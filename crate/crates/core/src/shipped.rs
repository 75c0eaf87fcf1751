//! Knowledge base, catalogs and scripts shipped with the crate.

use crate::catalog::{Catalog, CatalogError};
use crate::knowledge::{KbError, KnowledgeBase};

/// Archive of the shipped knowledge base.
pub const KB_ARCHIVE: &str = include_str!("../data/shipped.mbkb");
/// Client catalog with external products; merged over the built-in units.
pub const EXTERNAL_CATALOG: &str = include_str!("../data/external.mbcat");
/// Canonical form of [`Catalog::builtin`].
pub const BUILTIN_CATALOG: &str = include_str!("../data/builtin.mbcat");
/// Requirements script of the reference linear programming design.
pub const GOLDEN_REQUIREMENTS: &str = include_str!("../data/golden.req");
/// A rule the shipped KB lacks: handles `require method genetic_algorithm`.
pub const GENETIC_ALGORITHM_RULE: &str = include_str!("../data/genetic_algorithm.rule");

pub fn knowledge_base() -> Result<KnowledgeBase, KbError> {
    KnowledgeBase::from_archive_bytes(KB_ARCHIVE.as_bytes())
}

/// Built-in units plus the external products.
pub fn catalog() -> Result<Catalog, CatalogError> {
    Catalog::load(EXTERNAL_CATALOG.as_bytes())
}
