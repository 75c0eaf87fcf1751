//! Design automation for model base management systems.
//!
//! Requirements written in a small DSL are formalized into facts, a
//! forward-chaining production system instantiates and wires catalog units
//! into a scheme, frames check the scheme against prototypes and
//! anti-patterns, and a deterministic generator emits project scaffolding.

pub mod canon;
pub mod catalog;
pub mod codegen;
pub mod dsl;
pub mod engine;
pub mod knowledge;
pub mod pipeline;
pub mod shipped;
pub mod validator;

pub use catalog::{check_compatibility, Catalog, CatalogError, Direction, Origin, Port, Unit, UnitKind};
pub use knowledge::*;
