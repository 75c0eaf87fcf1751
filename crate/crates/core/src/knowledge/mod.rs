//! Hybrid knowledge representation: facts and production rules for
//! synthesis, frames for scheme analysis.

mod frame;
mod kb;
mod pattern;
mod rule;
mod value;

pub use frame::{flatten_frame, Cardinality, Constraint, Frame, FrameError, FrameKind, Slot, SlotType};
pub use kb::{ExportSelector, KbArchive, KbError, KnowledgeBase, ARCHIVE_SCHEMA};
pub use pattern::{match_conditions, match_pattern, Bindings, Pattern, Term, Var};
pub use rule::{Action, ProductionRule, RuleError, RESERVED_ATTRIBUTES};
pub use value::{Decimal, Fact, InvalidSymbol, Symbol, Value};
