//! Batch drivers shared by the command line and the HTTP service.

use serde::Serialize;

use crate::codegen::{generate_scaffold, CodegenError, FileSet, TemplateSet};
use crate::dsl::RawRequirement;
use crate::engine::{ProjectDescription, Session, SessionError, SessionStatus, ValidationStamp};
use crate::knowledge::Symbol;
use crate::validator::{validate, ValidationError, ValidationReport};

/// Why a script stopped before its last statement was processed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScriptStop {
    MissingRule { req_id: Symbol, statement: usize },
    Failed { error: String, detail: String, statement: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Codegen(#[from] CodegenError),
}

/// Submits statements in order until one leaves the session neither
/// awaiting nor halted. `statement` in a stop is the 0-based index.
pub fn submit_all(session: &mut Session, raws: &[RawRequirement]) -> Result<Option<ScriptStop>, SessionError> {
    for (i, raw) in raws.iter().enumerate() {
        let outcome = session.submit_statement(raw)?;
        match outcome.status {
            SessionStatus::AwaitingRequirement | SessionStatus::Halted => {}
            SessionStatus::MissingRule { req_id } => {
                return Ok(Some(ScriptStop::MissingRule { req_id, statement: i }))
            }
            SessionStatus::Failed { error, detail } => {
                return Ok(Some(ScriptStop::Failed {
                    error,
                    detail,
                    statement: i,
                }))
            }
        }
    }
    Ok(None)
}

/// Validates the session's scheme and returns its description stamped with
/// the result.
pub fn stamped_description(session: &Session) -> Result<(ProjectDescription, ValidationReport), PipelineError> {
    let report = validate(session.scheme(), session.kb(), session.catalog())?;
    let pd = session
        .project_description()?
        .with_validation(ValidationStamp::from(&report));
    Ok((pd, report))
}

/// Generates the scaffold for a stamped description. With `force`, a failed
/// stamp is marked forced instead of refusing.
pub fn generate(mut pd: ProjectDescription, force: bool, templates: &TemplateSet) -> Result<FileSet, CodegenError> {
    if let Some(stamp) = pd.validation.as_mut() {
        if !stamp.passed && force {
            stamp.forced = true;
        }
    }
    generate_scaffold(&pd, templates)
}
