//! Scaffolding generation from a stamped project description.
//!
//! Output is a pure function of the description and the template set: LF
//! line endings, UTF-8 without BOM, files ordered by path.

mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

pub use template::Template;

use crate::canon::{self, CanonError};
use crate::catalog::Origin;
use crate::engine::ProjectDescription;
use crate::knowledge::Value;

pub const MANIFEST_PATH: &str = "mbms.manifest";
pub const WIRING_PATH: &str = "wiring.conf";
pub const DESIGN_PATH: &str = "DESIGN.md";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodegenError {
    #[error("template field `{0}` does not resolve")]
    TemplateFieldUnresolved(String),
    #[error("template syntax: {0}")]
    TemplateSyntax(String),
    #[error("missing template `{0}`")]
    MissingTemplate(String),
    #[error("description carries no passing validation stamp")]
    UnstampedDescription,
    #[error("manifest: {0}")]
    Manifest(String),
}

impl From<CanonError> for CodegenError {
    fn from(e: CanonError) -> Self {
        CodegenError::Manifest(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeneratedFile {
    pub path: String,
    pub contents: Vec<u8>,
}

/// Generated files ordered by path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileSet {
    files: Vec<GeneratedFile>,
}

impl FileSet {
    fn from_files(mut files: Vec<GeneratedFile>) -> Self {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        FileSet { files }
    }

    pub fn files(&self) -> &[GeneratedFile] {
        &self.files
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.path == path).map(|f| f.contents.as_slice())
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|f| f.path.as_str())
    }
}

const UNIT_STUB: &str = "\
# unit stub
instance = {{instance_id}}
unit = {{unit_id}}
kind = {{kind}}
origin = {{origin}}
{{#each capabilities}}capability = {{this}}
{{/each}}{{#each params}}param.{{name}} = {{value}}
{{/each}}created_by = {{created_by}}
{{#each linked_rules}}linked_rule = {{this}}
{{/each}}";

const WIRING: &str = "\
# wiring for {{goal}}
{{#each connections}}{{from_instance}}.{{from_port}} -> {{to_instance}}.{{to_port}}
{{/each}}";

const DESIGN: &str = "\
# MBMS design: {{goal}}

Knowledge base version {{kb_version}}. Validation: {{validation}}.

## Units

| instance | unit | kind | origin |
|---|---|---|---|
{{#each instances}}| {{instance_id}} | {{unit_id}} | {{kind}} | {{origin}} |
{{/each}}
## Connections

{{#each connections}}- {{from_instance}}.{{from_port}} -> {{to_instance}}.{{to_port}}
{{/each}}
## Requirements

{{#each requirements}}- {{req_id}}: {{text}}
{{/each}}
## Findings

{{#each findings}}- {{this}}
{{/each}}";

/// Named templates used by [`generate_scaffold`]: `unit_stub` (rendered once
/// per instance with the instance as innermost scope), `wiring` and `design`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub version: String,
    pub templates: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let templates = [("design", DESIGN), ("unit_stub", UNIT_STUB), ("wiring", WIRING)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        TemplateSet {
            version: "1".to_string(),
            templates,
        }
    }
}

impl TemplateSet {
    fn parsed(&self, name: &str) -> Result<Template, CodegenError> {
        let src = self
            .templates
            .get(name)
            .ok_or_else(|| CodegenError::MissingTemplate(name.to_string()))?;
        Template::parse(src)
    }
}

/// Canonical bytes of `pd`; structurally equal descriptions give equal bytes.
pub fn canonical_manifest(pd: &ProjectDescription) -> Vec<u8> {
    canon::to_bytes(pd).expect("descriptions hold only finite decimals")
}

pub fn parse_manifest(bytes: &[u8]) -> Result<ProjectDescription, CodegenError> {
    Ok(canon::from_slice(bytes)?)
}

fn value_text(v: &Value) -> String {
    match v {
        Value::Text(t) => canon::to_compact_string(t).expect("strings serialize"),
        other => other.to_string(),
    }
}

fn origin_text(origin: &Origin) -> String {
    match origin {
        Origin::Builtin => "builtin".to_string(),
        Origin::External(product) => format!("external {}", canon::to_compact_string(product).expect("strings serialize")),
    }
}

/// Flattens a description into the string-valued tree templates see.
pub fn template_context(pd: &ProjectDescription) -> Json {
    let instances: Vec<Json> = pd
        .instances
        .iter()
        .map(|i| {
            json!({
                "instance_id": i.instance_id.as_str(),
                "unit_id": i.unit_id.as_str(),
                "kind": i.kind.as_str(),
                "origin": origin_text(&i.origin),
                "capabilities": i.capabilities.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
                "params": i.params.iter().map(|(k, v)| json!({"name": k.as_str(), "value": value_text(v)})).collect::<Vec<_>>(),
                "created_by": i.created_by.as_ref().map(|p| format!("{} #{}", p.rule_id, p.seq)).unwrap_or_else(|| "-".into()),
                "linked_rules": i.linked_rules.iter().map(|r| r.as_str()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let connections: Vec<Json> = pd
        .connections
        .iter()
        .map(|c| {
            json!({
                "from_instance": c.from_instance.as_str(),
                "from_port": c.from_port.as_str(),
                "to_instance": c.to_instance.as_str(),
                "to_port": c.to_port.as_str(),
            })
        })
        .collect();
    let requirements: Vec<Json> = pd
        .requirement_log
        .iter()
        .map(|r| {
            let mut parts = vec![format!("kind={}", value_text(r.kind()))];
            parts.extend(
                r.facts
                    .iter()
                    .filter(|f| f.attribute.as_str() != "kind")
                    .map(|f| format!("{}={}", f.attribute, value_text(&f.value))),
            );
            json!({"req_id": r.req_id.as_str(), "text": parts.join(", ")})
        })
        .collect();
    let (validation, findings) = match &pd.validation {
        None => ("not validated".to_string(), Vec::new()),
        Some(stamp) => {
            let status = match (stamp.passed, stamp.forced) {
                (true, _) => "passed".to_string(),
                (false, true) => format!("FAILED, generated with --force ({} mistakes)", stamp.mistakes.len()),
                (false, false) => "failed".to_string(),
            };
            let mut findings: Vec<String> = stamp
                .mistakes
                .iter()
                .map(|m| format!("{} {} ({}): {}", m.code, m.subject, m.source_frame, m.message))
                .collect();
            findings.extend(
                stamp
                    .recommendations
                    .iter()
                    .map(|r| format!("recommendation ({}): {}", r.source_frame, r.message)),
            );
            (status, findings)
        }
    };
    json!({
        "goal": pd.goal.as_ref().map(|g| g.as_str()).unwrap_or("(no goal)"),
        "kb_version": pd.kb_version,
        "validation": validation,
        "findings": findings,
        "instances": instances,
        "connections": connections,
        "requirements": requirements,
    })
}

fn lf_bytes(text: String) -> Vec<u8> {
    text.replace("\r\n", "\n").into_bytes()
}

/// Renders the scaffold. Requires a validation stamp that passed or was
/// explicitly forced.
pub fn generate_scaffold(pd: &ProjectDescription, templates: &TemplateSet) -> Result<FileSet, CodegenError> {
    match &pd.validation {
        Some(stamp) if stamp.passed || stamp.forced => {}
        _ => return Err(CodegenError::UnstampedDescription),
    }
    let context = template_context(pd);
    let stub = templates.parsed("unit_stub")?;
    let mut files = vec![
        GeneratedFile {
            path: MANIFEST_PATH.to_string(),
            contents: canonical_manifest(pd),
        },
        GeneratedFile {
            path: WIRING_PATH.to_string(),
            contents: lf_bytes(templates.parsed("wiring")?.render(&context)?),
        },
        GeneratedFile {
            path: DESIGN_PATH.to_string(),
            contents: lf_bytes(templates.parsed("design")?.render(&context)?),
        },
    ];
    let instances = context["instances"].as_array().expect("built above");
    for (inst, view) in pd.instances.iter().zip(instances) {
        let mut merged = context.clone();
        if let (Json::Object(target), Json::Object(fields)) = (&mut merged, view) {
            for (k, v) in fields {
                target.insert(k.clone(), v.clone());
            }
        }
        files.push(GeneratedFile {
            path: format!("units/{}.stub", inst.instance_id),
            contents: lf_bytes(stub.render(&merged)?),
        });
    }
    Ok(FileSet::from_files(files))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ValidationStamp;

    fn stamped() -> ProjectDescription {
        ProjectDescription::default().with_validation(ValidationStamp {
            passed: true,
            forced: false,
            checked_against: vec![],
            mistakes: vec![],
            recommendations: vec![],
        })
    }

    #[test]
    fn empty_stamped_description() {
        let files = generate_scaffold(&stamped(), &TemplateSet::default()).unwrap();
        assert_eq!(files.paths().collect::<Vec<_>>(), [DESIGN_PATH, MANIFEST_PATH, WIRING_PATH]);
    }

    #[test]
    fn unstamped_is_refused() {
        assert_eq!(
            generate_scaffold(&ProjectDescription::default(), &TemplateSet::default()),
            Err(CodegenError::UnstampedDescription)
        );
    }

    #[test]
    fn unresolved_field() {
        let mut t = TemplateSet::default();
        t.templates.insert("wiring".into(), "{{nonexistent}}".into());
        assert_eq!(
            generate_scaffold(&stamped(), &t),
            Err(CodegenError::TemplateFieldUnresolved("nonexistent".into()))
        );
    }

    #[test]
    fn manifest_round_trip() {
        let pd = stamped();
        assert_eq!(parse_manifest(&canonical_manifest(&pd)).unwrap(), pd);
    }
}
