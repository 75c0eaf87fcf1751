//! Substitution-and-repetition templates.
//!
//! `{{a.b}}` inserts the scalar at a dotted path; `{{#each list}}…{{/each}}`
//! repeats its body once per element of `list` with the element pushed as the
//! innermost scope (reachable as `this`). Paths are looked up from the
//! innermost scope outwards. There are no conditionals.

use serde_json::Value as Json;

use super::CodegenError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Text(String),
    Field(String),
    Each { path: String, body: Vec<Node> },
}

/// A parsed template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    nodes: Vec<Node>,
}

impl Template {
    pub fn parse(src: &str) -> Result<Template, CodegenError> {
        let mut stack: Vec<(String, Vec<Node>)> = Vec::new();
        let mut current: Vec<Node> = Vec::new();
        let mut rest = src;
        while let Some(open) = rest.find("{{") {
            if open > 0 {
                current.push(Node::Text(rest[..open].to_string()));
            }
            let after = &rest[open + 2..];
            let close = after
                .find("}}")
                .ok_or_else(|| CodegenError::TemplateSyntax("unterminated `{{`".into()))?;
            let tag = after[..close].trim();
            rest = &after[close + 2..];
            if let Some(path) = tag.strip_prefix("#each") {
                let path = path.trim();
                check_path(path)?;
                stack.push((path.to_string(), std::mem::take(&mut current)));
            } else if tag == "/each" {
                let (path, outer) = stack
                    .pop()
                    .ok_or_else(|| CodegenError::TemplateSyntax("`{{/each}}` without `{{#each}}`".into()))?;
                let body = std::mem::replace(&mut current, outer);
                current.push(Node::Each { path, body });
            } else {
                check_path(tag)?;
                current.push(Node::Field(tag.to_string()));
            }
        }
        if !rest.is_empty() {
            current.push(Node::Text(rest.to_string()));
        }
        if let Some((path, _)) = stack.pop() {
            return Err(CodegenError::TemplateSyntax(format!("`{{{{#each {path}}}}}` is never closed")));
        }
        Ok(Template { nodes: current })
    }

    /// Renders against `root`.
    pub fn render(&self, root: &Json) -> Result<String, CodegenError> {
        let mut out = String::new();
        let mut scopes = vec![root];
        render_nodes(&self.nodes, &mut scopes, &mut out)?;
        Ok(out)
    }
}

fn check_path(path: &str) -> Result<(), CodegenError> {
    let ok = !path.is_empty()
        && path
            .split('.')
            .all(|seg| !seg.is_empty() && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
    if ok {
        Ok(())
    } else {
        Err(CodegenError::TemplateSyntax(format!("bad field path `{path}`")))
    }
}

fn lookup<'a>(scopes: &[&'a Json], path: &str) -> Option<&'a Json> {
    let mut segments = path.split('.');
    let first = segments.next()?;
    let start = if first == "this" {
        scopes.last().copied()
    } else {
        scopes.iter().rev().find_map(|s| s.get(first))
    }?;
    segments.try_fold(start, |v, seg| match v {
        Json::Object(map) => map.get(seg),
        Json::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => None,
    })
}

fn render_nodes(nodes: &[Node], scopes: &mut Vec<&Json>, out: &mut String) -> Result<(), CodegenError> {
    for node in nodes {
        match node {
            Node::Text(t) => out.push_str(t),
            Node::Field(path) => match lookup(scopes, path) {
                Some(Json::String(s)) => out.push_str(s),
                Some(Json::Number(n)) => out.push_str(&n.to_string()),
                Some(Json::Bool(b)) => out.push_str(if *b { "true" } else { "false" }),
                _ => return Err(CodegenError::TemplateFieldUnresolved(path.clone())),
            },
            Node::Each { path, body } => {
                let Some(Json::Array(items)) = lookup(scopes, path) else {
                    return Err(CodegenError::TemplateFieldUnresolved(path.clone()));
                };
                for item in items {
                    scopes.push(item);
                    let r = render_nodes(body, scopes, out);
                    scopes.pop();
                    r?;
                }
            }
        }
    }
    Ok(())
}
