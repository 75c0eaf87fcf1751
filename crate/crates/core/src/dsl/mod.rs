//! Requirements language: parsing, canonical printing and formalization into
//! facts.
//!
//! ```text
//! session    = { statement } ;
//! statement  = goal | reqModel | reqMethod | reqSolver | integrate | param | done ;
//! goal       = "goal" IDENT ;
//! reqModel   = "require" "model" category IDENT ;
//! category   = "strategic" | "tactical" | "operational" | "analytical" ;
//! reqMethod  = "require" "method" IDENT ;
//! reqSolver  = "require" "solver" IDENT ;
//! integrate  = "integrate" "external" ("cae" | "solver") STRING ;
//! param      = "param" IDENT "." IDENT "=" (IDENT | NUMBER | STRING) ;
//! done       = "done" ;
//! ```
//!
//! `#` starts a comment running to the end of the line.

mod lexer;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::knowledge::{Decimal, Fact, Symbol, Value};
use lexer::{Lexer, Token, TokenKind};

/// A location in the source text. Lines and columns are 1-based, columns
/// count characters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: Position,
    pub end: Position,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("line {}, column {}: expected {}, found {found}", .at.line, .at.column, join_expected(.expected))]
pub struct ParseError {
    pub at: Position,
    pub expected: BTreeSet<String>,
    pub found: String,
}

fn join_expected(expected: &BTreeSet<String>) -> String {
    let parts: Vec<&str> = expected.iter().map(String::as_str).collect();
    match parts.len() {
        1 => parts[0].to_string(),
        _ => format!("one of {}", parts.join(", ")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCategory {
    Strategic,
    Tactical,
    Operational,
    Analytical,
}

impl ModelCategory {
    pub const ALL: [ModelCategory; 4] = [
        ModelCategory::Strategic,
        ModelCategory::Tactical,
        ModelCategory::Operational,
        ModelCategory::Analytical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelCategory::Strategic => "strategic",
            ModelCategory::Tactical => "tactical",
            ModelCategory::Operational => "operational",
            ModelCategory::Analytical => "analytical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalKind {
    Cae,
    Solver,
}

impl ExternalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExternalKind::Cae => "cae",
            ExternalKind::Solver => "solver",
        }
    }
}

/// One requirement statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statement {
    Goal(Symbol),
    RequireModel { category: ModelCategory, name: Symbol },
    RequireMethod(Symbol),
    RequireSolver(Symbol),
    IntegrateExternal { kind: ExternalKind, product: String },
    /// `value` is a symbol, integer, decimal or text.
    Param { target: Symbol, slot: Symbol, value: Value },
    Done,
}

impl Statement {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Statement::Goal(_) => "goal",
            Statement::RequireModel { .. } => "require-model",
            Statement::RequireMethod(_) => "require-method",
            Statement::RequireSolver(_) => "require-solver",
            Statement::IntegrateExternal { .. } => "integrate-external",
            Statement::Param { .. } => "param",
            Statement::Done => "done",
        }
    }
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

impl fmt::Display for Statement {
    /// Canonical single-line form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Goal(name) => write!(f, "goal {name}"),
            Statement::RequireModel { category, name } => {
                write!(f, "require model {} {name}", category.as_str())
            }
            Statement::RequireMethod(m) => write!(f, "require method {m}"),
            Statement::RequireSolver(c) => write!(f, "require solver {c}"),
            Statement::IntegrateExternal { kind, product } => {
                write!(f, "integrate external {} {}", kind.as_str(), quote(product))
            }
            Statement::Param { target, slot, value } => {
                write!(f, "param {target}.{slot} = ")?;
                match value {
                    Value::Text(t) => f.write_str(&quote(t)),
                    other => write!(f, "{other}"),
                }
            }
            Statement::Done => f.write_str("done"),
        }
    }
}

/// A parsed statement with its source span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRequirement {
    pub statement: Statement,
    pub span: Span,
}

impl RawRequirement {
    pub fn new(statement: Statement) -> Self {
        Self {
            statement,
            span: Span::default(),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Token>,
}

const STATEMENT_START: [&str; 5] = ["`done`", "`goal`", "`integrate`", "`param`", "`require`"];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            lexer: Lexer::new(src),
            peeked: None,
        }
    }

    fn next(&mut self) -> Result<Option<Token>, ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(Some(t)),
            None => self.lexer.next_token(),
        }
    }

    fn fail(&mut self, token: Option<Token>, expected: &[&str]) -> ParseError {
        let (at, found) = match token {
            Some(t) => (t.start, t.kind.describe()),
            None => (self.lexer.eof_position(), "end of input".to_string()),
        };
        ParseError {
            at,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    /// Consumes a token that must be one of the given keywords.
    fn keyword(&mut self, options: &[&'static str]) -> Result<(&'static str, Token), ParseError> {
        let token = self.next()?;
        if let Some(t) = &token {
            if let TokenKind::Ident(text) = &t.kind {
                if let Some(k) = options.iter().find(|k| **k == text) {
                    return Ok((k, token.unwrap()));
                }
            }
        }
        let expected: Vec<String> = options.iter().map(|k| format!("`{k}`")).collect();
        let expected: Vec<&str> = expected.iter().map(String::as_str).collect();
        Err(self.fail(token, &expected))
    }

    fn ident(&mut self) -> Result<(Symbol, Token), ParseError> {
        let token = self.next()?;
        if let Some(t) = &token {
            if let TokenKind::Ident(text) = &t.kind {
                let sym = Symbol::new(text.clone()).expect("lexer yields valid identifiers");
                return Ok((sym, token.unwrap()));
            }
        }
        Err(self.fail(token, &["identifier"]))
    }

    fn punct(&mut self, kind: TokenKind, name: &str) -> Result<Token, ParseError> {
        let token = self.next()?;
        match token {
            Some(t) if t.kind == kind => Ok(t),
            other => Err(self.fail(other, &[name])),
        }
    }

    fn string(&mut self) -> Result<(String, Token), ParseError> {
        let token = self.next()?;
        if let Some(Token {
            kind: TokenKind::Str(text),
            ..
        }) = &token
        {
            let text = text.clone();
            return Ok((text, token.unwrap()));
        }
        Err(self.fail(token, &["string"]))
    }

    fn number(&self, text: &str, token: &Token) -> Result<Value, ParseError> {
        let out_of_range = || ParseError {
            at: token.start,
            expected: BTreeSet::from(["number within range".to_string()]),
            found: format!("number `{text}`"),
        };
        if text.contains('.') {
            let raw: f64 = text.parse().map_err(|_| out_of_range())?;
            Decimal::new(raw).map(Value::Decimal).ok_or_else(out_of_range)
        } else {
            text.parse::<i64>().map(Value::Integer).map_err(|_| out_of_range())
        }
    }

    fn statement(&mut self) -> Result<Option<RawRequirement>, ParseError> {
        let Some(first) = self.next()? else {
            return Ok(None);
        };
        let head = match &first.kind {
            TokenKind::Ident(text) => text.clone(),
            _ => return Err(self.fail(Some(first), &STATEMENT_START)),
        };
        let start = first.start;
        let (statement, last) = match head.as_str() {
            "goal" => {
                let (name, t) = self.ident()?;
                (Statement::Goal(name), t)
            }
            "require" => match self.keyword(&["model", "method", "solver"])?.0 {
                "model" => {
                    let (cat, _) =
                        self.keyword(&["strategic", "tactical", "operational", "analytical"])?;
                    let category = ModelCategory::ALL
                        .into_iter()
                        .find(|c| c.as_str() == cat)
                        .expect("keyword list matches categories");
                    let (name, t) = self.ident()?;
                    (Statement::RequireModel { category, name }, t)
                }
                "method" => {
                    let (m, t) = self.ident()?;
                    (Statement::RequireMethod(m), t)
                }
                _ => {
                    let (c, t) = self.ident()?;
                    (Statement::RequireSolver(c), t)
                }
            },
            "integrate" => {
                self.keyword(&["external"])?;
                let (k, _) = self.keyword(&["cae", "solver"])?;
                let kind = if k == "cae" {
                    ExternalKind::Cae
                } else {
                    ExternalKind::Solver
                };
                let (product, t) = self.string()?;
                (Statement::IntegrateExternal { kind, product }, t)
            }
            "param" => {
                let (target, _) = self.ident()?;
                self.punct(TokenKind::Dot, "`.`")?;
                let (slot, _) = self.ident()?;
                self.punct(TokenKind::Equals, "`=`")?;
                let token = self.next()?;
                let value = match token.as_ref().map(|t| &t.kind) {
                    Some(TokenKind::Ident(text)) => {
                        Value::Symbol(Symbol::new(text.clone()).expect("lexer yields valid identifiers"))
                    }
                    Some(TokenKind::Str(text)) => Value::Text(text.clone()),
                    Some(TokenKind::Number(text)) => {
                        let text = text.clone();
                        self.number(&text, token.as_ref().unwrap())?
                    }
                    _ => return Err(self.fail(token, &["identifier", "number", "string"])),
                };
                (Statement::Param { target, slot, value }, token.unwrap())
            }
            "done" => (Statement::Done, first),
            _ => return Err(self.fail(Some(first), &STATEMENT_START)),
        };
        Ok(Some(RawRequirement {
            statement,
            span: Span {
                start,
                end: last.end,
            },
        }))
    }
}

/// Parses a requirements script. The first error aborts.
pub fn parse_requirements(text: &str) -> Result<Vec<RawRequirement>, ParseError> {
    let mut parser = Parser::new(text);
    let mut out = Vec::new();
    while let Some(raw) = parser.statement()? {
        out.push(raw);
    }
    Ok(out)
}

/// Canonical rendering: one statement per line, single spaces, strings
/// double-quoted with `"` and `\` escaped.
pub fn pretty_print(raws: &[RawRequirement]) -> String {
    let mut out = String::new();
    for raw in raws {
        out.push_str(&raw.statement.to_string());
        out.push('\n');
    }
    out
}

/// A requirement rendered as facts about a fresh requirement id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FormalRequirementDoc")]
pub struct FormalRequirement {
    pub req_id: Symbol,
    pub facts: BTreeSet<Fact>,
}

#[derive(Deserialize)]
struct FormalRequirementDoc {
    req_id: Symbol,
    facts: BTreeSet<Fact>,
}

impl TryFrom<FormalRequirementDoc> for FormalRequirement {
    type Error = String;

    fn try_from(doc: FormalRequirementDoc) -> Result<Self, Self::Error> {
        FormalRequirement::new(doc.req_id, doc.facts)
    }
}

impl FormalRequirement {
    /// Checks that every fact is about `req_id` and exactly one carries the
    /// `kind` attribute.
    pub fn new(req_id: Symbol, facts: BTreeSet<Fact>) -> Result<Self, String> {
        if facts.is_empty() {
            return Err("a formal requirement needs at least one fact".into());
        }
        if let Some(f) = facts.iter().find(|f| f.entity != req_id) {
            return Err(format!("fact {f} is not about requirement `{req_id}`"));
        }
        let kinds = facts.iter().filter(|f| f.attribute.as_str() == "kind").count();
        if kinds != 1 {
            return Err(format!("requirement `{req_id}` has {kinds} kind facts, expected 1"));
        }
        Ok(Self { req_id, facts })
    }

    /// The value of the `kind` fact.
    pub fn kind(&self) -> &Value {
        &self
            .facts
            .iter()
            .find(|f| f.attribute.as_str() == "kind")
            .expect("invariant: one kind fact")
            .value
    }

    pub fn is_done(&self) -> bool {
        self.kind() == &Value::sym("done")
    }

    /// First value of `attribute`, if any.
    pub fn get(&self, attribute: &str) -> Option<&Value> {
        self.facts
            .iter()
            .find(|f| f.attribute.as_str() == attribute)
            .map(|f| &f.value)
    }
}

/// Source of fresh requirement ids `r1, r2, …`, skipping ids already taken.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReqIdGen {
    next: u64,
    taken: BTreeSet<Symbol>,
}

impl ReqIdGen {
    pub fn new() -> Self {
        Self {
            next: 1,
            taken: BTreeSet::new(),
        }
    }

    pub fn fresh(&mut self) -> Symbol {
        loop {
            let n = self.next.max(1);
            self.next = n + 1;
            let id = Symbol::new(format!("r{n}")).expect("r<digits> is a symbol");
            if self.taken.insert(id.clone()) {
                return id;
            }
        }
    }

    /// Records an externally chosen id so it is never generated. Returns
    /// false when the id was already in use.
    pub fn claim(&mut self, id: &Symbol) -> bool {
        self.taken.insert(id.clone())
    }
}

/// Encodes a statement as facts about a fresh requirement id.
pub fn formalize(raw: &RawRequirement, ids: &mut ReqIdGen) -> FormalRequirement {
    let r = ids.fresh();
    let fact = |attr: &str, value: Value| Fact::new(r.clone(), Symbol::lit(attr), value);
    let facts: Vec<Fact> = match &raw.statement {
        Statement::Goal(name) => vec![
            fact("kind", Value::sym("goal")),
            fact("name", Value::Symbol(name.clone())),
        ],
        Statement::RequireModel { category, name } => vec![
            fact("kind", Value::sym("model_requirement")),
            fact("category", Value::sym(category.as_str())),
            fact("name", Value::Symbol(name.clone())),
        ],
        Statement::RequireMethod(m) => vec![
            fact("kind", Value::sym("method_requirement")),
            fact("method", Value::Symbol(m.clone())),
        ],
        Statement::RequireSolver(c) => vec![
            fact("kind", Value::sym("solver_requirement")),
            fact("capability", Value::Symbol(c.clone())),
        ],
        Statement::IntegrateExternal { kind, product } => vec![
            fact("kind", Value::sym("external_requirement")),
            fact("external_kind", Value::sym(kind.as_str())),
            fact("product", Value::Text(product.clone())),
        ],
        Statement::Param { target, slot, value } => vec![
            fact("kind", Value::sym("param_requirement")),
            fact("target", Value::Symbol(target.clone())),
            fact("slot", Value::Symbol(slot.clone())),
            fact("value", value.clone()),
        ],
        Statement::Done => vec![fact("kind", Value::sym("done"))],
    };
    FormalRequirement::new(r, facts.into_iter().collect()).expect("encoding table is well-formed")
}
