//! Command line front end.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use mbms_core::canon;
use mbms_core::codegen::{parse_manifest, TemplateSet};
use mbms_core::dsl::{parse_requirements, ParseError};
use mbms_core::engine::{Session, SessionStatus};
use mbms_core::pipeline::{self, stamped_description, submit_all, PipelineError};
use mbms_core::validator::validate_description;
use mbms_core::{Catalog, ExportSelector, KnowledgeBase, ProductionRule, Symbol};
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::files::{self, LoadError};
use crate::server;

#[derive(Debug, Parser)]
#[command(name = "mbms", version, about = "Design model base management systems from requirements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a requirements script and write the generated scaffold.
    Design(DesignArgs),
    /// Enter statements one at a time.
    Repl(SourceArgs),
    /// Validate a manifest against a KB's frames.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Regenerate the scaffold from a manifest.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Edit or export a KB archive.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// KB archive; defaults to the shipped KB.
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Catalog document merged over the built-in units; defaults to the
    /// shipped external catalog.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long)]
    requirements: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Generate even if validation reports mistakes.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Subcommand)]
enum KbCommand {
    /// Append a rule read from a JSON file.
    AddRule {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        rule_file: PathBuf,
    },
    /// Link a rule to catalog units.
    Link {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        rule: String,
        #[arg(long, value_delimiter = ',', required = true)]
        units: Vec<String>,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Write part of a KB as a new archive.
    Export {
        #[arg(long)]
        kb: PathBuf,
        /// `all`, `capability=NAME` or `rule=ID`; repeatable.
        #[arg(long, required = true)]
        select: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failure reported on stderr as a canonical document.
#[derive(Debug)]
pub(crate) enum Failure {
    Usage(String),
    Domain(Json),
}

impl Failure {
    fn error(code: &str, detail: impl ToString) -> Self {
        Failure::Domain(json!({"error": code, "detail": detail.to_string()}))
    }

    fn doc<T: Serialize>(value: &T) -> Self {
        Failure::Domain(serde_json::to_value(value).expect("documents serialize"))
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::error(e.code(), e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::error("io_error", e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::Session(_) => "session_error",
            PipelineError::Validation(_) => "validation_error",
            PipelineError::Codegen(_) => "codegen_error",
        };
        Failure::error(code, e)
    }
}

pub(crate) fn parse_error_doc(text_name: &str, e: &ParseError) -> Json {
    json!({
        "error": "parse_error",
        "detail": format!("{text_name}: {e}"),
        "at": e.at,
        "expected": e.expected,
        "found": e.found,
    })
}

fn kb_error(e: mbms_core::KbError) -> Failure {
    Failure::error(server::kb_error_code(&e), e)
}

fn emit(out: &mut dyn Write, doc: &impl Serialize) -> std::io::Result<()> {
    out.write_all(&canon::to_bytes(doc).expect("documents serialize"))
}

/// Runs the command line. Exit codes: 0 success, 1 domain error, 2 usage.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    match dispatch(cli.command, stdin, stdout) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Domain(doc)) => {
            let _ = emit(stderr, &doc);
            1
        }
    }
}

fn dispatch(command: Command, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Design(args) => design(args, stdout),
        Command::Repl(args) => repl(args, stdin, stdout),
        Command::Validate { manifest, kb } => {
            let pd = parse_manifest(&files::read(&manifest)?).map_err(|e| Failure::error("manifest_error", e))?;
            let kb = files::load_kb(kb.as_deref())?;
            let report = validate_description(&pd, &kb).map_err(|e| Failure::error("validation_error", e))?;
            if report.passed {
                emit(stdout, &report)?;
                Ok(())
            } else {
                Err(Failure::doc(&report))
            }
        }
        Command::Generate { manifest, out, force } => {
            let pd = parse_manifest(&files::read(&manifest)?).map_err(|e| Failure::error("manifest_error", e))?;
            let files = pipeline::generate(pd, force, &TemplateSet::default())
                .map_err(|e| Failure::error("codegen_error", e))?;
            files::write_fileset(&out, &files)?;
            emit(stdout, &json!({"files": files.paths().collect::<Vec<_>>()}))?;
            Ok(())
        }
        Command::Kb(cmd) => kb_command(cmd, stdout),
        Command::Serve { config } => {
            let config = server::ServiceConfig::load(&config).map_err(|e| Failure::error("config_error", e))?;
            server::serve_blocking(config).map_err(|e| Failure::error("serve_error", e))
        }
    }
}

fn design(args: DesignArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let kb = files::load_kb(args.source.kb.as_deref())?;
    let catalog = files::load_catalog(args.source.catalog.as_deref())?;
    let text = files::read(&args.requirements)?;
    let text = String::from_utf8(text).map_err(|_| Failure::error("parse_error", "requirements are not UTF-8"))?;
    let raws = parse_requirements(&text)
        .map_err(|e| Failure::Domain(parse_error_doc(&args.requirements.display().to_string(), &e)))?;
    let mut session = Session::new(Arc::new(kb), Arc::new(catalog));
    if let Some(stop) = submit_all(&mut session, &raws).map_err(|e| Failure::error("session_error", e))? {
        return Err(Failure::doc(&stop));
    }
    let (pd, report) = stamped_description(&session)?;
    if !report.passed && !args.force {
        return Err(Failure::Domain(json!({"status": "validation_failed", "report": report})));
    }
    let files = pipeline::generate(pd, args.force, &TemplateSet::default()).map_err(PipelineError::from)?;
    files::write_fileset(&args.out, &files)?;
    emit(
        stdout,
        &json!({
            "status": session.status().name(),
            "validation_passed": report.passed,
            "files": files.paths().collect::<Vec<_>>(),
        }),
    )?;
    Ok(())
}

fn parse_selector(select: &[String]) -> Result<ExportSelector, Failure> {
    let mut selector = ExportSelector::default();
    for item in select {
        let symbol = |s: &str| Symbol::new(s).map_err(|e| Failure::Usage(format!("--select {item}: {e}")));
        match item.split_once('=') {
            None if item == "all" => selector.all = true,
            Some(("capability", c)) => {
                selector.capabilities.insert(symbol(c)?);
            }
            Some(("rule", r)) => {
                selector.rule_ids.insert(symbol(r)?);
            }
            _ => return Err(Failure::Usage(format!("--select {item}: expected all, capability=NAME or rule=ID"))),
        }
    }
    Ok(selector)
}

fn save_kb(path: &Path, kb: &KnowledgeBase) -> Result<(), Failure> {
    files::write_atomic(path, &kb.to_archive_bytes())?;
    Ok(())
}

fn kb_command(cmd: KbCommand, stdout: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        KbCommand::AddRule { kb, rule_file } => {
            let current = files::load_kb(Some(&kb))?;
            let rule: ProductionRule =
                canon::from_slice(&files::read(&rule_file)?).map_err(|e| Failure::error("malformed_rule", e))?;
            let id = rule.id.clone();
            let next = current.add_rule(rule).map_err(kb_error)?;
            save_kb(&kb, &next)?;
            emit(stdout, &json!({"rule": id, "kb_version": next.version()}))?;
            Ok(())
        }
        KbCommand::Link { kb, rule, units, catalog } => {
            let current = files::load_kb(Some(&kb))?;
            let catalog: Catalog = files::load_catalog(catalog.as_deref())?;
            let rule = Symbol::new(rule).map_err(|e| Failure::Usage(e.to_string()))?;
            let units: BTreeSet<Symbol> = units
                .iter()
                .map(|u| Symbol::new(u.trim()).map_err(|e| Failure::Usage(e.to_string())))
                .collect::<Result<_, _>>()?;
            let next = current.link_rule_to_units(&rule, &units, &catalog).map_err(kb_error)?;
            save_kb(&kb, &next)?;
            emit(stdout, &json!({"rule": rule, "units": units, "kb_version": next.version()}))?;
            Ok(())
        }
        KbCommand::Export { kb, select, out } => {
            let selector = parse_selector(&select)?;
            let archive = files::load_kb(Some(&kb))?.export_subset(&selector).map_err(kb_error)?;
            files::write_atomic(&out, &archive.to_bytes())?;
            emit(
                stdout,
                &json!({"rules": archive.knowledge_base().rules().iter().map(|r| r.id.clone()).collect::<Vec<_>>()}),
            )?;
            Ok(())
        }
    }
}

fn status_line(session: &Session, firings: usize) -> Json {
    let mut doc = serde_json::to_value(session.status()).expect("status serializes");
    doc["firings"] = json!(firings);
    doc["instances"] = json!(session.scheme().instances.len());
    doc
}

fn repl(args: SourceArgs, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut kb = files::load_kb(args.kb.as_deref())?;
    let catalog = Arc::new(files::load_catalog(args.catalog.as_deref())?);
    let mut session = Session::new(Arc::new(kb.clone()), Arc::clone(&catalog));
    writeln!(
        stdout,
        "statements are submitted one at a time; :scheme :validation :add-rule FILE :link RULE UNITS :retry :generate DIR :quit"
    )?;
    let mut line = String::new();
    loop {
        line.clear();
        if stdin.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let input = line.trim();
        if input.is_empty() {
            continue;
        }
        let reply = match input.strip_prefix(':') {
            Some(command) => {
                let mut words = command.split_whitespace();
                match (words.next(), words.next(), words.next()) {
                    (Some("quit"), None, None) => return Ok(()),
                    (Some("scheme"), None, None) => serde_json::to_value(session.scheme()).expect("scheme serializes"),
                    (Some("validation"), None, None) => match stamped_description(&session) {
                        Ok((_, report)) => serde_json::to_value(report).expect("report serializes"),
                        Err(e) => json!({"error": "validation_error", "detail": e.to_string()}),
                    },
                    (Some("add-rule"), Some(path), None) => {
                        let added = files::read(Path::new(path))
                            .map_err(Failure::from)
                            .and_then(|b| canon::from_slice::<ProductionRule>(&b).map_err(|e| Failure::error("malformed_rule", e)))
                            .and_then(|rule| kb.add_rule(rule).map_err(kb_error));
                        match added {
                            Ok(next) => {
                                kb = next;
                                json!({"kb_version": kb.version()})
                            }
                            Err(f) => failure_json(f),
                        }
                    }
                    (Some("link"), Some(rule), Some(units)) => {
                        let linked = Symbol::new(rule).map_err(|e| Failure::Usage(e.to_string())).and_then(|rule| {
                            let units = units
                                .split(',')
                                .map(|u| Symbol::new(u).map_err(|e| Failure::Usage(e.to_string())))
                                .collect::<Result<BTreeSet<_>, _>>()?;
                            kb.link_rule_to_units(&rule, &units, &catalog).map_err(kb_error)
                        });
                        match linked {
                            Ok(next) => {
                                kb = next;
                                json!({"kb_version": kb.version()})
                            }
                            Err(f) => failure_json(f),
                        }
                    }
                    (Some("retry"), None, None) => match session.retry(Arc::new(kb.clone())) {
                        Ok(outcome) => status_line(&session, outcome.firings.len()),
                        Err(e) => json!({"error": "wrong_session_state", "detail": e.to_string()}),
                    },
                    (Some("generate"), Some(dir), force) => {
                        let force = force == Some("--force");
                        let written = stamped_description(&session)
                            .map_err(Failure::from)
                            .and_then(|(pd, _)| {
                                pipeline::generate(pd, force, &TemplateSet::default())
                                    .map_err(|e| Failure::error("codegen_error", e))
                            })
                            .and_then(|files| {
                                files::write_fileset(Path::new(dir), &files)?;
                                Ok(files)
                            });
                        match written {
                            Ok(files) => json!({"files": files.paths().collect::<Vec<_>>()}),
                            Err(f) => failure_json(f),
                        }
                    }
                    _ => json!({"error": "unknown_command", "detail": input}),
                }
            }
            None => match parse_requirements(input) {
                Err(e) => parse_error_doc("input", &e),
                Ok(raws) => {
                    let mut last = Json::Null;
                    for raw in &raws {
                        last = match session.submit_statement(raw) {
                            Ok(outcome) => status_line(&session, outcome.firings.len()),
                            Err(e) => json!({"error": "wrong_session_state", "detail": e.to_string()}),
                        };
                        if !matches!(session.status(), SessionStatus::AwaitingRequirement) {
                            break;
                        }
                    }
                    last
                }
            },
        };
        writeln!(stdout, "{}", canon::to_compact_string(&reply).expect("documents serialize"))?;
    }
}

fn failure_json(f: Failure) -> Json {
    match f {
        Failure::Usage(msg) => json!({"error": "usage", "detail": msg}),
        Failure::Domain(doc) => doc,
    }
}
