mod common;

use common::*;
use mbms_core::codegen::MANIFEST_PATH;
use mbms_core::{shipped, KnowledgeBase};

#[test]
fn design_writes_the_golden_scaffold() {
    let ws = Workspace::new();
    let o = design_golden(&ws, "shipped.mbkb", "out");
    let doc = o.stdout_json();
    assert_eq!(doc["status"], "halted");
    assert_eq!(doc["validation_passed"], true);
    let tree = read_tree(&ws.path("out"));
    let listed: Vec<&str> = doc["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert_eq!(tree.keys().map(String::as_str).collect::<Vec<_>>(), listed);
    assert!(tree.contains_key(MANIFEST_PATH));
}

#[test]
fn defaults_fall_back_to_shipped_data() {
    let ws = Workspace::new();
    design_golden(&ws, "shipped.mbkb", "a");
    let o = mbms(&["design", "--requirements", &ws.arg("golden.req"), "--out", &ws.arg("b")]);
    assert_eq!(o.code, 0);
    assert_eq!(read_tree(&ws.path("a")), read_tree(&ws.path("b")));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(mbms(&[]).code, 2);
    assert_eq!(mbms(&["design", "--out", "x"]).code, 2);
    assert_eq!(mbms(&["frobnicate"]).code, 2);
    let ws = Workspace::new();
    let o = mbms(&["kb", "export", "--kb", &ws.arg("shipped.mbkb"), "--select", "colour=red", "--out", &ws.arg("x")]);
    assert_eq!(o.code, 2);
    assert!(!ws.path("x").exists());
}

#[test]
fn help_exits_0() {
    let o = mbms(&["--help"]);
    assert_eq!(o.code, 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("design"));
}

#[test]
fn parse_errors_are_domain_errors() {
    let ws = Workspace::new();
    let req = ws.write("bad.req", "goal g\nrequire wizard x\n");
    let o = mbms(&["design", "--requirements", &req, "--out", &ws.arg("out")]);
    assert_eq!(o.code, 1);
    let doc = o.stderr_json();
    assert_eq!(doc["error"], "parse_error");
    assert_eq!(doc["at"]["line"], 2);
    assert_eq!(doc["at"]["column"], 9);
    assert!(!ws.path("out").exists());
}

#[test]
fn stderr_documents_are_canonical() {
    let ws = Workspace::new();
    let o = mbms(&["validate", "--manifest", &ws.arg("missing.manifest")]);
    assert_eq!(o.code, 1);
    let doc = o.stderr_json();
    assert_eq!(doc["error"], "io_error");
    assert_eq!(mbms_core::canon::to_bytes(&doc).unwrap(), o.stderr);
}

#[test]
fn missing_rule_stops_design() {
    let ws = Workspace::new();
    let req = ws.write("ga.req", "goal g\nrequire method genetic_algorithm\ndone\n");
    let o = mbms(&["design", "--requirements", &req, "--out", &ws.arg("out")]);
    assert_eq!(o.code, 1);
    let doc = o.stderr_json();
    assert_eq!(doc["status"], "missing_rule");
    assert_eq!(doc["statement"], 1);
    assert!(!ws.path("out").exists());
}

#[test]
fn incomplete_scheme_needs_force() {
    let ws = Workspace::new();
    let req = ws.write("short.req", "goal g\ndone\n");
    let args = ["design", "--requirements", &req, "--out", &ws.arg("out")];
    let o = mbms(&args);
    assert_eq!(o.code, 1);
    let doc = o.stderr_json();
    assert_eq!(doc["status"], "validation_failed");
    assert_eq!(doc["report"]["passed"], false);
    assert!(!ws.path("out").exists());

    let mut forced = args.to_vec();
    forced.push("--force");
    let o = mbms(&forced);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout_json()["validation_passed"], false);
    let manifest = std::fs::read_to_string(ws.path("out").join(MANIFEST_PATH)).unwrap();
    assert!(manifest.contains("\"forced\": true"), "{manifest}");
}

#[test]
fn validate_and_generate_from_manifest() {
    let ws = Workspace::new();
    design_golden(&ws, "shipped.mbkb", "out");
    let manifest = ws.path("out").join(MANIFEST_PATH);
    let manifest = manifest.to_str().unwrap();

    let o = mbms(&["validate", "--manifest", manifest]);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout_json()["passed"], true);

    let o = mbms(&["generate", "--manifest", manifest, "--out", &ws.arg("again")]);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_tree(&ws.path("out")), read_tree(&ws.path("again")));
}

#[test]
fn validate_reports_a_failing_manifest() {
    let ws = Workspace::new();
    let req = ws.write("short.req", "goal g\ndone\n");
    assert_eq!(mbms(&["design", "--requirements", &req, "--out", &ws.arg("out"), "--force"]).code, 0);
    let manifest = ws.path("out").join(MANIFEST_PATH);
    let o = mbms(&["validate", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.code, 1);
    let doc = o.stderr_json();
    assert_eq!(doc["passed"], false);
    assert!(!doc["mistakes"].as_array().unwrap().is_empty());
}

#[test]
fn kb_add_rule_and_link_persist() {
    let ws = Workspace::new();
    let kb = ws.arg("shipped.mbkb");
    let o = mbms(&["kb", "add-rule", "--kb", &kb, "--rule-file", &ws.arg("genetic_algorithm.rule")]);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    let after_add = KnowledgeBase::from_archive_bytes(&std::fs::read(ws.path("shipped.mbkb")).unwrap()).unwrap();
    let shipped_kb = shipped::knowledge_base().unwrap();
    assert_eq!(after_add.rules().len(), shipped_kb.rules().len() + 1);
    assert!(after_add.version() > shipped_kb.version());

    let o = mbms(&["kb", "add-rule", "--kb", &kb, "--rule-file", &ws.arg("genetic_algorithm.rule")]);
    assert_eq!(o.code, 1);
    assert_eq!(o.stderr_json()["error"], "duplicate_rule_id");

    let o = mbms(&["kb", "link", "--kb", &kb, "--rule", "select_genetic_algorithm", "--units", "unit_evolutionary_solver"]);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    let linked = KnowledgeBase::from_archive_bytes(&std::fs::read(ws.path("shipped.mbkb")).unwrap()).unwrap();
    let rule = linked.rule(&mbms_core::Symbol::lit("select_genetic_algorithm")).unwrap();
    assert_eq!(rule.linked_units.iter().map(|u| u.as_str()).collect::<Vec<_>>(), ["unit_evolutionary_solver"]);

    let o = mbms(&["kb", "link", "--kb", &kb, "--rule", "select_genetic_algorithm", "--units", "unit_nonexistent"]);
    assert_eq!(o.code, 1);
    assert_eq!(o.stderr_json()["error"], "unknown_unit");
    let o = mbms(&["kb", "link", "--kb", &kb, "--rule", "no_such_rule", "--units", "unit_evolutionary_solver"]);
    assert_eq!(o.code, 1);
    assert_eq!(o.stderr_json()["error"], "unknown_rule");

    let leftovers: Vec<_> = std::fs::read_dir(ws.dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn rule_with_unbound_action_variable_is_refused() {
    let ws = Workspace::new();
    let rule = ws.write(
        "bad.rule",
        r#"{"actions": [{"assert": {"attribute": "status", "entity": "?nobody", "value": "x"}}], "conditions": [{"attribute": "kind", "entity": "?r", "value": "goal"}], "id": "bad"}"#,
    );
    let before = std::fs::read(ws.path("shipped.mbkb")).unwrap();
    let o = mbms(&["kb", "add-rule", "--kb", &ws.arg("shipped.mbkb"), "--rule-file", &rule]);
    assert_eq!(o.code, 1);
    assert_eq!(o.stderr_json()["error"], "unbound_action_variable");
    assert_eq!(std::fs::read(ws.path("shipped.mbkb")).unwrap(), before);
}

#[test]
fn kb_export_selects_rules() {
    let ws = Workspace::new();
    let kb = ws.arg("shipped.mbkb");
    let o = mbms(&["kb", "export", "--kb", &kb, "--select", "rule=select_simplex_method", "--out", &ws.arg("one.mbkb")]);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(o.stdout_json()["rules"], serde_json::json!(["select_simplex_method"]));

    let o = mbms(&["kb", "export", "--kb", &kb, "--select", "all", "--out", &ws.arg("all.mbkb")]);
    assert_eq!(o.code, 0);
    assert_eq!(std::fs::read(ws.path("all.mbkb")).unwrap(), shipped::KB_ARCHIVE.as_bytes());

    let o = mbms(&["kb", "export", "--kb", &kb, "--select", "capability=telepathy", "--out", &ws.arg("none.mbkb")]);
    assert_eq!(o.code, 1);
    assert_eq!(o.stderr_json()["error"], "empty_selection");
    assert!(!ws.path("none.mbkb").exists());
}

#[test]
fn repl_recovers_from_a_missing_rule() {
    let ws = Workspace::new();
    let script = format!(
        "goal g\nrequire solver linear_programming\nrequire method genetic_algorithm\n:retry\n:add-rule {}\n:link select_genetic_algorithm unit_evolutionary_solver\n:retry\nrequire wizard\n:bogus\n:quit\ngoal never_seen\n",
        ws.arg("genetic_algorithm.rule")
    );
    let o = mbms_with_input(&["repl"], &script);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let replies: Vec<serde_json::Value> = text.lines().skip(1).map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(replies.len(), 9, "{text}");
    assert_eq!(replies[0]["status"], "awaiting_requirement");
    assert_eq!(replies[2]["status"], "missing_rule");
    let solvers_before = replies[2]["instances"].as_u64().unwrap();
    assert_eq!(replies[3]["status"], "missing_rule", "retry without a new rule stalls again");
    assert!(replies[4]["kb_version"].is_u64());
    assert!(replies[5]["kb_version"].as_u64() > replies[4]["kb_version"].as_u64());
    assert_eq!(replies[6]["status"], "awaiting_requirement");
    assert_eq!(replies[6]["instances"].as_u64().unwrap(), solvers_before + 1);
    assert_eq!(replies[7]["error"], "parse_error");
    assert_eq!(replies[8]["error"], "unknown_command");
}

#[test]
fn repl_generates_into_a_directory() {
    let ws = Workspace::new();
    let script = format!(
        "{}\n:validation\n:generate {}\n",
        shipped::GOLDEN_REQUIREMENTS,
        ws.arg("out")
    );
    let o = mbms_with_input(&["repl"], &script);
    assert_eq!(o.code, 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let last: Vec<serde_json::Value> = text.lines().rev().take(2).map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(last[0]["files"].is_array(), "{text}");
    assert_eq!(last[1]["passed"], true);
    design_golden(&ws, "shipped.mbkb", "batch");
    assert_eq!(read_tree(&ws.path("out")), read_tree(&ws.path("batch")));
}
