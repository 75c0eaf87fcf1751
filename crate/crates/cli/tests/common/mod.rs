#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mbms_cli::server::{router, AppState};
use mbms_core::shipped;
use serde_json::Value as Json;
use tower::ServiceExt;

pub struct Output {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
}

impl Output {
    pub fn stdout_json(&self) -> Json {
        serde_json::from_slice(&self.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.stdout)))
    }

    pub fn stderr_json(&self) -> Json {
        serde_json::from_slice(&self.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.stderr)))
    }
}

pub fn mbms_with_input(args: &[&str], input: &str) -> Output {
    let mut stdin = Cursor::new(input.as_bytes().to_vec());
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let argv = std::iter::once("mbms").chain(args.iter().copied());
    let code = mbms_cli::run(argv, &mut stdin, &mut stdout, &mut stderr);
    Output { code, stdout, stderr }
}

pub fn mbms(args: &[&str]) -> Output {
    mbms_with_input(args, "")
}

/// A scratch directory holding the shipped KB, external catalog, golden
/// script and the genetic algorithm rule.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [
            ("shipped.mbkb", shipped::KB_ARCHIVE),
            ("external.mbcat", shipped::EXTERNAL_CATALOG),
            ("golden.req", shipped::GOLDEN_REQUIREMENTS),
            ("genetic_algorithm.rule", shipped::GENETIC_ALGORITHM_RULE),
        ] {
            std::fs::write(dir.path().join(name), text).unwrap();
        }
        Self { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    pub fn write(&self, name: &str, text: &str) -> String {
        std::fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }
}

/// Runs `design` on the golden script into `out` and checks it succeeded.
pub fn design_golden(ws: &Workspace, kb: &str, out: &str) -> Output {
    let o = mbms(&[
        "design",
        "--kb",
        &ws.arg(kb),
        "--catalog",
        &ws.arg("external.mbcat"),
        "--requirements",
        &ws.arg("golden.req"),
        "--out",
        &ws.arg(out),
    ]);
    assert_eq!(o.code, 0, "{}", String::from_utf8_lossy(&o.stderr));
    o
}

/// Every file under `root`, keyed by `/`-separated relative path.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap();
                let key = rel.components().map(|c| c.as_os_str().to_str().unwrap()).collect::<Vec<_>>().join("/");
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn unzip(bytes: &[u8]) -> BTreeMap<String, Vec<u8>> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).unwrap();
    let mut out = BTreeMap::new();
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).unwrap();
        let mut contents = Vec::new();
        entry.read_to_end(&mut contents).unwrap();
        assert!(out.insert(entry.name().to_string(), contents).is_none(), "duplicate entry");
    }
    out
}

pub fn shipped_state(kb_path: Option<PathBuf>) -> Arc<AppState> {
    Arc::new(AppState::new(
        shipped::knowledge_base().unwrap(),
        shipped::catalog().unwrap(),
        kb_path,
        Duration::from_secs(600),
        16,
    ))
}

pub fn app(state: &Arc<AppState>) -> Router {
    router(Arc::clone(state))
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Json {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Option<(&str, &str)>) -> Reply {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some((content_type, text)) => builder
            .header("content-type", content_type)
            .body(Body::from(text.to_string())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let content_type = response
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string());
    let body = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, body }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, "GET", uri, None).await
}

pub async fn post_text(app: &Router, uri: &str, text: &str) -> Reply {
    send(app, "POST", uri, Some(("text/plain", text))).await
}

pub async fn post_json(app: &Router, uri: &str, json: &str) -> Reply {
    send(app, "POST", uri, Some(("application/json", json))).await
}

pub async fn new_session(app: &Router) -> String {
    let r = send(app, "POST", "/sessions", None).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.body));
    r.json()["session_id"].as_str().unwrap().to_string()
}

/// Submits the golden script one statement per request.
pub async fn golden_over_http(app: &Router) -> String {
    let id = new_session(app).await;
    for line in shipped::GOLDEN_REQUIREMENTS.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let r = post_text(app, &format!("/sessions/{id}/requirements"), line).await;
        assert_eq!(r.status, StatusCode::OK, "{line}: {}", String::from_utf8_lossy(&r.body));
    }
    id
}
