//! JSON service used by front-ends. [`Service::handle`] is independent of
//! the transport; [`router`] exposes it over HTTP.
//!
//! Requests look like
//! `{"service": "diagnose", "expr": "sum [1]", "submitted": "foldl (+) 0 [1]", "strategy": "outermost"}`
//! and every response is `{"ok": .., "service": .., "payload": .., "error": {"kind", "message"}}`.

use std::net::SocketAddr;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::SystemTime;

use axum::extract::State;
use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::engine::{Derivation, DerivationStep, Diagnosis, Engine, Mode};
use crate::expr::Expr;
use crate::feedback::{FeedbackScript, ScriptError};
use crate::strategy::StepChoice;

pub const DEFAULT_PORT: u16 = 8315;

pub const DEFAULT_EXAMPLES: &[&str] = &[
    "sum ([3,7] ++ [5])",
    "double 3",
    "double (double 2)",
    "double (1 + 2)",
    "(id id) 3",
    "sum'' [1,2]",
    "foldl (+) 0 [1,2,3]",
    "map double [1,2]",
    "length ([1] ++ [2,3])",
];

pub const SERVICES: &[&str] = &["examples", "derivation", "onefirst", "stepsremaining", "apply", "diagnose"];

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
pub struct ServiceRequest {
    pub service: String,
    #[serde(default)]
    pub expr: Option<String>,
    #[serde(default)]
    pub submitted: Option<String>,
    #[serde(default)]
    pub strategy: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct ServiceError {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct ServiceResponse {
    pub ok: bool,
    pub service: String,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ServiceError>,
}

impl ServiceResponse {
    fn success(service: &str, payload: Value) -> ServiceResponse {
        ServiceResponse { ok: true, service: service.to_string(), payload, error: None }
    }

    fn failure(service: &str, kind: &str, message: impl Into<String>, payload: Value) -> ServiceResponse {
        ServiceResponse {
            ok: false,
            service: service.to_string(),
            payload,
            error: Some(ServiceError { kind: kind.to_string(), message: message.into() }),
        }
    }
}

struct LoadedScript {
    script: Arc<FeedbackScript>,
    modified: Option<SystemTime>,
}

/// Engine plus feedback script and example list. Cheap to share; the script
/// file, when given, is reloaded whenever its modification time changes.
pub struct Service {
    engine: Arc<Engine>,
    script: RwLock<LoadedScript>,
    script_path: Option<PathBuf>,
    examples: Vec<String>,
}

fn modified(path: &FsPath) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Script { path: PathBuf, source: ScriptError },
    #[error("{path}: {message}")]
    Examples { path: PathBuf, message: String },
}

impl Service {
    pub fn new(engine: Arc<Engine>, script: FeedbackScript) -> Service {
        Service {
            engine,
            script: RwLock::new(LoadedScript { script: Arc::new(script), modified: None }),
            script_path: None,
            examples: DEFAULT_EXAMPLES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Reads the script now and watches the file for changes afterwards.
    pub fn with_script_file(engine: Arc<Engine>, path: impl Into<PathBuf>) -> Result<Service, LoadError> {
        let path = path.into();
        let script = load_script(&path)?;
        let mut service = Service::new(engine, script);
        service.script.get_mut().expect("fresh lock").modified = modified(&path);
        service.script_path = Some(path);
        Ok(service)
    }

    pub fn with_examples(mut self, examples: Vec<String>) -> Service {
        self.examples = examples;
        self
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn examples(&self) -> &[String] {
        &self.examples
    }

    /// The current script, reloading it first if the file changed. A script
    /// that no longer parses is reported and the previous one kept.
    pub fn script(&self) -> Arc<FeedbackScript> {
        if let Some(path) = &self.script_path {
            let stamp = modified(path);
            let stale = self.script.read().expect("script lock").modified != stamp;
            if stale {
                let mut guard = self.script.write().expect("script lock");
                if guard.modified != stamp {
                    match load_script(path) {
                        Ok(s) => {
                            tracing::info!(path = %path.display(), "feedback script reloaded");
                            guard.script = Arc::new(s);
                        }
                        Err(e) => tracing::warn!("keeping previous feedback script: {e}"),
                    }
                    guard.modified = stamp;
                }
            }
        }
        self.script.read().expect("script lock").script.clone()
    }

    pub fn health(&self) -> Value {
        let script = self.script();
        json!({
            "status": "ok",
            "version": env!("CARGO_PKG_VERSION"),
            "builtins": self.engine.has_builtins(),
            "budget": self.engine.budget(),
            "functions": self.engine.functions(),
            "preludeFunctions": self.engine.prelude().names(),
            "rules": self.engine.rules().iter().map(|r| r.id.to_string()).collect::<Vec<_>>(),
            "warnings": self.engine.warnings(),
            "script": {
                "path": self.script_path.as_ref().map(|p| p.display().to_string()),
                "entries": script.len(),
                "locale": script.locale(),
            },
        })
    }

    /// Parses a JSON request and answers with a JSON response.
    pub fn handle_json(&self, body: &str) -> String {
        let response = match serde_json::from_str::<ServiceRequest>(body) {
            Ok(req) => self.handle(&req),
            Err(e) => ServiceResponse::failure("", "request", format!("malformed request: {e}"), Value::Null),
        };
        serde_json::to_string(&response).expect("responses serialize")
    }

    pub fn handle(&self, req: &ServiceRequest) -> ServiceResponse {
        let service = req.service.as_str();
        if !SERVICES.contains(&service) {
            return ServiceResponse::failure(
                service,
                "request",
                format!("unknown service `{service}` (expected one of {})", SERVICES.join(", ")),
                Value::Null,
            );
        }
        if service == "examples" {
            return ServiceResponse::success(service, json!({ "examples": self.examples }));
        }
        let mode = match req.strategy.as_deref().unwrap_or("outermost").parse::<Mode>() {
            Ok(m) => m,
            Err(e) => return ServiceResponse::failure(service, "request", e, Value::Null),
        };
        let Some(text) = req.expr.as_deref() else {
            return ServiceResponse::failure(service, "request", "missing field `expr`", Value::Null);
        };
        let expr = match self.engine.parse(text) {
            Ok(e) => e,
            Err(e) => return ServiceResponse::failure(service, "parse", e.to_string(), Value::Null),
        };
        let script = self.script();
        let result = match service {
            "derivation" => self.engine.derive(&expr, mode.strategy()).map(|d| self.derivation_json(&d, &script)),
            "onefirst" | "apply" => self.engine.hint(&expr, mode.strategy()).map(|s| self.step_json(&s, &script)),
            "stepsremaining" => self.engine.steps_remaining(&expr, mode.strategy()).map(|n| json!({ "steps": n })),
            "diagnose" => {
                let Some(submitted) = req.submitted.as_deref() else {
                    return ServiceResponse::failure(service, "request", "missing field `submitted`", Value::Null);
                };
                let diagnosis = match self.engine.parse(submitted) {
                    Ok(s) => self.engine.diagnose(&expr, &s, mode),
                    Err(e) => Ok(Diagnosis::ParseError { message: e.to_string() }),
                };
                diagnosis.map(|d| self.diagnosis_json(&d, mode, &script))
            }
            _ => unreachable!("service names checked above"),
        };
        match result {
            Ok(payload) => ServiceResponse::success(service, payload),
            Err(e) => {
                let payload = e.partial().map_or(Value::Null, |d| json!({ "partial": self.derivation_json(d, &script) }));
                ServiceResponse::failure(service, e.kind(), e.to_string(), payload)
            }
        }
    }

    fn derivation_json(&self, d: &Derivation, script: &FeedbackScript) -> Value {
        let steps: Vec<Value> = d.steps.iter().map(|s| self.derivation_step_json(s, script)).collect();
        json!({
            "start": d.start.to_string(),
            "steps": steps,
            "result": d.result().to_string(),
            "count": d.len(),
        })
    }

    fn derivation_step_json(&self, s: &DerivationStep, script: &FeedbackScript) -> Value {
        json!({
            "rule": s.rule.id.to_string(),
            "annotation": s.rule.annotation,
            "message": script.message_for_rule(&s.rule),
            "focus": s.focus.0,
            "before": s.before.to_string(),
            "after": s.after.to_string(),
        })
    }

    fn step_json(&self, s: &StepChoice, script: &FeedbackScript) -> Value {
        json!({
            "rule": s.rule.id.to_string(),
            "annotation": s.rule.annotation,
            "message": script.message_for_rule(&s.rule),
            "focus": s.focus.0,
            "result": s.result.to_string(),
        })
    }

    fn diagnosis_json(&self, d: &Diagnosis, mode: Mode, script: &FeedbackScript) -> Value {
        let expected: Vec<String> = d.expected().iter().map(Expr::to_string).collect();
        match d {
            Diagnosis::CorrectStep { rule, remaining } => json!({
                "diagnosis": d.kind(),
                "rule": rule.id.to_string(),
                "annotation": rule.annotation,
                "message": script.message_for_rule(rule),
                "stepsRemaining": remaining,
            }),
            Diagnosis::EquivalentButOffStrategy { .. } => json!({
                "diagnosis": d.kind(),
                "message": format!(
                    "Your expression has the right value, but it is not a single step of the {mode} strategy."
                ),
                "expected": expected,
            }),
            Diagnosis::CorrectResultWrongPath { .. } => json!({
                "diagnosis": d.kind(),
                "message": "Your expression has the right value, but it cannot be obtained by rewriting the current expression.",
                "expected": expected,
            }),
            Diagnosis::Incorrect { note, .. } => {
                let message = match note {
                    Some(n) => format!("This is not a correct next step: {n}."),
                    None => "This is not a correct next step.".to_string(),
                };
                json!({ "diagnosis": d.kind(), "message": message, "note": note, "expected": expected })
            }
            Diagnosis::ParseError { message } => json!({ "diagnosis": d.kind(), "message": message }),
        }
    }
}

fn load_script(path: &FsPath) -> Result<FeedbackScript, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    FeedbackScript::parse(&text).map_err(|source| LoadError::Script { path: path.to_path_buf(), source })
}

/// Reads a JSON list of expression strings.
pub fn load_examples(path: &FsPath) -> Result<Vec<String>, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| LoadError::Examples { path: path.to_path_buf(), message: e.to_string() })
}

async fn api(State(service): State<Arc<Service>>, body: String) -> Json<Value> {
    let response = tokio::task::spawn_blocking(move || service.handle_json(&body))
        .await
        .unwrap_or_else(|e| {
            let failure = ServiceResponse::failure("", "internal", format!("request handler failed: {e}"), Value::Null);
            serde_json::to_string(&failure).expect("responses serialize")
        });
    Json(serde_json::from_str(&response).expect("handler produces JSON"))
}

async fn examples(State(service): State<Arc<Service>>) -> Json<ServiceResponse> {
    Json(service.handle(&ServiceRequest { service: "examples".into(), ..Default::default() }))
}

async fn health(State(service): State<Arc<Service>>) -> Json<Value> {
    Json(service.health())
}

/// `POST /api`, `GET /api/examples` and `GET /health`. Without an explicit
/// origin, any origin may call the service.
pub fn router(service: Arc<Service>, cors_origin: Option<&str>) -> Router {
    let origin = match cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/api", post(api))
        .route("/api/examples", get(examples))
        .route("/health", get(health))
        .layer(cors)
        .with_state(service)
}

/// Serves until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr, cors_origin: Option<String>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service, cors_origin.as_deref()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    fn service() -> Service {
        Service::new(Arc::new(Engine::new()), FeedbackScript::default())
    }

    fn call(s: &Service, service: &str, expr: &str, submitted: Option<&str>, strategy: &str) -> ServiceResponse {
        s.handle(&ServiceRequest {
            service: service.into(),
            expr: Some(expr.into()),
            submitted: submitted.map(String::from),
            strategy: Some(strategy.into()),
        })
    }

    #[test]
    fn diagnose_first_step() {
        let r = call(&service(), "diagnose", "sum ([3,7] ++ [5])", Some("foldl (+) 0 ([3,7] ++ [5])"), "outermost");
        assert!(r.ok);
        assert_eq!(r.payload["diagnosis"], "CorrectStep");
        assert_eq!(r.payload["rule"], "eval.sum.rule");
        assert_eq!(r.payload["stepsRemaining"], 10);
    }

    #[test]
    fn errors_are_responses() {
        let s = service();
        let r = call(&s, "derivation", "1 +", None, "outermost");
        assert!(!r.ok);
        assert_eq!(r.error.unwrap().kind, "parse");
        let r = call(&s, "teleport", "1", None, "outermost");
        assert_eq!(r.error.unwrap().kind, "request");
        let r: ServiceResponse = serde_json::from_str(&s.handle_json("{not json")).unwrap();
        assert_eq!(r.error.unwrap().kind, "request");
        let r = call(&s, "onefirst", "15", None, "innermost");
        assert_eq!(r.error.unwrap().kind, "nostep");
    }

    #[test]
    fn counts_and_derivations() {
        let s = service();
        assert_eq!(call(&s, "stepsremaining", "15", None, "outermost").payload["steps"], 0);
        let d = call(&s, "derivation", "double 3", None, "outermost");
        assert_eq!(d.payload["count"], 2);
        assert_eq!(d.payload["result"], "6");
    }
}
