//! A local chat-completion server with scripted replies and request
//! counters, standing in for a remote LLM endpoint.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

pub const PATH: &str = "/v1/chat/completions";

/// What the handler sees of one request.
#[derive(Debug, Clone)]
pub struct MockRequest {
    /// Zero-based arrival number.
    pub index: usize,
    pub model: String,
    pub system: String,
    pub user: String,
    pub authorization: Option<String>,
}

#[derive(Debug, Clone)]
pub enum MockReply {
    Content(String),
    WithReasoning { content: String, reasoning: String },
    Status(u16),
}

#[derive(Default)]
struct Counters {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

type Handler = dyn Fn(&MockRequest) -> MockReply + Send + Sync;

struct Shared {
    handler: Box<Handler>,
    delay: Duration,
    counters: Counters,
}

pub struct MockServer {
    pub url: String,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl MockServer {
    /// Binds an ephemeral local port. Must be called inside a tokio runtime.
    pub async fn start(delay: Duration, handler: impl Fn(&MockRequest) -> MockReply + Send + Sync + 'static) -> Self {
        let shared = Arc::new(Shared { handler: Box::new(handler), delay, counters: Counters::default() });
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.expect("bind mock port");
        let addr = listener.local_addr().expect("local addr");
        let app = Router::new().route(PATH, post(chat)).with_state(shared.clone());
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .expect("mock server");
        });
        Self { url: format!("http://{addr}{PATH}"), shared, shutdown: Some(tx) }
    }

    pub fn requests(&self) -> usize {
        self.shared.counters.requests.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.shared.counters.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.shared.counters.requests.store(0, Ordering::SeqCst);
        self.shared.counters.max_in_flight.store(0, Ordering::SeqCst);
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

fn message(body: &Value, role: &str) -> String {
    body["messages"]
        .as_array()
        .into_iter()
        .flatten()
        .filter(|m| m["role"] == role)
        .filter_map(|m| m["content"].as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

async fn chat(State(shared): State<Arc<Shared>>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let c = &shared.counters;
    let index = c.requests.fetch_add(1, Ordering::SeqCst);
    let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    c.max_in_flight.fetch_max(now, Ordering::SeqCst);
    if !shared.delay.is_zero() {
        tokio::time::sleep(shared.delay).await;
    }
    let req = MockRequest {
        index,
        model: body["model"].as_str().unwrap_or_default().to_string(),
        system: message(&body, "system"),
        user: message(&body, "user"),
        authorization: headers.get("authorization").and_then(|v| v.to_str().ok()).map(str::to_string),
    };
    let reply = (shared.handler)(&req);
    c.in_flight.fetch_sub(1, Ordering::SeqCst);
    let msg = match reply {
        MockReply::Status(code) => {
            return (StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR), "scripted failure")
                .into_response()
        }
        MockReply::Content(content) => json!({"role": "assistant", "content": content}),
        MockReply::WithReasoning { content, reasoning } => {
            json!({"role": "assistant", "content": content, "reasoning_content": reasoning})
        }
    };
    Json(json!({
        "id": format!("mock-{index}"),
        "object": "chat.completion",
        "model": req.model,
        "choices": [{"index": 0, "message": msg, "finish_reason": "stop"}],
    }))
    .into_response()
}

// ---- deterministic role-play ------------------------------------------------

const ANCHORS: [&str; 5] = ["Strongly Disagree", "Disagree", "Neutral", "Agree", "Strongly Agree"];

/// FNV-1a, so the mock needs no hashing dependency.
fn fnv(parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.bytes().chain([0xff]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// `(statement, level 1..=5)` for every profile line of a rendered prompt.
pub fn profile(system: &str) -> Vec<(String, i32)> {
    system
        .lines()
        .filter_map(|l| {
            let (text, anchor) = l.rsplit_once(": ")?;
            let level = ANCHORS.iter().position(|a| *a == anchor)?;
            text.starts_with("You ").then(|| (text.to_string(), level as i32 + 1))
        })
        .collect()
}

/// Target statements, in prompt order.
pub fn descriptions(user: &str) -> Vec<String> {
    user.lines()
        .filter_map(|l| {
            let rest = l.strip_prefix("Description")?;
            let (_, text) = rest.split_once(": ")?;
            Some(text.to_string())
        })
        .collect()
}

/// A rating that depends on the profile as a set, so statement order
/// does not matter, unless `order_sensitive` is set, in which case the
/// first statement shown nudges every answer.
pub fn rate(system: &str, target: &str, order_sensitive: bool) -> i32 {
    let prof = profile(system);
    let mut score = 4.0;
    if prof.is_empty() {
        // Summary-only prompts: key off the whole system text.
        score += (fnv(&[system, target]) % 5) as f64 - 2.0;
    }
    for (text, level) in &prof {
        let w = match fnv(&[text, target]) % 5 {
            0 => -0.6,
            1 => 0.6,
            _ => 0.0,
        };
        score += w * f64::from(level - 3);
    }
    if order_sensitive {
        if let Some((first, _)) = prof.first() {
            score += (fnv(&[first, target]) % 3) as f64 - 1.0;
        }
    }
    (score.round() as i32).clamp(1, 7)
}

/// Well-formed reply to a rating prompt in either the batched or the
/// single-question format.
pub fn role_play(system: &str, user: &str, order_sensitive: bool) -> String {
    let items = descriptions(user);
    if user.starts_with("Description: ") {
        return rate(system, &items[0], order_sensitive).to_string();
    }
    items
        .iter()
        .enumerate()
        .map(|(i, t)| format!("Description {}:{}", i + 1, rate(system, t, order_sensitive)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Well-formed attribution annotation: each description cites one to
/// three input items chosen by hash.
pub fn annotate(user: &str) -> String {
    let n = descriptions(user).len();
    (1..=n)
        .map(|d| {
            let h = fnv(&[user, &d.to_string()]);
            let k = 1 + (h % 3) as usize;
            let mut items: Vec<u64> = (0..k).map(|j| 1 + (h >> (8 * (j + 1))) % 20).collect();
            items.sort_unstable();
            items.dedup();
            let cited = items.iter().map(|i| format!("Item {i}")).collect::<Vec<_>>().join(", ");
            format!("Description {d}: {cited}")
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Reasoning text for a rating prompt: one line per description, then an
/// "Overall" summary sentence that depends only on the profile.
pub fn reasoning(system: &str, user: &str) -> String {
    let items = descriptions(user);
    let mut lines: Vec<String> = items
        .iter()
        .enumerate()
        .map(|(i, t)| format!("Description {}: weighing the profile against \"{t}\" gives {}.", i + 1, rate(system, t, false)))
        .collect();
    let prof = profile(system);
    if !prof.is_empty() {
        let mut sorted: Vec<&str> = prof.iter().map(|(t, _)| t.as_str()).collect();
        sorted.sort_unstable();
        let total: i32 = prof.iter().map(|p| p.1).sum();
        let mood = ["reserved", "steady", "warm", "restless", "curious"][(fnv(&sorted) % 5) as usize];
        lines.push(format!("Overall, this person seems {mood}, with a total profile level of {total}."));
    }
    lines.join("\n")
}

/// Summary-extraction reply: the "Overall" lines of the reasoning, or
/// `None` when there are none.
pub fn extract(user: &str) -> String {
    let found: Vec<&str> = user.lines().filter(|l| l.starts_with("Overall,")).collect();
    if found.is_empty() {
        "None".to_string()
    } else {
        found.join("\n")
    }
}

/// Replies like a reasoning model to rating prompts, and like an annotator
/// to attribution and summary-extraction prompts.
pub fn full_service(req: &MockRequest) -> MockReply {
    if req.user.starts_with("We have provided the Big Five personality scores of a participant to a large") {
        MockReply::Content(annotate(&req.user))
    } else if req.user.starts_with("We have provided the Big Five personality scores of a participant to a model") {
        MockReply::Content(extract(&req.user))
    } else {
        MockReply::WithReasoning { content: role_play(&req.system, &req.user, false), reasoning: reasoning(&req.system, &req.user) }
    }
}
