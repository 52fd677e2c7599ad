//! Message types and the execution context shared by every service.
//!
//! Services are synchronous state machines: each inbound [`Message`] yields a
//! [`Reply`] plus any number of outbound messages queued on the [`Context`].
//! The transport (in-process queue or HTTP) decides how those are delivered.

use std::any::Any;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::routing::{RouteError, Router};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub method: String,
    pub path: String,
    #[serde(default)]
    pub body: Value,
}

impl Message {
    pub fn post(path: impl Into<String>, body: impl Serialize) -> Self {
        Self {
            method: "POST".into(),
            path: path.into(),
            body: serde_json::to_value(body).expect("message body serializes"),
        }
    }

    pub fn get(path: impl Into<String>) -> Self {
        Self { method: "GET".into(), path: path.into(), body: Value::Null }
    }

    pub fn is_get(&self) -> bool {
        self.method.eq_ignore_ascii_case("GET")
    }

    /// Path without any query string.
    pub fn route(&self) -> &str {
        self.path.split('?').next().unwrap_or(&self.path)
    }

    pub fn query(&self, key: &str) -> Option<String> {
        let (_, query) = self.path.split_once('?')?;
        query.split('&').find_map(|pair| {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            (k == key).then(|| v.to_string())
        })
    }

    /// The request reference a message concerns, if it carries one.
    pub fn reference(&self) -> Option<String> {
        let body = &self.body;
        body.get("reference")
            .or_else(|| body.get("ticket").and_then(|t| t.get("reference")))
            .or_else(|| body.get("dealer_ticket").and_then(|t| t.get("reference")))
            .and_then(Value::as_str)
            .map(String::from)
    }

    pub fn parse<T: DeserializeOwned>(&self) -> Result<T, Reply> {
        serde_json::from_value(self.body.clone()).map_err(|e| Reply::bad_request(format!("malformed body: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Rejected,
    Ignored,
    BadRequest,
    NotFound,
    Error,
}

impl Status {
    pub fn http_code(self) -> u16 {
        match self {
            Status::Ok => 200,
            Status::Ignored => 202,
            Status::Rejected => 409,
            Status::BadRequest => 400,
            Status::NotFound => 404,
            Status::Error => 500,
        }
    }
}

/// Every endpoint answers `{status, reference?}` plus optional detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
}

impl Reply {
    fn with_status(status: Status, message: Option<String>) -> Self {
        Self { status, reference: None, message, data: None }
    }

    pub fn ok() -> Self {
        Self::with_status(Status::Ok, None)
    }

    pub fn ok_with(data: impl Serialize) -> Self {
        Self { data: Some(serde_json::to_value(data).expect("reply data serializes")), ..Self::ok() }
    }

    pub fn rejected(message: impl Into<String>) -> Self {
        Self::with_status(Status::Rejected, Some(message.into()))
    }

    pub fn ignored(message: impl Into<String>) -> Self {
        Self::with_status(Status::Ignored, Some(message.into()))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::with_status(Status::BadRequest, Some(message.into()))
    }

    pub fn not_found(path: &str) -> Self {
        Self::with_status(Status::NotFound, Some(format!("no endpoint {path}")))
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self::with_status(Status::Error, Some(message.into()))
    }

    pub fn with_reference(mut self, reference: impl Into<String>) -> Self {
        self.reference = Some(reference.into());
        self
    }

    pub fn with_message(mut self, message: impl Into<String>) -> Self {
        self.message = Some(message.into());
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> i64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        chrono::Utc::now().timestamp_millis()
    }
}

/// Manually advanced clock for deterministic runs. Clones share one time.
#[derive(Debug, Clone)]
pub struct SimClock(Arc<AtomicI64>);

impl SimClock {
    pub const DEFAULT_EPOCH_MS: i64 = 1_700_000_000_000;

    pub fn new(start_ms: i64) -> Self {
        Self(Arc::new(AtomicI64::new(start_ms)))
    }

    pub fn advance(&self, ms: i64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new(Self::DEFAULT_EPOCH_MS)
    }
}

impl Clock for SimClock {
    fn now_ms(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub destination: String,
    pub message: Message,
}

/// What a service sees while handling one message.
pub struct Context<'a> {
    name: &'a str,
    clock: &'a dyn Clock,
    rng: &'a mut dyn RngCore,
    router: &'a dyn Router,
    outbox: Vec<Outbound>,
    unsent: Vec<(Outbound, RouteError)>,
}

impl<'a> Context<'a> {
    pub fn new(name: &'a str, clock: &'a dyn Clock, rng: &'a mut dyn RngCore, router: &'a dyn Router) -> Self {
        Self { name, clock, rng, router, outbox: Vec::new(), unsent: Vec::new() }
    }

    pub fn name(&self) -> &str {
        self.name
    }

    pub fn now_ms(&self) -> i64 {
        self.clock.now_ms()
    }

    pub fn now(&self) -> chrono::DateTime<chrono::Utc> {
        chrono::DateTime::from_timestamp_millis(self.now_ms()).unwrap_or_default()
    }

    pub fn rng(&mut self) -> &mut dyn RngCore {
        &mut *self.rng
    }

    /// Queues a message for `destination`. Fails immediately when no route
    /// exists from this service right now.
    pub fn send(&mut self, destination: &str, message: Message) -> Result<(), RouteError> {
        if destination != self.name {
            if let Err(err) = self.router.next_hop(self.name, destination) {
                let outbound = Outbound { destination: destination.to_string(), message };
                self.unsent.push((outbound, err.clone()));
                return Err(err);
            }
        }
        self.outbox.push(Outbound { destination: destination.to_string(), message });
        Ok(())
    }

    /// Like [`send`](Self::send), logging instead of returning the failure.
    pub fn notify(&mut self, destination: &str, message: Message) {
        if let Err(err) = self.send(destination, message) {
            tracing::warn!(from = self.name, to = destination, %err, "notification not sent");
        }
    }

    pub fn into_outbox(self) -> Vec<Outbound> {
        self.outbox
    }

    /// Queued messages plus those refused for lack of a route.
    pub fn into_parts(self) -> (Vec<Outbound>, Vec<(Outbound, RouteError)>) {
        (self.outbox, self.unsent)
    }
}

/// Timestamped log line kept by controllers and nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub at: i64,
    pub message: String,
}

pub trait Service: Send + 'static {
    fn name(&self) -> &str;
    fn handle(&mut self, message: &Message, ctx: &mut Context<'_>) -> Reply;
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}
