//! Runs each service behind its own HTTP listener. Envelopes travel hop by
//! hop as `POST /forward`; operators call the documented endpoints directly.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::Value;

use crate::harness::config::{ConfigError, TopologyConfig};
use crate::harness::topology::build_hosts;
use crate::routing::{
    Delivery, DeliveryFailure, Envelope, Environment, Registry, RouteError, Router, ServiceHost, SharedRegistry,
};
use crate::service::{Clock, Message, Reply, SystemClock};

pub const FORWARD_PATH: &str = "/forward";

const TIMEOUT: Duration = Duration::from_secs(5);
const RETRY_DELAY: Duration = Duration::from_millis(50);

fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new().timeout(TIMEOUT).build()
}

fn join(base: &str, path: &str) -> String {
    format!("{}{path}", base.trim_end_matches('/'))
}

fn read_reply(result: Result<ureq::Response, ureq::Error>) -> Result<Reply, String> {
    let response = match result {
        Ok(r) => r,
        Err(ureq::Error::Status(_, r)) => r,
        Err(e) => return Err(e.to_string()),
    };
    let text = response.into_string().map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| format!("unreadable reply: {e}"))
}

/// `GET base + path`, decoding the reply whatever its status code.
pub fn get(base: &str, path: &str) -> Result<Reply, String> {
    read_reply(agent().get(&join(base, path)).call())
}

/// `POST base + path` with a JSON body.
pub fn post(base: &str, path: &str, body: &impl Serialize) -> Result<Reply, String> {
    let text = serde_json::to_string(body).map_err(|e| e.to_string())?;
    read_reply(agent().post(&join(base, path)).set("Content-Type", "application/json").send_string(&text))
}

/// A router that also knows where each service listens.
pub trait Directory: Router + Send + Sync {
    fn url_of(&self, name: &str) -> Option<String>;
}

impl Directory for SharedRegistry {
    fn url_of(&self, name: &str) -> Option<String> {
        self.read(|r| r.url(name).map(String::from))
    }
}

/// Asks the registry for every hop, so route edits apply to the next message.
pub struct HttpRouter {
    registry_url: String,
    urls: RwLock<BTreeMap<String, String>>,
}

impl HttpRouter {
    pub fn new(registry_url: impl Into<String>) -> Self {
        Self { registry_url: registry_url.into(), urls: RwLock::default() }
    }

    fn refresh(&self) -> Result<(), String> {
        let reply = get(&self.registry_url, "/state")?;
        let directory: BTreeMap<String, String> = reply
            .data
            .and_then(|d| d.get("directory").cloned())
            .and_then(|d| serde_json::from_value(d).ok())
            .ok_or("registry state has no directory")?;
        *self.urls.write().expect("url cache poisoned") = directory;
        Ok(())
    }
}

impl Router for HttpRouter {
    fn next_hop(&self, from: &str, destination: &str) -> Result<String, RouteError> {
        let path = format!("/path?from={from}&destination={destination}");
        let reply = get(&self.registry_url, &path).map_err(RouteError::Transport)?;
        let data = match (reply.is_ok(), reply.data) {
            (true, Some(data)) => data,
            _ => return Err(RouteError::NoRoute { from: from.into(), destination: destination.into() }),
        };
        let next = data["next"].as_str().unwrap_or_default().to_string();
        if let Some(url) = data["url"].as_str().filter(|u| !u.is_empty()) {
            self.urls.write().expect("url cache poisoned").insert(next.clone(), url.to_string());
        }
        Ok(next)
    }

    fn hop_limit(&self) -> usize {
        if self.urls.read().expect("url cache poisoned").is_empty() {
            let _ = self.refresh();
        }
        self.urls.read().expect("url cache poisoned").len().max(1)
    }
}

impl Directory for HttpRouter {
    fn url_of(&self, name: &str) -> Option<String> {
        if let Some(url) = self.urls.read().expect("url cache poisoned").get(name) {
            return Some(url.clone());
        }
        self.refresh().ok()?;
        self.urls.read().expect("url cache poisoned").get(name).cloned()
    }
}

struct Shared {
    host: Mutex<(ServiceHost, ChaCha20Rng)>,
    directory: Arc<dyn Directory>,
    clock: SystemClock,
}

impl Shared {
    fn with_env<T>(&self, f: impl FnOnce(&mut ServiceHost, &mut Environment<'_>) -> T) -> T {
        let mut guard = self.host.lock().expect("host lock poisoned");
        let (host, rng) = &mut *guard;
        let mut env = Environment { clock: &self.clock, rng, router: self.directory.as_ref() };
        f(host, &mut env)
    }
}

/// One listening service plus its outbound sender.
pub struct ServiceServer {
    name: String,
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    threads: Vec<JoinHandle<()>>,
}

impl ServiceServer {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    fn spawn(server: tiny_http::Server, host: ServiceHost, directory: Arc<dyn Directory>, seed: u64) -> Self {
        let name = host.name().to_string();
        let addr = server.server_addr().to_ip().expect("tcp listener");
        let server = Arc::new(server);
        let shared = Arc::new(Shared {
            host: Mutex::new((host, ChaCha20Rng::seed_from_u64(seed))),
            directory,
            clock: SystemClock,
        });
        let (tx, rx) = mpsc::channel::<Envelope>();

        let sender_shared = Arc::clone(&shared);
        let sender = std::thread::Builder::new()
            .name(format!("{name}-send"))
            .spawn(move || {
                for envelope in rx {
                    send_envelope(&sender_shared, envelope);
                }
            })
            .expect("spawn sender");

        let loop_server = Arc::clone(&server);
        let listener = std::thread::Builder::new()
            .name(format!("{name}-http"))
            .spawn(move || {
                for request in loop_server.incoming_requests() {
                    serve(&shared, &tx, request);
                }
            })
            .expect("spawn listener");

        Self { name, addr, server, threads: vec![listener, sender] }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        for thread in self.threads.drain(..) {
            let _ = thread.join();
        }
    }
}

impl Drop for ServiceServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn send_envelope(shared: &Shared, envelope: Envelope) {
    let Some(url) = shared.directory.url_of(&envelope.to_node) else {
        record(shared, &envelope, format!("no address for {}", envelope.to_node));
        return;
    };
    let mut last_error = String::new();
    for attempt in 0..2 {
        if attempt > 0 {
            std::thread::sleep(RETRY_DELAY);
        }
        match post(&url, FORWARD_PATH, &envelope) {
            Ok(_) => return,
            Err(err) => last_error = err,
        }
    }
    tracing::warn!(to = %envelope.to_node, error = %last_error, "envelope dropped after retry");
    record(shared, &envelope, last_error);
}

fn record(shared: &Shared, envelope: &Envelope, reason: String) {
    let mut guard = shared.host.lock().expect("host lock poisoned");
    let host = &mut guard.0;
    let failure = DeliveryFailure {
        reference: envelope.reference(),
        origin: envelope.origin.clone(),
        destination: envelope.destination.clone(),
        stranded_at: host.name().to_string(),
        path: envelope.payload.path.clone(),
        reason,
        at: shared.clock.now_ms(),
    };
    host.record_failure(failure);
}

fn respond(request: tiny_http::Request, reply: &Reply) {
    let body = serde_json::to_string(reply).unwrap_or_default();
    let mut response = tiny_http::Response::from_string(body).with_status_code(reply.status.http_code());
    for (name, value) in [
        ("Content-Type", "application/json"),
        // dashboards poll from another origin
        ("Access-Control-Allow-Origin", "*"),
        ("Access-Control-Allow-Headers", "Content-Type"),
        ("Access-Control-Allow-Methods", "GET, POST, OPTIONS"),
    ] {
        response.add_header(tiny_http::Header::from_bytes(name, value).expect("static header"));
    }
    if let Err(err) = request.respond(response) {
        tracing::debug!(%err, "client went away");
    }
}

fn serve(shared: &Shared, outbound: &Sender<Envelope>, mut request: tiny_http::Request) {
    let mut text = String::new();
    if request.as_reader().read_to_string(&mut text).is_err() {
        return respond(request, &Reply::bad_request("body is not UTF-8"));
    }
    if *request.method() == tiny_http::Method::Options {
        return respond(request, &Reply::ok());
    }
    let is_get = *request.method() == tiny_http::Method::Get;
    let path = request.url().to_string();

    if !is_get && path == FORWARD_PATH {
        let envelope: Envelope = match serde_json::from_str(&text) {
            Ok(e) => e,
            Err(err) => return respond(request, &Reply::bad_request(format!("bad envelope: {err}"))),
        };
        let reply = match shared.with_env(|host, env| host.receive(envelope, env)) {
            Delivery::Handled { reply, outbound: out } => {
                out.into_iter().for_each(|e| drop(outbound.send(e)));
                reply
            }
            Delivery::Forwarded(next) => {
                let reply = Reply::ignored(format!("relayed to {}", next.to_node));
                drop(outbound.send(next));
                reply
            }
            Delivery::Failed(failure) => Reply::rejected(failure.reason),
        };
        return respond(request, &reply);
    }

    let body = if text.trim().is_empty() {
        Value::Null
    } else {
        match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(err) => return respond(request, &Reply::bad_request(format!("body is not JSON: {err}"))),
        }
    };
    let message = Message { method: if is_get { "GET".into() } else { "POST".into() }, path, body };
    let (reply, out) = shared.with_env(|host, env| host.call(&message, env));
    out.into_iter().for_each(|e| drop(outbound.send(e)));
    respond(request, &reply);
}

/// Where the services of an HTTP topology listen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    /// Addresses from the config mapping.
    Configured,
    /// Free ports on the loopback interface, for tests.
    Ephemeral,
}

fn listen_addr(url: &str) -> Result<String, ConfigError> {
    let rest = url.strip_prefix("http://").ok_or_else(|| ConfigError::Invalid(format!("{url} is not http://")))?;
    Ok(rest.trim_end_matches('/').to_string())
}

/// Every configured service on its own listener inside this process.
pub struct HttpTopology {
    servers: Vec<ServiceServer>,
    mapping: Vec<(String, String)>,
}

impl HttpTopology {
    pub fn start(config: &TopologyConfig, binding: Binding) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut listeners = Vec::new();
        for (name, url) in config.mapping()? {
            let addr = match binding {
                Binding::Configured => listen_addr(&url)?,
                Binding::Ephemeral => "127.0.0.1:0".to_string(),
            };
            let server = tiny_http::Server::http(&addr)
                .map_err(|e| ConfigError::Invalid(format!("cannot listen on {addr} for {name}: {e}")))?;
            listeners.push((name, server));
        }
        let mapping: Vec<(String, String)> = listeners
            .iter()
            .map(|(name, server)| (name.clone(), format!("http://{}", server.server_addr().to_ip().expect("tcp"))))
            .collect();

        let registry = SharedRegistry::new(Registry::new());
        registry.write(|r| r.register_names(mapping.clone())).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let registry_url = mapping.iter().find(|(n, _)| n == &config.registry).map(|(_, u)| u.clone()).expect("mapped");
        let mut hosts = build_hosts(config, &registry)?;

        let mut servers = Vec::new();
        for (i, (name, server)) in listeners.into_iter().enumerate() {
            let host = hosts.remove(&name).expect("host per mapped name");
            let directory: Arc<dyn Directory> = if name == config.registry {
                Arc::new(registry.clone())
            } else {
                Arc::new(HttpRouter::new(registry_url.clone()))
            };
            servers.push(ServiceServer::spawn(server, host, directory, config.seed.wrapping_add(i as u64)));
        }
        Ok(Self { servers, mapping })
    }

    pub fn mapping(&self) -> &[(String, String)] {
        &self.mapping
    }

    pub fn url(&self, name: &str) -> Option<&str> {
        self.mapping.iter().find(|(n, _)| n == name).map(|(_, u)| u.as_str())
    }

    pub fn servers(&self) -> &[ServiceServer] {
        &self.servers
    }

    pub fn shutdown(self) {
        for server in self.servers {
            server.shutdown();
        }
    }
}
