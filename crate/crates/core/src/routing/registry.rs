use std::any::Any;
use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{RouteError, RouteGraph, Router};
use crate::service::{Context, Message, Reply, Service};

pub const REGISTRY_NAME: &str = "registry";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceEntry {
    pub name: String,
    pub url: String,
}

/// Name to URL directory plus the route graph over the registered names.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    directory: BTreeMap<String, String>,
    graph: RouteGraph,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the directory and rebuilds a full weight-1 mesh.
    pub fn register_names(&mut self, entries: impl IntoIterator<Item = (String, String)>) -> Result<(), RouteError> {
        let mut directory = BTreeMap::new();
        for (name, url) in entries {
            if directory.insert(name.clone(), url).is_some() {
                return Err(RouteError::DuplicateName(name));
            }
        }
        self.graph = RouteGraph::full_mesh(directory.keys().cloned());
        self.directory = directory;
        Ok(())
    }

    pub fn url(&self, name: &str) -> Option<&str> {
        self.directory.get(name).map(String::as_str)
    }

    pub fn directory(&self) -> &BTreeMap<String, String> {
        &self.directory
    }

    pub fn graph(&self) -> &RouteGraph {
        &self.graph
    }

    pub fn update_route(&mut self, a: &str, b: &str, weight: u32, disabled: bool) -> Result<(), RouteError> {
        self.graph.set_edge(a, b, weight, disabled)
    }

    pub fn reset_routes(&mut self) {
        self.graph.reset();
    }

    pub fn next_hop(&self, from: &str, destination: &str) -> Result<(String, String), RouteError> {
        let next = self.graph.next_hop(from, destination)?;
        let url = self.directory.get(&next).cloned().unwrap_or_default();
        Ok((next, url))
    }
}

/// Registry behind a lock so services and the operator share one snapshot.
#[derive(Debug, Clone, Default)]
pub struct SharedRegistry(Arc<RwLock<Registry>>);

impl SharedRegistry {
    pub fn new(registry: Registry) -> Self {
        Self(Arc::new(RwLock::new(registry)))
    }

    pub fn read<T>(&self, f: impl FnOnce(&Registry) -> T) -> T {
        f(&self.0.read().expect("registry lock poisoned"))
    }

    pub fn write<T>(&self, f: impl FnOnce(&mut Registry) -> T) -> T {
        f(&mut self.0.write().expect("registry lock poisoned"))
    }
}

impl Router for SharedRegistry {
    fn next_hop(&self, from: &str, destination: &str) -> Result<String, RouteError> {
        self.read(|r| r.graph.next_hop(from, destination))
    }

    fn hop_limit(&self) -> usize {
        self.read(|r| r.graph.len())
    }
}

#[derive(Deserialize)]
struct RouteBody {
    a: String,
    b: String,
    #[serde(default = "default_weight")]
    weight: u32,
    #[serde(default)]
    disabled: bool,
}

fn default_weight() -> u32 {
    1
}

#[derive(Deserialize)]
struct RegisterBody {
    services: Vec<ServiceEntry>,
}

/// The registry's HTTP surface.
pub struct RegistryService {
    name: String,
    registry: SharedRegistry,
}

impl RegistryService {
    pub fn new(name: impl Into<String>, registry: SharedRegistry) -> Self {
        Self { name: name.into(), registry }
    }

    pub fn registry(&self) -> &SharedRegistry {
        &self.registry
    }
}

fn route_reply(result: Result<(), RouteError>) -> Reply {
    match result {
        Ok(()) => Reply::ok(),
        Err(e) => Reply::rejected(e.to_string()),
    }
}

impl Service for RegistryService {
    fn name(&self) -> &str {
        &self.name
    }

    fn handle(&mut self, message: &Message, _ctx: &mut Context<'_>) -> Reply {
        match (message.is_get(), message.route()) {
            (false, "/route") => match message.parse::<RouteBody>() {
                Ok(b) => route_reply(self.registry.write(|r| r.update_route(&b.a, &b.b, b.weight, b.disabled))),
                Err(reply) => reply,
            },
            (false, "/route/reset") => {
                self.registry.write(Registry::reset_routes);
                Reply::ok()
            }
            (false, "/register") => match message.parse::<RegisterBody>() {
                Ok(b) => route_reply(
                    self.registry.write(|r| r.register_names(b.services.into_iter().map(|e| (e.name, e.url)))),
                ),
                Err(reply) => reply,
            },
            (true, "/path") => {
                let (Some(from), Some(destination)) = (message.query("from"), message.query("destination")) else {
                    return Reply::bad_request("`from` and `destination` are required");
                };
                match self.registry.read(|r| r.next_hop(&from, &destination)) {
                    Ok((next, url)) => Reply::ok_with(json!({"next": next, "url": url})),
                    Err(e) => Reply::rejected(e.to_string()),
                }
            }
            (true, "/graph") => Reply::ok_with(self.registry.read(|r| r.graph.view())),
            (true, "/state") => {
                Reply::ok_with(self.registry.read(|r| json!({"directory": r.directory, "graph": r.graph.view()})))
            }
            _ => Reply::not_found(&message.path),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
