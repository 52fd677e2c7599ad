//! Weighted service graph, name registry and hop-by-hop forwarding.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

mod host;
mod registry;

pub use host::{Delivery, DeliveryFailure, Envelope, Environment, ForwardEntry, ServiceHost};
pub use registry::{Registry, RegistryService, SharedRegistry, REGISTRY_NAME};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RouteError {
    #[error("unknown service `{0}`")]
    UnknownService(String),
    #[error("no route from `{from}` to `{destination}`")]
    NoRoute { from: String, destination: String },
    #[error("edge weight must be at least 1, got {0}")]
    InvalidWeight(u32),
    #[error("`{0}` cannot be linked to itself")]
    SelfLoop(String),
    #[error("duplicate service name `{0}`")]
    DuplicateName(String),
    #[error("hop limit {limit} exceeded")]
    RoutingLoop { limit: usize },
    #[error("transport: {0}")]
    Transport(String),
}

/// Answers "where should a message for `destination` go next from `from`".
pub trait Router {
    fn next_hop(&self, from: &str, destination: &str) -> Result<String, RouteError>;
    fn hop_limit(&self) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeState {
    pub weight: u32,
    pub disabled: bool,
}

impl Default for EdgeState {
    fn default() -> Self {
        Self { weight: 1, disabled: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeView {
    pub a: String,
    pub b: String,
    pub weight: u32,
    pub disabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphView {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeView>,
}

/// Undirected graph; each edge is stored once under its sorted name pair.
/// Disabled edges stay in the map but are invisible to path queries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouteGraph {
    vertices: BTreeSet<String>,
    edges: BTreeMap<(String, String), EdgeState>,
}

fn edge_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl RouteGraph {
    /// Vertices without any edges.
    pub fn new(vertices: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { vertices: vertices.into_iter().map(Into::into).collect(), edges: BTreeMap::new() }
    }

    /// Every pair connected with weight 1.
    pub fn full_mesh(vertices: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let mut graph = Self::new(vertices);
        graph.reset();
        graph
    }

    /// Back to the full weight-1 mesh over the current vertices.
    pub fn reset(&mut self) {
        self.edges.clear();
        let names: Vec<&String> = self.vertices.iter().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                self.edges.insert(((*a).clone(), (*b).clone()), EdgeState::default());
            }
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vertices.contains(name)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &str> {
        self.vertices.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edge(&self, a: &str, b: &str) -> Option<EdgeState> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    pub fn set_edge(&mut self, a: &str, b: &str, weight: u32, disabled: bool) -> Result<(), RouteError> {
        for name in [a, b] {
            if !self.contains(name) {
                return Err(RouteError::UnknownService(name.to_string()));
            }
        }
        if a == b {
            return Err(RouteError::SelfLoop(a.to_string()));
        }
        if weight < 1 {
            return Err(RouteError::InvalidWeight(weight));
        }
        self.edges.insert(edge_key(a, b), EdgeState { weight, disabled });
        Ok(())
    }

    fn neighbors<'a>(&'a self, v: &'a str) -> impl Iterator<Item = (&'a str, u64)> + 'a {
        self.edges.iter().filter(|(_, e)| !e.disabled).filter_map(move |((a, b), e)| {
            if a == v {
                Some((b.as_str(), e.weight as u64))
            } else if b == v {
                Some((a.as_str(), e.weight as u64))
            } else {
                None
            }
        })
    }

    /// Dijkstra distances from `source` over enabled edges.
    pub fn distances_from(&self, source: &str) -> BTreeMap<String, u64> {
        let mut dist: BTreeMap<String, u64> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(source.to_string(), 0);
        heap.push(Reverse((0u64, source.to_string())));
        while let Some(Reverse((d, v))) = heap.pop() {
            if dist.get(&v).is_some_and(|&best| d > best) {
                continue;
            }
            for (u, w) in self.neighbors(&v) {
                let candidate = d + w;
                if dist.get(u).is_none_or(|&best| candidate < best) {
                    dist.insert(u.to_string(), candidate);
                    heap.push(Reverse((candidate, u.to_string())));
                }
            }
        }
        dist
    }

    pub fn shortest_distance(&self, from: &str, destination: &str) -> Option<u64> {
        self.distances_from(destination).get(from).copied()
    }

    /// First hop of a minimum-weight path. Among equally short options the
    /// lexicographically smallest neighbor wins.
    pub fn next_hop(&self, from: &str, destination: &str) -> Result<String, RouteError> {
        for name in [from, destination] {
            if !self.contains(name) {
                return Err(RouteError::UnknownService(name.to_string()));
            }
        }
        if from == destination {
            return Ok(destination.to_string());
        }
        let no_route = || RouteError::NoRoute { from: from.to_string(), destination: destination.to_string() };
        let dist = self.distances_from(destination);
        let total = *dist.get(from).ok_or_else(no_route)?;
        self.neighbors(from)
            .filter(|(u, w)| dist.get(*u).is_some_and(|d| d + w == total))
            .map(|(u, _)| u)
            .min()
            .map(String::from)
            .ok_or_else(no_route)
    }

    pub fn view(&self) -> GraphView {
        GraphView {
            vertices: self.vertices.iter().cloned().collect(),
            edges: self
                .edges
                .iter()
                .map(|((a, b), e)| EdgeView { a: a.clone(), b: b.clone(), weight: e.weight, disabled: e.disabled })
                .collect(),
        }
    }
}

impl Router for RouteGraph {
    fn next_hop(&self, from: &str, destination: &str) -> Result<String, RouteError> {
        RouteGraph::next_hop(self, from, destination)
    }

    fn hop_limit(&self) -> usize {
        self.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detour_around_disabled_edge() {
        let mut g = RouteGraph::full_mesh(["A", "B", "C"]);
        g.set_edge("A", "B", 1, true).unwrap();
        assert_eq!(g.next_hop("A", "B").unwrap(), "C");
        assert_eq!(g.next_hop("B", "A").unwrap(), "C");
    }

    #[test]
    fn direct_edge_in_unit_mesh() {
        let g = RouteGraph::full_mesh(["A", "B", "C", "D"]);
        assert_eq!(g.next_hop("A", "B").unwrap(), "B");
    }

    #[test]
    fn heavy_edge_loses_to_two_hops() {
        let mut g = RouteGraph::full_mesh(["A", "B", "C"]);
        g.set_edge("A", "B", 100, false).unwrap();
        assert_eq!(g.next_hop("A", "B").unwrap(), "C");
        assert_eq!(g.shortest_distance("A", "B"), Some(2));
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let mut g = RouteGraph::full_mesh(["dealer", "node-2", "controller-4", "controller-1", "node-1"]);
        g.set_edge("dealer", "node-2", 1, true).unwrap();
        assert_eq!(g.next_hop("dealer", "node-2").unwrap(), "controller-1");
    }

    #[test]
    fn isolated_destination_has_no_route() {
        let mut g = RouteGraph::full_mesh(["A", "B", "C"]);
        g.set_edge("A", "C", 1, true).unwrap();
        g.set_edge("B", "C", 1, true).unwrap();
        assert!(matches!(g.next_hop("A", "C"), Err(RouteError::NoRoute { .. })));
    }

    #[test]
    fn reset_restores_the_mesh() {
        let mut g = RouteGraph::full_mesh(["A", "B", "C"]);
        g.set_edge("A", "B", 7, true).unwrap();
        g.reset();
        assert_eq!(g.edge("B", "A"), Some(EdgeState::default()));
        assert_eq!(g.view().edges.len(), 3);
    }

    #[test]
    fn edge_validation() {
        let mut g = RouteGraph::full_mesh(["A", "B"]);
        assert_eq!(g.set_edge("A", "Z", 1, false), Err(RouteError::UnknownService("Z".into())));
        assert_eq!(g.set_edge("A", "B", 0, false), Err(RouteError::InvalidWeight(0)));
        assert_eq!(g.set_edge("A", "A", 1, false), Err(RouteError::SelfLoop("A".into())));
    }

    #[test]
    fn next_hop_to_self() {
        let g = RouteGraph::new(["A"]);
        assert_eq!(g.next_hop("A", "A").unwrap(), "A");
    }
}
