//! Reference computations written independently of the library, used as
//! oracles by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::Rng;
use sha2::{Digest, Sha256};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn read_scenario(name: &str) -> String {
    std::fs::read_to_string(manifest_dir().join("scenarios").join(name)).expect("scenario script")
}

pub fn read_golden(name: &str) -> String {
    std::fs::read_to_string(manifest_dir().join("tests/golden").join(format!("{name}.txt"))).expect("golden file")
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

/// Every subset of `1..=n`, as sorted index lists.
pub fn all_subsets(n: u32) -> Vec<Vec<u32>> {
    (0u32..(1 << n)).map(|mask| (1..=n).filter(|i| mask & (1 << (i - 1)) != 0).collect()).collect()
}

/// `SHA-256(s_a || s_b || ...) XOR secret` for shares in the given order.
pub fn hash_control(shares: &[&[u8]], secret: &[u8]) -> Vec<u8> {
    let mut hasher = Sha256::new();
    for share in shares {
        hasher.update(share);
    }
    hasher.finalize().iter().zip(secret).map(|(a, b)| a ^ b).collect()
}

fn modp(v: i128, p: i128) -> i128 {
    ((v % p) + p) % p
}

fn inverse(a: i128, p: i128) -> i128 {
    // extended Euclid
    let (mut r0, mut r1) = (modp(a, p), p);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    assert_eq!(r0, 1, "{a} has no inverse mod {p}");
    modp(s0, p)
}

/// `f(0)` of the polynomial through `points`, modulo small prime `p`.
pub fn lagrange_at_zero(points: &[(i128, i128)], p: i128) -> i128 {
    let mut total = 0;
    for (j, &(xj, yj)) in points.iter().enumerate() {
        let mut num = 1;
        let mut den = 1;
        for (m, &(xm, _)) in points.iter().enumerate() {
            if m != j {
                num = modp(num * -xm, p);
                den = modp(den * (xj - xm), p);
            }
        }
        total = modp(total + yj * num % p * inverse(den, p), p);
    }
    total
}

/// Horner evaluation modulo `p`, coefficients lowest degree first.
pub fn poly_eval(coefficients: &[i128], x: i128, p: i128) -> i128 {
    coefficients.iter().rev().fold(0, |acc, c| modp(acc * x + c, p))
}

/// Undirected weighted graph as the oracle sees it: only enabled edges.
#[derive(Debug, Clone, Default)]
pub struct OracleGraph {
    pub vertices: Vec<String>,
    pub edges: BTreeMap<(String, String), u64>,
}

impl OracleGraph {
    fn weight(&self, a: &str, b: &str) -> Option<u64> {
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.edges.get(&key).copied()
    }

    /// Enumerates every simple path; returns the cheapest cost and the set of
    /// first hops achieving it.
    pub fn best_first_hops(&self, from: &str, to: &str) -> Option<(u64, BTreeSet<String>)> {
        let mut best: Option<(u64, BTreeSet<String>)> = None;
        let mut visited = BTreeSet::from([from.to_string()]);
        self.walk(from, to, 0, None, &mut visited, &mut best);
        best
    }

    fn walk(
        &self,
        at: &str,
        to: &str,
        cost: u64,
        first: Option<&str>,
        visited: &mut BTreeSet<String>,
        best: &mut Option<(u64, BTreeSet<String>)>,
    ) {
        if at == to {
            let hop = first.expect("from != to").to_string();
            match best {
                Some((c, hops)) if *c == cost => {
                    hops.insert(hop);
                }
                Some((c, _)) if *c < cost => {}
                _ => *best = Some((cost, BTreeSet::from([hop]))),
            }
            return;
        }
        for next in &self.vertices {
            if visited.contains(next) {
                continue;
            }
            if let Some(w) = self.weight(at, next) {
                visited.insert(next.clone());
                self.walk(next, to, cost + w, first.or(Some(next)), visited, best);
                visited.remove(next);
            }
        }
    }

    /// Shortest-path first hop, smallest name on ties.
    pub fn next_hop(&self, from: &str, to: &str) -> Option<String> {
        if from == to {
            return Some(to.to_string());
        }
        self.best_first_hops(from, to).and_then(|(_, hops)| hops.into_iter().next())
    }

    pub fn distance(&self, from: &str, to: &str) -> Option<u64> {
        if from == to {
            return Some(0);
        }
        self.best_first_hops(from, to).map(|(c, _)| c)
    }
}

/// A random graph given both to the library (`RouteGraph`) and the oracle.
/// Disabled edges are kept in the library graph but absent from the oracle.
pub fn random_graph(rng: &mut impl Rng) -> (s3cdm::routing::RouteGraph, OracleGraph) {
    let n = rng.gen_range(2..=7);
    let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut graph = s3cdm::routing::RouteGraph::new(vertices.clone());
    let mut oracle = OracleGraph { vertices: vertices.clone(), edges: BTreeMap::new() };
    for (i, a) in vertices.iter().enumerate() {
        for b in &vertices[i + 1..] {
            if rng.gen_bool(0.55) {
                let weight = rng.gen_range(1..=4u32);
                let disabled = rng.gen_bool(0.2);
                graph.set_edge(a, b, weight, disabled).unwrap();
                if !disabled {
                    oracle.edges.insert((a.clone(), b.clone()), weight as u64);
                }
            }
        }
    }
    (graph, oracle)
}
