//! Next-hop routing over a small weighted graph, before and after edits.

use s3cdm::routing::RouteGraph;

fn show(graph: &RouteGraph, from: &str, to: &str) {
    match graph.next_hop(from, to) {
        Ok(next) => println!("{from} -> {to}: next {next}, cost {:?}", graph.shortest_distance(from, to)),
        Err(err) => println!("{from} -> {to}: {err}"),
    }
}

fn main() {
    let mut graph = RouteGraph::full_mesh(["dealer", "controller-1", "controller-2", "node-1"]);
    show(&graph, "dealer", "node-1");

    graph.set_edge("dealer", "node-1", 5, false).unwrap();
    show(&graph, "dealer", "node-1");

    graph.set_edge("controller-1", "node-1", 1, true).unwrap();
    show(&graph, "dealer", "node-1");

    for peer in ["dealer", "controller-1", "controller-2"] {
        graph.set_edge(peer, "node-1", 1, true).unwrap();
    }
    show(&graph, "dealer", "node-1");

    graph.reset();
    show(&graph, "dealer", "node-1");
}
