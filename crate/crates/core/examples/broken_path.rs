//! Disable the dealer's direct link to node-2 mid-request; the result is
//! relayed through exactly one other service.

use s3cdm::harness::{Scenario, Topology, TopologyConfig};

fn main() {
    let mut topology = Topology::boot(TopologyConfig::demo()).unwrap();
    let script = include_str!("../scenarios/broken_path.json");
    let transcript = Scenario::from_json(script).unwrap().run(&mut topology);
    print!("{}", transcript.render(true));

    let reference = &transcript.labels["r1"];
    for (relay, entry) in topology.forward_entries(reference) {
        println!(
            "{relay} relayed {} from {} to {} via {}",
            entry.path, entry.origin, entry.destination, entry.next_hop
        );
    }
}
