//! Overwrite one participant's share and watch the dealer fall back to the
//! next subset, then corrupt the main share and watch the request fail.

use s3cdm::harness::{Scenario, Topology, TopologyConfig};

const SCRIPTS: [&str; 2] =
    [include_str!("../scenarios/compromised_participant.json"), include_str!("../scenarios/compromised_main.json")];

fn main() {
    for script in SCRIPTS {
        let mut topology = Topology::boot(TopologyConfig::demo()).unwrap();
        let transcript = Scenario::from_json(script).unwrap().run(&mut topology);
        let reference = &transcript.labels["r3"];
        println!("audit for {reference}:");
        for row in topology.dealer().list_audit(&Default::default()) {
            println!("  success={} {}", row.is_success, row.context_nodes);
        }
        println!("node-4 ran {:?}\n", topology.node("node-4").unwrap().executed_commands());
    }
}
