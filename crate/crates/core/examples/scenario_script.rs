//! Run any scenario script: `cargo run --example scenario_script -- <file>`.

use s3cdm::harness::{Scenario, Topology, TopologyConfig};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/case3_threshold.json").into());
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let scenario = Scenario::from_json(&text).unwrap();
    let mut topology = Topology::boot(TopologyConfig::demo()).unwrap();
    let transcript = scenario.run(&mut topology);
    print!("{}", transcript.render(true));
    std::process::exit(if transcript.passed() { 0 } else { 1 });
}
