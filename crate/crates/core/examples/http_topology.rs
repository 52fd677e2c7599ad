//! Every service on its own loopback listener, driven over HTTP.

use std::time::Duration;

use serde_json::json;

use s3cdm::harness::TopologyConfig;
use s3cdm::http::{get, post, Binding, HttpTopology};

fn main() {
    let config = TopologyConfig { auto_respond: true, ..TopologyConfig::minimal() };
    let topology = HttpTopology::start(&config, Binding::Ephemeral).unwrap();
    for (name, url) in topology.mapping() {
        println!("{name:<14} {url}");
    }
    let dealer = topology.url("dealer").unwrap();
    post(dealer, "/command/scheme-config", &json!({"scheme": "shamir", "threshold": 2, "participants": 3})).unwrap();
    let table = "| From | To | Level | Request | Action |\n| 1 | 2 | 2 | R1 | A1 |";
    post(dealer, "/command/action", &json!({ "table": table })).unwrap();
    post(dealer, "/command/init-action", &json!({})).unwrap();
    std::thread::sleep(Duration::from_millis(200));

    let reply =
        post(topology.url("controller-1").unwrap(), "/command/action-request", &json!({"request": "R1"})).unwrap();
    println!("raised {:?}", reply.reference);
    std::thread::sleep(Duration::from_millis(300));

    let audit = get(dealer, "/audit").unwrap();
    println!("audit {}", serde_json::to_string_pretty(&audit.data).unwrap());
    let node = get(topology.url("node-2").unwrap(), "/state").unwrap();
    println!("node-2 entries {}", node.data.unwrap()["entries"]);
    topology.shutdown();
}
