//! The full threshold exchange in one process: controller-3 raises R3 for
//! node-4, controllers 5 and 6 hold the other shares.

use serde_json::json;

use s3cdm::harness::{Topology, TopologyConfig};
use s3cdm::protocol::{paths, RaiseRequest, RespondShare};
use s3cdm::service::Message;
use s3cdm::sss::SchemeConfig;

fn main() {
    let mut topology = Topology::boot(TopologyConfig::demo()).unwrap();
    topology.request("dealer", Message::post(paths::COMMAND_SCHEME_CONFIG, SchemeConfig::hash_based(2, 3).unwrap()));
    topology.request(
        "dealer",
        Message::post(
            paths::COMMAND_PARTICIPANT_CONFIG,
            json!({"strategy": "explicit", "controllers": ["controller-5", "controller-6"]}),
        ),
    );
    let table = "| From | To | Level | Request | Action |\n| 3 | 4 | 2 | R3 | A3 |";
    topology.request("dealer", Message::post(paths::COMMAND_ACTION, json!({ "table": table })));
    topology.request("dealer", Message::post(paths::COMMAND_INIT_ACTION, json!({})));

    let reply = topology.request(
        "controller-3",
        Message::post(paths::COMMAND_ACTION_REQUEST, RaiseRequest { request: "R3".into(), to: None }),
    );
    let reference = reply.reference.expect("raised");
    println!("raised {reference}");
    topology.request(
        "controller-5",
        Message::post(paths::COMMAND_RESPOND_SHARE, RespondShare { reference: reference.clone() }),
    );

    for event in topology.trace() {
        println!("{:?} {} -> {} {} {:?}", event.kind, event.origin, event.destination, event.path, event.status);
    }
    println!("node-4 ran {:?}", topology.node("node-4").unwrap().executed_commands());
    for name in ["controller-3", "controller-5", "controller-6"] {
        let status = topology.controller(name).unwrap().status(&reference).map(|s| s.status);
        println!("{name}: {status:?}");
    }
}
