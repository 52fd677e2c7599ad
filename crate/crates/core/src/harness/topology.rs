use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, TopologyConfig};
use crate::controller::Controller;
use crate::dealer::{Dealer, DealerConfig};
use crate::node::{Node, ShellExecutor};
use crate::routing::{
    Delivery, Envelope, Environment, ForwardEntry, Registry, RegistryService, ServiceHost, SharedRegistry,
};
use crate::service::{Clock, Message, Reply, SimClock, Status};
use crate::store::{ActionStore, SqliteBackend};

/// Name used for calls injected by the harness itself.
pub const OPERATOR: &str = "operator";

/// Deliveries before `run_until_quiescent` gives up on a runaway exchange.
pub const DEFAULT_STEP_BUDGET: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// Operator call straight to a service.
    Call,
    /// Envelope handled by its destination.
    Deliver,
    /// Envelope relayed by an intermediate.
    Forward,
    /// Envelope or outbound message that could not be routed.
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub at: i64,
    pub kind: TraceKind,
    pub origin: String,
    pub destination: String,
    /// The hop that carried it: `(from_node, to_node)`.
    pub hop: (String, String),
    pub path: String,
    pub reference: Option<String>,
    pub status: Option<Status>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Every service in one process, driven by a FIFO of envelopes and a
/// simulated clock that ticks one millisecond per delivery.
pub struct Topology {
    config: TopologyConfig,
    hosts: BTreeMap<String, ServiceHost>,
    registry: SharedRegistry,
    clock: SimClock,
    rng: ChaCha20Rng,
    queue: VecDeque<Envelope>,
    trace: Vec<TraceEvent>,
}

impl Topology {
    pub fn boot(config: TopologyConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let registry = SharedRegistry::new(Registry::new());
        let mapping = config.mapping()?;
        registry.write(|r| r.register_names(mapping)).map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let hosts = build_hosts(&config, &registry)?;

        Ok(Self {
            rng: ChaCha20Rng::seed_from_u64(config.seed),
            config,
            hosts,
            registry,
            clock: SimClock::default(),
            queue: VecDeque::new(),
            trace: Vec::new(),
        })
    }

    pub fn config(&self) -> &TopologyConfig {
        &self.config
    }

    pub fn registry(&self) -> &SharedRegistry {
        &self.registry
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn now_ms(&self) -> i64 {
        self.clock.now_ms()
    }

    /// The seeded generator shared by every service.
    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn host(&self, name: &str) -> Option<&ServiceHost> {
        self.hosts.get(name)
    }

    pub fn hosts(&self) -> impl Iterator<Item = &ServiceHost> {
        self.hosts.values()
    }

    pub fn dealer(&self) -> &Dealer {
        self.service(&self.config.dealer).expect("dealer is always present")
    }

    pub fn controller(&self, name: &str) -> Option<&Controller> {
        self.service(name)
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.service(name)
    }

    pub fn service<T: crate::service::Service>(&self, name: &str) -> Option<&T> {
        self.hosts.get(name).and_then(ServiceHost::service::<T>)
    }

    pub fn service_mut<T: crate::service::Service>(&mut self, name: &str) -> Option<&mut T> {
        self.hosts.get_mut(name).and_then(ServiceHost::service_mut::<T>)
    }

    /// Forward-log entries across all services, keyed by the relaying service.
    pub fn forward_entries(&self, reference: &str) -> Vec<(&str, &ForwardEntry)> {
        self.hosts
            .values()
            .flat_map(|h| {
                h.forward_log().iter().filter(|e| e.reference.as_deref() == Some(reference)).map(move |e| (h.name(), e))
            })
            .collect()
    }

    pub fn pending_envelopes(&self) -> usize {
        self.queue.len()
    }

    /// Calls a service directly and queues whatever it sends. The queue is
    /// not drained.
    pub fn call(&mut self, target: &str, message: Message) -> Reply {
        self.clock.advance(1);
        let Some(host) = self.hosts.get_mut(target) else {
            return Reply::not_found(&format!("service {target}"));
        };
        let mut env = Environment { clock: &self.clock, rng: &mut self.rng, router: &self.registry };
        let failures_before = host.delivery_failures().len();
        let (reply, outbound) = host.call(&message, &mut env);
        self.trace.push(TraceEvent {
            at: self.clock.now_ms(),
            kind: TraceKind::Call,
            origin: OPERATOR.into(),
            destination: target.into(),
            hop: (OPERATOR.into(), target.into()),
            path: message.path.clone(),
            reference: reply.reference.clone().or_else(|| message.reference()),
            status: Some(reply.status),
            note: None,
        });
        let failures: Vec<_> = host.delivery_failures()[failures_before..].to_vec();
        for failure in failures {
            self.trace_failure(&failure, target);
        }
        self.queue.extend(outbound);
        reply
    }

    /// `call` followed by draining the queue.
    pub fn request(&mut self, target: &str, message: Message) -> Reply {
        let reply = self.call(target, message);
        self.run_until_quiescent(DEFAULT_STEP_BUDGET);
        reply
    }

    /// Delivers queued envelopes one hop at a time until none remain or the
    /// budget runs out. Returns the number of deliveries.
    pub fn run_until_quiescent(&mut self, budget: usize) -> usize {
        let mut steps = 0;
        while steps < budget {
            let Some(envelope) = self.queue.pop_front() else { break };
            steps += 1;
            self.deliver(envelope);
        }
        steps
    }

    fn deliver(&mut self, envelope: Envelope) {
        self.clock.advance(1);
        let at = self.clock.now_ms();
        let mut event = TraceEvent {
            at,
            kind: TraceKind::Deliver,
            origin: envelope.origin.clone(),
            destination: envelope.destination.clone(),
            hop: (envelope.from_node.clone(), envelope.to_node.clone()),
            path: envelope.payload.path.clone(),
            reference: envelope.reference(),
            status: None,
            note: None,
        };
        let Some(host) = self.hosts.get_mut(&envelope.to_node) else {
            event.kind = TraceKind::Fail;
            event.note = Some(format!("no service named {}", envelope.to_node));
            self.trace.push(event);
            return;
        };
        let mut env = Environment { clock: &self.clock, rng: &mut self.rng, router: &self.registry };
        let failures_before = host.delivery_failures().len();
        match host.receive(envelope, &mut env) {
            Delivery::Handled { reply, outbound } => {
                event.status = Some(reply.status);
                if event.reference.is_none() {
                    event.reference = reply.reference.clone();
                }
                let name = host.name().to_string();
                let failures: Vec<_> = host.delivery_failures()[failures_before..].to_vec();
                self.trace.push(event);
                for failure in failures {
                    self.trace_failure(&failure, &name);
                }
                self.queue.extend(outbound);
            }
            Delivery::Forwarded(next) => {
                event.kind = TraceKind::Forward;
                event.note = Some(format!("next {}", next.to_node));
                self.trace.push(event);
                self.queue.push_back(next);
            }
            Delivery::Failed(failure) => {
                event.kind = TraceKind::Fail;
                event.note = Some(failure.reason.clone());
                self.trace.push(event);
                // The origin learns about it too.
                if failure.stranded_at != failure.origin {
                    if let Some(origin) = self.hosts.get_mut(&failure.origin) {
                        origin.record_failure(failure);
                    }
                }
            }
        }
    }

    fn trace_failure(&mut self, failure: &crate::routing::DeliveryFailure, at_service: &str) {
        self.trace.push(TraceEvent {
            at: failure.at,
            kind: TraceKind::Fail,
            origin: failure.origin.clone(),
            destination: failure.destination.clone(),
            hop: (at_service.into(), at_service.into()),
            path: failure.path.clone(),
            reference: failure.reference.clone(),
            status: None,
            note: Some(failure.reason.clone()),
        });
    }
}

/// One host per configured service, the registry wrapping `registry`.
pub fn build_hosts(
    config: &TopologyConfig,
    registry: &SharedRegistry,
) -> Result<BTreeMap<String, ServiceHost>, ConfigError> {
    let store = match &config.database {
        Some(path) => {
            ActionStore::new(Box::new(SqliteBackend::open(path).map_err(|e| ConfigError::Invalid(e.to_string()))?))
        }
        None => ActionStore::in_memory(),
    };
    let controllers = config.controller_names();
    let nodes = config.node_names();
    let mut dealer_config = DealerConfig::new(controllers.clone(), nodes.clone()).with_field(config.field()?);
    dealer_config.name = config.dealer.clone();

    let mut hosts = BTreeMap::new();
    let mut add = |host: ServiceHost| {
        hosts.insert(host.name().to_string(), host);
    };
    add(ServiceHost::new(RegistryService::new(config.registry.clone(), registry.clone())));
    add(ServiceHost::new(Dealer::new(dealer_config, store)));
    for name in &controllers {
        add(ServiceHost::new(
            Controller::new(name.clone()).with_dealer(config.dealer.clone()).with_auto_respond(config.auto_respond),
        ));
    }
    for name in &nodes {
        let node = if config.execute_actions {
            Node::new(name.clone(), ShellExecutor::default())
        } else {
            Node::recording(name.clone())
        };
        add(ServiceHost::new(node.with_dealer(config.dealer.clone())));
    }

    Ok(hosts)
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::protocol::{paths, RaiseRequest};
    use crate::sss::SchemeConfig;

    const HEADER: &str = "| From | To | Level | Request | Action |\n";

    fn table(row: &str) -> serde_json::Value {
        json!({ "table": format!("{HEADER}{row}") })
    }

    #[test]
    fn boots_demo_with_every_service() {
        let topology = Topology::boot(TopologyConfig::demo()).unwrap();
        assert_eq!(topology.hosts().count(), 14);
        assert!(topology.controller("controller-6").is_some());
        assert!(topology.node("node-6").is_some());
        assert!(topology.controller("node-1").is_none());
    }

    #[test]
    fn level_one_request_completes_in_process() {
        let mut topology = Topology::boot(TopologyConfig::minimal()).unwrap();
        let reply = topology.request("dealer", Message::post(paths::COMMAND_ACTION, table("| 1 | 2 | 1 | R | A |")));
        assert!(reply.is_ok(), "{reply:?}");
        let reply = topology.request(
            "controller-1",
            Message::post(
                paths::COMMAND_ACTION_REQUEST,
                RaiseRequest { request: "R".into(), to: Some("node-2".into()) },
            ),
        );
        assert!(reply.is_ok(), "{reply:?}");
        assert_eq!(topology.node("node-2").unwrap().executed_commands(), ["A"]);
        assert_eq!(topology.pending_envelopes(), 0);
    }

    #[test]
    fn same_seed_same_trace() {
        let run = || {
            let mut topology = Topology::boot(TopologyConfig::minimal().with_seed(3)).unwrap();
            topology.request(
                "dealer",
                Message::post(paths::COMMAND_SCHEME_CONFIG, SchemeConfig::hash_based(2, 3).unwrap()),
            );
            topology.request("dealer", Message::post(paths::COMMAND_ACTION, table("| 1 | 2 | 2 | R | A |")));
            topology.request("dealer", Message::post(paths::COMMAND_INIT_ACTION, json!({})));
            topology.request("controller-1", Message::post(paths::COMMAND_ACTION_REQUEST, json!({"request": "R"})));
            topology.trace().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unroutable_send_is_traced() {
        let mut topology = Topology::boot(TopologyConfig::minimal()).unwrap();
        topology.request("dealer", Message::post(paths::COMMAND_ACTION, table("| 1 | 2 | 1 | R | A |")));
        for other in topology.config().service_names() {
            if other != "node-2" {
                topology.registry().write(|r| r.update_route("node-2", &other, 1, true)).unwrap();
            }
        }
        topology.request(
            "controller-1",
            Message::post(paths::COMMAND_ACTION_REQUEST, json!({"request": "R", "to": "node-2"})),
        );
        assert!(topology.trace().iter().any(|e| e.kind == TraceKind::Fail));
        assert!(topology.node("node-2").unwrap().executed_commands().is_empty());
    }
}
