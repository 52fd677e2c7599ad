use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{RouteError, Router};
use crate::service::{Clock, Context, Message, Reply, Service};

/// What travels between services. `to_node` is always a direct neighbor of
/// `from_node`; `hops` counts forwards so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub origin: String,
    pub destination: String,
    pub from_node: String,
    pub to_node: String,
    pub payload: Message,
    #[serde(default)]
    pub hops: usize,
}

impl Envelope {
    pub fn reference(&self) -> Option<String> {
        self.payload.reference()
    }
}

/// A passthrough message this service relayed for someone else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardEntry {
    pub reference: Option<String>,
    pub origin: String,
    pub destination: String,
    pub next_hop: String,
    pub path: String,
    pub at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryFailure {
    pub reference: Option<String>,
    pub origin: String,
    pub destination: String,
    /// Service where delivery stopped.
    pub stranded_at: String,
    pub path: String,
    pub reason: String,
    pub at: i64,
}

pub struct Environment<'a> {
    pub clock: &'a dyn Clock,
    pub rng: &'a mut dyn RngCore,
    pub router: &'a dyn Router,
}

#[derive(Debug)]
pub enum Delivery {
    /// Addressed here: the service handled it.
    Handled {
        reply: Reply,
        outbound: Vec<Envelope>,
    },
    /// Relayed one hop closer to its destination.
    Forwarded(Envelope),
    Failed(DeliveryFailure),
}

/// Wraps a service with the forwarding behavior every service shares.
pub struct ServiceHost {
    name: String,
    service: Box<dyn Service>,
    forward_log: Vec<ForwardEntry>,
    failures: Vec<DeliveryFailure>,
}

impl ServiceHost {
    pub fn new(service: impl Service) -> Self {
        Self {
            name: service.name().to_string(),
            service: Box::new(service),
            forward_log: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn service<T: Service>(&self) -> Option<&T> {
        self.service.as_any().downcast_ref()
    }

    pub fn service_mut<T: Service>(&mut self) -> Option<&mut T> {
        self.service.as_any_mut().downcast_mut()
    }

    pub fn forward_log(&self) -> &[ForwardEntry] {
        &self.forward_log
    }

    pub fn delivery_failures(&self) -> &[DeliveryFailure] {
        &self.failures
    }

    pub fn record_failure(&mut self, failure: DeliveryFailure) {
        tracing::warn!(service = %self.name, destination = %failure.destination, reason = %failure.reason, "delivery failed");
        self.failures.push(failure);
    }

    pub fn clear_logs(&mut self) {
        self.forward_log.clear();
        self.failures.clear();
    }

    /// Dispatches a message addressed to this service and wraps whatever it
    /// sends into first-hop envelopes.
    pub fn call(&mut self, message: &Message, env: &mut Environment<'_>) -> (Reply, Vec<Envelope>) {
        if message.is_get() && message.route() == "/forward-log" {
            return (Reply::ok_with(&self.forward_log), Vec::new());
        }
        let mut ctx = Context::new(&self.name, env.clock, &mut *env.rng, env.router);
        let mut reply = self.service.handle(message, &mut ctx);
        let (outbox, unsent) = ctx.into_parts();
        for (out, err) in unsent {
            self.record_failure(DeliveryFailure {
                reference: out.message.reference(),
                origin: self.name.clone(),
                destination: out.destination,
                stranded_at: self.name.clone(),
                path: out.message.path,
                reason: err.to_string(),
                at: env.clock.now_ms(),
            });
        }

        if message.is_get() && message.route() == "/state" {
            if let Some(Value::Object(map)) = reply.data.as_mut() {
                map.insert("forward_log".into(), serde_json::to_value(&self.forward_log).unwrap_or_default());
                map.insert("delivery_failures".into(), serde_json::to_value(&self.failures).unwrap_or_default());
            }
        }

        let mut envelopes = Vec::with_capacity(outbox.len());
        for out in outbox {
            let hop = if out.destination == self.name {
                Ok(self.name.clone())
            } else {
                env.router.next_hop(&self.name, &out.destination)
            };
            match hop {
                Ok(to_node) => envelopes.push(Envelope {
                    origin: self.name.clone(),
                    destination: out.destination,
                    from_node: self.name.clone(),
                    to_node,
                    payload: out.message,
                    hops: 0,
                }),
                Err(err) => {
                    let failure = DeliveryFailure {
                        reference: out.message.reference(),
                        origin: self.name.clone(),
                        destination: out.destination,
                        stranded_at: self.name.clone(),
                        path: out.message.path,
                        reason: err.to_string(),
                        at: env.clock.now_ms(),
                    };
                    self.record_failure(failure);
                }
            }
        }
        (reply, envelopes)
    }

    /// Handles an envelope arriving at this service: dispatch if addressed
    /// here, otherwise relay it one hop further.
    pub fn receive(&mut self, mut envelope: Envelope, env: &mut Environment<'_>) -> Delivery {
        if envelope.destination == self.name {
            let (reply, outbound) = self.call(&envelope.payload, env);
            return Delivery::Handled { reply, outbound };
        }

        envelope.hops += 1;
        let limit = env.router.hop_limit();
        let hop = if envelope.hops > limit {
            Err(RouteError::RoutingLoop { limit })
        } else {
            env.router.next_hop(&self.name, &envelope.destination)
        };
        let at = env.clock.now_ms();
        match hop {
            Ok(next) => {
                self.forward_log.push(ForwardEntry {
                    reference: envelope.reference(),
                    origin: envelope.origin.clone(),
                    destination: envelope.destination.clone(),
                    next_hop: next.clone(),
                    path: envelope.payload.path.clone(),
                    at,
                });
                envelope.from_node = self.name.clone();
                envelope.to_node = next;
                Delivery::Forwarded(envelope)
            }
            Err(err) => {
                let failure = DeliveryFailure {
                    reference: envelope.reference(),
                    origin: envelope.origin,
                    destination: envelope.destination,
                    stranded_at: self.name.clone(),
                    path: envelope.payload.path,
                    reason: err.to_string(),
                    at,
                };
                self.record_failure(failure.clone());
                Delivery::Failed(failure)
            }
        }
    }
}
