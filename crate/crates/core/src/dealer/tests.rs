use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use super::*;
use crate::routing::RouteGraph;
use crate::service::{Clock, Outbound, SimClock, Status};
use crate::sss::SchemeKind;

const LISTING: &str = "
| From | To | Level | Request | Action |
|------|----|-------|---------|--------|
| 1 | 2 | 2 | R1 | A1 |
| 3 | 2 | 2 | R2 | A2 |
| 3 | 2 | 2 | R3 | A3 |
| 2 | 1 | 2 | R4 | A4 |
";

const CASE3: &str = "
| From | To | Level | Request | Action |
| 3 | 4 | 2 | R3 | A3 |
";

fn names(prefix: &str) -> Vec<String> {
    (1..=6).map(|k| format!("{prefix}-{k}")).collect()
}

struct Rig {
    dealer: Dealer,
    graph: RouteGraph,
    clock: SimClock,
    rng: ChaCha20Rng,
}

impl Rig {
    fn new() -> Self {
        let mut vertices = names("controller");
        vertices.extend(names("node"));
        vertices.push(DEALER_NAME.into());
        Self {
            dealer: Dealer::new(DealerConfig::new(names("controller"), names("node")), ActionStore::in_memory()),
            graph: RouteGraph::full_mesh(vertices),
            clock: SimClock::default(),
            rng: ChaCha20Rng::seed_from_u64(7),
        }
    }

    fn call(&mut self, message: Message) -> (Reply, Vec<Outbound>) {
        self.clock.advance(1);
        let mut ctx = Context::new(DEALER_NAME, &self.clock, &mut self.rng, &self.graph);
        let reply = self.dealer.handle(&message, &mut ctx);
        (reply, ctx.into_outbox())
    }

    fn setup(&mut self, kind: SchemeKind, table: &str) -> Vec<ShareDistribution> {
        let (reply, _) = self.call(Message::post(paths::COMMAND_SCHEME_CONFIG, SchemeConfig::new(kind, 2, 3).unwrap()));
        assert!(reply.is_ok());
        let (reply, _) = self.call(Message::post(paths::COMMAND_ACTION, json!({"table": table})));
        assert!(reply.is_ok(), "{reply:?}");
        let (reply, out) = self.call(Message::post(paths::COMMAND_INIT_ACTION, json!({})));
        assert!(reply.is_ok(), "{reply:?}");
        out.iter().map(|o| serde_json::from_value(o.message.body.clone()).unwrap()).collect()
    }

    fn raise(&mut self, share: &ShareDistribution) -> Ticket {
        let ticket = Ticket::raise(self.clock.now_ms(), &share.from, &share.to, &share.request, &mut self.rng);
        let body =
            ActionRequest { ticket: ticket.clone(), share: Some(share.share.clone()), participant_index: share.index };
        let (reply, _) = self.call(Message::post(paths::ACTION_REQUEST, body));
        assert!(reply.is_ok(), "{reply:?}");
        ticket
    }

    fn ack(&mut self, ticket: &Ticket) -> (Reply, Vec<Outbound>) {
        self.call(Message::post(paths::FORWARD_ACTION_REQUEST, TicketBody { ticket: ticket.clone() }))
    }

    fn respond(&mut self, ticket: &Ticket, share: &ShareDistribution, controller: &str) -> (Reply, Vec<Outbound>) {
        let body = ShareResponse {
            ticket: ticket.clone(),
            participant_index: share.index.unwrap(),
            share: share.share.clone(),
            controller: controller.into(),
        };
        self.call(Message::post(paths::ACCEPT_SHARES, body))
    }

    fn audits(&self, ticket: &Ticket) -> Vec<AuditRecord> {
        self.dealer.list_audit(&AuditFilter { reference_number: Some(ticket.reference.clone()), batch_id: None })
    }
}

fn destinations(out: &[Outbound]) -> Vec<(&str, &str)> {
    out.iter().map(|o| (o.destination.as_str(), o.message.path.as_str())).collect()
}

#[test]
fn scheme_config_validation() {
    let mut rig = Rig::new();
    let (ok, _) = rig.call(Message::post(
        paths::COMMAND_SCHEME_CONFIG,
        json!({"scheme": "shamir", "threshold": 3, "participants": 5}),
    ));
    assert!(ok.is_ok());
    let (bad, _) = rig.call(Message::post(
        paths::COMMAND_SCHEME_CONFIG,
        json!({"scheme": "hash_based", "threshold": 4, "participants": 3}),
    ));
    assert_eq!(bad.status, Status::Rejected);
    assert_eq!(rig.dealer.scheme().unwrap().threshold, 3);
}

#[test]
fn listing_resolves_main_participants() {
    let mut rig = Rig::new();
    let report = rig.dealer.load_actions(LISTING).unwrap();
    let mains: Vec<&str> = report.records.iter().map(|r| r.from_node.as_str()).collect();
    assert_eq!(mains, ["controller-1", "controller-3", "controller-3", "controller-2"]);
    assert_eq!(report.affected, 4);
}

#[test]
fn malformed_table_applies_nothing() {
    let mut rig = Rig::new();
    let bad = "| From | To | Level | Request | Action |\n| 1 | 2 | 2 | R1 | A1 |\n| 1 | 2 | 2 | R2 |\n";
    let err = rig.dealer.load_actions(bad).unwrap_err();
    assert!(err.starts_with("line 3"), "{err}");
    assert!(rig.dealer.store().actions().unwrap().is_empty());
    assert!(rig.dealer.load_actions("").unwrap().records.is_empty());
}

#[test]
fn init_distributes_three_shares_per_row() {
    let mut rig = Rig::new();
    let shares = rig.setup(SchemeKind::HashBased, LISTING);
    assert_eq!(shares.len(), 12);
    assert_eq!(rig.dealer.shares_table().len(), 12);
    let r1: Vec<&ShareDistribution> = shares.iter().filter(|s| s.request == "R1").collect();
    assert_eq!(r1.len(), 3);
    assert_eq!(r1[0].participants, ["controller-2", "controller-3"]);
    assert!(r1[1].participants.is_empty());
    // R1 is now keyed by its secret
    let keys: Vec<String> = rig.dealer.store().actions().unwrap().into_iter().map(|r| r.request_key).collect();
    assert!(keys.iter().all(|k| k.len() == 64), "{keys:?}");
}

#[test]
fn init_without_level2_rows_is_empty() {
    let mut rig = Rig::new();
    rig.dealer.configure_scheme(SchemeConfig::hash_based(2, 3).unwrap()).unwrap();
    let (reply, out) = rig.call(Message::post(paths::COMMAND_INIT_ACTION, json!({})));
    assert_eq!(reply.data.unwrap()["rows"], json!([]));
    assert!(out.is_empty());
}

#[test]
fn explicit_participants() {
    let mut rig = Rig::new();
    let strategy = json!({"strategy": "explicit", "controllers": ["controller-5", "controller-6"]});
    assert!(rig.call(Message::post(paths::COMMAND_PARTICIPANT_CONFIG, strategy)).0.is_ok());
    let shares = rig.setup(SchemeKind::HashBased, CASE3);
    assert_eq!(shares.len(), 3);
    assert_eq!(shares[0].participants, ["controller-5", "controller-6"]);

    let unknown = json!({"strategy": "explicit", "controllers": ["controller-99"]});
    assert_eq!(rig.call(Message::post(paths::COMMAND_PARTICIPANT_CONFIG, unknown)).0.status, Status::Rejected);
}

#[test]
fn level0_with_level9_approves_immediately() {
    let mut rig = Rig::new();
    rig.dealer
        .load_actions("| From | To | Level | Request | Action |\n| 1 | 2 | 0 | | |\n| 0 | 0 | 9 | R1 | A1 |")
        .unwrap();
    let ticket = Ticket::raise(0, "controller-1", "node-2", "R1", &mut rig.rng);
    let (reply, out) =
        rig.call(Message::post(paths::ACTION_REQUEST, ActionRequest { ticket, share: None, participant_index: None }));
    assert!(reply.is_ok());
    assert_eq!(
        destinations(&out),
        [("node-2", paths::ACTION_REQUEST_RESULT), ("controller-1", paths::ACTION_REQUEST_RESULT)]
    );
    let result: NodeResult = serde_json::from_value(out[0].message.body.clone()).unwrap();
    assert_eq!((result.outcome, result.action.as_deref()), (Outcome::Success, Some("A1")));
}

#[test]
fn unknown_request_is_denied_and_audited() {
    let mut rig = Rig::new();
    let ticket = Ticket::raise(0, "controller-6", "node-6", "R9", &mut rig.rng);
    let (reply, _) = rig.call(Message::post(
        paths::ACTION_REQUEST,
        ActionRequest { ticket: ticket.clone(), share: None, participant_index: None },
    ));
    assert_eq!(reply.status, Status::Rejected);
    let audits = rig.audits(&ticket);
    assert_eq!(audits.len(), 1);
    assert!(!audits[0].is_success);
}

#[test]
fn honest_request_full_cycle() {
    let mut rig = Rig::new();
    let shares = rig.setup(SchemeKind::HashBased, CASE3);
    let ticket = rig.raise(&shares[0]);
    assert_eq!(rig.dealer.pending(&ticket.reference).unwrap().state, RequestState::AwaitingAck);

    // shares before the node ack are refused
    let (early, _) = rig.respond(&ticket, &shares[1], "controller-1");
    assert_eq!(early.status, Status::Ignored);

    let (_, out) = rig.ack(&ticket);
    assert_eq!(
        destinations(&out),
        [("controller-1", paths::ASK_FOR_SHARED_SECRET), ("controller-2", paths::ASK_FOR_SHARED_SECRET)]
    );
    let (dup, out) = rig.ack(&ticket);
    assert_eq!(dup.status, Status::Ignored);
    assert!(out.is_empty());

    let (_, out) = rig.respond(&ticket, &shares[1], "controller-1");
    assert_eq!(
        destinations(&out),
        [
            ("node-4", paths::ACTION_REQUEST_RESULT),
            ("controller-3", paths::ACTION_REQUEST_RESULT),
            ("controller-1", paths::ACTION_REQUEST_RESULT),
            ("controller-2", paths::ACTION_REQUEST_RESULT),
        ]
    );
    let audits = rig.audits(&ticket);
    assert_eq!(audits.len(), 1);
    assert!(audits[0].is_success);
    assert_eq!(audits[0].context_nodes, "subset=[1,2] nodes=controller-3,controller-1");

    let (late, _) = rig.respond(&ticket, &shares[2], "controller-2");
    assert_eq!(late.status, Status::Ignored);
    assert_eq!(rig.audits(&ticket).len(), 1);
}

#[test]
fn corrupted_participant_falls_through_to_next_subset() {
    let mut rig = Rig::new();
    let shares = rig.setup(SchemeKind::HashBased, CASE3);
    let ticket = rig.raise(&shares[0]);
    rig.ack(&ticket);
    let mut bad = shares[1].clone();
    bad.share = ShareBytes::new(vec![0xab; 32]);
    let (_, out) = rig.respond(&ticket, &bad, "controller-1");
    assert!(out.is_empty(), "waits for another share");
    rig.respond(&ticket, &shares[2], "controller-2");
    let outcomes: Vec<bool> = rig.audits(&ticket).iter().map(|a| a.is_success).collect();
    assert_eq!(outcomes, [false, true]);
}

#[test]
fn corrupted_main_share_is_rejected() {
    let mut rig = Rig::new();
    let mut shares = rig.setup(SchemeKind::Shamir, CASE3);
    shares[0].share = ShareBytes::new(vec![0x11; shares[0].share.len()]);
    let ticket = rig.raise(&shares[0]);
    rig.ack(&ticket);
    rig.respond(&ticket, &shares[1], "controller-1");
    let (_, out) = rig.respond(&ticket, &shares[2], "controller-2");
    let audits = rig.audits(&ticket);
    assert_eq!(audits.len(), 3);
    assert!(audits.iter().all(|a| !a.is_success));
    assert!(audits[2].context_nodes.starts_with("reject=invalid-key"));
    let node: NodeResult = serde_json::from_value(out[0].message.body.clone()).unwrap();
    assert_eq!(node.outcome, Outcome::Failure);
    assert_eq!(rig.dealer.pending(&ticket.reference).unwrap().state, RequestState::Resolved(Outcome::Failure));
}

#[test]
fn altered_ack_rejects_both_parties() {
    let mut rig = Rig::new();
    let shares = rig.setup(SchemeKind::HashBased, CASE3);
    let ticket = rig.raise(&shares[0]);
    let mut altered = ticket.clone();
    altered.request = "R4".into();
    let (reply, out) = rig.ack(&altered);
    assert_eq!(reply.status, Status::Rejected);
    assert_eq!(
        destinations(&out),
        [("controller-3", paths::ACTION_REQUEST_RESULT), ("node-4", paths::ACTION_REQUEST_RESULT)]
    );
    assert_eq!(rig.audits(&ticket).len(), 1);
}

#[test]
fn early_ack_is_applied_when_the_request_arrives() {
    let mut rig = Rig::new();
    let shares = rig.setup(SchemeKind::HashBased, CASE3);
    let ticket = Ticket::raise(rig.clock.now_ms(), "controller-3", "node-4", "R3", &mut rig.rng);
    assert_eq!(rig.ack(&ticket).0.status, Status::Ignored);
    let body = ActionRequest { ticket: ticket.clone(), share: Some(shares[0].share.clone()), participant_index: None };
    let (_, out) = rig.call(Message::post(paths::ACTION_REQUEST, body));
    assert_eq!(out.len(), 2);
    assert_eq!(rig.dealer.pending(&ticket.reference).unwrap().state, RequestState::CollectingShares);
}

#[test]
fn raise_outside_any_binding_is_denied() {
    let mut rig = Rig::new();
    let shares = rig.setup(SchemeKind::HashBased, CASE3);
    let ticket = Ticket::raise(0, "controller-1", "node-4", "R3", &mut rig.rng);
    let body = ActionRequest { ticket, share: Some(shares[1].share.clone()), participant_index: shares[1].index };
    assert_eq!(rig.call(Message::post(paths::ACTION_REQUEST, body)).0.status, Status::Rejected);
}

#[test]
fn init_resets_pending_requests() {
    let mut rig = Rig::new();
    let shares = rig.setup(SchemeKind::HashBased, CASE3);
    let ticket = rig.raise(&shares[0]);
    let first_batch = rig.dealer.batch_id().to_string();
    rig.call(Message::post(paths::COMMAND_INIT_ACTION, json!({})));
    assert!(rig.dealer.pending(&ticket.reference).is_none());
    assert_ne!(rig.dealer.batch_id(), first_batch);
    // one level-2 row, keyed by the new secret only
    let level2 = rig.dealer.store().actions().unwrap().into_iter().filter(|r| r.level == 2).count();
    assert_eq!(level2, 1);
}
