//! The dealer: configures the scheme, deals shares for secret-gated actions,
//! and decides raised requests.
//!
//! A secret-gated request moves through
//! `AwaitingAck -> CollectingShares -> Resolved`. The dealer holds the main
//! controller's share from the raise, waits for the target node to echo the
//! ticket, solicits the other participants, then tries every authorized
//! subset that contains the main participant in lexicographic order. Each
//! attempt is audited; a recovered secret that keys a level-2 row approves
//! the request.

mod participants;

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use participants::SelectionStrategy;
use participants::{resolve_name, Selector, Side};

use crate::protocol::{
    paths, ActionRequest, ActionTable, ControllerResult, NodeResult, Outcome, ShareDistribution, ShareResponse,
    Solicitation, TicketBody,
};
use crate::service::{Context, Message, Reply, Service};
use crate::sss::{
    enumerate_minimal_authorized_subsets, AuthorizedSubset, ParticipantIndex, PrimeField, PublicParams, Scheme,
    SchemeConfig, SchemeDocument, ShareBytes, ShareMap,
};
use crate::store::{
    parse_action_table, ActionRecord, ActionStore, AuditFilter, AuditRecord, Level, NewAuditRecord, RecordKey, Verdict,
};
use crate::ticket::Ticket;

pub const DEALER_NAME: &str = "dealer";

const MAIN_INDEX: ParticipantIndex = ParticipantIndex(1);

#[derive(Debug, Clone)]
pub struct DealerConfig {
    pub name: String,
    pub controllers: Vec<String>,
    pub nodes: Vec<String>,
    /// Field used for Shamir dealings.
    pub field: PrimeField,
}

impl DealerConfig {
    pub fn new(controllers: Vec<String>, nodes: Vec<String>) -> Self {
        Self { name: DEALER_NAME.into(), controllers, nodes, field: PrimeField::production() }
    }

    pub fn with_field(mut self, field: PrimeField) -> Self {
        self.field = field;
        self
    }
}

/// `(from, to, request)` a share set is bound to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Binding {
    pub from: String,
    pub to: String,
    pub request: String,
}

impl Binding {
    fn of(ticket: &Ticket) -> Self {
        Self { from: ticket.from.clone(), to: ticket.to.clone(), request: ticket.request.clone() }
    }
}

#[derive(Debug, Clone)]
struct Distribution {
    scheme: Scheme,
    public: PublicParams,
    /// Index `i + 1` belongs to `participants[i]`; the main controller is first.
    participants: Vec<String>,
    secret_hex: String,
}

impl Distribution {
    fn name_of(&self, index: ParticipantIndex) -> Option<&str> {
        self.participants.get((index.0 as usize).wrapping_sub(1)).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "outcome")]
pub enum RequestState {
    AwaitingAck,
    CollectingShares,
    Resolved(Outcome),
}

#[derive(Debug, Clone)]
pub struct PendingRequest {
    pub ticket: Ticket,
    pub binding: Binding,
    pub main_controller: String,
    pub node_ack: Option<Ticket>,
    main_share: ShareBytes,
    pub collected: ShareMap,
    pub attempted: Vec<AuthorizedSubset>,
    pub state: RequestState,
    pub batch_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingView {
    pub reference: String,
    pub ticket: Ticket,
    pub main_controller: String,
    #[serde(flatten)]
    pub state: RequestState,
    pub acknowledged: bool,
    pub collected: Vec<u32>,
    pub attempted: Vec<AuthorizedSubset>,
    pub batch_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharesTableRow {
    pub from: String,
    pub to: String,
    pub request: String,
    pub participant: String,
    pub index: ParticipantIndex,
    pub scheme: SchemeConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowReport {
    pub from: String,
    pub to: String,
    pub request: String,
    pub participants: Vec<String>,
    pub delivered: usize,
    pub failures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitReport {
    pub batch_id: String,
    pub rows: Vec<RowReport>,
}

impl InitReport {
    pub fn shares_distributed(&self) -> usize {
        self.rows.iter().map(|r| r.delivered).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub records: Vec<ActionRecord>,
    pub affected: usize,
}

pub struct Dealer {
    config: DealerConfig,
    store: ActionStore,
    scheme: Option<SchemeConfig>,
    selector: Selector,
    /// Level-2 rows as loaded, still keyed by request name.
    definitions: BTreeMap<Binding, ActionRecord>,
    distributions: BTreeMap<Binding, Distribution>,
    pending: BTreeMap<String, PendingRequest>,
    /// Node acknowledgments that overtook their request.
    early_acks: BTreeMap<String, Ticket>,
    /// References decided without recovery (cascade levels 0/1 or denied).
    settled: BTreeSet<String>,
    batch_id: String,
}

impl Dealer {
    pub fn new(config: DealerConfig, store: ActionStore) -> Self {
        Self {
            config,
            store,
            scheme: None,
            selector: Selector::default(),
            definitions: BTreeMap::new(),
            distributions: BTreeMap::new(),
            pending: BTreeMap::new(),
            early_acks: BTreeMap::new(),
            settled: BTreeSet::new(),
            batch_id: "initial".into(),
        }
    }

    pub fn config(&self) -> &DealerConfig {
        &self.config
    }

    pub fn store(&self) -> &ActionStore {
        &self.store
    }

    pub fn scheme(&self) -> Option<&SchemeConfig> {
        self.scheme.as_ref()
    }

    pub fn batch_id(&self) -> &str {
        &self.batch_id
    }

    pub fn pending(&self, reference: &str) -> Option<&PendingRequest> {
        self.pending.get(reference)
    }

    pub fn pending_views(&self) -> Vec<PendingView> {
        self.pending
            .iter()
            .map(|(reference, p)| PendingView {
                reference: reference.clone(),
                ticket: p.ticket.clone(),
                main_controller: p.main_controller.clone(),
                state: p.state,
                acknowledged: p.node_ack.is_some(),
                collected: p.collected.keys().map(|i| i.0).collect(),
                attempted: p.attempted.clone(),
                batch_id: p.batch_id.clone(),
            })
            .collect()
    }

    pub fn shares_table(&self) -> Vec<SharesTableRow> {
        let mut rows = Vec::new();
        for (binding, dist) in &self.distributions {
            for (i, participant) in dist.participants.iter().enumerate() {
                rows.push(SharesTableRow {
                    from: binding.from.clone(),
                    to: binding.to.clone(),
                    request: binding.request.clone(),
                    participant: participant.clone(),
                    index: ParticipantIndex(i as u32 + 1),
                    scheme: *dist.scheme.config(),
                });
            }
        }
        rows
    }

    /// Public recovery material per binding, without shares.
    pub fn scheme_documents(&self) -> BTreeMap<String, SchemeDocument> {
        self.distributions
            .iter()
            .map(|(b, d)| {
                let key = format!("{}-{}-{}", b.from, b.to, b.request);
                (key, SchemeDocument::new(d.scheme.config(), &d.public, &ShareMap::new()))
            })
            .collect()
    }

    pub fn list_audit(&self, filter: &AuditFilter) -> Vec<AuditRecord> {
        self.store.list_audit(filter).unwrap_or_else(|err| {
            tracing::error!(%err, "audit listing failed");
            Vec::new()
        })
    }

    pub fn configure_scheme(&mut self, config: SchemeConfig) -> Result<SchemeConfig, String> {
        config.validate().map_err(|e| e.to_string())?;
        self.scheme = Some(config);
        Ok(config)
    }

    pub fn configure_participants(&mut self, strategy: SelectionStrategy) -> Result<(), String> {
        if let SelectionStrategy::Explicit { controllers } = &strategy {
            if let Some(unknown) = controllers.iter().find(|c| !self.config.controllers.contains(c)) {
                return Err(format!("unknown controller `{unknown}`"));
            }
        }
        self.selector = Selector::new(strategy);
        Ok(())
    }

    /// Parses an operator table, resolves shorthand names and upserts the
    /// rows. Nothing is applied if any row fails.
    pub fn load_actions(&mut self, table: &str) -> Result<LoadReport, String> {
        let parsed = parse_action_table(table).map_err(|e| e.to_string())?;
        let mut records = Vec::with_capacity(parsed.len());
        for (row, mut record) in parsed.into_iter().enumerate() {
            let resolve = |raw: &str, side| {
                resolve_name(raw, side, &self.config.controllers, &self.config.nodes)
                    .map_err(|e| format!("row {}: {e}", row + 1))
            };
            record.from_node = resolve(&record.from_node, Side::From)?;
            record.to_node = resolve(&record.to_node, Side::To)?;
            records.push(record);
        }
        let report = self.store.upsert_actions(&records).map_err(|e| e.to_string())?;
        for record in &records {
            if record.level == Level::SecretGated.as_u8() {
                let binding = Binding {
                    from: record.from_node.clone(),
                    to: record.to_node.clone(),
                    request: record.request_key.clone(),
                };
                self.definitions.insert(binding, record.clone());
            }
        }
        Ok(LoadReport { records, affected: report.affected })
    }

    /// Deals fresh secrets for every level-2 definition and pushes the shares.
    /// Discards all pending requests and previous shares.
    pub fn init_actions(&mut self, ctx: &mut Context<'_>) -> Result<InitReport, String> {
        let scheme_config = self.scheme.ok_or("no scheme configured")?;
        if self.config.controllers.len() < scheme_config.participants {
            return Err(format!(
                "{} participants requested but only {} controllers exist",
                scheme_config.participants,
                self.config.controllers.len()
            ));
        }

        self.batch_id = format!("{}-{:08x}", ctx.now_ms(), ctx.rng().next_u32());
        self.pending.clear();
        self.early_acks.clear();
        self.settled.clear();
        for (binding, dist) in std::mem::take(&mut self.distributions) {
            let key = RecordKey::new(&binding.from, &binding.to, Level::SecretGated, &dist.secret_hex);
            self.store.remove_action(&key).map_err(|e| e.to_string())?;
        }

        let mut report = InitReport { batch_id: self.batch_id.clone(), rows: Vec::new() };
        let definitions: Vec<(Binding, ActionRecord)> =
            self.definitions.iter().map(|(b, r)| (b.clone(), r.clone())).collect();
        for (binding, definition) in definitions {
            let mut row = RowReport {
                from: binding.from.clone(),
                to: binding.to.clone(),
                request: binding.request.clone(),
                ..RowReport::default()
            };
            if let Err(err) = self.deal_row(&binding, &definition, scheme_config, &mut row, ctx) {
                row.error = Some(err);
            }
            report.rows.push(row);
        }
        tracing::info!(batch = %self.batch_id, rows = report.rows.len(), "shares dealt");
        Ok(report)
    }

    fn deal_row(
        &mut self,
        binding: &Binding,
        definition: &ActionRecord,
        scheme_config: SchemeConfig,
        row: &mut RowReport,
        ctx: &mut Context<'_>,
    ) -> Result<(), String> {
        let raw_key = RecordKey::new(&binding.from, &binding.to, Level::SecretGated, &binding.request);
        self.store.remove_action(&raw_key).map_err(|e| e.to_string())?;

        if !self.config.controllers.contains(&binding.from) {
            return Err(format!("main participant `{}` is not a controller", binding.from));
        }
        let others = self.selector.select(&self.config.controllers, &binding.from, scheme_config.participants - 1)?;
        let scheme = Scheme::with_field(scheme_config, self.config.field.clone()).map_err(|e| e.to_string())?;
        let dealing = scheme.deal(ctx.rng()).map_err(|e| e.to_string())?;
        let secret_hex = dealing.secret.to_hex();

        let record = ActionRecord::new(&binding.from, &binding.to, Level::SecretGated, &secret_hex, &definition.action)
            .with_appended(definition.appended_actions.clone());
        self.store.upsert_actions(&[record]).map_err(|e| e.to_string())?;

        let mut participants = vec![binding.from.clone()];
        participants.extend(others.iter().cloned());
        for (i, name) in participants.iter().enumerate() {
            let index = ParticipantIndex(i as u32 + 1);
            let body = ShareDistribution {
                from: binding.from.clone(),
                to: binding.to.clone(),
                request: binding.request.clone(),
                index: Some(index),
                share: dealing.shares[&index].clone(),
                participants: if i == 0 { others.clone() } else { Vec::new() },
                share_len: Some(scheme.share_len()),
            };
            match ctx.send(name, Message::post(paths::SECRET, body)) {
                Ok(()) => row.delivered += 1,
                Err(err) => row.failures.push(format!("{name}: {err}")),
            }
        }
        row.participants = participants.clone();
        self.distributions
            .insert(binding.clone(), Distribution { scheme, public: dealing.public, participants, secret_hex });
        Ok(())
    }

    fn audit(&mut self, ctx: &Context<'_>, ticket: &Ticket, is_success: bool, context_nodes: String) {
        let entry = NewAuditRecord {
            reference_number: ticket.reference.clone(),
            request: ticket.request.clone(),
            batch_id: self.batch_id.clone(),
            is_success,
            context_nodes,
            created_at: ctx.now(),
        };
        if let Err(err) = self.store.record_audit(entry) {
            tracing::error!(%err, reference = %ticket.reference, "audit write failed");
        }
    }

    fn notify_controller(ctx: &mut Context<'_>, controller: &str, ticket: &Ticket, outcome: Outcome, detail: &str) {
        let body = ControllerResult { reference: ticket.reference.clone(), outcome, detail: detail.into() };
        ctx.notify(controller, Message::post(paths::ACTION_REQUEST_RESULT, body));
    }

    fn notify_node(
        ctx: &mut Context<'_>,
        ticket: &Ticket,
        outcome: Outcome,
        action: Option<(String, Vec<String>)>,
        detail: &str,
    ) {
        let (action, appended) = match action {
            Some((a, rest)) => (Some(a), rest),
            None => (None, Vec::new()),
        };
        let body = NodeResult { ticket: ticket.clone(), outcome, action, appended, detail: detail.into() };
        ctx.notify(&ticket.to, Message::post(paths::ACTION_REQUEST_RESULT, body));
    }

    pub fn accept_action_request(&mut self, request: ActionRequest, ctx: &mut Context<'_>) -> Reply {
        let ticket = request.ticket;
        let reference = ticket.reference.clone();
        if self.pending.contains_key(&reference) || self.settled.contains(&reference) {
            return Reply::ignored("duplicate request").with_reference(reference);
        }
        let binding = Binding::of(&ticket);

        let Some(dist) = self.distributions.get(&binding) else {
            return self.decide_by_cascade(ticket, ctx);
        };
        if dist.participants[0] != ticket.from {
            return Reply::rejected("only the main participant can raise this request").with_reference(reference);
        }
        if request.participant_index.is_some_and(|i| i != MAIN_INDEX) {
            return Reply::rejected("main share must carry index 1").with_reference(reference);
        }
        let Some(main_share) = request.share else {
            return Reply::rejected("secret-gated request needs the main share").with_reference(reference);
        };

        tracing::info!(%reference, "request awaiting node acknowledgment");
        self.pending.insert(
            reference.clone(),
            PendingRequest {
                main_controller: ticket.from.clone(),
                ticket,
                binding,
                node_ack: None,
                main_share,
                collected: ShareMap::new(),
                attempted: Vec::new(),
                state: RequestState::AwaitingAck,
                batch_id: self.batch_id.clone(),
            },
        );
        if let Some(ack) = self.early_acks.remove(&reference) {
            self.accept_node_ack(ack, ctx);
        }
        Reply::ok().with_reference(reference)
    }

    /// Requests with no dealt shares: level-0/1 approve at once, anything
    /// else is denied and audited.
    fn decide_by_cascade(&mut self, ticket: Ticket, ctx: &mut Context<'_>) -> Reply {
        let reference = ticket.reference.clone();
        let outcome = match self.store.authorize_request(&ticket.from, &ticket.to, &ticket.request) {
            Ok(outcome) => outcome,
            Err(err) => return Reply::error(err.to_string()).with_reference(reference),
        };
        self.settled.insert(reference.clone());
        match (outcome.verdict, outcome.action) {
            (Verdict::AllowedLevel0 | Verdict::AllowedLevel1, Some(action)) => {
                let detail = match outcome.verdict {
                    Verdict::AllowedLevel0 => "approved at level 0",
                    _ => "approved at level 1",
                };
                Self::notify_node(ctx, &ticket, Outcome::Success, Some((action, outcome.appended)), detail);
                Self::notify_controller(ctx, &ticket.from, &ticket, Outcome::Success, detail);
                Reply::ok().with_reference(reference).with_message(detail)
            }
            (verdict, _) => {
                let context = format!("denied verdict={verdict:?} from={} to={}", ticket.from, ticket.to);
                self.audit(ctx, &ticket, false, context);
                Self::notify_node(ctx, &ticket, Outcome::Failure, None, "denied");
                Self::notify_controller(ctx, &ticket.from, &ticket, Outcome::Failure, "denied");
                Reply::rejected("denied").with_reference(reference)
            }
        }
    }

    pub fn accept_node_ack(&mut self, ack: Ticket, ctx: &mut Context<'_>) -> Reply {
        let reference = ack.reference.clone();
        let Some(pending) = self.pending.get_mut(&reference) else {
            if self.settled.contains(&reference) {
                return Reply::ignored("request already decided").with_reference(reference);
            }
            tracing::warn!(%reference, "acknowledgment without a pending request; holding it");
            self.early_acks.insert(reference.clone(), ack);
            return Reply::ignored("no pending request").with_reference(reference);
        };
        if pending.state != RequestState::AwaitingAck {
            return Reply::ignored("already acknowledged").with_reference(reference);
        }

        if let Err(err) = pending.ticket.check_consistent(&ack) {
            pending.state = RequestState::Resolved(Outcome::Failure);
            let ticket = pending.ticket.clone();
            let main = pending.main_controller.clone();
            tracing::warn!(%reference, %err, "node ticket inconsistent");
            self.audit(ctx, &ticket, false, format!("reject=ticket-mismatch {err}"));
            Self::notify_controller(ctx, &main, &ticket, Outcome::Failure, "ticket mismatch");
            Self::notify_node(ctx, &ticket, Outcome::Failure, None, "ticket mismatch");
            return Reply::rejected(err.to_string()).with_reference(reference);
        }

        pending.node_ack = Some(ack);
        pending.state = RequestState::CollectingShares;
        let originating = pending.ticket.clone();
        let dealer_ticket = originating.restamped(ctx.now_ms());
        let participants = self.distributions[&pending.binding].participants.clone();
        for name in &participants[1..] {
            let body = Solicitation { dealer_ticket: dealer_ticket.clone(), originating_ticket: originating.clone() };
            ctx.notify(name, Message::post(paths::ASK_FOR_SHARED_SECRET, body));
        }
        self.try_resolve(&reference, ctx);
        Reply::ok().with_reference(reference)
    }

    pub fn accept_share(&mut self, response: ShareResponse, ctx: &mut Context<'_>) -> Reply {
        let reference = response.ticket.reference.clone();
        let Some(pending) = self.pending.get_mut(&reference) else {
            tracing::warn!(%reference, "share for unknown request");
            return Reply::ignored("unknown reference").with_reference(reference);
        };
        if pending.state != RequestState::CollectingShares {
            return Reply::ignored("request is not collecting shares").with_reference(reference);
        }
        if let Err(err) = pending.ticket.check_consistent(&response.ticket) {
            tracing::warn!(%reference, %err, "share ticket inconsistent");
            return Reply::rejected(err.to_string()).with_reference(reference);
        }
        let dist = &self.distributions[&pending.binding];
        let index = response.participant_index;
        if index == MAIN_INDEX || dist.name_of(index) != Some(response.controller.as_str()) {
            return Reply::rejected(format!("{} is not participant {index}", response.controller))
                .with_reference(reference);
        }
        if pending.collected.insert(index, response.share).is_some() {
            tracing::warn!(%reference, %index, "duplicate share replaced");
        }
        self.try_resolve(&reference, ctx);
        Reply::ok().with_reference(reference)
    }

    fn try_resolve(&mut self, reference: &str, ctx: &mut Context<'_>) {
        let Some(pending) = self.pending.get(reference) else { return };
        if pending.state != RequestState::CollectingShares {
            return;
        }
        let dist = self.distributions[&pending.binding].clone();
        let config = *dist.scheme.config();
        let mut available = pending.collected.clone();
        available.insert(MAIN_INDEX, pending.main_share.clone());
        if available.len() < config.threshold {
            return;
        }

        let candidates: Vec<AuthorizedSubset> =
            enumerate_minimal_authorized_subsets(config.participants, config.threshold)
                .expect("validated scheme")
                .into_iter()
                .filter(|s| s.contains(MAIN_INDEX))
                .collect();
        let ticket = pending.ticket.clone();
        let binding = pending.binding.clone();

        for subset in &candidates {
            let tried = self.pending[reference].attempted.contains(subset);
            if tried || !subset.members().iter().all(|i| available.contains_key(i)) {
                continue;
            }
            self.pending.get_mut(reference).expect("pending").attempted.push(subset.clone());

            let shares: ShareMap = subset.members().iter().map(|i| (*i, available[i].clone())).collect();
            let names: Vec<&str> = subset.members().iter().filter_map(|i| dist.name_of(*i)).collect();
            let context = format!("subset={subset} nodes={}", names.join(","));
            let found = match dist.scheme.recover(&dist.public, &shares) {
                Ok(secret) => {
                    self.store.lookup_by_secret(&binding.from, &binding.to, &secret.to_hex()).map_err(|e| e.to_string())
                }
                Err(err) => Err(err.to_string()),
            };
            match found {
                Ok(Some(action)) => {
                    tracing::info!(%reference, %subset, "secret recovered");
                    self.audit(ctx, &ticket, true, context);
                    Self::notify_node(ctx, &ticket, Outcome::Success, Some(action), "approved");
                    for name in &dist.participants {
                        Self::notify_controller(ctx, name, &ticket, Outcome::Success, "approved");
                    }
                    self.pending.get_mut(reference).expect("pending").state = RequestState::Resolved(Outcome::Success);
                    return;
                }
                Ok(None) => {
                    tracing::warn!(%reference, %subset, "recovered secret matches no action");
                    self.audit(ctx, &ticket, false, context);
                }
                Err(err) => {
                    tracing::warn!(%reference, %subset, %err, "recovery failed");
                    self.audit(ctx, &ticket, false, format!("{context} error={err}"));
                }
            }
        }

        let attempted = &self.pending[reference].attempted;
        if attempted.len() < candidates.len() {
            // subsets still waiting on a share
            return;
        }
        let tried: Vec<String> = attempted.iter().map(ToString::to_string).collect();
        self.audit(ctx, &ticket, false, format!("reject=invalid-key attempted={}", tried.join(";")));
        Self::notify_node(ctx, &ticket, Outcome::Failure, None, "invalid key");
        for name in &dist.participants {
            Self::notify_controller(ctx, name, &ticket, Outcome::Failure, "invalid key");
        }
        self.pending.get_mut(reference).expect("pending").state = RequestState::Resolved(Outcome::Failure);
    }

    pub fn state(&self) -> serde_json::Value {
        json!({
            "name": self.config.name,
            "scheme": self.scheme,
            "strategy": self.selector.strategy,
            "batch_id": self.batch_id,
            "controllers": self.config.controllers,
            "nodes": self.config.nodes,
            "actions": self.store.actions().unwrap_or_default(),
            "shares_table": self.shares_table(),
            "pending": self.pending_views(),
            "documents": self.scheme_documents(),
        })
    }
}

fn parse_or<T: serde::de::DeserializeOwned>(message: &Message, f: impl FnOnce(T) -> Reply) -> Reply {
    match message.parse::<T>() {
        Ok(body) => f(body),
        Err(reply) => reply,
    }
}

impl Service for Dealer {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn handle(&mut self, message: &Message, ctx: &mut Context<'_>) -> Reply {
        if message.is_get() {
            return match message.route() {
                paths::STATE => Reply::ok_with(self.state()),
                paths::AUDIT => {
                    let filter =
                        AuditFilter { reference_number: message.query("reference"), batch_id: message.query("batch") };
                    Reply::ok_with(self.list_audit(&filter))
                }
                _ => Reply::not_found(&message.path),
            };
        }
        match message.route() {
            paths::COMMAND_SCHEME_CONFIG => {
                parse_or(message, |config: SchemeConfig| match self.configure_scheme(config) {
                    Ok(config) => Reply::ok_with(config),
                    Err(err) => Reply::rejected(err),
                })
            }
            paths::COMMAND_PARTICIPANT_CONFIG => {
                parse_or(message, |strategy: SelectionStrategy| match self.configure_participants(strategy) {
                    Ok(()) => Reply::ok(),
                    Err(err) => Reply::rejected(err),
                })
            }
            paths::COMMAND_ACTION => {
                let table = match &message.body {
                    serde_json::Value::String(text) => Ok(text.clone()),
                    _ => message.parse::<ActionTable>().map(|t| t.table),
                };
                match table {
                    Ok(text) => match self.load_actions(&text) {
                        Ok(report) => Reply::ok_with(report),
                        Err(err) => Reply::rejected(err),
                    },
                    Err(reply) => reply,
                }
            }
            paths::COMMAND_INIT_ACTION => match self.init_actions(ctx) {
                Ok(report) => Reply::ok_with(report),
                Err(err) => Reply::rejected(err),
            },
            paths::ACTION_REQUEST => parse_or(message, |body: ActionRequest| self.accept_action_request(body, ctx)),
            paths::FORWARD_ACTION_REQUEST => {
                parse_or(message, |body: TicketBody| self.accept_node_ack(body.ticket, ctx))
            }
            paths::ACCEPT_SHARES => parse_or(message, |body: ShareResponse| self.accept_share(body, ctx)),
            _ => Reply::not_found(&message.path),
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[cfg(test)]
mod tests;
