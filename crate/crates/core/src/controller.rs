//! Controllers hold shares bound to requests. The main participant of a
//! request raises it; the others answer the dealer's solicitations.

use std::any::Any;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dealer::DEALER_NAME;
use crate::protocol::{
    paths, ActionRequest, AutoRespond, ControllerResult, Outcome, RaiseRequest, RespondShare, ShareDistribution,
    ShareResponse, Solicitation, TicketBody,
};
use crate::service::{Context, Event, Message, Reply, Service};
use crate::sss::{ParticipantIndex, ShareBytes};
use crate::ticket::Ticket;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerRow {
    pub from: String,
    pub to: String,
    pub request: String,
    /// Other participants; nonempty exactly when this controller is main.
    pub participants: Vec<String>,
    pub share: ShareBytes,
    pub index: ParticipantIndex,
}

impl ControllerRow {
    pub fn is_main(&self) -> bool {
        !self.participants.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolicitationRecord {
    pub dealer_ticket: Ticket,
    pub originating_ticket: Ticket,
    pub responded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Raised,
    Solicited,
    Responded,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusEntry {
    pub request: String,
    pub status: RequestStatus,
    #[serde(default)]
    pub detail: String,
}

type RowKey = (String, String, String);

pub struct Controller {
    name: String,
    dealer: String,
    rows: BTreeMap<RowKey, ControllerRow>,
    solicitations: BTreeMap<String, SolicitationRecord>,
    statuses: BTreeMap<String, StatusEntry>,
    orphans: Vec<ControllerResult>,
    auto_respond: bool,
    events: Vec<Event>,
}

impl Controller {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            dealer: DEALER_NAME.into(),
            rows: BTreeMap::new(),
            solicitations: BTreeMap::new(),
            statuses: BTreeMap::new(),
            orphans: Vec::new(),
            auto_respond: false,
            events: Vec::new(),
        }
    }

    pub fn with_auto_respond(mut self, enabled: bool) -> Self {
        self.auto_respond = enabled;
        self
    }

    pub fn with_dealer(mut self, dealer: impl Into<String>) -> Self {
        self.dealer = dealer.into();
        self
    }

    pub fn set_auto_respond(&mut self, enabled: bool) {
        self.auto_respond = enabled;
    }

    pub fn rows(&self) -> impl Iterator<Item = &ControllerRow> {
        self.rows.values()
    }

    pub fn row(&self, from: &str, to: &str, request: &str) -> Option<&ControllerRow> {
        self.rows.get(&(from.to_string(), to.to_string(), request.to_string()))
    }

    pub fn solicitation(&self, reference: &str) -> Option<&SolicitationRecord> {
        self.solicitations.get(reference)
    }

    pub fn status(&self, reference: &str) -> Option<&StatusEntry> {
        self.statuses.get(reference)
    }

    pub fn statuses(&self) -> &BTreeMap<String, StatusEntry> {
        &self.statuses
    }

    pub fn orphans(&self) -> &[ControllerResult] {
        &self.orphans
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn log(&mut self, ctx: &Context<'_>, message: String) {
        tracing::debug!(service = %self.name, "{message}");
        self.events.push(Event { at: ctx.now_ms(), message });
    }

    /// Stores or overwrites a share. Overwriting is also how an operator
    /// simulates a compromised controller.
    pub fn receive_share(&mut self, body: ShareDistribution, ctx: &mut Context<'_>) -> Reply {
        let key = (body.from.clone(), body.to.clone(), body.request.clone());
        let existing = self.rows.get(&key);
        let expected = body.share_len.or_else(|| existing.map(|r| r.share.len()));
        if let Some(expected) = expected {
            if body.share.len() != expected {
                return Reply::rejected(format!("share is {} bytes, expected {expected}", body.share.len()));
            }
        }
        let row = match (existing, body.index) {
            (_, Some(index)) => ControllerRow {
                from: body.from,
                to: body.to,
                request: body.request,
                participants: body.participants,
                share: body.share,
                index,
            },
            (Some(row), None) => ControllerRow { share: body.share, ..row.clone() },
            (None, None) => return Reply::rejected("new shares need a participant index"),
        };
        let verb = if existing.is_some() { "overwrote" } else { "stored" };
        if existing.is_some() {
            tracing::warn!(service = %self.name, request = %row.request, "share overwritten");
        }
        self.log(ctx, format!("{verb} share {} for {}-{}-{}", row.index, row.from, row.to, row.request));
        self.rows.insert(key, row);
        Reply::ok()
    }

    pub fn raise_request(&mut self, body: RaiseRequest, ctx: &mut Context<'_>) -> Reply {
        let row = self
            .rows
            .values()
            .filter(|r| r.request == body.request && body.to.as_ref().is_none_or(|to| &r.to == to))
            .max_by_key(|r| r.is_main())
            .cloned();
        let to = match (&row, &body.to) {
            (Some(row), _) if !row.is_main() => {
                return Reply::rejected("only the main participant can raise this request");
            }
            (Some(row), _) => row.to.clone(),
            (None, Some(to)) => to.clone(),
            (None, None) => return Reply::rejected(format!("unknown request `{}`", body.request)),
        };

        let now = ctx.now_ms();
        let ticket = Ticket::raise(now, &self.name, &to, &body.request, ctx.rng());
        let request = ActionRequest {
            ticket: ticket.clone(),
            share: row.as_ref().map(|r| r.share.clone()),
            participant_index: row.as_ref().map(|r| r.index),
        };
        if let Err(err) = ctx.send(&self.dealer, Message::post(paths::ACTION_REQUEST, request)) {
            return Reply::error(format!("dealer unreachable: {err}"));
        }
        if let Err(err) = ctx.send(&to, Message::post(paths::ACTION_REQUEST, TicketBody { ticket: ticket.clone() })) {
            self.log(ctx, format!("could not reach {to}: {err}"));
        }
        self.statuses.insert(
            ticket.reference.clone(),
            StatusEntry { request: body.request.clone(), status: RequestStatus::Raised, detail: String::new() },
        );
        self.log(ctx, format!("raised {} as {}", body.request, ticket.reference));
        Reply::ok().with_reference(ticket.reference)
    }

    pub fn receive_solicitation(&mut self, body: Solicitation, ctx: &mut Context<'_>) -> Reply {
        let reference = body.originating_ticket.reference.clone();
        if let Err(err) = body.originating_ticket.check_consistent(&body.dealer_ticket) {
            tracing::warn!(service = %self.name, %reference, %err, "solicitation tickets inconsistent");
            self.log(ctx, format!("refused solicitation {reference}: {err}"));
            return Reply::rejected(err.to_string()).with_reference(reference);
        }
        let t = &body.originating_ticket;
        if self.row(&t.from, &t.to, &t.request).is_none() {
            tracing::warn!(service = %self.name, %reference, "solicited for a request without a share");
            return Reply::ignored("no share held for this request").with_reference(reference);
        }
        if self.solicitations.contains_key(&reference) {
            return Reply::ignored("already solicited").with_reference(reference);
        }
        self.statuses.insert(
            reference.clone(),
            StatusEntry { request: t.request.clone(), status: RequestStatus::Solicited, detail: String::new() },
        );
        self.solicitations.insert(
            reference.clone(),
            SolicitationRecord {
                dealer_ticket: body.dealer_ticket,
                originating_ticket: body.originating_ticket,
                responded: false,
            },
        );
        self.log(ctx, format!("solicited for {reference}"));
        if self.auto_respond {
            return self.respond_share(&reference, ctx);
        }
        Reply::ok().with_reference(reference)
    }

    pub fn respond_share(&mut self, reference: &str, ctx: &mut Context<'_>) -> Reply {
        let Some(record) = self.solicitations.get(reference) else {
            return Reply::rejected("no solicitation with this reference").with_reference(reference);
        };
        if record.responded {
            return Reply::ignored("already responded").with_reference(reference);
        }
        let t = &record.originating_ticket;
        let row = self.row(&t.from, &t.to, &t.request).expect("row checked at solicitation").clone();
        let body = ShareResponse {
            ticket: record.dealer_ticket.clone(),
            participant_index: row.index,
            share: row.share,
            controller: self.name.clone(),
        };
        if let Err(err) = ctx.send(&self.dealer, Message::post(paths::ACCEPT_SHARES, body)) {
            return Reply::error(format!("dealer unreachable: {err}")).with_reference(reference);
        }
        self.solicitations.get_mut(reference).expect("present").responded = true;
        if let Some(status) = self.statuses.get_mut(reference) {
            if status.status == RequestStatus::Solicited {
                status.status = RequestStatus::Responded;
            }
        }
        self.log(ctx, format!("sent share {} for {reference}", row.index));
        Reply::ok().with_reference(reference)
    }

    pub fn receive_result(&mut self, body: ControllerResult, ctx: &mut Context<'_>) -> Reply {
        let reference = body.reference.clone();
        let Some(status) = self.statuses.get_mut(&reference) else {
            self.log(ctx, format!("result for unknown reference {reference}"));
            self.orphans.push(body);
            return Reply::ok().with_reference(reference);
        };
        status.status = match body.outcome {
            Outcome::Success => RequestStatus::Approved,
            Outcome::Failure => RequestStatus::Rejected,
        };
        status.detail = body.detail.clone();
        self.log(ctx, format!("{reference}: {:?} ({})", body.outcome, body.detail).to_lowercase());
        Reply::ok().with_reference(reference)
    }

    pub fn reset(&mut self) {
        self.rows.clear();
        self.solicitations.clear();
        self.statuses.clear();
        self.orphans.clear();
        self.events.clear();
    }

    pub fn state(&self) -> serde_json::Value {
        let solicitations: Vec<_> = self
            .solicitations
            .iter()
            .map(|(reference, s)| {
                let approved = self.statuses.get(reference).is_some_and(|st| st.status == RequestStatus::Approved);
                json!({
                    "reference": reference,
                    "request": s.originating_ticket.request,
                    "responded": s.responded,
                    "respondable": !s.responded && !approved,
                })
            })
            .collect();
        json!({
            "name": self.name,
            "auto_respond": self.auto_respond,
            "shares": self.rows.values().collect::<Vec<_>>(),
            "solicitations": solicitations,
            "statuses": self.statuses,
            "orphans": self.orphans,
            "events": self.events,
        })
    }
}

impl Service for Controller {
    fn name(&self) -> &str {
        &self.name
    }

    fn handle(&mut self, message: &Message, ctx: &mut Context<'_>) -> Reply {
        if message.is_get() {
            return match message.route() {
                paths::STATE => Reply::ok_with(self.state()),
                _ => Reply::not_found(&message.path),
            };
        }
        let result = match message.route() {
            paths::SECRET => message.parse().map(|b| self.receive_share(b, ctx)),
            paths::COMMAND_ACTION_REQUEST => message.parse().map(|b| self.raise_request(b, ctx)),
            paths::ASK_FOR_SHARED_SECRET => message.parse().map(|b| self.receive_solicitation(b, ctx)),
            paths::COMMAND_RESPOND_SHARE => {
                message.parse::<RespondShare>().map(|b| self.respond_share(&b.reference, ctx))
            }
            paths::ACTION_REQUEST_RESULT => message.parse().map(|b| self.receive_result(b, ctx)),
            paths::COMMAND_AUTO_RESPOND => message.parse::<AutoRespond>().map(|b| {
                self.auto_respond = b.enabled;
                Reply::ok()
            }),
            paths::RESET => {
                self.reset();
                Ok(Reply::ok())
            }
            _ => Ok(Reply::not_found(&message.path)),
        };
        result.unwrap_or_else(|reply| reply)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
