//! Nodes receive tickets from controllers, acknowledge them to the dealer,
//! and run an approved action once both sides agree on the ticket.

use std::any::Any;
use std::collections::BTreeMap;
use std::process::Command;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dealer::DEALER_NAME;
use crate::protocol::{paths, NodeResult, Outcome, TicketBody};
use crate::service::{Context, Event, Message, Reply, Service};
use crate::ticket::Ticket;

/// How long a result may wait for its controller ticket.
pub const PENDING_RESULT_TIMEOUT_MS: i64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    Succeeded,
    Failed,
    Refused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Execution {
    pub command: String,
    pub status: ExecutionStatus,
    pub output: String,
}

pub trait Executor: Send {
    fn execute(&mut self, command: &str) -> Execution;
}

/// Records commands without running anything.
#[derive(Debug, Clone, Default)]
pub struct RecordingExecutor {
    pub commands: Vec<String>,
}

impl Executor for RecordingExecutor {
    fn execute(&mut self, command: &str) -> Execution {
        self.commands.push(command.to_string());
        Execution { command: command.into(), status: ExecutionStatus::Succeeded, output: String::new() }
    }
}

/// Runs allow-listed programs directly, never through a shell.
#[derive(Debug, Clone)]
pub struct ShellExecutor {
    allowed: Vec<String>,
}

impl ShellExecutor {
    pub const DEFAULT_ALLOWED: [&'static str; 8] =
        ["ls", "pwd", "date", "whoami", "hostname", "uptime", "uname", "echo"];

    pub fn new(allowed: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { allowed: allowed.into_iter().map(Into::into).collect() }
    }
}

impl Default for ShellExecutor {
    fn default() -> Self {
        Self::new(Self::DEFAULT_ALLOWED)
    }
}

impl Executor for ShellExecutor {
    fn execute(&mut self, command: &str) -> Execution {
        let mut words = command.split_whitespace();
        let program = words.next().unwrap_or_default();
        if !self.allowed.iter().any(|a| a == program) {
            return Execution {
                command: command.into(),
                status: ExecutionStatus::Refused,
                output: format!("`{program}` is not allow-listed"),
            };
        }
        match Command::new(program).args(words).output() {
            Ok(out) => Execution {
                command: command.into(),
                status: if out.status.success() { ExecutionStatus::Succeeded } else { ExecutionStatus::Failed },
                output: String::from_utf8_lossy(if out.status.success() { &out.stdout } else { &out.stderr })
                    .trim_end()
                    .to_string(),
            },
            Err(err) => Execution { command: command.into(), status: ExecutionStatus::Failed, output: err.to_string() },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRequestEntry {
    pub controller_ticket: Option<Ticket>,
    pub dealer_result: Option<NodeResult>,
    pub events: Vec<Event>,
    pub executions: Vec<Execution>,
    /// When a result started waiting for its ticket.
    #[serde(default)]
    pub held_since: Option<i64>,
    #[serde(default)]
    pub stale: bool,
}

impl NodeRequestEntry {
    pub fn executed(&self) -> bool {
        !self.executions.is_empty()
    }
}

pub struct Node {
    name: String,
    dealer: String,
    entries: BTreeMap<String, NodeRequestEntry>,
    executor: Box<dyn Executor>,
}

impl Node {
    pub fn new(name: impl Into<String>, executor: impl Executor + 'static) -> Self {
        Self { name: name.into(), dealer: DEALER_NAME.into(), entries: BTreeMap::new(), executor: Box::new(executor) }
    }

    pub fn recording(name: impl Into<String>) -> Self {
        Self::new(name, RecordingExecutor::default())
    }

    pub fn with_dealer(mut self, dealer: impl Into<String>) -> Self {
        self.dealer = dealer.into();
        self
    }

    pub fn entry(&self, reference: &str) -> Option<&NodeRequestEntry> {
        self.entries.get(reference)
    }

    pub fn entries(&self) -> &BTreeMap<String, NodeRequestEntry> {
        &self.entries
    }

    /// Every command run, in order, across all requests.
    pub fn executed_commands(&self) -> Vec<&str> {
        self.entries.values().flat_map(|e| e.executions.iter().map(|x| x.command.as_str())).collect()
    }

    fn log(&mut self, reference: &str, at: i64, message: String) {
        tracing::debug!(service = %self.name, %reference, "{message}");
        self.entries.entry(reference.to_string()).or_default().events.push(Event { at, message });
    }

    fn expire_held(&mut self, now: i64) {
        let expired: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.stale && e.held_since.is_some_and(|t| now - t > PENDING_RESULT_TIMEOUT_MS))
            .map(|(r, _)| r.clone())
            .collect();
        for reference in expired {
            let entry = self.entries.get_mut(&reference).expect("present");
            entry.stale = true;
            entry.held_since = None;
            self.log(&reference, now, "held result went stale without a controller ticket".into());
        }
    }

    pub fn receive_request(&mut self, ticket: Ticket, ctx: &mut Context<'_>) -> Reply {
        let now = ctx.now_ms();
        let reference = ticket.reference.clone();
        if self.entries.get(&reference).is_some_and(|e| e.controller_ticket.is_some()) {
            return Reply::ignored("ticket already received").with_reference(reference);
        }
        self.log(&reference, now, format!("ticket from {} for {}", ticket.from, ticket.request));
        let ack = TicketBody { ticket: ticket.restamped(now) };
        match ctx.send(&self.dealer, Message::post(paths::FORWARD_ACTION_REQUEST, ack)) {
            Ok(()) => self.log(&reference, now, "acknowledged to dealer".into()),
            Err(err) => self.log(&reference, now, format!("acknowledgment failed: {err}")),
        }
        let entry = self.entries.get_mut(&reference).expect("logged");
        entry.controller_ticket = Some(ticket);
        if entry.held_since.take().is_some() && !entry.stale {
            self.try_execute(&reference, now);
        }
        Reply::ok().with_reference(reference)
    }

    pub fn receive_result(&mut self, result: NodeResult, ctx: &mut Context<'_>) -> Reply {
        let now = ctx.now_ms();
        let reference = result.ticket.reference.clone();
        if self.entries.get(&reference).is_some_and(|e| e.dealer_result.is_some()) {
            return Reply::ignored("result already received").with_reference(reference);
        }
        let outcome = result.outcome;
        let detail = result.detail.clone();
        self.log(&reference, now, format!("dealer result {outcome:?} ({detail})").to_lowercase());
        let entry = self.entries.get_mut(&reference).expect("logged");
        entry.dealer_result = Some(result);
        if outcome == Outcome::Failure {
            return Reply::ok().with_reference(reference);
        }
        if entry.controller_ticket.is_none() {
            entry.held_since = Some(now);
            self.log(&reference, now, "holding result until the controller ticket arrives".into());
            return Reply::ok().with_reference(reference);
        }
        self.try_execute(&reference, now);
        Reply::ok().with_reference(reference)
    }

    /// Runs the action and its appended actions if the controller ticket and
    /// a successful dealer result agree. At most once per reference.
    fn try_execute(&mut self, reference: &str, now: i64) {
        let entry = &self.entries[reference];
        let (Some(ticket), Some(result)) = (&entry.controller_ticket, &entry.dealer_result) else { return };
        if entry.executed() || result.outcome != Outcome::Success {
            return;
        }
        if let Err(err) = ticket.check_consistent(&result.ticket) {
            self.log(reference, now, format!("tickets do not match: {err}"));
            return;
        }
        let commands: Vec<String> = result.action.iter().chain(&result.appended).cloned().collect();
        let mut runs = Vec::with_capacity(commands.len());
        for command in &commands {
            runs.push(self.executor.execute(command));
        }
        for run in &runs {
            let line = format!("executed `{}`: {:?}", run.command, run.status).to_lowercase();
            self.log(reference, now, line);
        }
        self.entries.get_mut(reference).expect("present").executions = runs;
    }

    pub fn state(&self) -> serde_json::Value {
        json!({
            "name": self.name,
            "entries": self.entries,
            "executions": self.executed_commands(),
        })
    }
}

impl Service for Node {
    fn name(&self) -> &str {
        &self.name
    }

    fn handle(&mut self, message: &Message, ctx: &mut Context<'_>) -> Reply {
        self.expire_held(ctx.now_ms());
        if message.is_get() {
            return match message.route() {
                paths::STATE => Reply::ok_with(self.state()),
                _ => Reply::not_found(&message.path),
            };
        }
        let result = match message.route() {
            paths::ACTION_REQUEST => message.parse::<TicketBody>().map(|b| self.receive_request(b.ticket, ctx)),
            paths::ACTION_REQUEST_RESULT => message.parse().map(|b| self.receive_result(b, ctx)),
            paths::RESET => {
                self.entries.clear();
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
