use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::topology::{Topology, TraceEvent, TraceKind, DEFAULT_STEP_BUDGET};
use crate::controller::RequestStatus;
use crate::dealer::SelectionStrategy;
use crate::protocol::{paths, AutoRespond, Outcome, RaiseRequest, RespondShare, ShareDistribution};
use crate::service::Message;
use crate::sss::{SchemeConfig, ShareBytes};
use crate::store::{parse_action_table, AuditFilter};

fn default_weight() -> u32 {
    1
}

fn default_timeout() -> i64 {
    30_000
}

/// One audit row as a script expects it, in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditExpectation {
    pub success: bool,
    /// Subset as printed in the audit context, e.g. `[1,3]`.
    #[serde(default)]
    pub subset: Option<String>,
    /// The terminal row written once every subset failed.
    #[serde(default)]
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    ConfigureScheme {
        #[serde(flatten)]
        config: SchemeConfig,
    },
    ConfigureParticipants {
        #[serde(flatten)]
        strategy: SelectionStrategy,
    },
    LoadActions {
        table: String,
    },
    InitActions,
    RouteEdit {
        a: String,
        b: String,
        #[serde(default = "default_weight")]
        weight: u32,
        #[serde(default)]
        disabled: bool,
    },
    ResetRoutes,
    SetAutoRespond {
        /// Every controller when absent.
        #[serde(default)]
        controller: Option<String>,
        enabled: bool,
    },
    /// Overwrites a held share with random bytes of the same length.
    CorruptShare {
        controller: String,
        request: String,
        #[serde(default)]
        to: Option<String>,
    },
    RaiseRequest {
        controller: String,
        request: String,
        #[serde(default)]
        to: Option<String>,
        /// Name later steps use for this request; defaults to `request`.
        #[serde(default)]
        label: Option<String>,
    },
    RespondShare {
        controller: String,
        label: String,
    },
    AwaitResolution {
        label: String,
        expect: Outcome,
        #[serde(default = "default_timeout")]
        timeout_ms: i64,
    },
    AssertStatus {
        controller: String,
        label: String,
        status: RequestStatus,
    },
    AssertAudit {
        label: String,
        expect: Vec<AuditExpectation>,
    },
    AssertForwardLog {
        label: String,
        /// Total relayed entries carrying the reference.
        entries: usize,
        /// Distinct relaying services.
        #[serde(default)]
        services: Option<usize>,
        #[serde(default)]
        via: Option<String>,
    },
    AssertNodeExecution {
        node: String,
        /// Whole node history when absent.
        #[serde(default)]
        label: Option<String>,
        commands: Vec<String>,
    },
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::ConfigureScheme { .. } => "configure_scheme",
            Step::ConfigureParticipants { .. } => "configure_participants",
            Step::LoadActions { .. } => "load_actions",
            Step::InitActions => "init_actions",
            Step::RouteEdit { .. } => "route_edit",
            Step::ResetRoutes => "reset_routes",
            Step::SetAutoRespond { .. } => "set_auto_respond",
            Step::CorruptShare { .. } => "corrupt_share",
            Step::RaiseRequest { .. } => "raise_request",
            Step::RespondShare { .. } => "respond_share",
            Step::AwaitResolution { .. } => "await_resolution",
            Step::AssertStatus { .. } => "assert_status",
            Step::AssertAudit { .. } => "assert_audit",
            Step::AssertForwardLog { .. } => "assert_forward_log",
            Step::AssertNodeExecution { .. } => "assert_node_execution",
        }
    }

    /// Short argument summary for transcripts.
    fn detail(&self) -> String {
        match self {
            Step::ConfigureScheme { config } => {
                format!("{} ({},{})", config.kind, config.threshold, config.participants)
            }
            Step::ConfigureParticipants { strategy } => match strategy {
                SelectionStrategy::FirstN => "first_n".into(),
                SelectionStrategy::RoundRobin => "round_robin".into(),
                SelectionStrategy::Explicit { controllers } => format!("explicit {}", controllers.join(",")),
            },
            Step::LoadActions { table } => match parse_action_table(table) {
                Ok(rows) => format!("{} rows", rows.len()),
                Err(_) => "malformed".into(),
            },
            Step::InitActions | Step::ResetRoutes => String::new(),
            Step::RouteEdit { a, b, weight, disabled } => {
                format!("{a}<->{b} weight={weight}{}", if *disabled { " disabled" } else { "" })
            }
            Step::SetAutoRespond { controller, enabled } => {
                format!("{}={enabled}", controller.as_deref().unwrap_or("all"))
            }
            Step::CorruptShare { controller, request, .. } => format!("{controller} {request}"),
            Step::RaiseRequest { controller, request, to, label } => format!(
                "{controller} {request}{}{}",
                to.as_ref().map(|t| format!(" to {t}")).unwrap_or_default(),
                label.as_ref().map(|l| format!(" as {l}")).unwrap_or_default()
            ),
            Step::RespondShare { controller, label } => format!("{controller} {label}"),
            Step::AwaitResolution { label, expect, .. } => format!("{label} expect {expect:?}").to_lowercase(),
            Step::AssertStatus { controller, label, status } => {
                format!("{controller} {label} {status:?}").to_lowercase()
            }
            Step::AssertAudit { label, expect } => format!("{label} {} rows", expect.len()),
            Step::AssertForwardLog { label, entries, .. } => format!("{label} entries={entries}"),
            Step::AssertNodeExecution { node, commands, .. } => format!("{node} [{}]", commands.join(",")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "snake_case")]
pub enum StepOutcome {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub step: String,
    pub detail: String,
    pub outcome: StepOutcome,
    pub events: Vec<TraceEvent>,
}

/// What happened, step by step. Stops at the first failing step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
    /// Label to ticket reference.
    pub labels: BTreeMap<String, String>,
    pub start_ms: i64,
}

impl Transcript {
    pub fn passed(&self) -> bool {
        self.steps.iter().all(|s| s.outcome == StepOutcome::Ok)
    }

    pub fn failing_step(&self) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.outcome != StepOutcome::Ok)
    }

    fn reference_name<'a>(&'a self, reference: &'a str, normalize: bool) -> &'a str {
        if !normalize {
            return reference;
        }
        self.labels.iter().find(|(_, r)| r.as_str() == reference).map(|(l, _)| l.as_str()).unwrap_or("<unlabelled>")
    }

    fn event_line(&self, event: &TraceEvent, normalize: bool) -> String {
        let kind = match event.kind {
            TraceKind::Call => "call",
            TraceKind::Deliver => "deliver",
            TraceKind::Forward => "forward",
            TraceKind::Fail => "fail",
        };
        let mut line = String::new();
        if normalize {
            write!(line, "+{:<5}", event.at - self.start_ms).unwrap();
        } else {
            write!(line, "{:<14}", event.at).unwrap();
        }
        write!(line, " {kind:<7} {} -> {} {}", event.origin, event.destination, event.path).unwrap();
        if event.hop.0 != event.origin || event.hop.1 != event.destination {
            write!(line, " hop {}>{}", event.hop.0, event.hop.1).unwrap();
        }
        if let Some(reference) = &event.reference {
            write!(line, " ref={}", self.reference_name(reference, normalize)).unwrap();
        }
        if let Some(status) = event.status {
            write!(line, " {}", format!("{status:?}").to_lowercase()).unwrap();
        }
        if let Some(note) = &event.note {
            write!(line, " ({note})").unwrap();
        }
        line
    }

    /// Text form. With `normalize`, times are relative to the start and
    /// references are replaced by their labels, so golden files stay stable.
    pub fn render(&self, normalize: bool) -> String {
        let mut out = String::new();
        for record in &self.steps {
            let status = match &record.outcome {
                StepOutcome::Ok => "ok".to_string(),
                StepOutcome::Failed(reason) => format!("FAILED: {reason}"),
            };
            let detail = if record.detail.is_empty() { String::new() } else { format!(" {}", record.detail) };
            writeln!(out, "[{:02}] {}{detail} => {status}", record.index, record.step).unwrap();
            for event in &record.events {
                writeln!(out, "     {}", self.event_line(event, normalize)).unwrap();
            }
        }
        writeln!(out, "result: {}", if self.passed() { "pass" } else { "fail" }).unwrap();
        out
    }

    /// Normalized lines with step arguments dropped, for comparing runs that
    /// differ only in configuration.
    pub fn summary(&self) -> Vec<String> {
        let mut lines = Vec::new();
        for record in &self.steps {
            lines.push(format!("{} {:?}", record.step, record.outcome));
            lines.extend(record.events.iter().map(|e| self.event_line(e, true)));
        }
        lines
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Scenario {
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn run(&self, topology: &mut Topology) -> Transcript {
        let mut runner = Runner { topology, raised: BTreeMap::new() };
        let mut transcript =
            Transcript { steps: Vec::new(), labels: BTreeMap::new(), start_ms: runner.topology.now_ms() };
        for (i, step) in self.steps.iter().enumerate() {
            let before = runner.topology.trace().len();
            let outcome = match runner.execute(step) {
                Ok(()) => StepOutcome::Ok,
                Err(reason) => StepOutcome::Failed(reason),
            };
            let failed = outcome != StepOutcome::Ok;
            transcript.steps.push(StepRecord {
                index: i + 1,
                step: step.name().into(),
                detail: step.detail(),
                outcome,
                events: runner.topology.trace()[before..].to_vec(),
            });
            transcript.labels = runner.raised.iter().map(|(l, (_, r))| (l.clone(), r.clone())).collect();
            if failed {
                break;
            }
        }
        transcript
    }
}

struct Runner<'a> {
    topology: &'a mut Topology,
    /// Label to (raising controller, reference).
    raised: BTreeMap<String, (String, String)>,
}

fn expect_ok(reply: crate::service::Reply, what: &str) -> Result<(), String> {
    if reply.is_ok() {
        Ok(())
    } else {
        Err(format!("{what}: {:?} {}", reply.status, reply.message.unwrap_or_default()).to_lowercase())
    }
}

impl Runner<'_> {
    fn label(&self, label: &str) -> Result<&(String, String), String> {
        self.raised.get(label).ok_or_else(|| format!("no request raised as `{label}`"))
    }

    fn dealer(&self) -> String {
        self.topology.config().dealer.clone()
    }

    fn registry(&self) -> String {
        self.topology.config().registry.clone()
    }

    fn execute(&mut self, step: &Step) -> Result<(), String> {
        match step {
            Step::ConfigureScheme { config } => {
                let reply = self.topology.request(&self.dealer(), Message::post(paths::COMMAND_SCHEME_CONFIG, config));
                expect_ok(reply, "scheme config")
            }
            Step::ConfigureParticipants { strategy } => {
                let message = Message::post(paths::COMMAND_PARTICIPANT_CONFIG, strategy);
                expect_ok(self.topology.request(&self.dealer(), message), "participant config")
            }
            Step::LoadActions { table } => {
                let message = Message::post(paths::COMMAND_ACTION, json!({ "table": table }));
                expect_ok(self.topology.request(&self.dealer(), message), "action table")
            }
            Step::InitActions => {
                let message = Message::post(paths::COMMAND_INIT_ACTION, json!({}));
                expect_ok(self.topology.request(&self.dealer(), message), "init")
            }
            Step::RouteEdit { a, b, weight, disabled } => {
                let message = Message::post("/route", json!({"a": a, "b": b, "weight": weight, "disabled": disabled}));
                expect_ok(self.topology.request(&self.registry(), message), "route edit")
            }
            Step::ResetRoutes => expect_ok(
                self.topology.request(&self.registry(), Message::post("/route/reset", json!({}))),
                "route reset",
            ),
            Step::SetAutoRespond { controller, enabled } => {
                let targets = match controller {
                    Some(name) => vec![name.clone()],
                    None => self.topology.config().controller_names(),
                };
                for target in targets {
                    let message = Message::post(paths::COMMAND_AUTO_RESPOND, AutoRespond { enabled: *enabled });
                    expect_ok(self.topology.request(&target, message), &target)?;
                }
                Ok(())
            }
            Step::CorruptShare { controller, request, to } => {
                let row = self
                    .topology
                    .controller(controller)
                    .ok_or_else(|| format!("no controller {controller}"))?
                    .rows()
                    .filter(|r| &r.request == request && to.as_ref().is_none_or(|t| &r.to == t))
                    .max_by_key(|r| r.is_main())
                    .cloned()
                    .ok_or_else(|| format!("{controller} holds no share for {request}"))?;
                let share = loop {
                    let mut bytes = vec![0u8; row.share.len()];
                    self.topology.rng().fill_bytes(&mut bytes);
                    if bytes != row.share.as_bytes() {
                        break ShareBytes::new(bytes);
                    }
                };
                let body = ShareDistribution {
                    from: row.from,
                    to: row.to,
                    request: row.request,
                    index: None,
                    share,
                    participants: Vec::new(),
                    share_len: None,
                };
                expect_ok(self.topology.request(controller, Message::post(paths::SECRET, body)), "overwrite")
            }
            Step::RaiseRequest { controller, request, to, label } => {
                let label = label.clone().unwrap_or_else(|| request.clone());
                if self.raised.contains_key(&label) {
                    return Err(format!("label `{label}` already used"));
                }
                let body = RaiseRequest { request: request.clone(), to: to.clone() };
                let reply = self.topology.call(controller, Message::post(paths::COMMAND_ACTION_REQUEST, body));
                let reference = reply.reference.clone();
                expect_ok(reply, "raise")?;
                let reference = reference.ok_or("raise returned no reference")?;
                self.raised.insert(label, (controller.clone(), reference));
                self.topology.run_until_quiescent(DEFAULT_STEP_BUDGET);
                Ok(())
            }
            Step::RespondShare { controller, label } => {
                let reference = self.label(label)?.1.clone();
                let message = Message::post(paths::COMMAND_RESPOND_SHARE, RespondShare { reference });
                expect_ok(self.topology.request(controller, message), "respond")
            }
            Step::AwaitResolution { label, expect, timeout_ms } => {
                let (controller, reference) = self.label(label)?.clone();
                self.topology.run_until_quiescent(DEFAULT_STEP_BUDGET);
                let status = self.topology.controller(&controller).and_then(|c| c.status(&reference)).map(|s| s.status);
                let resolved = match status {
                    Some(RequestStatus::Approved) => Outcome::Success,
                    Some(RequestStatus::Rejected) => Outcome::Failure,
                    other => {
                        self.topology.clock().advance(*timeout_ms);
                        return Err(format!("unresolved after {timeout_ms} ms (status {other:?})"));
                    }
                };
                if resolved == *expect {
                    Ok(())
                } else {
                    Err(format!("resolved as {resolved:?}, expected {expect:?}"))
                }
            }
            Step::AssertStatus { controller, label, status } => {
                let reference = &self.label(label)?.1;
                let actual = self
                    .topology
                    .controller(controller)
                    .ok_or_else(|| format!("no controller {controller}"))?
                    .status(reference)
                    .map(|s| s.status);
                if actual == Some(*status) {
                    Ok(())
                } else {
                    Err(format!("{controller} status {actual:?}, expected {status:?}"))
                }
            }
            Step::AssertAudit { label, expect } => {
                let reference = self.label(label)?.1.clone();
                let filter = AuditFilter { reference_number: Some(reference), batch_id: None };
                let rows = self.topology.dealer().list_audit(&filter);
                let actual: Vec<AuditExpectation> = rows
                    .iter()
                    .map(|r| AuditExpectation {
                        success: r.is_success,
                        subset: context_value(&r.context_nodes, "subset"),
                        reject: context_value(&r.context_nodes, "reject").is_some(),
                    })
                    .collect();
                let matches = actual.len() == expect.len()
                    && actual.iter().zip(expect).all(|(a, e)| {
                        a.success == e.success && a.reject == e.reject && (e.subset.is_none() || e.subset == a.subset)
                    });
                if matches {
                    Ok(())
                } else {
                    Err(format!("audit rows {actual:?}, expected {expect:?}"))
                }
            }
            Step::AssertForwardLog { label, entries, services, via } => {
                let reference = self.label(label)?.1.clone();
                let found = self.topology.forward_entries(&reference);
                let mut relays: Vec<&str> = found.iter().map(|(name, _)| *name).collect();
                relays.dedup();
                if found.len() != *entries {
                    return Err(format!("{} forward entries via {relays:?}, expected {entries}", found.len()));
                }
                if services.is_some_and(|s| s != relays.len()) {
                    return Err(format!("relayed by {relays:?}, expected {} services", services.unwrap_or_default()));
                }
                if let Some(via) = via {
                    if relays.iter().any(|r| r != via) || relays.is_empty() {
                        return Err(format!("relayed by {relays:?}, expected {via}"));
                    }
                }
                Ok(())
            }
            Step::AssertNodeExecution { node, label, commands } => {
                let node_ref = self.topology.node(node).ok_or_else(|| format!("no node {node}"))?;
                let actual: Vec<String> = match label {
                    Some(label) => {
                        let reference = &self.label(label)?.1;
                        node_ref
                            .entry(reference)
                            .map(|e| e.executions.iter().map(|x| x.command.clone()).collect())
                            .unwrap_or_default()
                    }
                    None => node_ref.executed_commands().into_iter().map(String::from).collect(),
                };
                if &actual == commands {
                    Ok(())
                } else {
                    Err(format!("{node} executed {actual:?}, expected {commands:?}"))
                }
            }
        }
    }
}

/// Value of `key=value` in an audit context string.
fn context_value(context: &str, key: &str) -> Option<String> {
    context.split_whitespace().find_map(|word| word.strip_prefix(key)?.strip_prefix('=').map(String::from))
}
