//! Endpoint paths and JSON bodies exchanged between dealer, controllers and
//! nodes.

use serde::{Deserialize, Serialize};

use crate::sss::{ParticipantIndex, ShareBytes};
use crate::ticket::Ticket;

pub mod paths {
    // dealer
    pub const COMMAND_ACTION: &str = "/command/action";
    pub const COMMAND_INIT_ACTION: &str = "/command/init-action";
    pub const COMMAND_SCHEME_CONFIG: &str = "/command/scheme-config";
    pub const COMMAND_PARTICIPANT_CONFIG: &str = "/command/tn-participant-config";
    pub const ACCEPT_SHARES: &str = "/accept-shares";
    pub const FORWARD_ACTION_REQUEST: &str = "/forward-action-request";
    pub const AUDIT: &str = "/audit";

    // controller
    pub const SECRET: &str = "/secret";
    pub const COMMAND_ACTION_REQUEST: &str = "/command/action-request";
    pub const ASK_FOR_SHARED_SECRET: &str = "/ask-for-shared-secret";
    pub const COMMAND_RESPOND_SHARE: &str = "/command/respond-share";
    pub const COMMAND_AUTO_RESPOND: &str = "/command/auto-respond";

    // dealer and node
    pub const ACTION_REQUEST: &str = "/action-request";
    // controller and node
    pub const ACTION_REQUEST_RESULT: &str = "/action-request-result";

    pub const STATE: &str = "/state";
    pub const RESET: &str = "/reset";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

/// Dealer to controller: one share bound to `(from, to, request)`. An
/// operator overwrite may omit `index` to keep the held one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareDistribution {
    pub from: String,
    pub to: String,
    pub request: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<ParticipantIndex>,
    pub share: ShareBytes,
    /// The other participants; empty unless the receiver is main.
    #[serde(default)]
    pub participants: Vec<String>,
    #[serde(default)]
    pub share_len: Option<usize>,
}

/// Controller to dealer: a raised request, with the main share when the
/// request is secret-gated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub ticket: Ticket,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share: Option<ShareBytes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant_index: Option<ParticipantIndex>,
}

/// Controller to node, and node acknowledgment to dealer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketBody {
    pub ticket: Ticket,
}

/// Dealer to a non-main participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Solicitation {
    pub dealer_ticket: Ticket,
    pub originating_ticket: Ticket,
}

/// Participant to dealer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareResponse {
    pub ticket: Ticket,
    pub participant_index: ParticipantIndex,
    pub share: ShareBytes,
    pub controller: String,
}

/// Dealer to node. On success carries the action and its appended actions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeResult {
    pub ticket: Ticket,
    pub outcome: Outcome,
    #[serde(default)]
    pub action: Option<String>,
    #[serde(default)]
    pub appended: Vec<String>,
    #[serde(default)]
    pub detail: String,
}

/// Dealer to controller: status only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerResult {
    pub reference: String,
    pub outcome: Outcome,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaiseRequest {
    pub request: String,
    /// Target node; only needed for requests this controller holds no share for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RespondShare {
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoRespond {
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTable {
    pub table: String,
}
