//! The action database and the audit log of recovery attempts.
//!
//! Rows carry a level:
//!
//! | level | meaning                                                   |
//! |-------|-----------------------------------------------------------|
//! | 0     | no checking between `from` and `to`; level-9 rows decide  |
//! | 1     | request allowed directly                                  |
//! | 2     | request gated by a recovered secret (keyed by secret hex) |
//! | 9     | globally valid request (`from = to = "0"`)                |
//!
//! Storage goes through [`StoreBackend`]; [`MemoryBackend`] serves tests and
//! [`SqliteBackend`] keeps the relational `action` / `audit_recovery` tables.

mod memory;
mod sqlite;
mod table;

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use memory::MemoryBackend;
pub use sqlite::SqliteBackend;
pub use table::{parse_action_table, TableError};

/// Sentinel name meaning "any service".
pub const WILDCARD: &str = "0";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid level {0}; expected 0, 1, 2 or 9")]
    InvalidLevel(u8),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("storage failure: {0}")]
    Storage(#[from] rusqlite::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Level {
    Unchecked = 0,
    Direct = 1,
    SecretGated = 2,
    GloballyValid = 9,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Unchecked, Level::Direct, Level::SecretGated, Level::GloballyValid];

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Level {
    type Error = StoreError;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Level::Unchecked),
            1 => Ok(Level::Direct),
            2 => Ok(Level::SecretGated),
            9 => Ok(Level::GloballyValid),
            other => Err(StoreError::InvalidLevel(other)),
        }
    }
}

impl From<Level> for u8 {
    fn from(value: Level) -> Self {
        value.as_u8()
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// One row of the action database. `level` is kept raw so invalid rows can be
/// reported per record by [`ActionStore::upsert_actions`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub from_node: String,
    pub to_node: String,
    pub level: u8,
    #[serde(default)]
    pub request_key: String,
    #[serde(default)]
    pub action: String,
    #[serde(default)]
    pub appended_actions: Vec<String>,
}

impl ActionRecord {
    pub fn new(
        from_node: impl Into<String>,
        to_node: impl Into<String>,
        level: Level,
        request_key: impl Into<String>,
        action: impl Into<String>,
    ) -> Self {
        Self {
            from_node: from_node.into(),
            to_node: to_node.into(),
            level: level.as_u8(),
            request_key: request_key.into(),
            action: action.into(),
            appended_actions: Vec::new(),
        }
    }

    /// Level-0 row: no checking between `from` and `to`.
    pub fn unchecked(from_node: impl Into<String>, to_node: impl Into<String>) -> Self {
        Self::new(from_node, to_node, Level::Unchecked, "", "")
    }

    /// Level-9 row: `request` is valid from anyone to anyone.
    pub fn globally_valid(request: impl Into<String>, action: impl Into<String>) -> Self {
        Self::new(WILDCARD, WILDCARD, Level::GloballyValid, request, action)
    }

    pub fn with_appended(mut self, appended: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.appended_actions = appended.into_iter().map(Into::into).collect();
        self
    }

    pub fn validate(&self) -> Result<Level> {
        let level = Level::try_from(self.level)?;
        if self.from_node.is_empty() || self.to_node.is_empty() {
            return Err(StoreError::InvalidRecord("from and to must be set".into()));
        }
        match level {
            Level::Unchecked => {
                if !self.request_key.is_empty() || !self.action.is_empty() || !self.appended_actions.is_empty() {
                    return Err(StoreError::InvalidRecord("level-0 rows carry no request or action".into()));
                }
            }
            Level::GloballyValid => {
                if self.from_node != WILDCARD || self.to_node != WILDCARD {
                    return Err(StoreError::InvalidRecord("level-9 rows must use the wildcard from/to".into()));
                }
            }
            Level::Direct | Level::SecretGated => {}
        }
        if level != Level::Unchecked && (self.request_key.is_empty() || self.action.is_empty()) {
            return Err(StoreError::InvalidRecord(format!("level-{level} rows need a request and an action")));
        }
        Ok(level)
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            from_node: self.from_node.clone(),
            to_node: self.to_node.clone(),
            level: self.level,
            request_key: self.request_key.clone(),
        }
    }

    /// Action plus appended actions as stored in the `action` column,
    /// e.g. `A1;A1a;A1b`.
    pub fn action_column(&self) -> String {
        std::iter::once(self.action.as_str())
            .chain(self.appended_actions.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn split_action_column(column: &str) -> (String, Vec<String>) {
        let mut parts = column.split([';', ',']).map(str::trim).filter(|s| !s.is_empty()).map(String::from);
        let action = parts.next().unwrap_or_default();
        (action, parts.collect())
    }
}

/// The unique key `(from_node, to_node, level, request_key)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub from_node: String,
    pub to_node: String,
    pub level: u8,
    pub request_key: String,
}

impl RecordKey {
    pub fn new(from_node: &str, to_node: &str, level: Level, request_key: &str) -> Self {
        Self {
            from_node: from_node.into(),
            to_node: to_node.into(),
            level: level.as_u8(),
            request_key: request_key.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AllowedLevel0,
    AllowedLevel1,
    NeedsLevel2Recovery,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorizationOutcome {
    pub verdict: Verdict,
    pub action: Option<String>,
    pub appended: Vec<String>,
}

impl AuthorizationOutcome {
    fn bare(verdict: Verdict) -> Self {
        Self { verdict, action: None, appended: Vec::new() }
    }

    fn allowed(verdict: Verdict, record: ActionRecord) -> Self {
        Self { verdict, action: Some(record.action), appended: record.appended_actions }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpsertReport {
    pub affected: usize,
    /// `(position in input, reason)` for each rejected record.
    pub rejected: Vec<(usize, String)>,
}

/// Audit row before the store assigns its id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewAuditRecord {
    pub reference_number: String,
    pub request: String,
    pub batch_id: String,
    pub is_success: bool,
    pub context_nodes: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub id: i64,
    pub reference_number: String,
    pub request: String,
    pub batch_id: String,
    pub is_success: bool,
    pub context_nodes: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditFilter {
    #[serde(default)]
    pub reference_number: Option<String>,
    #[serde(default)]
    pub batch_id: Option<String>,
}

impl AuditFilter {
    pub fn matches(&self, record: &AuditRecord) -> bool {
        self.reference_number.as_ref().is_none_or(|r| r == &record.reference_number)
            && self.batch_id.as_ref().is_none_or(|b| b == &record.batch_id)
    }
}

/// Storage primitives. Cascade semantics live in [`ActionStore`].
pub trait StoreBackend: Send {
    /// Inserts or replaces by unique key; returns true when a row was replaced.
    fn put_action(&mut self, record: &ActionRecord) -> Result<bool>;
    fn get_action(&self, key: &RecordKey) -> Result<Option<ActionRecord>>;
    fn delete_action(&mut self, key: &RecordKey) -> Result<bool>;
    fn has_level(&self, from_node: &str, to_node: &str, level: Level) -> Result<bool>;
    fn actions(&self) -> Result<Vec<ActionRecord>>;
    fn append_audit(&mut self, entry: &NewAuditRecord) -> Result<i64>;
    /// Matching rows ordered by `created_at`, then id.
    fn audits(&self, filter: &AuditFilter) -> Result<Vec<AuditRecord>>;
}

pub struct ActionStore {
    backend: Box<dyn StoreBackend>,
}

impl fmt::Debug for ActionStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActionStore").finish_non_exhaustive()
    }
}

impl Default for ActionStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl ActionStore {
    pub fn new(backend: Box<dyn StoreBackend>) -> Self {
        Self { backend }
    }

    pub fn in_memory() -> Self {
        Self::new(Box::new(MemoryBackend::default()))
    }

    /// Cascade: level 0 (then level 9), level 1, level 2, otherwise denied.
    pub fn authorize_request(&self, from: &str, to: &str, request: &str) -> Result<AuthorizationOutcome> {
        if self.backend.has_level(from, to, Level::Unchecked)? {
            let valid = self.backend.get_action(&RecordKey::new(WILDCARD, WILDCARD, Level::GloballyValid, request))?;
            return Ok(match valid {
                Some(record) => AuthorizationOutcome::allowed(Verdict::AllowedLevel0, record),
                None => AuthorizationOutcome::bare(Verdict::Denied),
            });
        }
        if let Some(record) = self.backend.get_action(&RecordKey::new(from, to, Level::Direct, request))? {
            return Ok(AuthorizationOutcome::allowed(Verdict::AllowedLevel1, record));
        }
        if self.backend.has_level(from, to, Level::SecretGated)? {
            return Ok(AuthorizationOutcome::bare(Verdict::NeedsLevel2Recovery));
        }
        Ok(AuthorizationOutcome::bare(Verdict::Denied))
    }

    /// The level-2 action keyed by the recovered secret's hex, if any.
    pub fn lookup_by_secret(&self, from: &str, to: &str, secret_hex: &str) -> Result<Option<(String, Vec<String>)>> {
        Ok(self
            .backend
            .get_action(&RecordKey::new(from, to, Level::SecretGated, secret_hex))?
            .map(|r| (r.action, r.appended_actions)))
    }

    pub fn upsert_actions(&mut self, records: &[ActionRecord]) -> Result<UpsertReport> {
        let mut report = UpsertReport::default();
        for (position, record) in records.iter().enumerate() {
            if let Err(err) = record.validate() {
                report.rejected.push((position, err.to_string()));
                continue;
            }
            self.backend.put_action(record)?;
            report.affected += 1;
        }
        Ok(report)
    }

    pub fn remove_action(&mut self, key: &RecordKey) -> Result<bool> {
        self.backend.delete_action(key)
    }

    pub fn actions(&self) -> Result<Vec<ActionRecord>> {
        self.backend.actions()
    }

    pub fn record_audit(&mut self, entry: NewAuditRecord) -> Result<i64> {
        self.backend.append_audit(&entry)
    }

    pub fn list_audit(&self, filter: &AuditFilter) -> Result<Vec<AuditRecord>> {
        self.backend.audits(filter)
    }
}
