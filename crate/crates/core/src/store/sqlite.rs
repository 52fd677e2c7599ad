use std::path::Path;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension};

use super::{ActionRecord, AuditFilter, AuditRecord, Level, NewAuditRecord, RecordKey, Result, StoreBackend};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS action (
    from_node TEXT    NOT NULL,
    to_node   TEXT    NOT NULL,
    level     INTEGER NOT NULL,
    request   TEXT    NOT NULL,
    action    TEXT    NOT NULL,
    PRIMARY KEY (from_node, to_node, level, request)
);
CREATE TABLE IF NOT EXISTS audit_recovery (
    id               INTEGER PRIMARY KEY AUTOINCREMENT,
    reference_number TEXT,
    request          TEXT,
    batch_id         TEXT,
    is_success       BOOLEAN NOT NULL,
    context_nodes    TEXT,
    created_at       TIMESTAMP
);
";

/// Relational backend over SQLite with the `action` and `audit_recovery`
/// tables. Appended actions share the `action` column, `;`-separated.
pub struct SqliteBackend {
    conn: Connection,
}

impl std::fmt::Debug for SqliteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SqliteBackend").finish_non_exhaustive()
    }
}

impl SqliteBackend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::init(Connection::open(path)?)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.execute_batch(SCHEMA)?;
        Ok(Self { conn })
    }
}

fn row_to_action(row: &rusqlite::Row<'_>) -> rusqlite::Result<ActionRecord> {
    let column: String = row.get(4)?;
    let (action, appended_actions) = ActionRecord::split_action_column(&column);
    Ok(ActionRecord {
        from_node: row.get(0)?,
        to_node: row.get(1)?,
        level: row.get(2)?,
        request_key: row.get(3)?,
        action,
        appended_actions,
    })
}

impl StoreBackend for SqliteBackend {
    fn put_action(&mut self, record: &ActionRecord) -> Result<bool> {
        let tx = self.conn.transaction()?;
        let replaced = tx.execute(
            "DELETE FROM action WHERE from_node = ?1 AND to_node = ?2 AND level = ?3 AND request = ?4",
            params![record.from_node, record.to_node, record.level, record.request_key],
        )? > 0;
        tx.execute(
            "INSERT INTO action (from_node, to_node, level, request, action) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![record.from_node, record.to_node, record.level, record.request_key, record.action_column()],
        )?;
        tx.commit()?;
        Ok(replaced)
    }

    fn get_action(&self, key: &RecordKey) -> Result<Option<ActionRecord>> {
        Ok(self
            .conn
            .query_row(
                "SELECT from_node, to_node, level, request, action FROM action
                 WHERE from_node = ?1 AND to_node = ?2 AND level = ?3 AND request = ?4",
                params![key.from_node, key.to_node, key.level, key.request_key],
                row_to_action,
            )
            .optional()?)
    }

    fn delete_action(&mut self, key: &RecordKey) -> Result<bool> {
        Ok(self.conn.execute(
            "DELETE FROM action WHERE from_node = ?1 AND to_node = ?2 AND level = ?3 AND request = ?4",
            params![key.from_node, key.to_node, key.level, key.request_key],
        )? > 0)
    }

    fn has_level(&self, from_node: &str, to_node: &str, level: Level) -> Result<bool> {
        Ok(self.conn.query_row(
            "SELECT EXISTS(SELECT 1 FROM action WHERE from_node = ?1 AND to_node = ?2 AND level = ?3)",
            params![from_node, to_node, level.as_u8()],
            |row| row.get(0),
        )?)
    }

    fn actions(&self) -> Result<Vec<ActionRecord>> {
        let mut stmt = self.conn.prepare(
            "SELECT from_node, to_node, level, request, action FROM action
             ORDER BY from_node, to_node, level, request",
        )?;
        let rows = stmt.query_map([], row_to_action)?.collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }

    fn append_audit(&mut self, entry: &NewAuditRecord) -> Result<i64> {
        self.conn.execute(
            "INSERT INTO audit_recovery (reference_number, request, batch_id, is_success, context_nodes, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                entry.reference_number,
                entry.request,
                entry.batch_id,
                entry.is_success,
                entry.context_nodes,
                entry.created_at,
            ],
        )?;
        Ok(self.conn.last_insert_rowid())
    }

    fn audits(&self, filter: &AuditFilter) -> Result<Vec<AuditRecord>> {
        let mut stmt = self.conn.prepare(
            "SELECT id, reference_number, request, batch_id, is_success, context_nodes, created_at
             FROM audit_recovery
             WHERE (?1 IS NULL OR reference_number = ?1) AND (?2 IS NULL OR batch_id = ?2)
             ORDER BY created_at, id",
        )?;
        let rows = stmt
            .query_map(params![filter.reference_number, filter.batch_id], |row| {
                Ok(AuditRecord {
                    id: row.get(0)?,
                    reference_number: row.get(1)?,
                    request: row.get(2)?,
                    batch_id: row.get(3)?,
                    is_success: row.get(4)?,
                    context_nodes: row.get(5)?,
                    created_at: row.get::<_, DateTime<Utc>>(6)?,
                })
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(rows)
    }
}
