use std::collections::BTreeMap;

use super::{ActionRecord, AuditFilter, AuditRecord, Level, NewAuditRecord, RecordKey, Result, StoreBackend};

#[derive(Debug, Default)]
pub struct MemoryBackend {
    actions: BTreeMap<RecordKey, ActionRecord>,
    audits: Vec<AuditRecord>,
}

impl StoreBackend for MemoryBackend {
    fn put_action(&mut self, record: &ActionRecord) -> Result<bool> {
        Ok(self.actions.insert(record.key(), record.clone()).is_some())
    }

    fn get_action(&self, key: &RecordKey) -> Result<Option<ActionRecord>> {
        Ok(self.actions.get(key).cloned())
    }

    fn delete_action(&mut self, key: &RecordKey) -> Result<bool> {
        Ok(self.actions.remove(key).is_some())
    }

    fn has_level(&self, from_node: &str, to_node: &str, level: Level) -> Result<bool> {
        Ok(self.actions.keys().any(|k| k.from_node == from_node && k.to_node == to_node && k.level == level.as_u8()))
    }

    fn actions(&self) -> Result<Vec<ActionRecord>> {
        Ok(self.actions.values().cloned().collect())
    }

    fn append_audit(&mut self, entry: &NewAuditRecord) -> Result<i64> {
        let id = self.audits.len() as i64 + 1;
        self.audits.push(AuditRecord {
            id,
            reference_number: entry.reference_number.clone(),
            request: entry.request.clone(),
            batch_id: entry.batch_id.clone(),
            is_success: entry.is_success,
            context_nodes: entry.context_nodes.clone(),
            created_at: entry.created_at,
        });
        Ok(id)
    }

    fn audits(&self, filter: &AuditFilter) -> Result<Vec<AuditRecord>> {
        let mut rows: Vec<AuditRecord> = self.audits.iter().filter(|r| filter.matches(r)).cloned().collect();
        rows.sort_by_key(|r| (r.created_at, r.id));
        Ok(rows)
    }
}
