//! Load an action table and ask the store how each request would be decided.

use s3cdm::store::{parse_action_table, ActionStore, SqliteBackend};

const TABLE: &str = "
| From         | To     | Level | Request | Action     |
|--------------|--------|-------|---------|------------|
| controller-1 | node-2 | 0     |         |            |
| 0            | 0      | 9     | R1      | ls; pwd    |
| controller-3 | node-4 | 1     | R2      | date       |
| controller-3 | node-4 | 2     | R3      | uptime     |
";

fn main() {
    let store_path = std::env::temp_dir().join("s3cdm-cascade-example.db");
    let _ = std::fs::remove_file(&store_path);
    let mut store = ActionStore::new(Box::new(SqliteBackend::open(&store_path).unwrap()));
    let rows = parse_action_table(TABLE).unwrap();
    println!("loaded {} rows", store.upsert_actions(&rows).unwrap().affected);

    let asks = [
        ("controller-1", "node-2", "R1"),
        ("controller-1", "node-2", "R9"),
        ("controller-3", "node-4", "R2"),
        ("controller-3", "node-4", "R3"),
        ("controller-2", "node-4", "R2"),
    ];
    for (from, to, request) in asks {
        let outcome = store.authorize_request(from, to, request).unwrap();
        println!("{from} -> {to} {request}: {:?} {:?} {:?}", outcome.verdict, outcome.action, outcome.appended);
    }
}
