//! Pipe-delimited action tables as typed by an operator:
//!
//! ```text
//! | From | To | Level | Request | Action |
//! | 1    | 2  | 2     | R1      | A1     |
//! ```

use super::ActionRecord;

const HEADER: [&str; 5] = ["from", "to", "level", "request", "action"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct TableError {
    pub line: usize,
    pub message: String,
}

fn cells(line: &str) -> Vec<String> {
    let trimmed = line.trim();
    let inner = trimmed.strip_prefix('|').unwrap_or(trimmed);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    inner.split('|').map(|c| c.trim().to_string()).collect()
}

fn is_separator(line: &str) -> bool {
    let t = line.trim();
    !t.is_empty() && t.chars().all(|c| matches!(c, '|' | '-' | ':' | '+' | ' '))
}

/// Parses the whole table or nothing. `from`/`to` are returned verbatim;
/// name resolution is the caller's job.
pub fn parse_action_table(text: &str) -> Result<Vec<ActionRecord>, TableError> {
    let mut records = Vec::new();
    let mut seen_header = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || is_separator(raw) {
            continue;
        }
        let cols = cells(raw);
        if !seen_header {
            let lowered: Vec<String> = cols.iter().map(|c| c.to_ascii_lowercase()).collect();
            if lowered != HEADER {
                return Err(TableError {
                    line,
                    message: "expected header | From | To | Level | Request | Action |".into(),
                });
            }
            seen_header = true;
            continue;
        }
        if cols.len() != 5 {
            return Err(TableError { line, message: format!("expected 5 columns, found {}", cols.len()) });
        }
        let level: u8 = cols[2]
            .parse()
            .map_err(|_| TableError { line, message: format!("level `{}` is not a number", cols[2]) })?;
        let (action, appended_actions) = ActionRecord::split_action_column(&cols[4]);
        let record = ActionRecord {
            from_node: cols[0].clone(),
            to_node: cols[1].clone(),
            level,
            request_key: cols[3].clone(),
            action,
            appended_actions,
        };
        record.validate().map_err(|e| TableError { line, message: e.to_string() })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const DEMO_TABLE: &str = "
| From | To | Level | Request | Action |
| 1    | 2  | 2     | R1      | A1     |
| 3    | 2  | 2     | R2      | A2     |
| 3    | 2  | 2     | R3      | A3     |
| 2    | 1  | 2     | R4      | A4     |
";

    #[test]
    fn four_row_listing() {
        let records = parse_action_table(DEMO_TABLE).unwrap();
        assert_eq!(records.len(), 4);
        let mains: Vec<&str> = records.iter().map(|r| r.from_node.as_str()).collect();
        assert_eq!(mains, vec!["1", "3", "3", "2"]);
        assert!(records.iter().all(|r| r.level == 2));
        assert_eq!(records[2].request_key, "R3");
        assert_eq!(records[2].action, "A3");
    }

    #[test]
    fn empty_body_yields_nothing() {
        assert!(parse_action_table("").unwrap().is_empty());
        assert!(parse_action_table("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn short_row_reports_its_line() {
        let text = "| From | To | Level | Request | Action |\n| 1 | 2 | 1 | R1 | A1 |\n| 1 | 2 | 1 | R2 |\n";
        let err = parse_action_table(text).unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn missing_header_is_an_error() {
        let err = parse_action_table("| 1 | 2 | 1 | R1 | A1 |").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn level_zero_and_nine_rows() {
        let text = "| From | To | Level | Request | Action |\n|---|---|---|---|---|\n| 1 | 2 | 0 | | |\n| 0 | 0 | 9 | R1 | A1; A1a |\n";
        let records = parse_action_table(text).unwrap();
        assert_eq!(records[0].level, 0);
        assert!(records[0].action.is_empty());
        assert_eq!(records[1].appended_actions, vec!["A1a"]);
    }

    #[test]
    fn invalid_level_is_a_line_error() {
        let text = "| From | To | Level | Request | Action |\n| 1 | 2 | 7 | R1 | A1 |\n";
        assert_eq!(parse_action_table(text).unwrap_err().line, 2);
    }
}
