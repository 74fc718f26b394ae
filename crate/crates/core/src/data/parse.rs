use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::DataError;

/// Which column holds each field, zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnOrder {
    pub session: usize,
    pub item: usize,
    pub operation: usize,
    pub timestamp: usize,
}

impl Default for ColumnOrder {
    fn default() -> Self {
        Self { session: 0, item: 1, operation: 2, timestamp: 3 }
    }
}

/// Layout of a raw interaction log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogFormat {
    pub delimiter: char,
    pub columns: ColumnOrder,
    /// Drop rows whose item field is not an integer id (e.g. Trivago rows
    /// that reference a destination instead of an accommodation).
    pub numeric_items_only: bool,
}

impl Default for LogFormat {
    fn default() -> Self {
        Self { delimiter: '\t', columns: ColumnOrder::default(), numeric_items_only: false }
    }
}

/// One raw log row, tokens kept verbatim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEvent {
    pub item: String,
    pub operation: String,
    pub timestamp: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSession {
    pub id: String,
    pub events: Vec<RawEvent>,
}

impl RawSession {
    pub fn last_timestamp(&self) -> i64 {
        self.events.last().map_or(i64::MIN, |e| e.timestamp)
    }
}

pub fn parse_log(path: &Path, format: &LogFormat) -> Result<Vec<RawSession>, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    parse_log_str(&text, format)
}

/// Groups rows by session id (sessions in first-appearance order) and sorts
/// each session's events by timestamp, keeping file order on ties.
pub fn parse_log_str(text: &str, format: &LogFormat) -> Result<Vec<RawSession>, DataError> {
    let cols = format.columns;
    let needed = cols.session.max(cols.item).max(cols.operation).max(cols.timestamp) + 1;
    let mut order: Vec<RawSession> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();

    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter).map(str::trim).collect();
        if fields.len() < needed {
            return Err(DataError::Parse {
                line: lineno,
                message: format!("expected at least {needed} columns, found {}", fields.len()),
            });
        }
        let ts_field = fields[cols.timestamp];
        let timestamp = match ts_field.parse::<i64>() {
            Ok(t) => t,
            Err(_) if is_first_content_line(text, lineno) => continue,
            Err(_) => {
                return Err(DataError::Parse {
                    line: lineno,
                    message: format!("timestamp {ts_field:?} is not an integer"),
                })
            }
        };
        let (session, item, operation) = (fields[cols.session], fields[cols.item], fields[cols.operation]);
        for (name, value) in [("session", session), ("item", item), ("operation", operation)] {
            if value.is_empty() {
                return Err(DataError::Parse { line: lineno, message: format!("empty {name} field") });
            }
        }
        if format.numeric_items_only && item.parse::<u64>().is_err() {
            continue;
        }
        let idx = *by_id.entry(session.to_string()).or_insert_with(|| {
            order.push(RawSession { id: session.to_string(), events: Vec::new() });
            order.len() - 1
        });
        order[idx].events.push(RawEvent { item: item.to_string(), operation: operation.to_string(), timestamp });
    }

    for s in &mut order {
        s.events.sort_by_key(|e| e.timestamp);
    }
    Ok(order)
}

fn is_first_content_line(text: &str, lineno: usize) -> bool {
    text.lines().take(lineno - 1).all(|l| l.trim().is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_rows_by_session() {
        let log = "s1\ta\tclick\t1\ns1\tb\tclick\t2\ns1\tc\tcart\t3\n";
        let sessions = parse_log_str(log, &LogFormat::default()).unwrap();
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].events.len(), 3);
    }

    #[test]
    fn reorders_by_timestamp_stably() {
        let log = "s\tx\tclick\t30\ns\ty\tclick\t10\ns\tz\tview\t10\ns\tw\tclick\t20\n";
        let s = &parse_log_str(log, &LogFormat::default()).unwrap()[0];
        let items: Vec<_> = s.events.iter().map(|e| e.item.as_str()).collect();
        assert_eq!(items, ["y", "z", "w", "x"]);
    }

    #[test]
    fn header_is_detected_and_skipped() {
        let log = "session\titem\top\ttime\ns1\ta\tclick\t5\n";
        let s = parse_log_str(log, &LogFormat::default()).unwrap();
        assert_eq!(s[0].events.len(), 1);
    }

    #[test]
    fn missing_column_reports_line() {
        let log = "s1\ta\tclick\t1\ns1\tb\t2\n";
        match parse_log_str(log, &LogFormat::default()) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_after_first_line_is_an_error() {
        let log = "s1\ta\tclick\t1\ns1\tb\tclick\tlater\n";
        assert!(matches!(parse_log_str(log, &LogFormat::default()), Err(DataError::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_input_gives_no_sessions() {
        assert!(parse_log_str("", &LogFormat::default()).unwrap().is_empty());
    }

    #[test]
    fn custom_delimiter_and_column_order() {
        let fmt = LogFormat {
            delimiter: ',',
            columns: ColumnOrder { session: 1, item: 3, operation: 0, timestamp: 2 },
            numeric_items_only: true,
        };
        let log = "click,s1,7,42\nsearch,s1,9,destination-xyz\nview,s1,8,17\n";
        // second row: timestamp "9", item "destination-xyz" is dropped as non-numeric
        let s = parse_log_str(log, &fmt).unwrap();
        let items: Vec<_> = s[0].events.iter().map(|e| (e.item.as_str(), e.operation.as_str())).collect();
        assert_eq!(items, [("42", "click"), ("17", "view")]);
    }
}
