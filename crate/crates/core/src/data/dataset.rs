//! Text serialization of a [`DatasetSplit`] and its split manifest.
//!
//! ```text
//! EMBSR-DS-1
//! items <n>
//! <token>\t<count>        (n lines, index order)
//! ops <n>
//! <token>\t<count>
//! train <n>
//! <session id>\t<item>:<op>:<timestamp> <item>:<op>:<timestamp> ...
//! validation <n>
//! ...
//! test <n>
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DataError, DatasetSplit, Example, MicroBehavior, SessionRecord, Vocabulary};

pub const DATASET_MAGIC: &str = "EMBSR-DS-1";

const SPLITS: [&str; 3] = ["train", "validation", "test"];

fn check_token(kind: &str, t: &str) -> Result<(), DataError> {
    if t.is_empty() || t.contains(['\t', '\n', '\r']) {
        return Err(DataError::Format(format!("{kind} token {t:?} is empty or contains a tab/newline")));
    }
    Ok(())
}

pub fn dataset_to_string(d: &DatasetSplit) -> Result<String, DataError> {
    let mut out = String::new();
    writeln!(out, "{DATASET_MAGIC}").unwrap();
    for (name, vocab) in [("items", &d.items), ("ops", &d.ops)] {
        writeln!(out, "{name} {}", vocab.len()).unwrap();
        for (tok, count) in vocab.tokens().iter().zip(vocab.counts()) {
            check_token(name, tok)?;
            writeln!(out, "{tok}\t{count}").unwrap();
        }
    }
    for (name, examples) in SPLITS.iter().zip([&d.train, &d.validation, &d.test]) {
        writeln!(out, "{name} {}", examples.len()).unwrap();
        for ex in examples {
            check_token("session", &ex.record.id)?;
            out.push_str(&ex.record.id);
            out.push('\t');
            for (i, e) in ex.record.events.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{}:{}:{}", e.item, e.op, e.timestamp).unwrap();
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_dataset(d: &DatasetSplit, path: &Path) -> Result<(), DataError> {
    let text = dataset_to_string(d)?;
    fs::write(path, text).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// One session id per line under a `[train]`, `[validation]` or `[test]` header.
pub fn write_manifest(d: &DatasetSplit, path: &Path) -> Result<(), DataError> {
    let mut out = String::new();
    for (name, examples) in SPLITS.iter().zip([&d.train, &d.validation, &d.test]) {
        writeln!(out, "[{name}]").unwrap();
        for ex in examples {
            writeln!(out, "{}", ex.record.id).unwrap();
        }
    }
    fs::write(path, out).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

pub fn read_dataset(path: &Path) -> Result<DatasetSplit, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    dataset_from_str(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str), DataError> {
        self.inner.next().map(|(i, l)| (i + 1, l)).ok_or_else(|| DataError::Format("unexpected end of file".into()))
    }

    fn header(&mut self, name: &str) -> Result<usize, DataError> {
        let (line, text) = self.next()?;
        let bad = || DataError::Parse { line, message: format!("expected `{name} <count>`, found {text:?}") };
        let (key, count) = text.split_once(' ').ok_or_else(bad)?;
        if key != name {
            return Err(bad());
        }
        count.parse().map_err(|_| bad())
    }
}

pub fn dataset_from_str(text: &str) -> Result<DatasetSplit, DataError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (_, magic) = lines.next()?;
    if magic != DATASET_MAGIC {
        return Err(DataError::Format(format!("bad magic {magic:?}, expected {DATASET_MAGIC}")));
    }
    let mut vocabs = Vec::new();
    for name in ["items", "ops"] {
        let n = lines.header(name)?;
        let mut v = Vocabulary::new();
        for _ in 0..n {
            let (line, l) = lines.next()?;
            let parsed = l.split_once('\t').and_then(|(tok, c)| Some((tok, c.parse::<u64>().ok()?)));
            let (tok, count) =
                parsed.ok_or_else(|| DataError::Parse { line, message: format!("bad vocabulary row {l:?}") })?;
            if v.get(tok).is_some() {
                return Err(DataError::Parse { line, message: format!("duplicate token {tok:?}") });
            }
            v.insert_new(tok.to_string(), count);
        }
        vocabs.push(v);
    }
    let ops = vocabs.pop().unwrap();
    let items = vocabs.pop().unwrap();

    let mut splits: Vec<Vec<Example>> = Vec::new();
    for name in SPLITS {
        let n = lines.header(name)?;
        let mut examples = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, l) = lines.next()?;
            let record = parse_session_line(line, l, items.len(), ops.len())?;
            examples.push(Example::from_record(record)?);
        }
        splits.push(examples);
    }
    let test = splits.pop().unwrap();
    let validation = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    Ok(DatasetSplit { items, ops, train, validation, test })
}

fn parse_session_line(line: usize, l: &str, n_items: usize, n_ops: usize) -> Result<SessionRecord, DataError> {
    let err = |message: String| DataError::Parse { line, message };
    let (id, rest) = l.split_once('\t').ok_or_else(|| err("missing tab after session id".into()))?;
    let mut events = Vec::new();
    for tok in rest.split(' ').filter(|t| !t.is_empty()) {
        let mut parts = tok.splitn(3, ':');
        let mut field = |what: &str| -> Result<&str, DataError> {
            parts.next().ok_or_else(|| err(format!("event {tok:?} missing {what}")))
        };
        let (item, op, ts) = (field("item")?, field("op")?, field("timestamp")?);
        let item: usize = item.parse().map_err(|_| err(format!("bad item in {tok:?}")))?;
        let op: usize = op.parse().map_err(|_| err(format!("bad op in {tok:?}")))?;
        let timestamp: i64 = ts.parse().map_err(|_| err(format!("bad timestamp in {tok:?}")))?;
        if item >= n_items || op >= n_ops {
            return Err(err(format!("event {tok:?} outside vocabulary")));
        }
        events.push(MicroBehavior { item, op, timestamp });
    }
    Ok(SessionRecord { id: id.to_string(), events })
}
