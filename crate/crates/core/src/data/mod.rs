//! Session logs to training examples.
//!
//! The pipeline is: [`parse_log`] → optional [`filter_operations`] →
//! [`filter_rare_items`] → [`truncate_sessions`] → [`split_sessions`], which
//! builds vocabularies from the training portion and merges every session
//! into a [`MacroView`] with [`make_macro_view`]. [`preprocess`] runs the
//! whole chain from a [`PreprocessConfig`].

mod dataset;
mod parse;
mod vocab;

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use dataset::{dataset_from_str, dataset_to_string, read_dataset, write_dataset, write_manifest, DATASET_MAGIC};
pub use parse::{parse_log, parse_log_str, ColumnOrder, LogFormat, RawEvent, RawSession};
pub use vocab::Vocabulary;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("session {id}: {reason}")]
    InvalidSession { id: String, reason: String },
    #[error("need at least 3 sessions to split, have {0}")]
    TooFewSessions(usize),
    #[error("invalid split fractions {0:?}: must be non-negative and sum to 1")]
    BadFractions([f64; 3]),
    #[error("dataset format: {0}")]
    Format(String),
}

/// One (item, operation) interaction with dense vocabulary indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MicroBehavior {
    pub item: usize,
    pub op: usize,
    pub timestamp: i64,
}

/// An ordered session of micro-behaviors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionRecord {
    pub id: String,
    pub events: Vec<MicroBehavior>,
}

/// A session after merging consecutive events on the same item.
///
/// The final merged group is held out as the prediction target; none of its
/// events appear in `items`/`op_seqs`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MacroView {
    pub items: Vec<usize>,
    pub op_seqs: Vec<Vec<usize>>,
    pub target_item: usize,
    pub target_op: Option<usize>,
}

impl MacroView {
    /// Builds a view from already-merged parts, checking the merge invariants.
    pub fn new(
        items: Vec<usize>,
        op_seqs: Vec<Vec<usize>>,
        target_item: usize,
        target_op: Option<usize>,
    ) -> Result<Self, DataError> {
        let bad = |reason: &str| DataError::InvalidSession { id: "<view>".into(), reason: reason.into() };
        if items.is_empty() {
            return Err(bad("no input items"));
        }
        if items.len() != op_seqs.len() {
            return Err(bad("items and op_seqs differ in length"));
        }
        if op_seqs.iter().any(Vec::is_empty) {
            return Err(bad("empty operation sequence"));
        }
        if items.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("consecutive macro items are equal"));
        }
        Ok(Self { items, op_seqs, target_item, target_op })
    }

    /// Number of macro items `n` in the input.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Number of input micro-behaviors `t`.
    pub fn micro_len(&self) -> usize {
        self.op_seqs.iter().map(Vec::len).sum()
    }

    /// `(macro position, item, op)` for every input micro-behavior in order.
    pub fn micro_behaviors(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.items
            .iter()
            .zip(&self.op_seqs)
            .enumerate()
            .flat_map(|(pos, (&item, ops))| ops.iter().map(move |&op| (pos, item, op)))
    }

    pub fn flat_ops(&self) -> Vec<usize> {
        self.op_seqs.iter().flatten().copied().collect()
    }
}

/// `(start, len)` of each maximal run of equal consecutive values.
pub fn runs<T: PartialEq>(xs: &[T]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        match out.last_mut() {
            Some((start, len)) if xs[*start] == *x => *len += 1,
            _ => out.push((i, 1)),
        }
    }
    out
}

/// Merges consecutive same-item events; the last group becomes the target.
pub fn make_macro_view(session: &SessionRecord) -> Result<MacroView, DataError> {
    let items: Vec<usize> = session.events.iter().map(|e| e.item).collect();
    let groups = runs(&items);
    if groups.len() < 2 {
        return Err(DataError::InvalidSession {
            id: session.id.clone(),
            reason: format!("merged length {} < 2", groups.len()),
        });
    }
    let (target_start, _) = groups[groups.len() - 1];
    let target = session.events[target_start];
    let (macro_items, op_seqs) = groups[..groups.len() - 1]
        .iter()
        .map(|&(start, len)| {
            let ops = session.events[start..start + len].iter().map(|e| e.op).collect();
            (items[start], ops)
        })
        .unzip();
    Ok(MacroView { items: macro_items, op_seqs, target_item: target.item, target_op: Some(target.op) })
}

fn raw_macro_len(events: &[RawEvent]) -> usize {
    let items: Vec<&str> = events.iter().map(|e| e.item.as_str()).collect();
    runs(&items).len()
}

fn target_group_start(events: &[RawEvent]) -> usize {
    let items: Vec<&str> = events.iter().map(|e| e.item.as_str()).collect();
    runs(&items).last().map_or(0, |&(start, _)| start)
}

/// Removes events on items seen fewer than `min_count` times across all
/// sessions, then drops sessions whose merged length falls below 2.
pub fn filter_rare_items(sessions: Vec<RawSession>, min_count: u64) -> Vec<RawSession> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for e in sessions.iter().flat_map(|s| &s.events) {
        *counts.entry(e.item.as_str()).or_default() += 1;
    }
    let keep: HashSet<String> =
        counts.into_iter().filter(|&(_, c)| c >= min_count).map(|(k, _)| k.to_string()).collect();
    sessions
        .into_iter()
        .filter_map(|mut s| {
            s.events.retain(|e| keep.contains(&e.item));
            (raw_macro_len(&s.events) >= 2).then_some(s)
        })
        .collect()
}

/// Keeps only input events whose operation is in `keep`. The final item
/// group is left untouched so every session keeps its ground truth.
pub fn filter_operations(sessions: Vec<RawSession>, keep: &HashSet<String>) -> Vec<RawSession> {
    sessions
        .into_iter()
        .filter_map(|mut s| {
            let split = target_group_start(&s.events);
            let target = s.events.split_off(split);
            s.events.retain(|e| keep.contains(&e.operation));
            s.events.extend(target);
            (raw_macro_len(&s.events) >= 2).then_some(s)
        })
        .collect()
}

/// Keeps the most recent `max_len` input events of each session (the target
/// group is always kept).
pub fn truncate_sessions(sessions: Vec<RawSession>, max_len: usize) -> Vec<RawSession> {
    sessions
        .into_iter()
        .filter_map(|mut s| {
            let split = target_group_start(&s.events);
            if split > max_len {
                s.events.drain(..split - max_len);
            }
            (raw_macro_len(&s.events) >= 2).then_some(s)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitMode {
    #[default]
    Random,
    /// Orders sessions by their last timestamp; earliest sessions train.
    Chronological,
}

impl std::str::FromStr for SplitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Self::Random),
            "chrono" | "chronological" => Ok(Self::Chronological),
            other => Err(format!("unknown split mode {other:?} (expected random|chrono)")),
        }
    }
}

impl std::fmt::Display for SplitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Chronological => "chrono",
        })
    }
}

/// A session together with its merged view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub record: SessionRecord,
    pub view: MacroView,
}

impl Example {
    pub fn from_record(record: SessionRecord) -> Result<Self, DataError> {
        let view = make_macro_view(&record)?;
        Ok(Self { record, view })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub items: Vocabulary,
    pub ops: Vocabulary,
    pub train: Vec<Example>,
    pub validation: Vec<Example>,
    pub test: Vec<Example>,
}

impl DatasetSplit {
    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_ops(&self) -> usize {
        self.ops.len()
    }

    /// Operation vocabulary size including the reserved target-operation token.
    pub fn n_ops_aug(&self) -> usize {
        self.ops.len() + 1
    }

    /// Index of the token standing in for the unknown operation on the next item.
    pub fn target_op_token(&self) -> usize {
        self.ops.len()
    }

    pub fn find(&self, session_id: &str) -> Option<&Example> {
        self.train.iter().chain(&self.validation).chain(&self.test).find(|e| e.record.id == session_id)
    }
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.10, 0.20];

/// Splits sessions into train/validation/test, builds vocabularies from the
/// training portion and maps every session onto them.
///
/// Validation/test events on unknown items or operations are dropped; a
/// session whose target item is unknown is dropped entirely.
pub fn split_sessions(
    sessions: Vec<RawSession>,
    fractions: [f64; 3],
    seed: u64,
    mode: SplitMode,
) -> Result<DatasetSplit, DataError> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::BadFractions(fractions));
    }
    let n = sessions.len();
    if n < 3 {
        return Err(DataError::TooFewSessions(n));
    }
    let mut sessions = sessions;
    match mode {
        SplitMode::Random => sessions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        SplitMode::Chronological => sessions.sort_by_key(RawSession::last_timestamp),
    }
    let n_train = (fractions[0] * n as f64).round() as usize;
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let mut rest = sessions.split_off(n_train);
    let test_raw = rest.split_off(n_val);
    let (train_raw, val_raw) = (sessions, rest);

    let mut items = Vocabulary::new();
    let mut ops = Vocabulary::new();
    let mut train = Vec::with_capacity(train_raw.len());
    for s in train_raw {
        let events = s
            .events
            .iter()
            .map(|e| MicroBehavior {
                item: items.observe(&e.item),
                op: ops.observe(&e.operation),
                timestamp: e.timestamp,
            })
            .collect();
        train.push(Example::from_record(SessionRecord { id: s.id, events })?);
    }
    let map_held_out = |raw: Vec<RawSession>| -> Vec<Example> {
        raw.into_iter().filter_map(|s| map_unseen(&s, &items, &ops)).collect()
    };
    let validation = map_held_out(val_raw);
    let test = map_held_out(test_raw);
    Ok(DatasetSplit { items, ops, train, validation, test })
}

fn map_unseen(s: &RawSession, items: &Vocabulary, ops: &Vocabulary) -> Option<Example> {
    let split = target_group_start(&s.events);
    let target_item = items.get(&s.events[split].item)?;
    // the target's first operation must be known so the view can be rebuilt from the record
    ops.get(&s.events[split].operation)?;
    let known =
        |e: &RawEvent, item: usize| Some(MicroBehavior { item, op: ops.get(&e.operation)?, timestamp: e.timestamp });
    let mut events: Vec<MicroBehavior> =
        s.events[..split].iter().filter_map(|e| known(e, items.get(&e.item)?)).collect();
    if events.last().is_none_or(|e| e.item == target_item) {
        // nothing left, or the input would merge into the target group
        return None;
    }
    events.extend(s.events[split..].iter().filter_map(|e| known(e, target_item)));
    Example::from_record(SessionRecord { id: s.id.clone(), events }).ok()
}

/// Everything needed to go from raw sessions to a [`DatasetSplit`].
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub min_count: u64,
    pub max_len: usize,
    pub fractions: [f64; 3],
    pub split_mode: SplitMode,
    pub seed: u64,
    pub op_filter: Option<Vec<String>>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            min_count: 5,
            max_len: 50,
            fractions: DEFAULT_FRACTIONS,
            split_mode: SplitMode::Random,
            seed: 42,
            op_filter: None,
        }
    }
}

pub fn preprocess(raw: Vec<RawSession>, cfg: &PreprocessConfig) -> Result<DatasetSplit, DataError> {
    let mut sessions = raw;
    if let Some(keep) = &cfg.op_filter {
        let keep: HashSet<String> = keep.iter().cloned().collect();
        sessions = filter_operations(sessions, &keep);
    }
    sessions = filter_rare_items(sessions, cfg.min_count.max(1));
    sessions = truncate_sessions(sessions, cfg.max_len);
    split_sessions(sessions, cfg.fractions, cfg.seed, cfg.split_mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(items: &[usize], ops: &[usize]) -> SessionRecord {
        let events = items
            .iter()
            .zip(ops)
            .enumerate()
            .map(|(i, (&item, &op))| MicroBehavior { item, op, timestamp: i as i64 })
            .collect();
        SessionRecord { id: "s".into(), events }
    }

    fn raw(id: &str, items: &[&str]) -> RawSession {
        let events = items
            .iter()
            .enumerate()
            .map(|(i, it)| RawEvent { item: it.to_string(), operation: "click".into(), timestamp: i as i64 })
            .collect();
        RawSession { id: id.into(), events }
    }

    #[test]
    fn merges_the_worked_example() {
        // items v1..v4 -> 1..4, ops o1..o3 -> 1..3
        let r = record(&[1, 2, 3, 2, 2, 3, 3, 3, 4], &[1, 1, 1, 1, 2, 1, 2, 3, 1]);
        let v = make_macro_view(&r).unwrap();
        assert_eq!(v.items, vec![1, 2, 3, 2, 3]);
        assert_eq!(v.op_seqs, vec![vec![1], vec![1], vec![1], vec![1, 2], vec![1, 2, 3]]);
        assert_eq!(v.target_item, 4);
        assert_eq!(v.target_op, Some(1));
        assert_eq!(v.micro_len(), 8);
    }

    #[test]
    fn single_item_session_is_rejected() {
        assert!(make_macro_view(&record(&[1, 1], &[0, 1])).is_err());
    }

    #[test]
    fn no_repeats_keeps_items() {
        let v = make_macro_view(&record(&[5, 6, 7, 8], &[0, 1, 0, 2])).unwrap();
        assert_eq!(v.items, vec![5, 6, 7]);
        assert!(v.op_seqs.iter().all(|o| o.len() == 1));
        assert_eq!(v.target_item, 8);
        assert_eq!(v.target_op, Some(2));
    }

    #[test]
    fn target_group_is_whole_last_run() {
        let v = make_macro_view(&record(&[1, 2, 2, 2], &[0, 3, 1, 2])).unwrap();
        assert_eq!(v.items, vec![1]);
        assert_eq!(v.target_item, 2);
        assert_eq!(v.target_op, Some(3));
    }

    #[test]
    fn rare_item_threshold() {
        let mut sessions = Vec::new();
        for i in 0..49 {
            sessions.push(raw(&format!("r{i}"), &["common", "rare"]));
        }
        sessions.push(raw("x", &["common", "other"]));
        let out = filter_rare_items(sessions.clone(), 50);
        // "rare" has 49 occurrences, "other" 1: every session collapses to one item
        assert!(out.is_empty());
        let out = filter_rare_items(sessions.clone(), 49);
        assert_eq!(out.len(), 49);
        assert!(out.iter().flat_map(|s| &s.events).all(|e| e.item != "other"));
        assert_eq!(filter_rare_items(sessions.clone(), 1), sessions);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let sessions: Vec<_> = (0..10).map(|i| raw(&format!("s{i}"), &["a", "b", "c"])).collect();
        let a = split_sessions(sessions.clone(), DEFAULT_FRACTIONS, 7, SplitMode::Random).unwrap();
        assert_eq!((a.train.len(), a.validation.len(), a.test.len()), (7, 1, 2));
        let b = split_sessions(sessions.clone(), DEFAULT_FRACTIONS, 7, SplitMode::Random).unwrap();
        assert_eq!(a, b);
        let ids = |d: &DatasetSplit| d.train.iter().map(|e| e.record.id.clone()).collect::<Vec<_>>();
        let differs = (8..20).any(|seed| {
            let c = split_sessions(sessions.clone(), DEFAULT_FRACTIONS, seed, SplitMode::Random).unwrap();
            assert_eq!(c.train.len(), 7);
            ids(&c) != ids(&a)
        });
        assert!(differs);
    }

    #[test]
    fn too_few_sessions() {
        let sessions: Vec<_> = (0..2).map(|i| raw(&format!("s{i}"), &["a", "b"])).collect();
        assert!(matches!(
            split_sessions(sessions, DEFAULT_FRACTIONS, 0, SplitMode::Random),
            Err(DataError::TooFewSessions(2))
        ));
    }

    #[test]
    fn held_out_unknown_items_are_dropped() {
        let mut sessions: Vec<_> = (0..7).map(|i| raw(&format!("t{i}"), &["a", "b", "c"])).collect();
        // chrono split keeps file order when timestamps tie on the last event
        sessions.push(raw("v0", &["a", "zz", "b"]));
        sessions.push(raw("x0", &["a", "b", "zz"]));
        sessions.push(raw("x1", &["zz", "a", "c"]));
        let d = split_sessions(sessions, DEFAULT_FRACTIONS, 0, SplitMode::Chronological).unwrap();
        assert_eq!(d.validation.len(), 1);
        assert_eq!(d.validation[0].view.items, vec![d.items.get("a").unwrap()]);
        // x0's target is unknown, x1 loses its first event
        assert_eq!(d.test.len(), 1);
        assert_eq!(d.test[0].record.id, "x1");
        assert_eq!(d.test[0].view.items.len(), 1);
    }

    #[test]
    fn op_filter_preserves_targets() {
        let mut s = raw("s", &["a", "b", "c", "d"]);
        s.events[1].operation = "cart".into();
        s.events[3].operation = "cart".into();
        let keep: HashSet<String> = ["click".to_string()].into();
        let out = filter_operations(vec![s], &keep);
        let items: Vec<_> = out[0].events.iter().map(|e| e.item.as_str()).collect();
        assert_eq!(items, ["a", "c", "d"]);
    }

    #[test]
    fn truncation_keeps_recent_inputs_and_target() {
        let s = raw("s", &["a", "b", "c", "d", "e", "e"]);
        let out = truncate_sessions(vec![s], 2);
        let items: Vec<_> = out[0].events.iter().map(|e| e.item.as_str()).collect();
        assert_eq!(items, ["c", "d", "e", "e"]);
    }
}
