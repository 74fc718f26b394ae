//! Generated corpora for smoke tests and sanity experiments.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetSplit, Example, MicroBehavior, SessionRecord, Vocabulary};

#[derive(Clone, Debug, PartialEq)]
pub struct MemorizationConfig {
    pub n_items: usize,
    pub n_ops: usize,
    /// Pairs with identical item sequences that differ only in operations.
    pub twin_pairs: usize,
    /// Additional sessions with unique item sequences.
    pub singles: usize,
    pub seed: u64,
}

impl Default for MemorizationConfig {
    fn default() -> Self {
        Self { n_items: 20, n_ops: 4, twin_pairs: 60, singles: 80, seed: 7 }
    }
}

/// A corpus where every session's target is fixed by its full (item,
/// operation) pattern.
#[derive(Clone, Debug)]
pub struct MemorizationCorpus {
    /// Everything in `train`; validation and test are empty.
    pub data: DatasetSplit,
    /// Sessions whose item sequence is shared with a twin that has a
    /// different target.
    pub twin_ids: HashSet<String>,
}

impl MemorizationCorpus {
    pub fn twins(&self) -> Vec<Example> {
        self.data.train.iter().filter(|e| self.twin_ids.contains(&e.record.id)).cloned().collect()
    }
}

fn vocab(prefix: &str, n: usize) -> Vocabulary {
    let mut v = Vocabulary::new();
    for i in 0..n {
        v.insert_new(format!("{prefix}{i}"), 0);
    }
    v
}

fn random_items(rng: &mut ChaCha8Rng, n_items: usize) -> Vec<usize> {
    let len = rng.gen_range(3..=4);
    let mut items: Vec<usize> = Vec::with_capacity(len);
    while items.len() < len {
        let i = rng.gen_range(0..n_items);
        if items.last() != Some(&i) {
            items.push(i);
        }
    }
    items
}

fn random_ops(rng: &mut ChaCha8Rng, lens: &[usize], n_ops: usize) -> Vec<Vec<usize>> {
    lens.iter().map(|&k| (0..k).map(|_| rng.gen_range(0..n_ops)).collect()).collect()
}

fn to_record(id: String, items: &[usize], ops: &[Vec<usize>], target: usize) -> SessionRecord {
    let mut events = Vec::new();
    for (&item, group) in items.iter().zip(ops) {
        for &op in group {
            events.push(MicroBehavior { item, op, timestamp: events.len() as i64 });
        }
    }
    events.push(MicroBehavior { item: target, op: 0, timestamp: events.len() as i64 });
    SessionRecord { id, events }
}

/// Target for a pattern: a fixed hash of it, skipping the last input item so
/// the target never merges into the input.
fn target_of(items: &[usize], ops: &[Vec<usize>], n_items: usize) -> usize {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |x: usize| {
        h ^= (x as u64).wrapping_add(1);
        h = h.wrapping_mul(0x100_0000_01b3);
    };
    for (&i, g) in items.iter().zip(ops) {
        feed(i);
        g.iter().for_each(|&o| feed(1000 + o));
        feed(usize::MAX);
    }
    let t = (h % (n_items as u64 - 1)) as usize;
    let last = *items.last().unwrap();
    if t >= last {
        t + 1
    } else {
        t
    }
}

pub fn memorization_corpus(cfg: &MemorizationConfig) -> MemorizationCorpus {
    assert!(cfg.n_items >= 3 && cfg.n_ops >= 2, "corpus needs at least 3 items and 2 operations");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used_items: HashSet<Vec<usize>> = HashSet::new();
    let mut fresh_items = |rng: &mut ChaCha8Rng| loop {
        let items = random_items(rng, cfg.n_items);
        if used_items.insert(items.clone()) {
            return items;
        }
    };
    let mut train = Vec::new();
    let mut twin_ids = HashSet::new();
    for p in 0..cfg.twin_pairs {
        let items = fresh_items(&mut rng);
        let lens: Vec<usize> = items.iter().map(|_| rng.gen_range(1..=2)).collect();
        let ops_a = random_ops(&mut rng, &lens, cfg.n_ops);
        let target_a = target_of(&items, &ops_a, cfg.n_items);
        let ops_b = loop {
            let ops = random_ops(&mut rng, &lens, cfg.n_ops);
            if target_of(&items, &ops, cfg.n_items) != target_a {
                break ops;
            }
        };
        let target_b = target_of(&items, &ops_b, cfg.n_items);
        for (tag, ops, target) in [("a", &ops_a, target_a), ("b", &ops_b, target_b)] {
            let id = format!("twin{p}{tag}");
            twin_ids.insert(id.clone());
            train.push(to_record(id, &items, ops, target));
        }
    }
    for s in 0..cfg.singles {
        let items = fresh_items(&mut rng);
        let lens: Vec<usize> = items.iter().map(|_| rng.gen_range(1..=2)).collect();
        let ops = random_ops(&mut rng, &lens, cfg.n_ops);
        let target = target_of(&items, &ops, cfg.n_items);
        train.push(to_record(format!("single{s}"), &items, &ops, target));
    }
    let train = train.into_iter().map(|r| Example::from_record(r).expect("generated sessions are valid")).collect();
    let data = DatasetSplit {
        items: vocab("i", cfg.n_items),
        ops: vocab("o", cfg.n_ops),
        train,
        validation: Vec::new(),
        test: Vec::new(),
    };
    MemorizationCorpus { data, twin_ids }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogConfig {
    pub sessions: usize,
    pub n_items: usize,
    pub operations: Vec<String>,
    /// Micro-behaviors per session, inclusive range.
    pub min_events: usize,
    pub max_events: usize,
    /// Never let the final item occur earlier in the session.
    pub fresh_targets: bool,
    pub seed: u64,
}

impl Default for LogConfig {
    fn default() -> Self {
        Self {
            sessions: 500,
            n_items: 60,
            operations: ["click", "detail", "cart", "read_comments"].map(String::from).to_vec(),
            min_events: 3,
            max_events: 12,
            fresh_targets: false,
            seed: 1,
        }
    }
}

/// A tab-separated `session item operation timestamp` log with a header.
/// Item popularity is skewed (squared uniform) and sessions revisit items.
pub fn random_log(cfg: &LogConfig) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = String::from("session_id\titem_id\toperation\ttimestamp\n");
    let mut clock: i64 = 1_600_000_000_000;
    for s in 0..cfg.sessions {
        let n = rng.gen_range(cfg.min_events..=cfg.max_events.max(cfg.min_events));
        let mut events: Vec<usize> = Vec::with_capacity(n);
        while events.len() < n {
            let item = if !events.is_empty() && rng.gen_bool(0.4) {
                *events.choose(&mut rng).unwrap()
            } else {
                let u: f64 = rng.gen();
                ((u * u) * cfg.n_items as f64) as usize
            };
            events.push(item);
        }
        if cfg.fresh_targets {
            let input = &events[..n - 1];
            let candidates: Vec<usize> = (0..cfg.n_items).filter(|i| !input.contains(i)).collect();
            if let Some(&t) = candidates.choose(&mut rng) {
                events[n - 1] = t;
            }
        }
        for item in events {
            clock += rng.gen_range(1_000..60_000);
            let op = cfg.operations.choose(&mut rng).map_or("click", String::as_str);
            writeln!(out, "s{s}\t{item}\t{op}\t{clock}").unwrap();
        }
    }
    out
}
