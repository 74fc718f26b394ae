//! Non-neural reference scorers: session popularity (S-POP) and session kNN.

use std::collections::HashMap;

use crate::data::{Example, MacroView};

/// Training-set item counts (inputs and targets).
#[derive(Clone, Debug, PartialEq)]
pub struct Popularity {
    counts: Vec<u64>,
}

impl Popularity {
    pub fn from_examples(train: &[Example], n_items: usize) -> Self {
        let mut counts = vec![0; n_items];
        for ex in train {
            for e in &ex.record.events {
                counts[e.item] += 1;
            }
        }
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

/// In-session items ordered by frequency, then recency, then global
/// popularity, then index.
pub fn spop_in_session(view: &MacroView, pop: &Popularity) -> Vec<usize> {
    // item -> (micro-behavior count, last position)
    let mut stats: HashMap<usize, (usize, usize)> = HashMap::new();
    for (pos, item, _) in view.micro_behaviors() {
        let s = stats.entry(item).or_insert((0, 0));
        s.0 += 1;
        s.1 = pos;
    }
    let mut items: Vec<usize> = stats.keys().copied().collect();
    items.sort_by(|a, b| {
        let (sa, sb) = (stats[a], stats[b]);
        sb.0.cmp(&sa.0).then(sb.1.cmp(&sa.1)).then(pop.counts[*b].cmp(&pop.counts[*a])).then(a.cmp(b))
    });
    items
}

/// Full S-POP score vector: in-session items first, the rest by popularity.
pub fn spop_predict(view: &MacroView, pop: &Popularity) -> Vec<f64> {
    let n = pop.counts.len();
    let mut order = spop_in_session(view, pop);
    let mut seen = vec![false; n];
    for &i in &order {
        seen[i] = true;
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    rest.sort_by(|a, b| pop.counts[*b].cmp(&pop.counts[*a]).then(a.cmp(b)));
    order.extend(rest);
    let mut scores = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        scores[i] = (n - rank) as f64;
    }
    scores
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SknnConfig {
    pub k_neighbors: usize,
    /// Only the most recent sessions are candidate neighbors.
    pub pool_size: usize,
    /// Zero the scores of items already in the query session.
    pub exclude_session_items: bool,
}

impl Default for SknnConfig {
    fn default() -> Self {
        Self { k_neighbors: 500, pool_size: 5000, exclude_session_items: false }
    }
}

/// Session kNN over binary item sets with cosine similarity.
#[derive(Clone, Debug)]
pub struct Sknn {
    config: SknnConfig,
    n_items: usize,
    /// Sorted, deduplicated item set per pooled session (input plus target).
    sessions: Vec<Vec<usize>>,
    /// item -> pooled sessions containing it.
    index: Vec<Vec<usize>>,
}

impl Sknn {
    pub fn new(train: &[Example], n_items: usize, config: SknnConfig) -> Result<Self, String> {
        if config.k_neighbors == 0 {
            return Err("k_neighbors must be at least 1".into());
        }
        let mut by_time: Vec<&Example> = train.iter().collect();
        // most recent first; stable so equal timestamps keep input order
        by_time.sort_by_key(|e| std::cmp::Reverse(e.record.events.last().map_or(i64::MIN, |m| m.timestamp)));
        by_time.truncate(config.pool_size);
        let sessions: Vec<Vec<usize>> = by_time
            .iter()
            .map(|e| {
                let mut s: Vec<usize> = e.record.events.iter().map(|m| m.item).collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        let mut index = vec![Vec::new(); n_items];
        for (j, s) in sessions.iter().enumerate() {
            for &i in s {
                index[i].push(j);
            }
        }
        Ok(Self { config, n_items, sessions, index })
    }

    /// `(pool index, similarity)` of the top neighbors, best first.
    pub fn neighbors(&self, view: &MacroView) -> Vec<(usize, f64)> {
        let mut query = view.items.clone();
        query.sort_unstable();
        query.dedup();
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for &i in &query {
            for &j in &self.index[i] {
                *overlap.entry(j).or_default() += 1;
            }
        }
        let mut sims: Vec<(usize, f64)> = overlap
            .into_iter()
            .map(|(j, c)| (j, c as f64 / ((query.len() * self.sessions[j].len()) as f64).sqrt()))
            .collect();
        sims.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        sims.truncate(self.config.k_neighbors);
        sims
    }

    pub fn predict(&self, view: &MacroView) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_items];
        for (j, sim) in self.neighbors(view) {
            for &i in &self.sessions[j] {
                scores[i] += sim;
            }
        }
        if self.config.exclude_session_items {
            for &i in &view.items {
                scores[i] = 0.0;
            }
        }
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{MicroBehavior, SessionRecord};

    fn example(id: &str, items: &[usize], t: i64) -> Example {
        let events = items.iter().map(|&item| MicroBehavior { item, op: 0, timestamp: t }).collect();
        Example::from_record(SessionRecord { id: id.into(), events }).unwrap()
    }

    #[test]
    fn spop_frequency_first() {
        // a b b c -> target d
        let ex = example("s", &[0, 1, 1, 2, 3], 0);
        let pop = Popularity { counts: vec![9, 0, 5, 1] };
        assert_eq!(spop_in_session(&ex.view, &pop), vec![1, 2, 0]);
        let s = spop_predict(&ex.view, &pop);
        assert!(s[1] > s[2] && s[2] > s[0] && s[0] > s[3]);
    }

    #[test]
    fn sknn_identical_session_is_top_neighbor() {
        let train = vec![example("a", &[0, 1, 2], 1), example("b", &[0, 3], 2), example("c", &[4, 5], 3)];
        let knn = Sknn::new(&train, 6, SknnConfig::default()).unwrap();
        let q = example("q", &[0, 1, 2, 5], 4);
        let n = knn.neighbors(&q.view);
        assert_eq!(n.len(), 2);
        assert_eq!(n[0].1, 1.0);
        assert_eq!(knn.sessions[n[0].0], vec![0, 1, 2]);
        let s = knn.predict(&q.view);
        assert_eq!(s[4], 0.0);
        assert!(s[3] > 0.0);
    }

    #[test]
    fn sknn_disjoint_scores_zero() {
        let train = vec![example("a", &[0, 1], 1), example("b", &[1, 2], 2)];
        let knn = Sknn::new(&train, 6, SknnConfig::default()).unwrap();
        assert!(knn.predict(&example("q", &[4, 5, 3], 0).view).iter().all(|&s| s == 0.0));
    }
}
