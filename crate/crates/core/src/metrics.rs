//! Ranking metrics: hit rate H@K and mean reciprocal rank M@K.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::Example;

pub const DEFAULT_KS: [usize; 5] = [1, 3, 5, 10, 20];

/// 1 when the target is within the top `k`.
pub fn hit_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// `1/rank` within the top `k`, else 0.
pub fn mrr_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / rank as f64
    } else {
        0.0
    }
}

/// 1-based rank of `target` under descending score, ties going to the lower
/// item index. NaN scores rank below everything.
pub fn rank_of_target(scores: &[f64], target: usize) -> usize {
    let t = scores[target];
    let beats = |i: usize, s: f64| {
        if t.is_nan() {
            !s.is_nan() || i < target
        } else {
            s > t || (s == t && i < target)
        }
    };
    1 + scores.iter().enumerate().filter(|&(i, &s)| i != target && beats(i, s)).count()
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty split")]
    EmptySplit,
    #[error("K list is empty or contains 0")]
    BadK,
    #[error("scorer failed on session {session}: {message}")]
    Scorer { session: String, message: String },
}

/// Averages over sessions, as percentages.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub hit: Vec<f64>,
    pub mrr: Vec<f64>,
    pub sessions: usize,
    /// Per-session rank, in split order.
    pub ranks: Vec<usize>,
}

impl EvalReport {
    pub fn from_ranks(ranks: Vec<usize>, ks: &[usize]) -> Result<Self, EvalError> {
        if ranks.is_empty() {
            return Err(EvalError::EmptySplit);
        }
        if ks.is_empty() || ks.contains(&0) {
            return Err(EvalError::BadK);
        }
        let n = ranks.len() as f64;
        let avg = |f: fn(usize, usize) -> f64, k: usize| 100.0 * ranks.iter().map(|&r| f(r, k)).sum::<f64>() / n;
        Ok(Self {
            ks: ks.to_vec(),
            hit: ks.iter().map(|&k| avg(hit_at_k, k)).collect(),
            mrr: ks.iter().map(|&k| avg(mrr_at_k, k)).collect(),
            sessions: ranks.len(),
            ranks,
        })
    }

    pub fn hit_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.hit[i])
    }

    pub fn mrr_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mrr[i])
    }

    /// `{"H@1": 12.34, ..., "M@1": 12.34, ...}` with two decimals.
    pub fn to_json(&self) -> String {
        let mut parts = Vec::new();
        for (k, h) in self.ks.iter().zip(&self.hit) {
            parts.push(format!("\"H@{k}\": {h:.2}"));
        }
        for (k, m) in self.ks.iter().zip(&self.mrr) {
            parts.push(format!("\"M@{k}\": {m:.2}"));
        }
        format!("{{{}}}", parts.join(", "))
    }

    /// `rank` per line, for offline inspection.
    pub fn ranks_text(&self) -> String {
        let mut out = String::new();
        for r in &self.ranks {
            writeln!(out, "{r}").unwrap();
        }
        out
    }
}

/// Scores every example with `scorer` (in parallel) and ranks its target.
pub fn evaluate<F>(examples: &[Example], ks: &[usize], scorer: F) -> Result<EvalReport, EvalError>
where
    F: Fn(&Example) -> Result<Vec<f64>, String> + Sync,
{
    if examples.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let ranks = examples
        .par_iter()
        .map(|ex| {
            let scores = scorer(ex).map_err(|message| EvalError::Scorer { session: ex.record.id.clone(), message })?;
            Ok(rank_of_target(&scores, ex.view.target_item))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    EvalReport::from_ranks(ranks, ks)
}
