use std::collections::HashMap;

/// Dense bijection between retained raw tokens and `0..len()`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the token's index, inserting it if new, and bumps its count.
    pub fn observe(&mut self, token: &str) -> usize {
        let idx = match self.index.get(token) {
            Some(&i) => i,
            None => self.insert_new(token.to_string(), 0),
        };
        self.counts[idx] += 1;
        idx
    }

    pub(crate) fn insert_new(&mut self, token: String, count: u64) -> usize {
        let idx = self.tokens.len();
        self.index.insert(token.clone(), idx);
        self.tokens.push(token);
        self.counts.push(count);
        idx
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> Option<&str> {
        self.tokens.get(idx).map(String::as_str)
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts.get(idx).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_dense_and_invertible() {
        let mut v = Vocabulary::new();
        for t in ["b", "a", "b", "c", "a", "b"] {
            v.observe(t);
        }
        assert_eq!(v.len(), 3);
        for i in 0..v.len() {
            assert_eq!(v.get(v.token(i).unwrap()), Some(i));
        }
        assert_eq!(v.count(v.get("b").unwrap()), 3);
        assert_eq!(v.get("zzz"), None);
    }
}
