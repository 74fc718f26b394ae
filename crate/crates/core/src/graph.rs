//! Session multigraph with ordered parallel edges, and the dyadic relation
//! index matrix used by the operation-aware attention.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::data::MacroView;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("operation {op} out of range for {n_ops} operations")]
    OpOutOfRange { op: usize, n_ops: usize },
}

/// One transition `items[order-1] → items[order]` of the macro sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    /// 1-based occurrence order.
    pub order: usize,
    /// 0-based macro positions of the endpoints; `dst_pos == src_pos + 1`.
    pub src_pos: usize,
    pub dst_pos: usize,
}

/// Directed multigraph over a session's distinct items.
///
/// The star node is implicit: it connects to every satellite node and is
/// handled separately by the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionMultigraph {
    nodes: Vec<usize>,
    node_of: Vec<usize>,
    edges: Vec<Edge>,
}

impl SessionMultigraph {
    pub fn build(view: &MacroView) -> Self {
        Self::from_items(&view.items)
    }

    pub fn from_items(items: &[usize]) -> Self {
        let mut nodes = Vec::new();
        let mut index: HashMap<usize, usize> = HashMap::new();
        let node_of: Vec<usize> = items
            .iter()
            .map(|&item| {
                *index.entry(item).or_insert_with(|| {
                    nodes.push(item);
                    nodes.len() - 1
                })
            })
            .collect();
        let edges = node_of
            .windows(2)
            .enumerate()
            .map(|(i, w)| Edge { src: w[0], dst: w[1], order: i + 1, src_pos: i, dst_pos: i + 1 })
            .collect();
        Self { nodes, node_of, edges }
    }

    /// Item ids of the satellite nodes, first-occurrence order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Node index of each macro position.
    pub fn node_of(&self) -> &[usize] {
        &self.node_of
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn incoming(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dst == node)
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.src == node)
    }

    /// `src dst order` lines (item ids) preceded by a `node <index> <item>` table.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, item) in self.nodes.iter().enumerate() {
            writeln!(out, "node {i} {item}").unwrap();
        }
        for e in &self.edges {
            writeln!(out, "{} {} {}", self.nodes[e.src], self.nodes[e.dst], e.order).unwrap();
        }
        out
    }
}

/// Index of the ordered operation pair `(op_i, op_j)` in the dyadic table.
pub fn dyadic_index(op_i: usize, op_j: usize, n_ops: usize) -> Result<usize, GraphError> {
    for op in [op_i, op_j] {
        if op >= n_ops {
            return Err(GraphError::OpOutOfRange { op, n_ops });
        }
    }
    Ok(op_i * n_ops + op_j)
}

/// Square matrix of dyadic indices over an attention input's operations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationMatrix {
    size: usize,
    indices: Vec<usize>,
}

impl RelationMatrix {
    /// `ops` lists the operation of every attention slot, star token last.
    pub fn build(ops: &[usize], n_ops_aug: usize) -> Result<Self, GraphError> {
        let size = ops.len();
        let mut indices = Vec::with_capacity(size * size);
        for &oi in ops {
            for &oj in ops {
                indices.push(dyadic_index(oi, oj, n_ops_aug)?);
            }
        }
        Ok(Self { size, indices })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.indices[i * self.size + j]
    }

    /// Row-major flattened indices.
    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_has_parallel_edges() {
        // v1..v4 -> 1..4
        let g = SessionMultigraph::from_items(&[1, 2, 3, 2, 3, 4]);
        assert_eq!(g.nodes(), &[1, 2, 3, 4]);
        let pairs: Vec<_> = g.edges().iter().map(|e| (g.nodes()[e.src], g.nodes()[e.dst], e.order)).collect();
        assert_eq!(pairs, vec![(1, 2, 1), (2, 3, 2), (3, 2, 3), (2, 3, 4), (3, 4, 5)]);
        let node_v2 = 1;
        assert_eq!(g.incoming(node_v2).count(), 2);
        assert_eq!(g.outgoing(node_v2).count(), 2);
    }

    #[test]
    fn two_items() {
        let g = SessionMultigraph::from_items(&[7, 9]);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn back_and_forth() {
        let g = SessionMultigraph::from_items(&[5, 6, 5]);
        // brute force: consecutive pairs of the sequence
        let seq = [5, 6, 5];
        let expected: Vec<_> = seq.windows(2).enumerate().map(|(i, w)| (w[0], w[1], i + 1)).collect();
        let got: Vec<_> = g.edges().iter().map(|e| (g.nodes()[e.src], g.nodes()[e.dst], e.order)).collect();
        assert_eq!(g.node_count(), 2);
        assert_eq!(got, expected);
    }

    #[test]
    fn dyadic_index_is_a_bijection() {
        let n = 4;
        let mut seen = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                let k = dyadic_index(i, j, n).unwrap();
                assert!(!seen[k]);
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(dyadic_index(0, 0, 10).unwrap(), 0);
        assert_eq!(dyadic_index(9, 9, 10).unwrap() + 1, 100);
        assert!(dyadic_index(4, 0, 4).is_err());
    }

    #[test]
    fn relation_matrix_unrolled() {
        let m = RelationMatrix::build(&[1, 2], 3).unwrap();
        assert_eq!(m.as_slice(), &[4, 5, 7, 8]);
        assert_eq!(m.get(1, 0), dyadic_index(2, 1, 3).unwrap());
    }

    #[test]
    fn edge_list_export() {
        let g = SessionMultigraph::from_items(&[3, 8, 3]);
        assert_eq!(g.to_edge_list(), "node 0 3\nnode 1 8\n3 8 1\n8 3 2\n");
    }
}
