//! Undirected graph topology, weight vectors, and the exact BFS diameter
//! oracle that round bounds of the message-passing protocols are checked
//! against.
//!
//! Graphs are immutable after construction and validated eagerly: no
//! self-loops, no duplicate edges, connected. Connectivity is a hard
//! requirement of every spectral quantity downstream (the Fiedler value of a
//! disconnected graph is zero, which makes the condition number undefined).

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// Errors from graph parsing, validation, and weight-vector construction.
#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: expected \"{expected}\", got {got:?}")]
    Malformed {
        line: usize,
        expected: &'static str,
        got: String,
    },
    #[error("line {line}: self-loop at node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("line {line}: duplicate edge ({i}, {j})")]
    DuplicateEdge { line: usize, i: usize, j: usize },
    #[error("line {line}: node index {node} out of range 1..={n}")]
    IndexOutOfRange { line: usize, node: usize, n: usize },
    #[error("graph is disconnected: node {node} unreachable from node 0")]
    Disconnected { node: usize },
    #[error("graph must have at least one node")]
    Empty,
    #[error("weight vector has length {got}, expected {expected}")]
    WeightLength { got: usize, expected: usize },
    #[error("weight[{index}] = {value} is negative")]
    NegativeWeight { index: usize, value: f64 },
}

/// Connected undirected graph with 0-based node ids.
///
/// Edges are stored as (i, j) with i < j in insertion order; per-node
/// neighbor lists are sorted ascending so that any iteration over neighbors
/// is deterministic (floating-point sums over neighbors must not depend on
/// construction order).
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from 0-based edge pairs, validating every invariant.
    pub fn from_edges(n: usize, pairs: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut edges = Vec::with_capacity(pairs.len());
        let mut adj = vec![Vec::new(); n];
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let line = k + 2; // mirrors the file format: header is line 1
            if a >= n || b >= n {
                return Err(GraphError::IndexOutOfRange {
                    line,
                    node: a.max(b) + 1,
                    n,
                });
            }
            if a == b {
                return Err(GraphError::SelfLoop { line, node: a + 1 });
            }
            let (i, j) = (a.min(b), a.max(b));
            if adj[i].contains(&j) {
                return Err(GraphError::DuplicateEdge {
                    line,
                    i: i + 1,
                    j: j + 1,
                });
            }
            adj[i].push(j);
            adj[j].push(i);
            edges.push((i, j));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let g = Graph { n, edges, adj };
        if let Some(node) = g.first_unreachable() {
            return Err(GraphError::Disconnected { node });
        }
        Ok(g)
    }

    /// Parses the edge-list document format: first line "N M", then M lines
    /// "i j" with 1-based node indices.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(GraphError::Malformed {
            line: 1,
            expected: "N M",
            got: String::new(),
        })?;
        let (n, m) = parse_pair(header, 1, "N M")?;
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut pairs = Vec::with_capacity(m);
        for _ in 0..m {
            let (idx, l) = lines.next().ok_or(GraphError::Malformed {
                line: m + 1,
                expected: "i j",
                got: String::new(),
            })?;
            let line = idx + 1;
            let (a, b) = parse_pair(l, line, "i j")?;
            if a == 0 || b == 0 || a > n || b > n {
                return Err(GraphError::IndexOutOfRange {
                    line,
                    node: if a == 0 || a > n { a } else { b },
                    n,
                });
            }
            pairs.push((a - 1, b - 1));
        }
        // from_edges reports 0-based validation errors with line = index + 2,
        // which matches the document layout exactly.
        Self::from_edges(n, &pairs)
    }

    /// Complete graph on n nodes.
    pub fn complete(n: usize) -> Self {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((i, j));
            }
        }
        Self::from_edges(n, &pairs).expect("complete graph is valid")
    }

    /// Path graph 0 - 1 - ... - (n-1).
    pub fn path(n: usize) -> Self {
        let pairs: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Self::from_edges(n, &pairs).expect("path graph is valid")
    }

    /// Star with node 0 at the center and n-1 leaves.
    pub fn star(n: usize) -> Self {
        let pairs: Vec<_> = (1..n).map(|i| (0, i)).collect();
        Self::from_edges(n, &pairs).expect("star graph is valid")
    }

    /// Cycle on n >= 3 nodes.
    pub fn cycle(n: usize) -> Self {
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &pairs).expect("cycle graph is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as (i, j) with i < j, in construction (file) order; this order
    /// indexes EdgeWeights.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list of node i.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// Exact graph diameter by all-pairs BFS. Oracle for every protocol
    /// round bound; O(n * (n + m)), fine at the sizes simulated here.
    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|s| *self.bfs_dist(s).iter().max().expect("n >= 1"))
            .max()
            .expect("n >= 1")
    }

    fn bfs_dist(&self, s: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        dist
    }

    fn first_unreachable(&self) -> Option<usize> {
        self.bfs_dist(0).iter().position(|&d| d == usize::MAX)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n, self.edges.len())?;
        for &(i, j) in &self.edges {
            writeln!(f, "{} {}", i + 1, j + 1)?;
        }
        Ok(())
    }
}

fn parse_pair(l: &str, line: usize, expected: &'static str) -> Result<(usize, usize), GraphError> {
    let mut it = l.split_whitespace();
    let err = || GraphError::Malformed {
        line,
        expected,
        got: l.trim().to_string(),
    };
    let a = it.next().ok_or_else(err)?.parse().map_err(|_| err())?;
    let b = it.next().ok_or_else(err)?.parse().map_err(|_| err())?;
    if it.next().is_some() {
        return Err(err());
    }
    Ok((a, b))
}

/// Per-node non-negative weight multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeWeights(Vec<f64>);

impl NodeWeights {
    pub fn new(w: Vec<f64>) -> Result<Self, GraphError> {
        validate_nonnegative(&w)?;
        Ok(NodeWeights(w))
    }

    /// All-ones weights: the unweighted Laplacian.
    pub fn unit(n: usize) -> Self {
        NodeWeights(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-edge non-negative weights, indexed in `Graph::edges()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights(Vec<f64>);

impl EdgeWeights {
    pub fn new(w: Vec<f64>) -> Result<Self, GraphError> {
        validate_nonnegative(&w)?;
        Ok(EdgeWeights(w))
    }

    pub fn unit(m: usize) -> Self {
        EdgeWeights(vec![1.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn validate_nonnegative(w: &[f64]) -> Result<(), GraphError> {
    for (index, &value) in w.iter().enumerate() {
        if !(value >= 0.0) {
            return Err(GraphError::NegativeWeight { index, value });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::bench7;

    #[test]
    fn parses_p3_with_expected_neighbor_lists() {
        let g = Graph::parse("3 2\n1 2\n2 3").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn parses_bench7_with_expected_degree_sequence() {
        let text = "7 12\n1 4\n4 7\n7 2\n2 5\n5 3\n1 6\n6 2\n4 3\n3 6\n6 7\n2 4\n4 6\n";
        let g = Graph::parse(text).unwrap();
        let degrees: Vec<_> = (0..7).map(|i| g.degree(i)).collect();
        assert_eq!(degrees, vec![2, 4, 3, 5, 2, 5, 3]);
        assert_eq!(g, bench7());
    }

    #[test]
    fn rejects_self_loop_naming_the_line() {
        let err = Graph::parse("2 1\n1 1").unwrap_err();
        assert_eq!(err, GraphError::SelfLoop { line: 2, node: 1 });
    }

    #[test]
    fn rejects_duplicate_edge_naming_the_line() {
        let err = Graph::parse("3 3\n1 2\n2 3\n2 1").unwrap_err();
        assert_eq!(err, GraphError::DuplicateEdge { line: 4, i: 1, j: 2 });
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = Graph::parse("3 2\n1 2\n2 4").unwrap_err();
        assert_eq!(
            err,
            GraphError::IndexOutOfRange {
                line: 3,
                node: 4,
                n: 3
            }
        );
    }

    #[test]
    fn rejects_disconnected_graph() {
        let err = Graph::parse("4 2\n1 2\n3 4").unwrap_err();
        assert!(matches!(err, GraphError::Disconnected { .. }));
    }

    #[test]
    fn rejects_malformed_header_and_lines() {
        assert!(matches!(
            Graph::parse("nope"),
            Err(GraphError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            Graph::parse("2 1\n1"),
            Err(GraphError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            Graph::parse("2 1\n1 2 3"),
            Err(GraphError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn display_round_trips_through_parse() {
        let g = bench7();
        let again = Graph::parse(&g.to_string()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn diameter_matches_hand_values() {
        assert_eq!(Graph::path(3).diameter(), 2);
        assert_eq!(Graph::complete(3).diameter(), 1);
        assert_eq!(Graph::star(4).diameter(), 2);
        assert_eq!(Graph::cycle(6).diameter(), 3);
        assert_eq!(Graph::path(10).diameter(), 9);
        // Pinned fixture constant: dist(node 5, node 1) = 3 in 1-based ids.
        assert_eq!(bench7().diameter(), 3);
    }

    #[test]
    fn neighbor_lists_are_sorted_and_symmetric() {
        let g = bench7();
        for i in 0..g.n() {
            let ns = g.neighbors(i);
            assert!(ns.windows(2).all(|w| w[0] < w[1]));
            for &j in ns {
                assert!(g.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn weight_vectors_reject_negatives() {
        assert!(NodeWeights::new(vec![1.0, -0.1]).is_err());
        assert!(EdgeWeights::new(vec![0.0, 2.0]).is_ok());
        assert!(NodeWeights::new(vec![f64::NAN]).is_err());
    }
}
