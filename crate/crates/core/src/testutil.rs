//! Shared fixtures for the crate's test modules.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

/// The bundled 7-node, 12-edge benchmark topology (0-based pairs, file
/// order). Degree sequence (2, 4, 3, 5, 2, 5, 3), diameter 3.
pub fn bench7() -> Graph {
    Graph::from_edges(
        7,
        &[
            (0, 3),
            (3, 6),
            (6, 1),
            (1, 4),
            (4, 2),
            (0, 5),
            (5, 1),
            (2, 3),
            (2, 5),
            (5, 6),
            (1, 3),
            (3, 5),
        ],
    )
    .unwrap()
}

/// Random connected graph on 2..=max_n nodes: a random spanning tree plus a
/// random sprinkling of extra edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, max_n: usize) -> Graph {
    let n = rng.random_range(2..=max_n);
    let mut pairs = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.push((u, v));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if !pairs.contains(&(i, j)) && rng.random_bool(0.3) {
                pairs.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &pairs).expect("spanning tree guarantees connectivity")
}
