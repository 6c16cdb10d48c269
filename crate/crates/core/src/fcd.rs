//! Fixed-choice-design observation: every respondent names at most `k` of
//! their contacts, and a tie is observed if either side named the other.

use crate::graph::Graph;
use crate::rngcore::StreamKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationParams {
    pub k: usize,
    pub rng_seed: u64,
}

/// Node `i`'s nominations in preference order: a seeded shuffle of its
/// sorted neighbor list. Keeping the first `k` gives the truncated out-edges
/// and nests across `k` for a fixed seed.
pub fn nomination_order(g: &Graph, node: usize, rng_seed: u64) -> Vec<usize> {
    let mut order = g.neighbors(node).to_vec();
    StreamKey::new(rng_seed)
        .with("node", node as u64)
        .stream()
        .shuffle(&mut order);
    order
}

pub fn truncate(g: &Graph, params: TruncationParams) -> Graph {
    let mut edges = Vec::new();
    if params.k > 0 {
        for u in 0..g.n_nodes() {
            if g.degree(u) <= params.k {
                edges.extend(g.neighbors(u).iter().map(|&v| (u, v)));
            } else {
                let order = nomination_order(g, u, params.rng_seed);
                edges.extend(order[..params.k].iter().map(|&v| (u, v)));
            }
        }
    }
    g.with_edges(&edges)
        .expect("a subset of a simple graph's edges is simple")
}
