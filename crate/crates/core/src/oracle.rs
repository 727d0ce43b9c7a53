//! Centralized ground truth: exact distances, exact routing costs for
//! arbitrary subgraphs, exact minimum routing cost trees by enumeration
//! on small instances, and deterministic reference shortest-path trees.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::graph::{EdgeList, Graph, NodeId, TerminalSet};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("subgraph is disconnected")]
    Disconnected,
    #[error("enumeration budget exceeded: n={n}, m={m} (need n <= 9 or m <= 14)")]
    BudgetExceeded { n: u32, m: usize },
}

/// All-pairs shortest-path delay distances; `d[u][v]` is indexed by raw
/// IDs, row/column 0 unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    d: Vec<Vec<u64>>,
}

impl DistanceMatrix {
    pub fn get(&self, u: NodeId, v: NodeId) -> u64 {
        self.d[u as usize][v as usize]
    }

    pub fn n(&self) -> u32 {
        self.d.len() as u32 - 1
    }
}

fn dijkstra_over(n: u32, adj: &[Vec<(NodeId, u64)>], source: NodeId) -> Vec<u64> {
    let mut dist = vec![u64::MAX; n as usize + 1];
    dist[source as usize] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u as usize] {
            continue;
        }
        for &(v, w) in &adj[u as usize] {
            let nd = d + w;
            if nd < dist[v as usize] {
                dist[v as usize] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

fn adjacency_of_edges(n: u32, edges: &[(NodeId, NodeId, u64)]) -> Vec<Vec<(NodeId, u64)>> {
    let mut adj = vec![Vec::new(); n as usize + 1];
    for &(u, v, w) in edges {
        adj[u as usize].push((v, w));
        adj[v as usize].push((u, w));
    }
    adj
}

/// Exact distances on the whole graph.
pub fn apsp(graph: &Graph) -> DistanceMatrix {
    let n = graph.node_count();
    let adj: Vec<Vec<(NodeId, u64)>> = std::iter::once(Vec::new())
        .chain(
            graph
                .nodes()
                .map(|u| graph.neighbors(u).iter().map(|nb| (nb.id, nb.delay)).collect()),
        )
        .collect();
    let mut d = vec![vec![u64::MAX; n as usize + 1]];
    for u in graph.nodes() {
        d.push(dijkstra_over(n, &adj, u));
    }
    DistanceMatrix { d }
}

/// Exact distances on the subgraph given by `edges` over the same node
/// set. Errors if some pair of terminals-to-be is unreachable; callers
/// that pass spanning trees never hit this.
pub fn apsp_edges(n: u32, edges: &[(NodeId, NodeId, u64)]) -> Result<DistanceMatrix, OracleError> {
    let adj = adjacency_of_edges(n, edges);
    let mut d = vec![vec![u64::MAX; n as usize + 1]];
    for u in 1..=n {
        d.push(dijkstra_over(n, &adj, u));
    }
    Ok(DistanceMatrix { d })
}

/// Routing cost of the subgraph `edges` with respect to `S`: the sum of
/// shortest-path distances over all ordered terminal pairs.
pub fn rc_exact(
    n: u32,
    edges: &[(NodeId, NodeId, u64)],
    terminals: &TerminalSet,
) -> Result<u64, OracleError> {
    let adj = adjacency_of_edges(n, edges);
    let mut total: u64 = 0;
    for u in terminals.iter() {
        let dist = dijkstra_over(n, &adj, u);
        for v in terminals.iter() {
            if u == v {
                continue;
            }
            let d = dist[v as usize];
            if d == u64::MAX {
                return Err(OracleError::Disconnected);
            }
            total = total.checked_add(d).expect("routing cost overflow");
        }
    }
    Ok(total)
}

/// Routing cost of the whole graph with respect to `S`.
pub fn rc_graph(graph: &Graph, terminals: &TerminalSet) -> u64 {
    rc_exact(graph.node_count(), &graph.edges(), terminals).expect("graph is connected")
}

/// Single-source routing cost `SSRC_S(v)`: the sum of graph distances
/// from `v` to every terminal.
pub fn ssrc_exact(graph: &Graph, terminals: &TerminalSet, v: NodeId) -> u64 {
    let dist = graph.sssp(v);
    terminals.iter().map(|u| dist[u as usize]).sum()
}

/// Exact S-MRCT by enumerating all spanning trees (edge subsets of size
/// n-1 filtered by acyclicity). Only feasible on small inputs; the
/// budget is `n <= 9 or m <= 14`.
pub fn mrct_exact(
    graph: &Graph,
    terminals: &TerminalSet,
) -> Result<(EdgeList, u64), OracleError> {
    let n = graph.node_count();
    let edges = graph.edges();
    let m = edges.len();
    if n > 9 && m > 14 {
        return Err(OracleError::BudgetExceeded { n, m });
    }
    let k = n as usize - 1;
    let mut best: Option<(EdgeList, u64)> = None;
    let mut chosen = Vec::with_capacity(k);
    enumerate_subsets(&edges, k, 0, &mut chosen, &mut |subset| {
        if !is_spanning_tree(n, subset) {
            return;
        }
        let cost = rc_exact(n, subset, terminals).expect("spanning tree connects all terminals");
        match &best {
            Some((_, c)) if *c <= cost => {}
            _ => best = Some((subset.to_vec(), cost)),
        }
    });
    Ok(best.expect("connected graph has a spanning tree"))
}

fn enumerate_subsets(
    edges: &[(NodeId, NodeId, u64)],
    k: usize,
    start: usize,
    chosen: &mut Vec<(NodeId, NodeId, u64)>,
    visit: &mut impl FnMut(&[(NodeId, NodeId, u64)]),
) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    let need = k - chosen.len();
    for i in start..=edges.len().saturating_sub(need) {
        chosen.push(edges[i]);
        enumerate_subsets(edges, k, i + 1, chosen, visit);
        chosen.pop();
    }
}

fn is_spanning_tree(n: u32, edges: &[(NodeId, NodeId, u64)]) -> bool {
    if edges.len() != n as usize - 1 {
        return false;
    }
    let mut parent: Vec<u32> = (0..=n).collect();
    fn find(parent: &mut [u32], x: u32) -> u32 {
        let mut root = x;
        while parent[root as usize] != root {
            root = parent[root as usize];
        }
        let mut cur = x;
        while parent[cur as usize] != root {
            let next = parent[cur as usize];
            parent[cur as usize] = root;
            cur = next;
        }
        root
    }
    for &(u, v, _) in edges {
        let ru = find(&mut parent, u);
        let rv = find(&mut parent, v);
        if ru == rv {
            return false;
        }
        parent[ru as usize] = rv;
    }
    true
}

/// Counts the spanning trees of a small graph by the same enumeration the
/// exact oracle uses. Test support.
pub fn count_spanning_trees(graph: &Graph) -> Result<u64, OracleError> {
    let n = graph.node_count();
    let edges = graph.edges();
    if n > 9 && edges.len() > 14 {
        return Err(OracleError::BudgetExceeded { n, m: edges.len() });
    }
    let mut count = 0u64;
    let mut chosen = Vec::new();
    enumerate_subsets(&edges, n as usize - 1, 0, &mut chosen, &mut |subset| {
        if is_spanning_tree(n, subset) {
            count += 1;
        }
    });
    Ok(count)
}

/// Deterministic reference shortest-path tree rooted at `v`: Dijkstra
/// with ties broken toward the smaller parent ID. Returns the parent of
/// every node (`None` at the root).
pub fn bfs_tree_reference(graph: &Graph, v: NodeId) -> Vec<Option<NodeId>> {
    let dist = graph.sssp(v);
    let mut parent = vec![None; graph.node_count() as usize];
    for u in graph.nodes() {
        if u == v {
            continue;
        }
        let best = graph
            .neighbors(u)
            .iter()
            .filter(|nb| dist[nb.id as usize] + nb.delay == dist[u as usize])
            .map(|nb| nb.id)
            .min()
            .expect("connected graph");
        parent[u as usize - 1] = Some(best);
    }
    parent
}

/// Edge list of a tree given as a parent mapping.
pub fn tree_edges(graph: &Graph, parent: &[Option<NodeId>]) -> EdgeList {
    let mut edges = Vec::new();
    for u in graph.nodes() {
        if let Some(p) = parent[u as usize - 1] {
            let delay = graph
                .neighbors(u)
                .iter()
                .find(|nb| nb.id == p)
                .expect("parent is a neighbor")
                .delay;
            edges.push((u.min(p), u.max(p), delay));
        }
    }
    edges
}
