//! Graph representation, generators and edge-list I/O shared by the
//! simulator and the oracles.
//!
//! Nodes carry IDs `1..=n`. Every edge has a positive integer delay; a
//! delay of 1 on every edge is the unweighted case.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Node identifier, `1..=n`.
pub type NodeId = u32;

/// Undirected edges as `(u, v, delay)` triples with `u < v`.
pub type EdgeList = Vec<(NodeId, NodeId, u64)>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph needs at least {min} nodes, got {got}")]
    InvalidSize { min: u32, got: u32 },
    #[error("edge probability must satisfy 0 < p <= 1, got {0}")]
    InvalidProbability(f64),
    #[error("max_delay must be >= 1")]
    InvalidMaxDelay,
    #[error("no connected graph found after {0} attempts")]
    GenerationFailure(u32),
    #[error("node id {0} out of range 1..={1}")]
    NodeOutOfRange(NodeId, u32),
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge ({0}, {1}) has delay {2}, must be >= 1")]
    BadDelay(NodeId, NodeId, u64),
    #[error("graph is not connected")]
    Disconnected,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("terminal set must have at least 2 members, got {0}")]
    TerminalSetTooSmall(usize),
    #[error("terminal {0} is not a node of the graph")]
    TerminalOutOfRange(NodeId),
}

/// An adjacency entry: neighbor ID plus the delay of the connecting edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub id: NodeId,
    pub delay: u64,
}

/// Undirected connected graph with positive integer edge delays.
///
/// Immutable after construction; adjacency lists are ordered by ascending
/// neighbor ID, which fixes the edge indexing used by the node programs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: u32,
    adj: Vec<Vec<Neighbor>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Rejects out-of-range
    /// IDs, self-loops, duplicate edges, zero delays and disconnected
    /// inputs.
    pub fn from_edges(n: u32, edges: &[(NodeId, NodeId, u64)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::InvalidSize { min: 2, got: n });
        }
        let mut adj = vec![Vec::new(); n as usize + 1];
        let mut seen = BTreeSet::new();
        for &(u, v, w) in edges {
            for x in [u, v] {
                if x < 1 || x > n {
                    return Err(GraphError::NodeOutOfRange(x, n));
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            if w < 1 {
                return Err(GraphError::BadDelay(u, v, w));
            }
            adj[u as usize].push(Neighbor { id: v, delay: w });
            adj[v as usize].push(Neighbor { id: u, delay: w });
        }
        for list in &mut adj {
            list.sort_by_key(|nb| nb.id);
        }
        let g = Graph { n, adj };
        if !g.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> u32 {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// IDs `1..=n`.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.n
    }

    /// Adjacency of `u`, ordered by ascending neighbor ID.
    pub fn neighbors(&self, u: NodeId) -> &[Neighbor] {
        &self.adj[u as usize]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adj[u as usize].len()
    }

    /// Undirected edges, each listed once with `u < v`.
    pub fn edges(&self) -> EdgeList {
        let mut out = Vec::with_capacity(self.edge_count());
        for u in self.nodes() {
            for nb in self.neighbors(u) {
                if u < nb.id {
                    out.push((u, nb.id, nb.delay));
                }
            }
        }
        out
    }

    /// Largest delay of any single edge.
    pub fn max_edge_delay(&self) -> u64 {
        self.adj
            .iter()
            .flatten()
            .map(|nb| nb.delay)
            .max()
            .unwrap_or(1)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n as usize + 1];
        let mut stack = vec![1u32];
        seen[1] = true;
        let mut count = 0u32;
        while let Some(u) = stack.pop() {
            count += 1;
            for nb in self.neighbors(u) {
                if !seen[nb.id as usize] {
                    seen[nb.id as usize] = true;
                    stack.push(nb.id);
                }
            }
        }
        count == self.n
    }

    /// Delay-weighted shortest-path distances from `source` to every node.
    /// Index 0 of the returned vector is unused.
    pub fn sssp(&self, source: NodeId) -> Vec<u64> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        let mut dist = vec![u64::MAX; self.n as usize + 1];
        dist[source as usize] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u as usize] {
                continue;
            }
            for nb in self.neighbors(u) {
                let nd = d + nb.delay;
                if nd < dist[nb.id as usize] {
                    dist[nb.id as usize] = nd;
                    heap.push(Reverse((nd, nb.id)));
                }
            }
        }
        dist
    }

    /// Weighted eccentricity of `u`: the largest weighted distance from
    /// `u` to any other node.
    pub fn eccentricity(&self, u: NodeId) -> u64 {
        let dist = self.sssp(u);
        self.nodes().map(|v| dist[v as usize]).max().unwrap()
    }

    /// Weighted diameter, `max_u ecc(u)`.
    pub fn diameter(&self) -> u64 {
        self.nodes().map(|u| self.eccentricity(u)).max().unwrap()
    }
}

/// Subset `S` of the vertices with `|S| >= 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TerminalSet {
    members: BTreeSet<NodeId>,
}

impl TerminalSet {
    pub fn new(
        graph: &Graph,
        members: impl IntoIterator<Item = NodeId>,
    ) -> Result<Self, GraphError> {
        let members: BTreeSet<NodeId> = members.into_iter().collect();
        if members.len() < 2 {
            return Err(GraphError::TerminalSetTooSmall(members.len()));
        }
        for &v in &members {
            if v < 1 || v > graph.node_count() {
                return Err(GraphError::TerminalOutOfRange(v));
            }
        }
        Ok(TerminalSet { members })
    }

    /// All vertices of the graph.
    pub fn all(graph: &Graph) -> Self {
        TerminalSet {
            members: graph.nodes().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.contains(&v)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().copied()
    }
}

/// Graph families the generator can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Clique,
    Path,
    Grid,
    RandomConnected,
}

/// Generates a connected graph of the given family with delays drawn
/// uniformly from `1..=max_delay`. `p` is only consulted for
/// `RandomConnected`, which redraws G(n,p) until connected (at most
/// `10 * n` attempts).
pub fn generate(
    kind: GraphKind,
    n: u32,
    p: f64,
    seed: u64,
    max_delay: u64,
) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidSize { min: 2, got: n });
    }
    if max_delay < 1 {
        return Err(GraphError::InvalidMaxDelay);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_delay = |rng: &mut ChaCha8Rng| {
        if max_delay == 1 {
            1
        } else {
            rng.gen_range(1..=max_delay)
        }
    };
    match kind {
        GraphKind::Clique => {
            let mut edges = Vec::new();
            for u in 1..=n {
                for v in (u + 1)..=n {
                    let w = draw_delay(&mut rng);
                    edges.push((u, v, w));
                }
            }
            Graph::from_edges(n, &edges)
        }
        GraphKind::Path => {
            let edges: Vec<_> = (1..n)
                .map(|u| (u, u + 1, draw_delay(&mut rng)))
                .collect();
            Graph::from_edges(n, &edges)
        }
        GraphKind::Grid => {
            let rows = (n as f64).sqrt().floor() as u32;
            let rows = rows.max(1);
            let cols = n.div_ceil(rows);
            let id = |r: u32, c: u32| r * cols + c + 1;
            let mut edges = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let u = id(r, c);
                    if u > n {
                        continue;
                    }
                    if c + 1 < cols && id(r, c + 1) <= n {
                        edges.push((u, id(r, c + 1), draw_delay(&mut rng)));
                    }
                    if r + 1 < rows && id(r + 1, c) <= n {
                        edges.push((u, id(r + 1, c), draw_delay(&mut rng)));
                    }
                }
            }
            Graph::from_edges(n, &edges)
        }
        GraphKind::RandomConnected => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(GraphError::InvalidProbability(p));
            }
            let attempts = 10 * n;
            for _ in 0..attempts {
                let mut edges = Vec::new();
                for u in 1..=n {
                    for v in (u + 1)..=n {
                        if rng.gen_bool(p) {
                            edges.push((u, v, draw_delay(&mut rng)));
                        }
                    }
                }
                match Graph::from_edges(n, &edges) {
                    Ok(g) => return Ok(g),
                    Err(GraphError::Disconnected) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(GraphError::GenerationFailure(attempts))
        }
    }
}

/// Parses the edge-list text format: first line `n`, then one `u v w`
/// line per undirected edge; `#` starts a comment.
pub fn load_edge_list(text: &str) -> Result<Graph, GraphError> {
    let mut n: Option<u32> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        if n.is_none() {
            let v = fields.next().unwrap();
            let parsed = v.parse::<u32>().map_err(|_| GraphError::Parse {
                line: line_no,
                msg: format!("expected node count, got {v:?}"),
            })?;
            if fields.next().is_some() {
                return Err(GraphError::Parse {
                    line: line_no,
                    msg: "header line must contain only the node count".into(),
                });
            }
            n = Some(parsed);
            continue;
        }
        let mut next_num = |name: &str| -> Result<u64, GraphError> {
            let tok = fields.next().ok_or_else(|| GraphError::Parse {
                line: line_no,
                msg: format!("missing {name}"),
            })?;
            tok.parse::<u64>().map_err(|_| GraphError::Parse {
                line: line_no,
                msg: format!("invalid {name}: {tok:?}"),
            })
        };
        let u = next_num("source node")? as NodeId;
        let v = next_num("target node")? as NodeId;
        let w = next_num("delay")?;
        if fields.next().is_some() {
            return Err(GraphError::Parse {
                line: line_no,
                msg: "trailing fields after `u v w`".into(),
            });
        }
        edges.push((u, v, w));
    }
    let n = n.ok_or(GraphError::Parse {
        line: 0,
        msg: "empty input".into(),
    })?;
    Graph::from_edges(n, &edges)
}

/// Canonical edge-list text: header, then edges sorted with `u < v`.
pub fn save_edge_list(graph: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", graph.node_count());
    for (u, v, w) in graph.edges() {
        let _ = writeln!(out, "{u} {v} {w}");
    }
    out
}
