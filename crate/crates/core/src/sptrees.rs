//! Parallel construction of one shortest-path tree per terminal.
//!
//! All trees are built simultaneously by prioritized delayed BFS: every
//! terminal injects a token carrying its ID and a running distance, and
//! tokens advance over an edge in `delay(e)` slots. Each edge transmits
//! one token per slot per direction, in wavefront order (the token whose
//! wave arrived earliest goes first, smaller root IDs on ties), and
//! freshly arrived roots are admitted one per slot behind smaller IDs.
//! The whole schedule fits in `|S| + 2 * D'` slots, where `D'` is the
//! eccentricity of the leader (node 1), a 2-approximation of the
//! weighted diameter.
//!
//! Every node ends up knowing, for each root `v`: its exact distance
//! `omega[v]`, the slot `tau[v]` at which `v`'s wave reached it, and its
//! parent edge in the tree `T_v`. The `tau` values double as the
//! congestion-free schedule for the cost aggregation that follows.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use crate::congest::{
    default_bandwidth, local_views, Control, EngineError, ExecutionReport, LocalView, Message,
    NodeProgram, RoundEngine, Sends,
};
use crate::graph::{EdgeList, Graph, NodeId, TerminalSet};

/// What a node records about one root's tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeEntry {
    /// Exact delay-weighted distance to the root.
    pub omega: u64,
    /// Slot at which the root's wave first arrived (0 at the root).
    pub tau: u64,
    /// Incident edge index toward the parent; `None` at the root itself.
    pub parent_edge: Option<usize>,
}

/// Per-node output of the tree construction.
#[derive(Debug, Clone)]
pub struct TreeTable {
    pub node: NodeId,
    pub entries: BTreeMap<NodeId, TreeEntry>,
}

impl TreeTable {
    pub fn entry(&self, root: NodeId) -> Option<&TreeEntry> {
        self.entries.get(&root)
    }
}

/// Outcome of the leader's diameter-estimation phase.
#[derive(Debug, Clone)]
pub struct DprimeOutcome {
    /// `ecc(leader)`; satisfies `dprime <= D <= 2 * dprime`.
    pub dprime: u64,
    /// Exact distance of every node from the leader (index `node - 1`).
    pub dist: Vec<u64>,
    /// Parent edge index in the leader's SP-tree (`None` at the leader).
    pub parent_edge: Vec<Option<usize>>,
    /// Parent node ID in the leader's SP-tree.
    pub parent_id: Vec<Option<NodeId>>,
    /// Child edge indices in the leader's SP-tree.
    pub children: Vec<Vec<usize>>,
    pub report: ExecutionReport,
}

pub const LEADER: NodeId = 1;

const TAG_WAVE: u64 = 0;
const TAG_CLAIM: u64 = 1;
const TAG_ECHO: u64 = 2;
const TAG_DVAL: u64 = 3;

/// Leader-rooted SSSP wave with echo completion: the wave floods exact
/// distances outward, every node claims its parent, the maxima are
/// echoed back up, and the leader broadcasts `D' = ecc(leader)` down the
/// tree. Every directed edge carries exactly one wave-or-claim message,
/// which is what lets each node detect locally when its subtree is done.
struct DprimeProgram {
    view: LocalView,
    dist: Option<u64>,
    parent: Option<usize>,
    resolved: Vec<bool>,
    children: Vec<usize>,
    echo_pending: usize,
    subtree_max: u64,
    echoed: bool,
    claim_slot: Option<u64>,
    dprime: Option<u64>,
    dval_sent: bool,
}

impl DprimeProgram {
    fn new(view: LocalView) -> Self {
        let deg = view.degree();
        DprimeProgram {
            view,
            dist: None,
            parent: None,
            resolved: vec![false; deg],
            children: Vec::new(),
            echo_pending: 0,
            subtree_max: 0,
            echoed: false,
            claim_slot: None,
            dprime: None,
            dval_sent: false,
        }
    }

    fn is_leader(&self) -> bool {
        self.view.id == LEADER
    }

    fn echo_ready(&self) -> bool {
        self.dist.is_some() && !self.echoed && self.resolved.iter().all(|&r| r) && self.echo_pending == 0
    }

    fn dval_sends(&mut self, dprime: u64) -> Sends {
        self.dval_sent = true;
        self.children
            .iter()
            .map(|&i| (i, Message::new(vec![TAG_DVAL, dprime])))
            .collect()
    }

    fn done(&self) -> bool {
        self.echoed && self.dval_sent && self.dprime.is_some()
    }
}

impl NodeProgram for DprimeProgram {
    fn init(&mut self) -> Sends {
        if self.is_leader() {
            self.dist = Some(0);
            (0..self.view.degree())
                .map(|i| (i, Message::new(vec![TAG_WAVE, 0])))
                .collect()
        } else {
            Vec::new()
        }
    }

    fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
        let mut sends: Sends = Vec::new();
        let mut wave_edges: Vec<(usize, u64)> = Vec::new();
        for (i, msg) in delivered {
            match msg.field(0) {
                TAG_WAVE => {
                    self.resolved[*i] = true;
                    wave_edges.push((*i, msg.field(1)));
                }
                TAG_CLAIM => {
                    self.resolved[*i] = true;
                    self.children.push(*i);
                    self.echo_pending += 1;
                }
                TAG_ECHO => {
                    self.subtree_max = self.subtree_max.max(msg.field(1));
                    self.echo_pending -= 1;
                }
                TAG_DVAL => {
                    self.dprime = Some(msg.field(1));
                    sends.extend(self.dval_sends(msg.field(1)));
                }
                other => return Err(format!("unexpected tag {other}")),
            }
        }
        if self.dist.is_none() && !wave_edges.is_empty() {
            // first receipt: the wavefront arrives exactly at our distance
            let d = wave_edges
                .iter()
                .map(|&(i, sender)| sender + self.view.edge_delays[i])
                .min()
                .unwrap();
            if d != slot {
                return Err(format!("wave arrived at slot {slot} claiming distance {d}"));
            }
            self.dist = Some(d);
            self.parent = Some(wave_edges.iter().map(|&(i, _)| i).min().unwrap());
            self.subtree_max = self.subtree_max.max(d);
            // one message per edge: the claim upward, the wave everywhere
            // else (even where a wave just crossed us; the neighbor still
            // expects our one message on that edge)
            for i in 0..self.view.degree() {
                if Some(i) == self.parent {
                    sends.push((i, Message::new(vec![TAG_CLAIM])));
                    self.claim_slot = Some(slot);
                } else {
                    sends.push((i, Message::new(vec![TAG_WAVE, d])));
                }
            }
        }
        if self.echo_ready() && self.claim_slot != Some(slot) {
            self.echoed = true;
            if self.is_leader() {
                let dprime = self.subtree_max;
                self.dprime = Some(dprime);
                sends.extend(self.dval_sends(dprime));
            } else {
                sends.push((
                    self.parent.expect("non-leader has a parent"),
                    Message::new(vec![TAG_ECHO, self.subtree_max]),
                ));
            }
        }
        let control = if self.done() && sends.is_empty() {
            Control::Halt
        } else {
            Control::Continue
        };
        Ok((sends, control))
    }
}

/// Runs the leader's eccentricity phase and broadcasts the result, so
/// that afterwards every node holds `D'` along with its position in the
/// leader's SP-tree.
pub fn compute_dprime(graph: &Graph) -> Result<DprimeOutcome, EngineError> {
    let programs: Vec<DprimeProgram> = local_views(graph).into_iter().map(DprimeProgram::new).collect();
    let bandwidth = default_bandwidth(graph.node_count());
    let mut engine = RoundEngine::new(graph, programs, bandwidth);
    let budget = 8 * graph.node_count() as u64 * graph.max_edge_delay() + 8;
    let report = engine.run(budget)?;
    if !report.halted_all {
        return Err(EngineError::Program {
            node: LEADER,
            slot: report.rounds_used,
            msg: "diameter estimation did not terminate".into(),
        });
    }
    let progs = engine.into_programs();
    let dprime = progs[LEADER as usize - 1].dprime.expect("leader computed D'");
    let mut dist = Vec::new();
    let mut parent_edge = Vec::new();
    let mut parent_id = Vec::new();
    let mut children = Vec::new();
    for p in &progs {
        dist.push(p.dist.expect("wave reached every node"));
        parent_edge.push(p.parent);
        parent_id.push(p.parent.map(|i| p.view.neighbor_ids[i]));
        children.push(p.children.clone());
    }
    Ok(DprimeOutcome {
        dprime,
        dist,
        parent_edge,
        parent_id,
        children,
        report,
    })
}

/// The slot budget of the tree construction and of the cost wave.
pub fn phase_budget(root_count: usize, dprime: u64) -> u64 {
    root_count as u64 + 2 * dprime
}

/// A delay-`w` edge traversed in `w` slots behaves like a path of `w - 1`
/// unit-delay relays: a token halfway across can still lose to a smaller
/// token and fall back by one slot instead of restarting the crossing.
/// The token waves are therefore run on this unit-delay expansion, which
/// keeps distances intact (relay hops sum to the original delay) and
/// reduces the schedule to the plain unit-delay case. Relay IDs start at
/// `n + 1`, above every possible root ID.
struct Expansion {
    gprime: Graph,
    /// `edge_map[u - 1][gprime_edge_idx] = real_edge_idx` for real `u`.
    edge_map: Vec<Vec<usize>>,
}

fn expand_delays(graph: &Graph) -> Expansion {
    let n = graph.node_count();
    let mut next_id = n + 1;
    let mut edges: EdgeList = Vec::new();
    // gprime neighbor sitting on each real edge, per endpoint
    let mut line_nb: Vec<Vec<NodeId>> = graph
        .nodes()
        .map(|u| vec![0; graph.degree(u)])
        .collect();
    let edge_index = |u: NodeId, v: NodeId| {
        graph
            .neighbors(u)
            .iter()
            .position(|nb| nb.id == v)
            .expect("endpoint of an edge")
    };
    for (u, v, w) in graph.edges() {
        if w == 1 {
            edges.push((u, v, 1));
            line_nb[u as usize - 1][edge_index(u, v)] = v;
            line_nb[v as usize - 1][edge_index(v, u)] = u;
        } else {
            let relays: Vec<NodeId> = (0..w - 1)
                .map(|_| {
                    let id = next_id;
                    next_id += 1;
                    id
                })
                .collect();
            edges.push((u, relays[0], 1));
            for pair in relays.windows(2) {
                edges.push((pair[0], pair[1], 1));
            }
            edges.push((*relays.last().unwrap(), v, 1));
            line_nb[u as usize - 1][edge_index(u, v)] = relays[0];
            line_nb[v as usize - 1][edge_index(v, u)] = *relays.last().unwrap();
        }
    }
    let gprime = Graph::from_edges(next_id - 1, &edges).expect("expansion stays connected");
    let edge_map = graph
        .nodes()
        .map(|u| {
            gprime
                .neighbors(u)
                .iter()
                .map(|nb| {
                    line_nb[u as usize - 1]
                        .iter()
                        .position(|&x| x == nb.id)
                        .expect("every expanded edge maps back")
                })
                .collect()
        })
        .collect();
    Expansion { gprime, edge_map }
}

/// One terminal's token wave, as tracked by a single node.
///
/// Two tokens crossing one edge in opposite directions both get through
/// (each direction carries one message per slot); queueing happens only
/// at the nodes, where tokens leave in wavefront order (earliest arrival
/// first, then smaller root ID) and freshly arrived roots are admitted
/// one per slot behind smaller IDs. Queueing can still skew copies of
/// one wave against each other, so a node keeps the smallest distance
/// offered for each root: simultaneous copies are decided by carried
/// distance before edge index, and a late copy that beats the recorded
/// path is adopted and re-announced.
struct SpTreeProgram {
    view: LocalView,
    is_root: bool,
    budget: u64,
    /// Per edge: roots not yet forwarded to that neighbor.
    pending: Vec<BTreeSet<NodeId>>,
    /// Per edge: corrections for roots already forwarded with a stale
    /// distance. Sent ahead of ordinary traffic.
    urgent: Vec<BTreeSet<NodeId>>,
    delayed: BTreeSet<NodeId>,
    entries: BTreeMap<NodeId, TreeEntry>,
}

impl SpTreeProgram {
    fn new(view: LocalView, is_root: bool, budget: u64) -> Self {
        let deg = view.degree();
        SpTreeProgram {
            view,
            is_root,
            budget,
            pending: vec![BTreeSet::new(); deg],
            urgent: vec![BTreeSet::new(); deg],
            delayed: BTreeSet::new(),
            entries: BTreeMap::new(),
        }
    }

    fn pick_send(&mut self, slot: u64, edge: usize) -> Option<(usize, Message)> {
        let delay = self.view.edge_delays[edge];
        if slot + delay > self.budget {
            // would arrive after the last processed slot
            return None;
        }
        let token = match self.urgent[edge].first().copied() {
            Some(t) => {
                self.urgent[edge].remove(&t);
                t
            }
            None => {
                // wavefront order: tokens leave in the order their waves
                // arrived here, IDs breaking ties
                let t = self.pending[edge]
                    .iter()
                    .copied()
                    .filter(|t| !self.delayed.contains(t))
                    .min_by_key(|&t| (self.entries[&t].tau, t))?;
                self.pending[edge].remove(&t);
                t
            }
        };
        let dist = self.entries[&token].omega + delay;
        Some((edge, Message::new(vec![u64::from(token), dist])))
    }

    /// Queue a freshly learned root for every other neighbor.
    fn spread(&mut self, token: NodeId, except: usize) {
        for j in 0..self.view.degree() {
            if j != except {
                self.pending[j].insert(token);
            }
        }
    }

    /// Re-announce an improved distance: edges that already saw the stale
    /// value get a correction, the rest will pick the value up at their
    /// regular send.
    fn correct(&mut self, token: NodeId, except: usize) {
        for j in 0..self.view.degree() {
            if j != except && !self.pending[j].contains(&token) {
                self.urgent[j].insert(token);
            }
        }
    }
}

impl NodeProgram for SpTreeProgram {
    fn init(&mut self) -> Sends {
        if self.is_root {
            let me = self.view.id;
            self.entries.insert(
                me,
                TreeEntry {
                    omega: 0,
                    tau: 0,
                    parent_edge: None,
                },
            );
            for set in &mut self.pending {
                set.insert(me);
            }
        }
        (0..self.view.degree())
            .filter_map(|i| self.pick_send(0, i))
            .collect()
    }

    fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
        // best copy of each root this slot: smallest distance, then edge
        let mut best: BTreeMap<NodeId, (u64, usize)> = BTreeMap::new();
        for (i, msg) in delivered {
            let offer = (msg.field(1), *i);
            best.entry(msg.field(0) as NodeId)
                .and_modify(|cur| *cur = (*cur).min(offer))
                .or_insert(offer);
        }

        let mut fresh: Vec<(NodeId, u64, usize)> = Vec::new();
        for (&token, &(dist, edge)) in &best {
            match self.entries.get(&token) {
                None => fresh.push((token, dist, edge)),
                Some(e) if dist < e.omega => {
                    // a late copy beat the recorded path: adopt it and
                    // re-announce on the other edges
                    self.entries.insert(
                        token,
                        TreeEntry {
                            omega: dist,
                            tau: slot,
                            parent_edge: Some(edge),
                        },
                    );
                    self.correct(token, edge);
                }
                _ => {}
            }
        }

        let fresh_min = fresh.first().map(|&(t, _, _)| t);
        let delayed_min = self.delayed.first().copied();
        // release the smallest delayed root unless an even smaller one
        // was admitted this slot
        if let Some(s) = delayed_min {
            if fresh_min.is_none_or(|r| s <= r) {
                self.delayed.remove(&s);
            }
        }

        for &(token, dist, edge) in &fresh {
            self.entries.insert(
                token,
                TreeEntry {
                    omega: dist,
                    tau: slot,
                    parent_edge: Some(edge),
                },
            );
            self.spread(token, edge);
            let hold = fresh_min.is_some_and(|m| m < token)
                || delayed_min.is_some_and(|s| s < token);
            if hold {
                self.delayed.insert(token);
            }
        }

        let sends: Sends = (0..self.view.degree())
            .filter_map(|i| self.pick_send(slot, i))
            .collect();
        let control = if slot >= self.budget {
            Control::Halt
        } else {
            Control::Continue
        };
        Ok((sends, control))
    }
}

/// Builds the SP-tree `T_v` of every root simultaneously. Runs for
/// exactly `|roots| + 2 * D'` slots and returns one table per node.
pub fn build_trees(
    graph: &Graph,
    roots: &TerminalSet,
    dprime: u64,
) -> Result<(Vec<TreeTable>, ExecutionReport), EngineError> {
    let real_n = graph.node_count();
    let expansion = expand_delays(graph);
    let gprime = &expansion.gprime;
    let budget = phase_budget(roots.len(), dprime);
    let programs: Vec<SpTreeProgram> = local_views(gprime)
        .into_iter()
        .map(|view| {
            let is_root = view.id <= real_n && roots.contains(view.id);
            SpTreeProgram::new(view, is_root, budget)
        })
        .collect();
    let bandwidth = default_bandwidth(real_n);
    let mut engine = RoundEngine::new(gprime, programs, bandwidth);
    let report = engine.run(budget)?;
    let tables: Vec<TreeTable> = engine
        .into_programs()
        .into_iter()
        .take(real_n as usize)
        .map(|p| {
            let node = p.view.id;
            let entries = p
                .entries
                .into_iter()
                .map(|(root, e)| {
                    let parent_edge = e
                        .parent_edge
                        .map(|i| expansion.edge_map[node as usize - 1][i]);
                    (root, TreeEntry { parent_edge, ..e })
                })
                .collect();
            TreeTable { node, entries }
        })
        .collect();
    for table in &tables {
        for root in roots.iter() {
            if !table.entries.contains_key(&root) {
                return Err(EngineError::Program {
                    node: table.node,
                    slot: budget,
                    msg: format!("slot budget exhausted with no distance for root {root}"),
                });
            }
        }
    }
    Ok((tables, report))
}

/// Structural soundness of the tables: every root known everywhere, the
/// root entries trivial, parent chains consistent in distance, and `tau`
/// strictly increasing away from each root by at least the edge delay.
pub fn check_tree_tables(
    graph: &Graph,
    roots: &TerminalSet,
    tables: &[TreeTable],
) -> Result<(), String> {
    for u in graph.nodes() {
        let table = &tables[u as usize - 1];
        for root in roots.iter() {
            let entry = table
                .entry(root)
                .ok_or_else(|| format!("node {u} misses root {root}"))?;
            if u == root {
                if entry.omega != 0 || entry.tau != 0 || entry.parent_edge.is_some() {
                    return Err(format!("root {root} has a nontrivial self entry"));
                }
                continue;
            }
            let edge = entry
                .parent_edge
                .ok_or_else(|| format!("node {u} root {root}: no parent"))?;
            let nb = graph.neighbors(u)[edge];
            let parent_entry = tables[nb.id as usize - 1]
                .entry(root)
                .ok_or_else(|| format!("parent {} misses root {root}", nb.id))?;
            if parent_entry.omega + nb.delay != entry.omega {
                return Err(format!(
                    "node {u} root {root}: omega {} != parent {} + delay {}",
                    entry.omega, parent_entry.omega, nb.delay
                ));
            }
            if entry.tau < parent_entry.tau + nb.delay {
                return Err(format!(
                    "node {u} root {root}: tau {} not after parent tau {} + delay {}",
                    entry.tau, parent_entry.tau, nb.delay
                ));
            }
        }
    }
    Ok(())
}

/// `SSRC_S(v)` for every root `v`, computed by the shared bottom-up cost
/// wave over the trees.
pub fn compute_ssrc(
    graph: &Graph,
    tables: &[TreeTable],
    terminals: &TerminalSet,
    roots: &TerminalSet,
    dprime: u64,
) -> Result<BTreeMap<NodeId, u64>, EngineError> {
    let wave = crate::routing_cost::compute_all_rc(graph, tables, terminals, roots, dprime)?;
    Ok(wave.ssrc)
}

/// Debug/test dump: `{node: {root: {omega, tau, parent_edge}}}`.
pub fn tree_tables_to_json(tables: &[TreeTable]) -> serde_json::Value {
    let mut nodes = serde_json::Map::new();
    for table in tables {
        let mut roots = serde_json::Map::new();
        for (root, e) in &table.entries {
            roots.insert(
                root.to_string(),
                json!({
                    "omega": e.omega,
                    "tau": e.tau,
                    "parent_edge": e.parent_edge,
                }),
            );
        }
        nodes.insert(table.node.to_string(), serde_json::Value::Object(roots));
    }
    serde_json::Value::Object(nodes)
}
