//! Synchronous round engine enforcing the CONGEST contract.
//!
//! Time is partitioned into slots `1, 2, ...`. In every slot each node may
//! send at most one bounded-size message per incident edge; a message sent
//! on edge `e` at slot `t` is delivered at slot `t + delay(e)`. Programs
//! may also emit initial messages "at slot 0" before the clock starts.
//! Within a slot a program first ingests the messages delivered at that
//! slot, then returns its sends.
//!
//! Handlers of one slot never observe each other's outputs (sends become
//! visible only at their delivery slot), so the engine is free to step
//! the nodes of a slot in any order or in parallel; the sequential
//! implementation here is the reference behavior and is deterministic
//! given the graph and the programs.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, NodeId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("node {node} sent two messages on edge {edge} in slot {slot}")]
    ProtocolViolation { node: NodeId, edge: usize, slot: u64 },
    #[error("node {node} edge {edge} slot {slot}: message of {bits} bits exceeds budget B={budget}")]
    BandwidthViolation {
        node: NodeId,
        edge: usize,
        slot: u64,
        bits: u32,
        budget: u32,
    },
    #[error("node {node} has no edge with index {edge}")]
    BadEdgeIndex { node: NodeId, edge: usize },
    #[error("slot {slot}: message delivered to node {node}, which already halted")]
    LateDelivery { node: NodeId, slot: u64 },
    #[error("messages still in flight after all programs halted at slot {slot}")]
    UndeliverableMessages { slot: u64 },
    #[error("parent mapping is not a spanning tree: {0}")]
    NotATree(String),
    #[error("node {node} slot {slot}: {msg}")]
    Program { node: NodeId, slot: u64, msg: String },
}

/// A bounded message: a short sequence of nonnegative integer fields.
///
/// The accounted size is `sum over fields of ceil(log2(field + 2))` bits,
/// so a zero field still costs one bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    fields: Vec<u64>,
}

impl Message {
    pub fn new(fields: impl Into<Vec<u64>>) -> Self {
        Message { fields: fields.into() }
    }

    pub fn fields(&self) -> &[u64] {
        &self.fields
    }

    pub fn field(&self, idx: usize) -> u64 {
        self.fields[idx]
    }

    pub fn bit_size(&self) -> u32 {
        self.fields
            .iter()
            .map(|&f| u64::BITS - (f + 2 - 1).leading_zeros())
            .sum()
    }
}

/// Messages to send this slot, as `(edge index, message)` pairs.
pub type Sends = Vec<(usize, Message)>;

/// Whether a program keeps running after the current slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Halt,
}

/// What a node knows about itself: its ID and the delays of its incident
/// edges, ordered by ascending neighbor ID. Edge index `i` refers to the
/// `i`-th entry of this ordering throughout.
#[derive(Debug, Clone)]
pub struct LocalView {
    pub id: NodeId,
    pub n: u32,
    pub neighbor_ids: Vec<NodeId>,
    pub edge_delays: Vec<u64>,
}

impl LocalView {
    pub fn degree(&self) -> usize {
        self.edge_delays.len()
    }
}

/// Per-node state machine driven by the engine.
///
/// The handler sees only local state and the messages delivered to it;
/// local computation is free.
pub trait NodeProgram {
    /// Messages to send before the clock starts (slot 0).
    fn init(&mut self) -> Sends {
        Vec::new()
    }

    /// Called once per slot with the messages delivered at this slot.
    fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String>;
}

/// Execution statistics of one engine run. Rounds and slots are the same
/// unit here: an edge traversal occupies `delay(e)` of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionReport {
    pub rounds_used: u64,
    pub max_edge_bits: u32,
    pub messages_total: u64,
    #[serde(skip)]
    pub halted_all: bool,
}

struct InFlight {
    arrival: u64,
    msg: Message,
}

/// Deterministic synchronous round executor.
pub struct RoundEngine<'g, P> {
    graph: &'g Graph,
    programs: Vec<P>,
    bandwidth: u32,
    // queue per directed edge, indexed by edge_offset[u] + i
    queues: Vec<VecDeque<InFlight>>,
    edge_offset: Vec<usize>,
    halted: Vec<bool>,
    stats: ExecutionReport,
    clock: u64,
}

/// Default bandwidth budget: `8 * ceil(log2 n)` bits, room for a handful
/// of `O(log n)`-bit fields per message.
pub fn default_bandwidth(n: u32) -> u32 {
    8 * (u32::BITS - (n.max(2) - 1).leading_zeros())
}

/// Local views for all nodes, in ID order.
pub fn local_views(graph: &Graph) -> Vec<LocalView> {
    graph
        .nodes()
        .map(|u| LocalView {
            id: u,
            n: graph.node_count(),
            neighbor_ids: graph.neighbors(u).iter().map(|nb| nb.id).collect(),
            edge_delays: graph.neighbors(u).iter().map(|nb| nb.delay).collect(),
        })
        .collect()
}

impl<'g, P: NodeProgram> RoundEngine<'g, P> {
    /// One program per node, in ID order.
    pub fn new(graph: &'g Graph, programs: Vec<P>, bandwidth: u32) -> Self {
        assert_eq!(programs.len(), graph.node_count() as usize);
        let mut edge_offset = Vec::with_capacity(graph.node_count() as usize + 1);
        let mut total = 0usize;
        edge_offset.push(0);
        for u in graph.nodes() {
            total += graph.degree(u);
            edge_offset.push(total);
        }
        let queues = (0..total).map(|_| VecDeque::new()).collect();
        RoundEngine {
            graph,
            programs,
            bandwidth,
            queues,
            edge_offset,
            halted: vec![false; graph.node_count() as usize],
            stats: ExecutionReport {
                rounds_used: 0,
                max_edge_bits: 0,
                messages_total: 0,
                halted_all: false,
            },
            clock: 0,
        }
    }

    fn enqueue(&mut self, node: NodeId, sends: Sends, slot: u64) -> Result<(), EngineError> {
        let deg = self.graph.degree(node);
        let mut used = vec![false; deg];
        for (edge, msg) in sends {
            if edge >= deg {
                return Err(EngineError::BadEdgeIndex { node, edge });
            }
            if used[edge] {
                return Err(EngineError::ProtocolViolation { node, edge, slot });
            }
            used[edge] = true;
            let bits = msg.bit_size();
            if bits > self.bandwidth {
                return Err(EngineError::BandwidthViolation {
                    node,
                    edge,
                    slot,
                    bits,
                    budget: self.bandwidth,
                });
            }
            self.stats.max_edge_bits = self.stats.max_edge_bits.max(bits);
            self.stats.messages_total += 1;
            let nb = self.graph.neighbors(node)[edge];
            // index of the reverse direction (nb.id -> node) at the receiver
            let rev = self
                .graph
                .neighbors(nb.id)
                .iter()
                .position(|x| x.id == node)
                .expect("undirected invariant");
            self.queues[self.edge_offset[nb.id as usize - 1] + rev].push_back(InFlight {
                arrival: slot + nb.delay,
                msg,
            });
        }
        Ok(())
    }

    /// Advances slots until all programs halt or `max_slots` is reached.
    pub fn run(&mut self, max_slots: u64) -> Result<ExecutionReport, EngineError> {
        assert!(max_slots >= 1);
        if self.clock == 0 {
            for u in self.graph.nodes() {
                let sends = self.programs[u as usize - 1].init();
                self.enqueue(u, sends, 0)?;
            }
        }
        while self.clock < max_slots {
            self.clock += 1;
            let slot = self.clock;
            self.stats.rounds_used = slot;
            let mut all_halted = true;
            for u in self.graph.nodes() {
                let ui = u as usize - 1;
                let base = self.edge_offset[ui];
                let deg = self.graph.degree(u);
                let mut delivered: Vec<(usize, Message)> = Vec::new();
                for i in 0..deg {
                    if let Some(inflight) =
                        self.queues[base + i].pop_front_if(|front| front.arrival == slot)
                    {
                        delivered.push((i, inflight.msg));
                    }
                }
                if self.halted[ui] {
                    if !delivered.is_empty() {
                        return Err(EngineError::LateDelivery { node: u, slot });
                    }
                    continue;
                }
                let (sends, control) = self.programs[ui]
                    .step(slot, &delivered)
                    .map_err(|msg| EngineError::Program { node: u, slot, msg })?;
                self.enqueue(u, sends, slot)?;
                if control == Control::Halt {
                    self.halted[ui] = true;
                } else {
                    all_halted = false;
                }
            }
            if all_halted {
                if self.queues.iter().any(|q| !q.is_empty()) {
                    return Err(EngineError::UndeliverableMessages { slot });
                }
                self.stats.halted_all = true;
                break;
            }
        }
        self.stats.halted_all = self.halted.iter().all(|&h| h);
        Ok(self.stats.clone())
    }

    /// Consumes the engine, yielding the final program states in ID order.
    pub fn into_programs(self) -> Vec<P> {
        self.programs
    }

    pub fn programs(&self) -> &[P] {
        &self.programs
    }
}

// ---------------------------------------------------------------------------
// Engine-hosted primitives: flooding / tree broadcast and convergecast.
// ---------------------------------------------------------------------------

/// Outcome of a broadcast: the slot at which each node first held the
/// value (index `node - 1`; slot 0 for the source).
#[derive(Debug, Clone)]
pub struct BroadcastOutcome {
    pub received_at: Vec<Option<u64>>,
    pub report: ExecutionReport,
}

struct FloodProgram {
    view: LocalView,
    source: NodeId,
    value: Option<u64>,
    received_at: Option<u64>,
    delivered_on: Vec<bool>,
    deadline: Option<u64>,
}

impl FloodProgram {
    fn forward_all_except(&self, except: &[usize]) -> Sends {
        (0..self.view.degree())
            .filter(|i| !except.contains(i))
            .map(|i| (i, Message::new(vec![self.value.unwrap()])))
            .collect()
    }

    /// If we first held the value at slot t, any copy a neighbor may still
    /// send us arrives by t + 2 * delay(e). Past the latest such deadline
    /// nothing can be in flight toward us and halting is safe.
    fn arm_deadline(&mut self, slot: u64) {
        let max_delay = self.view.edge_delays.iter().max().copied().unwrap_or(1);
        self.deadline = Some(slot + 2 * max_delay);
    }

    fn halt_ready(&self, slot: u64) -> bool {
        match self.deadline {
            Some(d) => slot >= d || self.delivered_on.iter().all(|&b| b),
            None => false,
        }
    }
}

impl NodeProgram for FloodProgram {
    fn init(&mut self) -> Sends {
        if self.view.id == self.source {
            self.received_at = Some(0);
            self.arm_deadline(0);
            self.forward_all_except(&[])
        } else {
            Vec::new()
        }
    }

    fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
        for &(i, _) in delivered {
            self.delivered_on[i] = true;
        }
        let mut sends = Vec::new();
        if self.received_at.is_none() {
            if let Some((_, msg)) = delivered.first() {
                self.received_at = Some(slot);
                self.value = Some(msg.field(0));
                let except: Vec<usize> = delivered.iter().map(|&(i, _)| i).collect();
                sends = self.forward_all_except(&except);
                self.arm_deadline(slot);
            }
        }
        let control = if self.halt_ready(slot) && sends.is_empty() {
            Control::Halt
        } else {
            Control::Continue
        };
        Ok((sends, control))
    }
}

/// Floods `value` from `source` over the whole graph. Every node holds the
/// value after `ecc(source)` slots; the run itself may last a little
/// longer because nodes wait out duplicate copies before halting.
pub fn flood_broadcast(
    graph: &Graph,
    source: NodeId,
    value: u64,
    bandwidth: u32,
) -> Result<BroadcastOutcome, EngineError> {
    let programs: Vec<FloodProgram> = local_views(graph)
        .into_iter()
        .map(|view| FloodProgram {
            delivered_on: vec![false; view.degree()],
            value: if view.id == source { Some(value) } else { None },
            view,
            source,
            received_at: None,
            deadline: None,
        })
        .collect();
    let mut engine = RoundEngine::new(graph, programs, bandwidth);
    let budget = 4 * graph.node_count() as u64 * graph.max_edge_delay() + 4;
    let report = engine.run(budget)?;
    let received_at = engine
        .into_programs()
        .into_iter()
        .map(|p| p.received_at)
        .collect();
    Ok(BroadcastOutcome { received_at, report })
}

struct TreeBroadcastProgram {
    source: NodeId,
    id: NodeId,
    children: Vec<usize>,
    value: Option<u64>,
    received_at: Option<u64>,
}

impl NodeProgram for TreeBroadcastProgram {
    fn init(&mut self) -> Sends {
        if self.id == self.source {
            self.received_at = Some(0);
            let v = self.value.unwrap();
            self.children
                .iter()
                .map(|&i| (i, Message::new(vec![v])))
                .collect()
        } else {
            Vec::new()
        }
    }

    fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
        if self.id == self.source {
            return Ok((Vec::new(), Control::Halt));
        }
        if let Some((_, msg)) = delivered.first() {
            self.received_at = Some(slot);
            self.value = Some(msg.field(0));
            let v = msg.field(0);
            let sends: Sends = self
                .children
                .iter()
                .map(|&i| (i, Message::new(vec![v])))
                .collect();
            return Ok((sends, Control::Halt));
        }
        Ok((Vec::new(), Control::Continue))
    }
}

/// Per-node tree structure: the root, every node's parent edge index and
/// every node's child edge indices.
pub type TreeShape = (NodeId, Vec<Option<usize>>, Vec<Vec<usize>>);

/// Validates that `parent` (indexed by `node - 1`, `None` exactly at the
/// root) describes a spanning tree over graph edges and returns its
/// shape.
pub fn check_tree(graph: &Graph, parent: &[Option<NodeId>]) -> Result<TreeShape, EngineError> {
    let n = graph.node_count() as usize;
    if parent.len() != n {
        return Err(EngineError::NotATree(format!(
            "parent mapping has {} entries for {} nodes",
            parent.len(),
            n
        )));
    }
    let mut roots = parent.iter().enumerate().filter(|(_, p)| p.is_none());
    let root = match (roots.next(), roots.next()) {
        (Some((r, _)), None) => r as NodeId + 1,
        _ => return Err(EngineError::NotATree("expected exactly one root".into())),
    };
    let mut parent_edge = vec![None; n];
    let mut children = vec![Vec::new(); n];
    for u in graph.nodes() {
        if let Some(p) = parent[u as usize - 1] {
            let idx = graph
                .neighbors(u)
                .iter()
                .position(|nb| nb.id == p)
                .ok_or_else(|| {
                    EngineError::NotATree(format!("parent of {u} is {p}, not a neighbor"))
                })?;
            parent_edge[u as usize - 1] = Some(idx);
            let back = graph
                .neighbors(p)
                .iter()
                .position(|nb| nb.id == u)
                .expect("undirected invariant");
            children[p as usize - 1].push(back);
        }
    }
    // every node must reach the root without cycles
    for u in graph.nodes() {
        let mut hops = 0u32;
        let mut cur = u;
        while let Some(p) = parent[cur as usize - 1] {
            cur = p;
            hops += 1;
            if hops > graph.node_count() {
                return Err(EngineError::NotATree(format!("cycle above node {u}")));
            }
        }
        if cur != root {
            return Err(EngineError::NotATree(format!("node {u} does not reach the root")));
        }
    }
    Ok((root, parent_edge, children))
}

/// Broadcasts `value` from the root down the given spanning tree; takes
/// depth-of-tree slots.
pub fn tree_broadcast(
    graph: &Graph,
    parent: &[Option<NodeId>],
    value: u64,
    bandwidth: u32,
) -> Result<BroadcastOutcome, EngineError> {
    let (root, _, children) = check_tree(graph, parent)?;
    let programs: Vec<TreeBroadcastProgram> = graph
        .nodes()
        .map(|u| TreeBroadcastProgram {
            source: root,
            id: u,
            children: children[u as usize - 1].clone(),
            value: Some(value),
            received_at: None,
        })
        .collect();
    let mut engine = RoundEngine::new(graph, programs, bandwidth);
    let budget = 2 * graph.node_count() as u64 * graph.max_edge_delay() + 4;
    let report = engine.run(budget)?;
    let received_at = engine
        .into_programs()
        .into_iter()
        .map(|p| p.received_at)
        .collect();
    Ok(BroadcastOutcome { received_at, report })
}

/// Aggregations supported by the convergecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    /// Minimum by `(value, carrier id)`, so ties go to the smaller ID.
    Min,
    Sum,
}

/// Result of a convergecast at the root.
#[derive(Debug, Clone)]
pub struct ConvergecastOutcome {
    pub root: NodeId,
    pub value: u64,
    /// For `Min`, the smallest node ID holding the minimum.
    pub arg: Option<NodeId>,
    pub report: ExecutionReport,
}

struct ConvergecastProgram {
    op: Aggregate,
    parent: Option<usize>,
    pending_children: usize,
    acc_value: u64,
    acc_arg: NodeId,
    done: bool,
}

impl ConvergecastProgram {
    fn absorb(&mut self, value: u64, arg: NodeId) {
        match self.op {
            Aggregate::Sum => self.acc_value += value,
            Aggregate::Min => {
                if (value, arg) < (self.acc_value, self.acc_arg) {
                    self.acc_value = value;
                    self.acc_arg = arg;
                }
            }
        }
    }

    fn report_msg(&self) -> Message {
        Message::new(vec![self.acc_value, self.acc_arg as u64])
    }
}

impl NodeProgram for ConvergecastProgram {
    fn init(&mut self) -> Sends {
        if self.pending_children == 0 {
            if let Some(p) = self.parent {
                self.done = true;
                return vec![(p, self.report_msg())];
            }
        }
        Vec::new()
    }

    fn step(&mut self, _slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
        if self.done {
            return Ok((Vec::new(), Control::Halt));
        }
        for (_, msg) in delivered {
            self.absorb(msg.field(0), msg.field(1) as NodeId);
            self.pending_children -= 1;
        }
        if self.pending_children == 0 {
            self.done = true;
            let sends = match self.parent {
                Some(p) => vec![(p, self.report_msg())],
                None => Vec::new(),
            };
            return Ok((sends, Control::Halt));
        }
        Ok((Vec::new(), Control::Continue))
    }
}

fn convergecast(
    graph: &Graph,
    parent: &[Option<NodeId>],
    values: &[u64],
    op: Aggregate,
    bandwidth: u32,
) -> Result<ConvergecastOutcome, EngineError> {
    let (root, parent_edge, children) = check_tree(graph, parent)?;
    assert_eq!(values.len(), graph.node_count() as usize);
    let programs: Vec<ConvergecastProgram> = graph
        .nodes()
        .map(|u| ConvergecastProgram {
            op,
            parent: parent_edge[u as usize - 1],
            pending_children: children[u as usize - 1].len(),
            acc_value: values[u as usize - 1],
            acc_arg: u,
            done: false,
        })
        .collect();
    let mut engine = RoundEngine::new(graph, programs, bandwidth);
    let budget = 2 * graph.node_count() as u64 * graph.max_edge_delay() + 4;
    let report = engine.run(budget)?;
    let progs = engine.into_programs();
    let root_prog = &progs[root as usize - 1];
    Ok(ConvergecastOutcome {
        root,
        value: root_prog.acc_value,
        arg: match op {
            Aggregate::Min => Some(root_prog.acc_arg),
            Aggregate::Sum => None,
        },
        report,
    })
}

/// Leaves-to-root minimum over the tree; ties break toward the smaller
/// node ID.
pub fn convergecast_min(
    graph: &Graph,
    parent: &[Option<NodeId>],
    values: &[u64],
    bandwidth: u32,
) -> Result<ConvergecastOutcome, EngineError> {
    convergecast(graph, parent, values, Aggregate::Min, bandwidth)
}

/// Leaves-to-root sum over the tree.
pub fn convergecast_sum(
    graph: &Graph,
    parent: &[Option<NodeId>],
    values: &[u64],
    bandwidth: u32,
) -> Result<ConvergecastOutcome, EngineError> {
    convergecast(graph, parent, values, Aggregate::Sum, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Graph, GraphKind};

    fn k4() -> Graph {
        generate(GraphKind::Clique, 4, 0.0, 0, 1).unwrap()
    }

    fn p3() -> Graph {
        generate(GraphKind::Path, 3, 0.0, 0, 1).unwrap()
    }

    /// Sends one payload at slot 1 and halts after the peer's arrives.
    struct PingProgram {
        payload: u64,
        got: bool,
    }

    impl NodeProgram for PingProgram {
        fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
            if !delivered.is_empty() {
                self.got = true;
            }
            if slot == 1 {
                return Ok((vec![(0, Message::new(vec![self.payload]))], Control::Continue));
            }
            Ok((
                Vec::new(),
                if self.got { Control::Halt } else { Control::Continue },
            ))
        }
    }

    fn two_node_graph(delay: u64) -> Graph {
        Graph::from_edges(2, &[(1, 2, delay)]).unwrap()
    }

    #[test]
    fn two_node_exchange_unit_delay() {
        let g = two_node_graph(1);
        // 2^16 - 2 is the largest value fitting in exactly 16 bits
        let payload = (1u64 << 16) - 2;
        assert_eq!(Message::new(vec![payload]).bit_size(), 16);
        let programs = vec![
            PingProgram { payload, got: false },
            PingProgram { payload, got: false },
        ];
        let mut engine = RoundEngine::new(&g, programs, 16);
        let report = engine.run(100).unwrap();
        assert_eq!(report.rounds_used, 2);
        assert_eq!(report.max_edge_bits, 16);
        assert!(report.halted_all);
    }

    #[test]
    fn two_node_exchange_delay_three() {
        let g = two_node_graph(3);
        let programs = vec![
            PingProgram { payload: 5, got: false },
            PingProgram { payload: 6, got: false },
        ];
        let mut engine = RoundEngine::new(&g, programs, 16);
        let report = engine.run(100).unwrap();
        assert_eq!(report.rounds_used, 4); // sent at slot 1, delivered at slot 4
    }

    #[test]
    fn flood_on_k4_reaches_everyone_in_one_slot() {
        let g = k4();
        let out = flood_broadcast(&g, 1, 42, default_bandwidth(4)).unwrap();
        assert_eq!(out.received_at[0], Some(0));
        for v in 1..4 {
            assert_eq!(out.received_at[v], Some(1));
        }
    }

    #[test]
    fn flood_on_p3_informs_all_within_two_slots() {
        let g = p3();
        let out = flood_broadcast(&g, 1, 42, default_bandwidth(3)).unwrap();
        assert_eq!(out.received_at, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn flood_respects_delays() {
        let g = Graph::from_edges(3, &[(1, 2, 2), (2, 3, 3)]).unwrap();
        let out = flood_broadcast(&g, 1, 7, 32).unwrap();
        assert_eq!(out.received_at, vec![Some(0), Some(2), Some(5)]);
    }

    #[test]
    fn tree_broadcast_on_star_takes_one_slot() {
        let g = Graph::from_edges(4, &[(1, 2, 1), (1, 3, 1), (1, 4, 1)]).unwrap();
        let parent = vec![None, Some(1), Some(1), Some(1)];
        let out = tree_broadcast(&g, &parent, 9, 16).unwrap();
        assert_eq!(out.report.rounds_used, 1);
        assert!(out.received_at[1..].iter().all(|&r| r == Some(1)));
    }

    #[test]
    fn convergecast_min_star_with_arg() {
        // star centered at 1 with leaf values 3, 1, 2 and root value 5
        let g = Graph::from_edges(4, &[(1, 2, 1), (1, 3, 1), (1, 4, 1)]).unwrap();
        let parent = vec![None, Some(1), Some(1), Some(1)];
        let out = convergecast_min(&g, &parent, &[5, 3, 1, 2], 32).unwrap();
        assert_eq!(out.value, 1);
        assert_eq!(out.arg, Some(3));
    }

    #[test]
    fn convergecast_sum_on_p3() {
        let g = p3();
        let parent = vec![None, Some(1), Some(2)];
        let out = convergecast_sum(&g, &parent, &[1, 2, 3], 32).unwrap();
        assert_eq!(out.root, 1);
        assert_eq!(out.value, 6);
    }

    #[test]
    fn convergecast_min_tie_breaks_to_smaller_id() {
        let g = Graph::from_edges(3, &[(1, 2, 1), (1, 3, 1)]).unwrap();
        let parent = vec![None, Some(1), Some(1)];
        let out = convergecast_min(&g, &parent, &[9, 2, 2], 32).unwrap();
        assert_eq!(out.value, 2);
        assert_eq!(out.arg, Some(2));
    }

    #[test]
    fn cyclic_parent_mapping_is_rejected() {
        let g = k4();
        let parent = vec![None, Some(3), Some(2), Some(1)];
        let err = convergecast_sum(&g, &parent, &[0; 4], 32).unwrap_err();
        assert!(matches!(err, EngineError::NotATree(_)));
    }

    struct DoubleSender;
    impl NodeProgram for DoubleSender {
        fn step(&mut self, _: u64, _: &[(usize, Message)]) -> Result<(Sends, Control), String> {
            Ok((
                vec![
                    (0, Message::new(vec![1])),
                    (0, Message::new(vec![2])),
                ],
                Control::Halt,
            ))
        }
    }

    #[test]
    fn two_messages_on_one_edge_is_a_protocol_violation() {
        let g = two_node_graph(1);
        let mut engine = RoundEngine::new(&g, vec![DoubleSender, DoubleSender], 16);
        let err = engine.run(10).unwrap_err();
        assert!(matches!(err, EngineError::ProtocolViolation { .. }));
    }

    struct FatSender;
    impl NodeProgram for FatSender {
        fn step(&mut self, _: u64, _: &[(usize, Message)]) -> Result<(Sends, Control), String> {
            Ok((vec![(0, Message::new(vec![u64::MAX - 2]))], Control::Halt))
        }
    }

    #[test]
    fn oversized_message_is_a_bandwidth_violation() {
        let g = two_node_graph(1);
        let mut engine = RoundEngine::new(&g, vec![FatSender, FatSender], 16);
        let err = engine.run(10).unwrap_err();
        assert!(matches!(err, EngineError::BandwidthViolation { .. }));
    }

    /// Sends 7 then 8 on consecutive slots over a delay-3 edge; the peer
    /// must see them in order, three slots apart.
    struct BurstSender {
        me: NodeId,
        got: Vec<(u64, u64)>,
    }

    impl NodeProgram for BurstSender {
        fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
            for (_, msg) in delivered {
                self.got.push((slot, msg.field(0)));
            }
            let sends = if self.me == 1 && slot <= 2 {
                vec![(0, Message::new(vec![6 + slot]))]
            } else {
                Vec::new()
            };
            let done = (self.me == 1 && slot >= 2) || (self.me == 2 && self.got.len() == 2);
            Ok((sends, if done { Control::Halt } else { Control::Continue }))
        }
    }

    #[test]
    fn edges_deliver_in_fifo_order() {
        let g = two_node_graph(3);
        let programs = vec![
            BurstSender { me: 1, got: Vec::new() },
            BurstSender { me: 2, got: Vec::new() },
        ];
        let mut engine = RoundEngine::new(&g, programs, 16);
        let report = engine.run(50).unwrap();
        assert!(report.halted_all);
        let receiver = &engine.programs()[1];
        assert_eq!(receiver.got, vec![(4, 7), (5, 8)]);
    }

    /// Halts immediately while the peer's message is still in flight.
    struct EarlyQuitter {
        me: NodeId,
    }

    impl NodeProgram for EarlyQuitter {
        fn step(&mut self, _slot: u64, _delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
            if self.me == 1 {
                Ok((vec![(0, Message::new(vec![1]))], Control::Continue))
            } else {
                Ok((Vec::new(), Control::Halt))
            }
        }
    }

    #[test]
    fn delivery_to_a_halted_node_is_an_error() {
        let g = two_node_graph(2);
        let mut engine = RoundEngine::new(&g, vec![EarlyQuitter { me: 1 }, EarlyQuitter { me: 2 }], 16);
        let err = engine.run(10).unwrap_err();
        assert!(matches!(err, EngineError::LateDelivery { node: 2, .. }));
    }

    #[test]
    fn execution_is_deterministic() {
        let g = generate(GraphKind::RandomConnected, 12, 0.3, 5, 3).unwrap();
        let run = || flood_broadcast(&g, 1, 999, 64).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a.received_at, b.received_at);
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn report_serializes_to_the_documented_shape() {
        let report = ExecutionReport {
            rounds_used: 3,
            max_edge_bits: 12,
            messages_total: 7,
            halted_all: true,
        };
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"rounds_used": 3, "max_edge_bits": 12, "messages_total": 7})
        );
    }

    #[test]
    fn bit_size_accounting() {
        assert_eq!(Message::new(vec![0]).bit_size(), 1);
        assert_eq!(Message::new(vec![1]).bit_size(), 2);
        assert_eq!(Message::new(vec![2]).bit_size(), 2);
        assert_eq!(Message::new(vec![3]).bit_size(), 3);
        assert_eq!(Message::new(vec![0, 1, 2]).bit_size(), 5);
    }
}
