//! Bottom-up routing-cost aggregation over all trees in parallel.
//!
//! Removing a tree edge `e` splits the terminals into two sides of sizes
//! `z` and `|S| - z`, and `e` lies on `z * (|S| - z)` unordered terminal
//! paths, so a tree's routing cost is `2 * sum over e of delay(e) * z_e *
//! (|S| - z_e)`. Each node accumulates that sum for the subtree below it
//! and forwards partial cost, terminal count and partial single-source
//! cost to its parent in `T_v` at slot `T - tau[v]`, where `T` is the
//! slot budget of the construction phase. Reversing the arrival stamps
//! makes every child report strictly before its parent speaks and reuses
//! edges only at slots they were already scheduled at, so the wave is
//! congestion-free by construction.

use std::collections::BTreeMap;

use serde_json::json;

use crate::congest::{
    default_bandwidth, local_views, Control, EngineError, ExecutionReport, LocalView, Message,
    NodeProgram, RoundEngine, Sends,
};
use crate::graph::{EdgeList, Graph, NodeId, TerminalSet};
use crate::oracle;
use crate::sptrees::{phase_budget, TreeTable};

/// Cost contribution of one tree edge: `2 * delay * z * (|S| - z)`,
/// counting each terminal pair in both directions.
pub fn rc_formula(z_child: u64, s_size: u64, edge_delay: u64) -> u64 {
    debug_assert!(z_child <= s_size);
    2 * edge_delay * z_child * (s_size - z_child)
}

/// Per-node accumulator state after the wave.
#[derive(Debug, Clone)]
pub struct CostTable {
    pub node: NodeId,
    /// Partial routing cost of the subtree below this node, per root.
    pub rc: BTreeMap<NodeId, u64>,
    /// Number of terminals in the subtree below this node, per root.
    pub z: BTreeMap<NodeId, u64>,
    /// Partial single-source cost (sum of terminal distances), per root.
    pub ssrc: BTreeMap<NodeId, u64>,
}

/// Result of the cost wave.
#[derive(Debug, Clone)]
pub struct CostWaveOutcome {
    /// `RC_S(T_v)` for every root `v`.
    pub rc: BTreeMap<NodeId, u64>,
    /// `SSRC_S(v)` for every root `v`.
    pub ssrc: BTreeMap<NodeId, u64>,
    pub tables: Vec<CostTable>,
    pub report: ExecutionReport,
}

struct CostWaveProgram {
    view: LocalView,
    budget: u64,
    s_size: u64,
    in_terminals: bool,
    /// (root, parent edge, send slot), sorted by send slot.
    schedule: Vec<(NodeId, Option<usize>, u64)>,
    rc: BTreeMap<NodeId, u64>,
    z: BTreeMap<NodeId, u64>,
    ssrc: BTreeMap<NodeId, u64>,
    send_slot: BTreeMap<NodeId, u64>,
}

impl CostWaveProgram {
    fn new(
        view: LocalView,
        table: &TreeTable,
        terminals: &TerminalSet,
        budget: u64,
        s_size: u64,
    ) -> Result<Self, EngineError> {
        let in_terminals = terminals.contains(view.id);
        let mut schedule = Vec::with_capacity(table.entries.len());
        let mut rc = BTreeMap::new();
        let mut z = BTreeMap::new();
        let mut ssrc = BTreeMap::new();
        let mut send_slot = BTreeMap::new();
        for (&root, entry) in &table.entries {
            if entry.tau > budget {
                return Err(EngineError::Program {
                    node: view.id,
                    slot: 0,
                    msg: format!(
                        "root {root} arrived at slot {}, outside the {budget}-slot schedule",
                        entry.tau
                    ),
                });
            }
            rc.insert(root, 0);
            z.insert(root, u64::from(in_terminals));
            ssrc.insert(root, if in_terminals { entry.omega } else { 0 });
            let slot = budget - entry.tau;
            schedule.push((root, entry.parent_edge, slot));
            send_slot.insert(root, slot);
        }
        Ok(CostWaveProgram {
            view,
            budget,
            s_size,
            in_terminals,
            schedule,
            rc,
            z,
            ssrc,
            send_slot,
        })
    }

    fn sends_due(&self, slot: u64) -> Result<Sends, String> {
        let mut sends: Sends = Vec::new();
        let mut used = vec![false; self.view.degree()];
        for &(root, parent, due) in &self.schedule {
            if due != slot {
                continue;
            }
            let Some(edge) = parent else {
                continue; // the root itself only aggregates
            };
            if used[edge] {
                // two tokens received over one edge always carry distinct
                // arrival slots, so their reflected slots stay distinct
                return Err(format!(
                    "two roots scheduled on edge {edge} at slot {slot}"
                ));
            }
            used[edge] = true;
            sends.push((
                edge,
                Message::new(vec![
                    u64::from(root),
                    self.rc[&root],
                    self.z[&root],
                    self.ssrc[&root],
                ]),
            ));
        }
        Ok(sends)
    }
}

impl NodeProgram for CostWaveProgram {
    fn init(&mut self) -> Sends {
        // roots whose token arrived at the very last construction slot
        // reflect to slot 0
        self.sends_due(0).expect("distinct arrival slots per edge")
    }

    fn step(&mut self, slot: u64, delivered: &[(usize, Message)]) -> Result<(Sends, Control), String> {
        for (edge, msg) in delivered {
            let root = msg.field(0) as NodeId;
            let (Some(acc), Some(due)) = (self.rc.get_mut(&root), self.send_slot.get(&root)) else {
                return Err(format!("report for unknown root {root}"));
            };
            if slot > *due && self.view.id != root {
                return Err(format!(
                    "child report for root {root} arrived at slot {slot}, after our send slot {due}"
                ));
            }
            let child_rc = msg.field(1);
            let child_z = msg.field(2);
            let child_ssrc = msg.field(3);
            let delay = self.view.edge_delays[*edge];
            *acc += child_rc + rc_formula(child_z, self.s_size, delay);
            *self.z.get_mut(&root).unwrap() += child_z;
            *self.ssrc.get_mut(&root).unwrap() += child_ssrc;
        }
        let sends = self.sends_due(slot)?;
        let control = if slot >= self.budget {
            if self.in_terminals && self.send_slot.contains_key(&self.view.id) {
                let me = self.view.id;
                if self.z[&me] != self.s_size {
                    return Err(format!(
                        "root {me}: aggregated {} terminals, expected {}",
                        self.z[&me], self.s_size
                    ));
                }
            }
            Control::Halt
        } else {
            Control::Continue
        };
        Ok((sends, control))
    }
}

/// Runs the cost wave for every root in parallel. `terminals` is the full
/// terminal set `S` defining the costs; `roots` is the set the trees were
/// built for (a subset of `S` in the sampled variant). Runs for exactly
/// `|roots| + 2 * D'` slots, mirror of the construction phase.
pub fn compute_all_rc(
    graph: &Graph,
    tables: &[TreeTable],
    terminals: &TerminalSet,
    roots: &TerminalSet,
    dprime: u64,
) -> Result<CostWaveOutcome, EngineError> {
    let budget = phase_budget(roots.len(), dprime);
    let s_size = terminals.len() as u64;
    let programs: Vec<CostWaveProgram> = local_views(graph)
        .into_iter()
        .map(|view| {
            let table = &tables[view.id as usize - 1];
            CostWaveProgram::new(view, table, terminals, budget, s_size)
        })
        .collect::<Result<_, _>>()?;
    let bandwidth = default_bandwidth(graph.node_count());
    let mut engine = RoundEngine::new(graph, programs, bandwidth);
    let report = engine.run(budget)?;
    let progs = engine.into_programs();
    let mut rc = BTreeMap::new();
    let mut ssrc = BTreeMap::new();
    for v in roots.iter() {
        let p = &progs[v as usize - 1];
        rc.insert(v, p.rc[&v]);
        ssrc.insert(v, p.ssrc[&v]);
    }
    let tables = progs
        .into_iter()
        .map(|p| CostTable {
            node: p.view.id,
            rc: p.rc,
            z: p.z,
            ssrc: p.ssrc,
        })
        .collect();
    Ok(CostWaveOutcome {
        rc,
        ssrc,
        tables,
        report,
    })
}

/// Extracts `T_v` from the parent pointers of the tables.
pub fn extract_tree(
    graph: &Graph,
    tables: &[TreeTable],
    root: NodeId,
) -> EdgeList {
    let mut edges = Vec::new();
    for u in graph.nodes() {
        if u == root {
            continue;
        }
        let entry = tables[u as usize - 1]
            .entry(root)
            .expect("tables cover every root");
        let edge = entry.parent_edge.expect("non-root has a parent");
        let nb = graph.neighbors(u)[edge];
        edges.push((u.min(nb.id), u.max(nb.id), nb.delay));
    }
    edges
}

/// Recomputes `RC_S(T_v)` centrally from the extracted tree and compares
/// it with the distributed value.
pub fn oracle_rc_check(
    graph: &Graph,
    tables: &[TreeTable],
    terminals: &TerminalSet,
    root: NodeId,
    distributed_rc: u64,
) -> bool {
    let edges = extract_tree(graph, tables, root);
    match oracle::rc_exact(graph.node_count(), &edges, terminals) {
        Ok(exact) => exact == distributed_rc,
        Err(_) => false,
    }
}

/// Debug/test dump: `{root: {rc, ssrc}}`.
pub fn costs_to_json(outcome: &CostWaveOutcome) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for (root, rc) in &outcome.rc {
        map.insert(
            root.to_string(),
            json!({"rc": rc, "ssrc": outcome.ssrc[root]}),
        );
    }
    serde_json::Value::Object(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use crate::sptrees::{build_trees, compute_dprime};

    fn pipeline(g: &Graph, terminals: &TerminalSet) -> CostWaveOutcome {
        let dp = compute_dprime(g).unwrap();
        let (tables, _) = build_trees(g, terminals, dp.dprime).unwrap();
        compute_all_rc(g, &tables, terminals, terminals, dp.dprime).unwrap()
    }

    #[test]
    fn formula_examples() {
        // an edge with two terminals below it lies on 2 * (|S| - 2) paths
        assert_eq!(rc_formula(2, 10, 1), 2 * 2 * 8);
        assert_eq!(rc_formula(0, 10, 5), 0);
        assert_eq!(rc_formula(10, 10, 5), 0);
    }

    #[test]
    fn p3_center_root_costs_eight() {
        let g = generate(GraphKind::Path, 3, 0.0, 0, 1).unwrap();
        let s = TerminalSet::all(&g);
        let out = pipeline(&g, &s);
        assert_eq!(out.rc[&2], 8);
        assert_eq!(out.rc[&1], 8); // P3 has a single spanning tree
    }

    #[test]
    fn k4_star_costs_eighteen_for_every_root() {
        let g = generate(GraphKind::Clique, 4, 0.0, 0, 1).unwrap();
        let s = TerminalSet::all(&g);
        let out = pipeline(&g, &s);
        for v in g.nodes() {
            assert_eq!(out.rc[&v], 18);
        }
    }

    #[test]
    fn two_terminals_cost_twice_their_distance() {
        let g = Graph::from_edges(3, &[(1, 2, 2), (2, 3, 3)]).unwrap();
        let s = TerminalSet::new(&g, [1, 3]).unwrap();
        let out = pipeline(&g, &s);
        assert_eq!(out.rc[&1], 10);
        assert_eq!(out.rc[&3], 10);
    }

    #[test]
    fn distributed_rc_matches_oracle_on_random_graphs() {
        for seed in 0..20u64 {
            let g = generate(
                GraphKind::RandomConnected,
                5 + (seed % 12) as u32,
                0.35,
                seed,
                if seed % 2 == 0 { 1 } else { 4 },
            )
            .unwrap();
            let s = TerminalSet::all(&g);
            let dp = compute_dprime(&g).unwrap();
            let (tables, _) = build_trees(&g, &s, dp.dprime).unwrap();
            let out = compute_all_rc(&g, &tables, &s, &s, dp.dprime).unwrap();
            for v in s.iter() {
                assert!(
                    oracle_rc_check(&g, &tables, &s, v, out.rc[&v]),
                    "seed {seed} root {v}"
                );
                // every pair is counted in both directions
                assert_eq!(out.rc[&v] % 2, 0);
            }
        }
    }

    #[test]
    fn corrupted_value_fails_the_oracle_check() {
        let g = generate(GraphKind::Clique, 4, 0.0, 0, 1).unwrap();
        let s = TerminalSet::all(&g);
        let dp = compute_dprime(&g).unwrap();
        let (tables, _) = build_trees(&g, &s, dp.dprime).unwrap();
        let out = compute_all_rc(&g, &tables, &s, &s, dp.dprime).unwrap();
        assert!(oracle_rc_check(&g, &tables, &s, 1, out.rc[&1]));
        assert!(!oracle_rc_check(&g, &tables, &s, 1, out.rc[&1] + 2));
    }

    #[test]
    fn tree_cost_dominates_graph_cost() {
        for seed in 0..10u64 {
            let g = generate(GraphKind::RandomConnected, 10, 0.4, seed, 3).unwrap();
            let s = TerminalSet::new(&g, (1..=6).collect::<Vec<_>>()).unwrap();
            let out = pipeline(&g, &s);
            let rc_g = oracle::rc_graph(&g, &s);
            for v in s.iter() {
                assert!(out.rc[&v] >= rc_g);
            }
        }
    }

    #[test]
    fn subset_roots_full_terminal_costs() {
        // trees rooted in a subset, costs still over the full S
        let g = generate(GraphKind::RandomConnected, 12, 0.3, 9, 1).unwrap();
        let s_full = TerminalSet::all(&g);
        let roots = TerminalSet::new(&g, [2, 5, 7]).unwrap();
        let dp = compute_dprime(&g).unwrap();
        let (tables, _) = build_trees(&g, &roots, dp.dprime).unwrap();
        let out = compute_all_rc(&g, &tables, &s_full, &roots, dp.dprime).unwrap();
        for v in roots.iter() {
            assert!(
                oracle_rc_check(&g, &tables, &s_full, v, out.rc[&v]),
                "root {v}"
            );
            let ssrc = oracle::ssrc_exact(&g, &s_full, v);
            assert_eq!(out.ssrc[&v], ssrc);
        }
    }

    #[test]
    fn json_dump_shape() {
        let g = generate(GraphKind::Path, 3, 0.0, 0, 1).unwrap();
        let s = TerminalSet::all(&g);
        let out = pipeline(&g, &s);
        let v = costs_to_json(&out);
        assert_eq!(v["2"]["rc"], 8);
        assert_eq!(v["2"]["ssrc"], 2);
    }
}
