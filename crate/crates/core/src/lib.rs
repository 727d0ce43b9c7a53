//! Simulator and algorithm library for distributed approximation of
//! minimum routing cost trees.
//!
//! The crate has three layers:
//!
//! * [`graph`] and [`congest`] provide the network model: undirected
//!   graphs with positive integer edge delays, and a deterministic
//!   synchronous round engine in which every node may send one bounded
//!   message per incident edge per slot (the CONGEST model, with a
//!   message on edge `e` taking `delay(e)` slots to traverse).
//! * [`sptrees`] and [`routing_cost`] implement the distributed
//!   machinery: one shortest-path tree per terminal built by prioritized
//!   delayed breadth-first search, followed by a reverse-scheduled
//!   bottom-up wave that computes every tree's routing cost exactly.
//! * [`mrct`] combines them into deterministic and randomized
//!   orchestrators that select a spanning tree whose routing cost is at
//!   most `2 - 2/|S|` (respectively `2 - 2/|S| + beta`) times the routing
//!   cost of the graph itself, and [`oracle`] supplies the centralized
//!   brute-force ground truth the test suite compares against.

pub mod congest;
pub mod graph;
pub mod mrct;
pub mod oracle;
pub mod routing_cost;
pub mod sptrees;

pub use congest::{
    convergecast_min, convergecast_sum, default_bandwidth, flood_broadcast, tree_broadcast,
    Control, EngineError, ExecutionReport, Message, NodeProgram, RoundEngine,
};
pub use graph::{generate, load_edge_list, save_edge_list, Graph, GraphError, GraphKind, NodeId, TerminalSet};
pub use mrct::{
    announce_tree, run_deterministic, run_randomized, sample_terminals, sampling_plan,
    ApproxParams, Mode, MrctError, MrctResult, PhaseRounds, SampleOutcome, SamplingPlan,
};
pub use oracle::{apsp, mrct_exact, rc_exact, rc_graph, ssrc_exact, DistanceMatrix, OracleError};
pub use routing_cost::{compute_all_rc, oracle_rc_check, rc_formula, CostTable, CostWaveOutcome};
pub use sptrees::{build_trees, compute_dprime, compute_ssrc, DprimeOutcome, TreeEntry, TreeTable};
