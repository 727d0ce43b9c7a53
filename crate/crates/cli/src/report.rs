//! Report structures, JSON serialization and the CSV plot-data format.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// One pipeline execution on one graph instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub seed: u64,
    pub mode: String,
    pub n: u32,
    pub m: usize,
    pub d_omega: u64,
    pub s_size: usize,
    pub chosen_root: u32,
    pub rc_chosen: u64,
    pub rc_graph_oracle: u64,
    pub ratio: f64,
    pub bound: f64,
    pub within_bound: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrct_exact_cost: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_vs_mrct: Option<f64>,
    pub rounds_used: u64,
    pub round_budget: u64,
    pub within_round_budget: bool,
    pub max_edge_bits: u32,
    pub bits_budget: u32,
    pub dprime: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<Vec<u32>>,
    pub fallback: bool,
}

/// Whole-run aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub max_ratio: f64,
    pub bound_violations: usize,
    pub violation_fraction: f64,
    /// Largest `rounds_used / (|S| + D)` (deterministic) respectively
    /// `rounds_used / (s + D)` (randomized) observed.
    pub max_round_constant: f64,
    pub max_edge_bits: u32,
    pub round_budget_violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: serde_json::Value,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

pub fn aggregate(trials: &[TrialRecord]) -> Aggregate {
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    let mut max_c: f64 = 0.0;
    let mut max_bits = 0;
    let mut budget_violations = 0;
    for t in trials {
        max_ratio = max_ratio.max(t.ratio);
        if !t.within_bound {
            violations += 1;
        }
        if !t.within_round_budget {
            budget_violations += 1;
        }
        let scale = if t.mode == "randomized" {
            t.sample.as_ref().map_or(t.s_size, Vec::len) as f64 + t.d_omega as f64
        } else {
            t.s_size as f64 + t.d_omega as f64
        };
        max_c = max_c.max(t.rounds_used as f64 / scale);
        max_bits = max_bits.max(t.max_edge_bits);
    }
    Aggregate {
        trials: trials.len(),
        max_ratio,
        bound_violations: violations,
        violation_fraction: if trials.is_empty() {
            0.0
        } else {
            violations as f64 / trials.len() as f64
        },
        max_round_constant: max_c,
        max_edge_bits: max_bits,
        round_budget_violations: budget_violations,
    }
}

pub const CSV_HEADER: &str = "n,D,S,mode,ratio,bound,rounds,round_budget,max_edge_bits";

/// Plot-data rows: `(n, D, |S|, mode, ratio, bound, rounds, round_budget,
/// max_edge_bits)`.
pub fn emit_plotdata(report: &ExperimentReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for t in &report.trials {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            t.n,
            t.d_omega,
            t.s_size,
            t.mode,
            t.ratio,
            t.bound,
            t.rounds_used,
            t.round_budget,
            t.max_edge_bits
        ));
    }
    out
}

/// A parsed plot-data row.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub n: u32,
    pub d: u64,
    pub s: usize,
    pub mode: String,
    pub ratio: f64,
    pub bound: f64,
    pub rounds: u64,
    pub round_budget: u64,
    pub max_edge_bits: u32,
}

pub fn parse_plotdata(text: &str) -> Result<Vec<PlotRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => bail!("bad CSV header: {other:?}"),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            bail!("row {}: expected 9 fields, got {}", idx + 2, fields.len());
        }
        let ctx = |name: &'static str| move || format!("row {}: {name}", idx + 2);
        rows.push(PlotRow {
            n: fields[0].parse().with_context(ctx("n"))?,
            d: fields[1].parse().with_context(ctx("D"))?,
            s: fields[2].parse().with_context(ctx("S"))?,
            mode: fields[3].to_string(),
            ratio: fields[4].parse().with_context(ctx("ratio"))?,
            bound: fields[5].parse().with_context(ctx("bound"))?,
            rounds: fields[6].parse().with_context(ctx("rounds"))?,
            round_budget: fields[7].parse().with_context(ctx("round_budget"))?,
            max_edge_bits: fields[8].parse().with_context(ctx("max_edge_bits"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trial(ratio: f64) -> TrialRecord {
        TrialRecord {
            trial: 0,
            seed: 1,
            mode: "deterministic".into(),
            n: 5,
            m: 10,
            d_omega: 1,
            s_size: 5,
            chosen_root: 1,
            rc_chosen: 32,
            rc_graph_oracle: 20,
            ratio,
            bound: 1.6,
            within_bound: ratio <= 1.6,
            mrct_exact_cost: None,
            ratio_vs_mrct: None,
            rounds_used: 30,
            round_budget: 30,
            within_round_budget: true,
            max_edge_bits: 14,
            bits_budget: 24,
            dprime: 1,
            sample: None,
            fallback: false,
        }
    }

    #[test]
    fn csv_round_trip_preserves_aggregates() {
        let trials = vec![sample_trial(1.6), sample_trial(1.2)];
        let agg = aggregate(&trials);
        let report = ExperimentReport {
            config: serde_json::json!({}),
            trials,
            aggregate: agg.clone(),
        };
        let csv = emit_plotdata(&report);
        assert_eq!(csv.lines().count(), 3);
        let rows = parse_plotdata(&csv).unwrap();
        let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0f64, f64::max);
        assert_eq!(max_ratio, agg.max_ratio);
    }

    #[test]
    fn empty_report_is_header_only() {
        let report = ExperimentReport {
            config: serde_json::json!({}),
            trials: vec![],
            aggregate: aggregate(&[]),
        };
        let csv = emit_plotdata(&report);
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        assert!(parse_plotdata(&csv).unwrap().is_empty());
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_plotdata("nope\n").is_err());
        let bad = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(parse_plotdata(&bad).is_err());
    }
}
