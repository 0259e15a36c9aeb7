//! Cycle-per-step decomposition, time ratio, speedups and the run report.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::MachineConfig;
use crate::qpu::{Collision, IssueEvent};
use crate::sched::SchedEvent;

/// Cycles spent on one circuit step, split into the four buckets.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepMetrics {
    pub core: usize,
    pub block: usize,
    pub step_index: u32,
    pub nominal_ns: u64,
    pub qices: u32,
    pub cycles_quantum: u64,
    pub cycles_classical: u64,
    pub cycles_stall: u64,
    pub cycles_feedback: u64,
    pub ces: u64,
    pub tr: f64,
}

impl StepMetrics {
    pub fn bucket_sum(&self) -> u64 {
        self.cycles_quantum + self.cycles_classical + self.cycles_stall + self.cycles_feedback
    }
}

pub fn tr_of_step(ces: u64, clock_ns: u64, gate_ns: u64) -> f64 {
    assert!(gate_ns > 0, "gate time must be positive");
    (clock_ns * ces) as f64 / gate_ns as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub core: usize,
    pub block: usize,
    pub pc: u32,
    pub scheduled_ns: u64,
    pub actual_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MrceRecord {
    pub core: usize,
    pub block: usize,
    pub pc: u32,
    pub qubit: u8,
    pub outcome: bool,
    pub result_ready_ns: u64,
    /// Cycle the context switch started; `None` when the result was
    /// already valid at dispatch and no switch happened.
    pub switch_start_cycle: Option<u64>,
    pub switch_cycles: u64,
    pub inject_ns: Option<u64>,
}

/// Per-block execution summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockRun {
    pub block: usize,
    pub name: String,
    pub core: usize,
    pub activated_at: u64,
    pub done_at: u64,
    pub fill_cycles: u64,
    pub tail_cycles: u64,
    pub readout_wait_cycles: u64,
    pub steps: u32,
}

impl BlockRun {
    pub fn cycles(&self) -> u64 {
        self.done_at - self.activated_at
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub program_hash: String,
    pub config: MachineConfig,
    pub total_cycles: u64,
    pub total_exec_ns: u64,
    pub last_issue_ns: u64,
    pub operations_issued: u64,
    pub avg_tr: f64,
    pub max_tr: f64,
    pub steps: Vec<StepMetrics>,
    pub violations: Vec<Violation>,
    pub collisions: Vec<Collision>,
    pub mrce: Vec<MrceRecord>,
    pub blocks: Vec<BlockRun>,
    pub block_order: Vec<usize>,
    pub sched_events: Vec<SchedEvent>,
    pub speedup: Option<f64>,
    pub ideal_speedup: Option<f64>,
}

impl RunReport {
    /// Fills in `tr` for every step and the aggregate TR fields.
    pub fn finalize_tr(&mut self) {
        let clk = self.config.clock_period_ns;
        let gate = self.config.tr_gate_ns;
        for s in &mut self.steps {
            s.tr = tr_of_step(s.ces, clk, gate);
        }
        let n = self.steps.len();
        self.avg_tr = if n == 0 {
            0.0
        } else {
            self.steps.iter().map(|s| s.tr).sum::<f64>() / n as f64
        };
        self.max_tr = self.steps.iter().map(|s| s.tr).fold(0.0, f64::max);
    }

    pub fn total_feedback_cycles(&self) -> u64 {
        self.steps.iter().map(|s| s.cycles_feedback).sum()
    }

    /// Per-step rows for CSV export.
    pub fn write_steps_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "core", "block", "step", "qices", "quantum", "classical", "stall", "feedback", "ces", "tr",
        ])?;
        for s in &self.steps {
            out.write_record([
                s.core.to_string(),
                s.block.to_string(),
                s.step_index.to_string(),
                s.qices.to_string(),
                s.cycles_quantum.to_string(),
                s.cycles_classical.to_string(),
                s.cycles_stall.to_string(),
                s.cycles_feedback.to_string(),
                s.ces.to_string(),
                format!("{:.4}", s.tr),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Groups issue events into circuit steps: one step per (core, block,
/// step index), ordered by first issue. Multi-channel operations count once.
pub fn steps_of(events: &[IssueEvent]) -> Vec<Vec<&IssueEvent>> {
    let mut map: BTreeMap<(usize, usize, u32), Vec<&IssueEvent>> = BTreeMap::new();
    for e in events {
        map.entry((e.core, e.block, e.step)).or_default().push(e);
    }
    let mut steps: Vec<Vec<&IssueEvent>> = map.into_values().collect();
    steps.sort_by_key(|s| (s[0].time_ns, s[0].core, s[0].block, s[0].step));
    steps
}

/// Operations per step, counting a two-qubit gate once.
pub fn step_operation_count(step: &[&IssueEvent]) -> usize {
    step.iter()
        .filter(|e| e.channel_qubit() == u32::from(e.qubits.as_slice()[0]))
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("reports come from different programs ({0} vs {1})")]
pub struct HashMismatch(pub String, pub String);

pub fn speedup(base: &RunReport, variant: &RunReport) -> Result<f64, HashMismatch> {
    if base.program_hash != variant.program_hash {
        return Err(HashMismatch(base.program_hash.clone(), variant.program_hash.clone()));
    }
    Ok(base.total_exec_ns as f64 / variant.total_exec_ns.max(1) as f64)
}

/// Export of issue events as CSV: time_ns, gate, qubits, channel, duration_ns.
pub fn write_events_csv<W: std::io::Write>(events: &[IssueEvent], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["time_ns", "gate", "qubits", "channel", "duration_ns"])?;
    for e in events {
        let qs: Vec<String> = e.qubits.iter().map(|q| q.to_string()).collect();
        out.write_record([
            e.time_ns.to_string(),
            e.gate.to_string(),
            qs.join(" "),
            e.channel.to_string(),
            e.duration_ns.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tr_arithmetic() {
        assert_eq!(tr_of_step(2, 10, 20), 1.0);
        assert_eq!(tr_of_step(8, 10, 20), 4.0);
        assert_eq!(tr_of_step(1, 10, 20), 0.5);
    }
}
