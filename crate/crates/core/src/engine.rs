//! Simulation kernel: steps the scheduler and every core once per cycle.

use sha2::{Digest, Sha256};

use crate::config::{DependencyRepr, MachineConfig};
use crate::error::{RunError, SimFault};
use crate::isa::{validate_program, write_binary, Diagnostic, Location, Program};
use crate::metrics::RunReport;
use crate::processor::{Core, CoreTrace, Env};
use crate::program::{build_table, convert_dependencies, BlockInfoTable};
use crate::qpu::{IssueEvent, Qpu};
use crate::sched::{SchedAction, Scheduler};

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub events: Vec<IssueEvent>,
    pub trace: Vec<CoreTrace>,
}

/// A validated program with its block table, ready to run under many
/// configurations that share its dependency representation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub program: Program,
    pub table: BlockInfoTable,
    pub hash: String,
}

pub fn program_hash(p: &Program) -> String {
    let mut bytes = Vec::new();
    match write_binary(p, &mut bytes) {
        Ok(()) => {}
        // Unencodable programs still get a stable identity from their text.
        Err(_) => bytes = p.to_string().into_bytes(),
    }
    hex::encode(Sha256::digest(&bytes))
}

impl Prepared {
    pub fn new(program: &Program, cfg: &MachineConfig) -> Result<Self, RunError> {
        cfg.validate()?;
        let mut diags = validate_program(program);
        if program.qubit_count > cfg.qpu.qubit_count {
            diags.push(Diagnostic {
                location: Location {
                    block: Some("<program>".into()),
                    ..Location::default()
                },
                message: format!(
                    "program uses {} qubits, machine has {}",
                    program.qubit_count, cfg.qpu.qubit_count
                ),
            });
        }
        if !diags.is_empty() {
            return Err(RunError::Invalid(diags));
        }
        let program = match cfg.dependency_repr {
            DependencyRepr::AsDeclared => program.clone(),
            DependencyRepr::Direct => convert_dependencies(program, false)?,
            DependencyRepr::Priority => convert_dependencies(program, true)?,
        };
        let table = build_table(&program)?;
        let hash = program_hash(&program);
        Ok(Prepared { program, table, hash })
    }

    pub fn run(&self, cfg: &MachineConfig) -> Result<RunOutput, SimFault> {
        let mut qcfg = cfg.qpu.clone();
        qcfg.clock_period_ns = cfg.clock_period_ns;
        let qpu = Qpu::new(qcfg, cfg.seed, cfg.record_events);
        let mut env = Env::new(qpu, cfg.trace_cycles);
        let mut sched = Scheduler::new(&self.table, cfg.cores, cfg.costs.clone(), cfg.prefetch);
        let mut cores: Vec<Core> = (0..cfg.cores)
            .map(|i| Core::new(i, cfg.superscalar_width))
            .collect();

        let mut now: u64 = 0;
        let mut done: Vec<(usize, usize)> = Vec::with_capacity(cfg.cores);
        loop {
            for (b, c) in sched.take_due(now) {
                cores[c].activate(&self.table.entries[b], &self.program.instructions, now, cfg, &mut env);
            }
            done.clear();
            for core in cores.iter_mut() {
                if let Some(b) = core.step(now, &mut env, cfg)? {
                    done.push((b, core.id));
                }
            }
            for &(b, c) in &done {
                sched.notify_done(&self.table, b, c, now)?;
            }
            let acted = sched.tick(&self.table, now)?;
            if sched.all_done() && cores.iter().all(Core::is_idle) {
                break;
            }
            // With every core idle, nothing changes until the scheduler's
            // next activation or the end of its busy period.
            if acted == 0 && cores.iter().all(Core::is_idle) {
                let mut next = sched.next_activation().unwrap_or(u64::MAX);
                if sched.busy_until > now {
                    next = next.min(sched.busy_until);
                }
                if next == u64::MAX {
                    return Err(SimFault::Deadlock {
                        core: 0,
                        pc: 0,
                        cycles: 0,
                    });
                }
                now = next.max(now + 1);
            } else {
                now += 1;
            }
        }

        let clk = cfg.clock_period_ns;
        let block_order = sched
            .events
            .iter()
            .filter_map(|e| match e.action {
                SchedAction::Done { block, .. } => Some(block),
                _ => None,
            })
            .collect();
        let mut report = RunReport {
            program_hash: self.hash.clone(),
            config: cfg.clone(),
            total_cycles: now,
            total_exec_ns: now * clk,
            last_issue_ns: env.qpu.last_issue_ns,
            operations_issued: env.qpu.issued,
            avg_tr: 0.0,
            max_tr: 0.0,
            steps: std::mem::take(&mut env.steps),
            violations: std::mem::take(&mut env.violations),
            collisions: std::mem::take(&mut env.qpu.collisions),
            mrce: std::mem::take(&mut env.mrce),
            blocks: std::mem::take(&mut env.blocks),
            block_order,
            sched_events: sched.events,
            speedup: None,
            ideal_speedup: None,
        };
        report.finalize_tr();
        Ok(RunOutput {
            report,
            events: std::mem::take(&mut env.qpu.log),
            trace: env.trace.take().unwrap_or_default(),
        })
    }
}

/// Validates, builds the table and runs once.
pub fn run_program(program: &Program, cfg: &MachineConfig) -> Result<RunOutput, RunError> {
    let prepared = Prepared::new(program, cfg)?;
    Ok(prepared.run(cfg)?)
}
