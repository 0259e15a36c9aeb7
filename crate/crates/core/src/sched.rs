//! Multiprocessor control unit: status registers, dependency-checked
//! allocation, prefetch into the second cache, completion handling.

use serde::Serialize;

use crate::config::CostConfig;
use crate::error::SimFault;
use crate::program::{
    advance_priority_counter, deps_satisfied, prefetch_eligible, BlockId, BlockInfoTable,
};

pub use crate::program::BlockStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchedAction {
    /// Cold load into the active cache; the scheduler is busy until `finish`.
    Allocate { block: BlockId, core: usize, finish: u64 },
    /// Background load into the second cache.
    Prefetch { block: BlockId, core: usize, load_done: u64 },
    /// Cache path switch to a prefetched block that became ready.
    Switch { block: BlockId, core: usize, finish: u64 },
    Activate { block: BlockId, core: usize },
    Done { block: BlockId, core: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SchedEvent {
    pub cycle: u64,
    #[serde(flatten)]
    pub action: SchedAction,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoreSlot {
    /// Block running or being loaded into the active cache.
    pub active: Option<BlockId>,
    /// Block held in the second cache and the cycle its load completes.
    pub prefetched: Option<(BlockId, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingActivation {
    block: BlockId,
    core: usize,
    at: u64,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    pub statuses: Vec<BlockStatus>,
    pub done_mask: u64,
    pub priority_counter: u32,
    pub busy_until: u64,
    pub cores: Vec<CoreSlot>,
    pub events: Vec<SchedEvent>,
    pending: Vec<PendingActivation>,
    costs: CostConfig,
    prefetch: bool,
}

impl Scheduler {
    pub fn new(table: &BlockInfoTable, cores: usize, costs: CostConfig, prefetch: bool) -> Self {
        let mut s = Scheduler {
            statuses: vec![BlockStatus::Wait; table.len()],
            done_mask: 0,
            priority_counter: 0,
            busy_until: 0,
            cores: vec![CoreSlot::default(); cores],
            events: Vec::new(),
            pending: Vec::new(),
            costs,
            prefetch,
        };
        s.settle_counter(table);
        s
    }

    pub fn all_done(&self) -> bool {
        self.statuses.iter().all(|&s| s == BlockStatus::Done)
    }

    pub fn is_busy(&self, now: u64) -> bool {
        now < self.busy_until
    }

    fn log(&mut self, cycle: u64, action: SchedAction) {
        self.events.push(SchedEvent { cycle, action });
    }

    fn settle_counter(&mut self, t: &BlockInfoTable) {
        loop {
            let next = advance_priority_counter(t, &self.statuses, self.priority_counter);
            if next == self.priority_counter {
                break;
            }
            self.priority_counter = next;
        }
    }

    /// Activations whose load or switch completes by `now`, in block order.
    pub fn take_due(&mut self, now: u64) -> Vec<(BlockId, usize)> {
        let mut due: Vec<PendingActivation> = Vec::new();
        self.pending.retain(|p| {
            if p.at <= now {
                due.push(*p);
                false
            } else {
                true
            }
        });
        due.sort_by_key(|p| (p.core, p.block));
        let out: Vec<(BlockId, usize)> = due.iter().map(|p| (p.block, p.core)).collect();
        for &(block, core) in &out {
            self.log(now, SchedAction::Activate { block, core });
        }
        out
    }

    /// Earliest pending activation, for idle-cycle skipping.
    pub fn next_activation(&self) -> Option<u64> {
        self.pending.iter().map(|p| p.at).min()
    }

    pub fn notify_done(&mut self, t: &BlockInfoTable, b: BlockId, c: usize, now: u64) -> Result<(), SimFault> {
        if self.statuses[b] != BlockStatus::InExecution || self.cores[c].active != Some(b) {
            return Err(SimFault::DoubleCompletion { block: b, core: c });
        }
        self.statuses[b] = BlockStatus::Done;
        self.done_mask |= 1 << b;
        self.cores[c].active = None;
        self.settle_counter(t);
        self.log(now, SchedAction::Done { block: b, core: c });
        Ok(())
    }

    fn ready(&self, t: &BlockInfoTable, b: BlockId) -> bool {
        deps_satisfied(t, self.done_mask, self.priority_counter, b)
    }

    fn start(&mut self, t: &BlockInfoTable, b: BlockId, now: u64) -> Result<(), SimFault> {
        if !self.ready(t, b) {
            return Err(SimFault::UnsafeAllocation { block: b, cycle: now });
        }
        self.statuses[b] = BlockStatus::InExecution;
        Ok(())
    }

    /// One scheduler cycle. Returns the number of actions taken.
    pub fn tick(&mut self, t: &BlockInfoTable, now: u64) -> Result<usize, SimFault> {
        let mut acted = 0;

        // Idle cores whose prefetched block became ready switch cache paths.
        for c in 0..self.cores.len() {
            let slot = self.cores[c];
            if let (None, Some((b, load_done))) = (slot.active, slot.prefetched) {
                if self.ready(t, b) {
                    self.start(t, b, now)?;
                    let finish = now.max(load_done) + self.costs.t_switch;
                    self.cores[c] = CoreSlot {
                        active: Some(b),
                        prefetched: None,
                    };
                    self.pending.push(PendingActivation {
                        block: b,
                        core: c,
                        at: finish.max(now + 1),
                    });
                    self.log(now, SchedAction::Switch { block: b, core: c, finish });
                    acted += 1;
                }
            }
        }

        // Cold allocations, one at a time while the scheduler is free.
        let mut allocated = false;
        while !self.is_busy(now) {
            let Some(b) = (0..t.len()).find(|&b| self.cold_candidate(t, b)) else {
                break;
            };
            let Some(c) = self.idle_core() else {
                break;
            };
            if let Some(owner) = self.prefetch_owner(b) {
                self.cores[owner].prefetched = None;
            }
            self.start(t, b, now)?;
            let finish = now + self.costs.alloc_cost(u64::from(t.entries[b].word_count()));
            self.busy_until = finish;
            self.cores[c].active = Some(b);
            self.pending.push(PendingActivation {
                block: b,
                core: c,
                at: finish.max(now + 1),
            });
            self.log(now, SchedAction::Allocate { block: b, core: c, finish });
            allocated = true;
            acted += 1;
        }

        if self.prefetch && !allocated && !self.is_busy(now) {
            let cand = (0..t.len()).find(|&b| {
                self.statuses[b] == BlockStatus::Wait
                    && prefetch_eligible(t, &self.statuses, self.priority_counter, b)
            });
            let core = (0..self.cores.len())
                .filter(|&c| self.cores[c].prefetched.is_none())
                .min_by_key(|&c| (self.cores[c].active.is_some(), c));
            if let (Some(b), Some(c)) = (cand, core) {
                let load_done = now + self.costs.alloc_cost(u64::from(t.entries[b].word_count()));
                self.statuses[b] = BlockStatus::Prefetch;
                self.cores[c].prefetched = Some((b, load_done));
                self.log(now, SchedAction::Prefetch { block: b, core: c, load_done });
                acted += 1;
            }
        }
        Ok(acted)
    }

    fn prefetch_owner(&self, b: BlockId) -> Option<usize> {
        self.cores
            .iter()
            .position(|s| s.prefetched.map(|(p, _)| p) == Some(b))
    }

    /// Waiting blocks, or prefetched blocks stranded behind a busy core.
    fn cold_candidate(&self, t: &BlockInfoTable, b: BlockId) -> bool {
        let eligible = match self.statuses[b] {
            BlockStatus::Wait => true,
            BlockStatus::Prefetch => self
                .prefetch_owner(b)
                .is_some_and(|c| self.cores[c].active.is_some()),
            _ => false,
        };
        eligible && self.ready(t, b)
    }

    fn idle_core(&self) -> Option<usize> {
        (0..self.cores.len())
            .filter(|&c| self.cores[c].active.is_none())
            .min_by_key(|&c| (self.cores[c].prefetched.is_some(), c))
    }
}
