//! One processor: width-W fetch into sync buffers, parallel-until-classical
//! dispatch, single classical unit, timing controller, emitter and MRCE
//! fast context switch.
//!
//! Each cycle runs, in order: block-done check, pipeline fill, timing
//! controller, context switch, classical unit, quantum dispatch, fetch.

use std::collections::VecDeque;

use serde::Serialize;

use crate::config::MachineConfig;
use crate::error::SimFault;
use crate::isa::{
    ClassicalInstr, Flags, Instruction, MrceOp, QuantumOp, Reg, GP_REGISTERS, MAX_QUBITS,
    SHARED_REG_BASE,
};
use crate::metrics::{BlockRun, MrceRecord, StepMetrics, Violation};
use crate::program::{BlockId, BlockInfoEntry};
use crate::qpu::{channels, IssueEvent, Qpu, ResultFile};

/// State shared by all cores of one engine.
#[derive(Debug)]
pub struct Env {
    pub results: ResultFile,
    pub shared_regs: [i32; (GP_REGISTERS - SHARED_REG_BASE) as usize],
    pub qpu: Qpu,
    pub steps: Vec<StepMetrics>,
    pub violations: Vec<Violation>,
    pub mrce: Vec<MrceRecord>,
    pub blocks: Vec<BlockRun>,
    pub trace: Option<Vec<CoreTrace>>,
}

impl Env {
    pub fn new(qpu: Qpu, trace: bool) -> Self {
        Env {
            results: ResultFile::default(),
            shared_regs: [0; (GP_REGISTERS - SHARED_REG_BASE) as usize],
            qpu,
            steps: Vec::new(),
            violations: Vec::new(),
            mrce: Vec::new(),
            blocks: Vec::new(),
            trace: trace.then(Vec::new),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreTrace {
    pub cycle: u64,
    pub core: usize,
    #[serde(flatten)]
    pub kind: TraceKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceKind {
    Activate { block: usize },
    Dispatch { pcs: Vec<u32>, label: u16, step: u32 },
    Retire { pc: u32, op: String },
    Stall { reason: &'static str },
    MrceOpen { pc: u32, qubit: u8 },
    MrceResolve { pc: u32, qubit: u8, outcome: bool, switch_cycles: u64 },
    /// The block reached its end with conditional contexts still open;
    /// they are drained before the block reports done.
    DrainOpenContexts { open: usize },
    Done { block: usize },
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    pc: u32,
    ins: Instruction,
}

#[derive(Debug, Clone)]
struct Group {
    actual_ns: u64,
    nominal_ns: u64,
    step: u32,
    injected: bool,
    ops: Vec<(u32, QuantumOp)>,
}

#[derive(Debug, Clone, Copy)]
struct Context {
    pc: u32,
    result: u8,
    target: u8,
    op0: MrceOp,
    op1: MrceOp,
}

#[derive(Debug, Clone, Copy)]
struct Switch {
    end: u64,
    has_step: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Buckets {
    quantum: u64,
    classical: u64,
    stall: u64,
    feedback: u64,
}

impl Buckets {
    fn total(&self) -> u64 {
        self.quantum + self.classical + self.stall + self.feedback
    }

    fn add(&mut self, cat: Cat) {
        match cat {
            Cat::Quantum => self.quantum += 1,
            Cat::Classical => self.classical += 1,
            Cat::Stall => self.stall += 1,
            Cat::Feedback => self.feedback += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cat {
    Quantum,
    Classical,
    Stall,
    Feedback,
}

/// Online per-cycle attribution. Cycles accumulate in `pending` and are
/// credited to the step whose dispatch ends the window.
#[derive(Debug, Clone, Default)]
struct Attribution {
    pending: Buckets,
    current: Option<StepMetrics>,
    finished: Vec<StepMetrics>,
    /// Set from an FMR retire until the next quantum dispatch.
    chain: bool,
    cycles: u64,
    fill: u64,
    readout_wait: u64,
    next_step: u32,
}

impl Attribution {
    fn flush_into(current: &mut StepMetrics, b: Buckets) {
        current.cycles_quantum += b.quantum;
        current.cycles_classical += b.classical;
        current.cycles_stall += b.stall;
        current.cycles_feedback += b.feedback;
        current.ces = current.bucket_sum();
    }

    fn open_step(&mut self, core: usize, block: usize, nominal_ns: u64, qices: u32) {
        if let Some(done) = self.current.take() {
            self.finished.push(done);
        }
        let mut s = StepMetrics {
            core,
            block,
            step_index: self.next_step,
            nominal_ns,
            qices,
            ..StepMetrics::default()
        };
        self.next_step += 1;
        Self::flush_into(&mut s, std::mem::take(&mut self.pending));
        self.current = Some(s);
    }

    fn continue_step(&mut self, qices: u32) {
        let b = std::mem::take(&mut self.pending);
        let cur = self.current.as_mut().expect("continuation without an open step");
        cur.qices += qices;
        Self::flush_into(cur, b);
    }

    fn current_index(&self) -> Option<u32> {
        self.current.as_ref().map(|s| s.step_index)
    }
}

#[derive(Debug, Clone)]
struct Run {
    block: BlockId,
    name: String,
    pc_end: u32,
    activated_at: u64,
    fill_until: u64,
    anchor_ns: u64,
    started: bool,
    drain_flagged: bool,
}

enum ClassicalOutcome {
    Idle,
    Retired,
    ReadoutWait,
    Stalled,
}

enum DispatchKind {
    NewStep { nominal_ns: u64, qices: u32 },
    Continue { qices: u32 },
    ContextOnly,
}

#[derive(Debug, Clone)]
pub struct Core {
    pub id: usize,
    width: usize,
    run: Option<Run>,
    pc: u32,
    fetch_done: bool,
    redirect_end: u64,
    window: VecDeque<Slot>,
    regs: [i32; GP_REGISTERS as usize],
    flags: Flags,
    fmr_waiting: bool,
    queue: VecDeque<Group>,
    prev_actual_ns: u64,
    prev_nominal_ns: u64,
    contexts: Vec<Context>,
    scoreboard: u64,
    switch: Option<Switch>,
    cond_busy: [u64; MAX_QUBITS as usize],
    ops_end_ns: u64,
    last_progress: u64,
    attr: Attribution,
    cache: Vec<Instruction>,
    cache_base: u32,
}

impl Core {
    pub fn new(id: usize, width: usize) -> Self {
        Core {
            id,
            width,
            run: None,
            pc: 0,
            fetch_done: true,
            redirect_end: 0,
            window: VecDeque::with_capacity(width),
            regs: [0; GP_REGISTERS as usize],
            flags: Flags::default(),
            fmr_waiting: false,
            queue: VecDeque::new(),
            prev_actual_ns: 0,
            prev_nominal_ns: 0,
            contexts: Vec::new(),
            scoreboard: 0,
            switch: None,
            cond_busy: [0; MAX_QUBITS as usize],
            ops_end_ns: 0,
            last_progress: 0,
            attr: Attribution::default(),
            cache: Vec::new(),
            cache_base: 0,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.run.is_none()
    }

    pub fn block(&self) -> Option<BlockId> {
        self.run.as_ref().map(|r| r.block)
    }

    /// Qubits whose conditional operation is still pending.
    pub fn scoreboard(&self) -> u64 {
        self.scoreboard
    }

    pub fn open_contexts(&self) -> usize {
        self.contexts.len()
    }

    fn trace(&self, env: &mut Env, cycle: u64, kind: TraceKind) {
        if let Some(t) = env.trace.as_mut() {
            t.push(CoreTrace {
                cycle,
                core: self.id,
                kind,
            });
        }
    }

    /// Starts executing `entry` at cycle `now`; `code` is program memory.
    pub fn activate(
        &mut self,
        entry: &BlockInfoEntry,
        code: &[Instruction],
        now: u64,
        cfg: &MachineConfig,
        env: &mut Env,
    ) {
        self.cache.clear();
        self.cache
            .extend_from_slice(&code[entry.pc_start as usize..=entry.pc_end as usize]);
        self.cache_base = entry.pc_start;
        let d = cfg.costs.pipeline_depth;
        let clk = cfg.clock_period_ns;
        let anchor_ns = (now + d + 1) * clk;
        self.run = Some(Run {
            block: entry.block_id,
            name: entry.name.clone(),
            pc_end: entry.pc_end,
            activated_at: now,
            fill_until: now + d,
            anchor_ns,
            started: false,
            drain_flagged: false,
        });
        self.pc = entry.pc_start;
        self.fetch_done = false;
        self.redirect_end = now;
        self.window.clear();
        self.regs = [0; GP_REGISTERS as usize];
        self.flags = Flags::default();
        self.fmr_waiting = false;
        self.queue.clear();
        self.prev_actual_ns = anchor_ns;
        self.prev_nominal_ns = anchor_ns;
        self.contexts.clear();
        self.scoreboard = 0;
        self.switch = None;
        self.ops_end_ns = 0;
        self.last_progress = now;
        self.attr = Attribution::default();
        self.trace(env, now, TraceKind::Activate { block: entry.block_id });
    }

    fn finished(&self, now_ns: u64) -> bool {
        self.fetch_done
            && self.window.is_empty()
            && !self.fmr_waiting
            && self.contexts.is_empty()
            && self.switch.is_none()
            && self.queue.is_empty()
            && now_ns >= self.ops_end_ns
    }

    /// Advances the core by one cycle. Returns the finished block, if any.
    pub fn step(&mut self, now: u64, env: &mut Env, cfg: &MachineConfig) -> Result<Option<BlockId>, SimFault> {
        let Some(run) = self.run.as_ref() else {
            return Ok(None);
        };
        let clk = cfg.clock_period_ns;
        let now_ns = now * clk;

        if self.finished(now_ns) {
            return self.finish(now, env).map(Some);
        }
        self.attr.cycles += 1;

        if now < run.fill_until {
            self.fetch(now);
            self.attr.fill += 1;
            self.last_progress = now;
            return Ok(None);
        }

        let mut progress = self.timing_tick(now_ns, env);

        if let Some(sw) = self.switch {
            if now < sw.end {
                self.switch_cycle(sw.has_step);
                self.last_progress = now;
                return Ok(None);
            }
            self.switch = None;
        }
        if let Some(i) = self.resolvable_context(now_ns, env) {
            self.begin_switch(i, now, env, cfg);
            self.last_progress = now;
            return Ok(None);
        }

        let cls = self.classical_phase(now, now_ns, env, cfg)?;
        let dispatch = self.quantum_phase(now, env, cfg)?;
        progress |= self.fetch(now);
        progress |= matches!(cls, ClassicalOutcome::Retired) || dispatch.is_some();

        // Attribution for this cycle.
        let cat = match (&dispatch, &cls) {
            (Some(_), _) => Some(Cat::Quantum),
            (None, ClassicalOutcome::Retired) => Some(if self.attr.chain { Cat::Feedback } else { Cat::Classical }),
            (None, ClassicalOutcome::ReadoutWait) => None,
            _ => Some(if self.attr.chain { Cat::Feedback } else { Cat::Stall }),
        };
        match cat {
            Some(c) => self.attr.pending.add(c),
            None => self.attr.readout_wait += 1,
        }
        let block = self.run.as_ref().map(|r| r.block).unwrap_or(0);
        match dispatch {
            Some(DispatchKind::NewStep { nominal_ns, qices }) => {
                self.attr.open_step(self.id, block, nominal_ns, qices);
                self.attr.chain = false;
            }
            Some(DispatchKind::Continue { qices }) => {
                self.attr.continue_step(qices);
                self.attr.chain = false;
            }
            Some(DispatchKind::ContextOnly) => self.attr.chain = false,
            None => {}
        }

        if matches!(cls, ClassicalOutcome::Stalled) && dispatch.is_none() {
            self.trace(env, now, TraceKind::Stall { reason: "classical RAW on result register" });
        }

        if progress {
            self.last_progress = now;
        } else if now - self.last_progress > cfg.deadlock_timeout {
            return Err(SimFault::Deadlock {
                core: self.id,
                pc: self.window.front().map(|s| s.pc).unwrap_or(self.pc),
                cycles: now - self.last_progress,
            });
        }

        if self.fetch_done && self.window.is_empty() && !self.contexts.is_empty() {
            let open = self.contexts.len();
            let run = self.run.as_mut().expect("active run");
            if !run.drain_flagged {
                run.drain_flagged = true;
                self.trace(env, now, TraceKind::DrainOpenContexts { open });
            }
        }
        Ok(None)
    }

    fn switch_cycle(&mut self, has_step: bool) {
        if has_step {
            let cur = self.attr.current.as_mut().expect("injected step");
            cur.cycles_feedback += 1;
            cur.ces += 1;
        } else {
            self.attr.pending.feedback += 1;
        }
    }

    fn finish(&mut self, now: u64, env: &mut Env) -> Result<BlockId, SimFault> {
        let run = self.run.take().expect("active run");
        let mut attr = std::mem::take(&mut self.attr);
        if let Some(cur) = attr.current.take() {
            attr.finished.push(cur);
        }
        let tail = attr.pending.total();
        let in_steps: u64 = attr.finished.iter().map(|s| s.ces).sum();
        let attributed = in_steps + tail + attr.fill + attr.readout_wait;
        let cycles = now - run.activated_at;
        if attributed != cycles || attributed != attr.cycles {
            return Err(SimFault::AttributionGap {
                block: run.block,
                cycles,
                attributed,
            });
        }
        env.blocks.push(BlockRun {
            block: run.block,
            name: run.name,
            core: self.id,
            activated_at: run.activated_at,
            done_at: now,
            fill_cycles: attr.fill,
            tail_cycles: tail,
            readout_wait_cycles: attr.readout_wait,
            steps: attr.finished.len() as u32,
        });
        env.steps.append(&mut attr.finished);
        self.trace(env, now, TraceKind::Done { block: run.block });
        Ok(run.block)
    }

    fn read_reg(&self, r: Reg, env: &Env) -> i32 {
        if r.0 >= SHARED_REG_BASE {
            env.shared_regs[(r.0 - SHARED_REG_BASE) as usize]
        } else {
            self.regs[r.0 as usize]
        }
    }

    fn write_reg(&mut self, r: Reg, v: i32, env: &mut Env) {
        if r.0 >= SHARED_REG_BASE {
            env.shared_regs[(r.0 - SHARED_REG_BASE) as usize] = v;
        } else {
            self.regs[r.0 as usize] = v;
        }
    }

    fn fetch(&mut self, now: u64) -> bool {
        if self.fetch_done || now < self.redirect_end {
            return false;
        }
        let Some(run) = self.run.as_ref() else {
            return false;
        };
        let pc_end = run.pc_end;
        let mut fetched = false;
        while self.window.len() < self.width {
            if self.pc > pc_end {
                self.fetch_done = true;
                break;
            }
            let ins = self.cache[(self.pc - self.cache_base) as usize];
            self.window.push_back(Slot { pc: self.pc, ins });
            self.pc += 1;
            fetched = true;
            if matches!(ins, Instruction::EndBlock) {
                self.fetch_done = true;
                break;
            }
        }
        if !self.fetch_done && self.pc > pc_end {
            self.fetch_done = true;
        }
        fetched
    }

    fn classical_limit(&self) -> usize {
        self.window
            .iter()
            .position(|s| s.ins.is_classical_path())
            .unwrap_or(self.window.len())
    }

    fn older_meas_pending(&self, idx: usize, reg: u8) -> bool {
        self.window.iter().take(idx).any(|s| {
            matches!(s.ins, Instruction::Quantum(q) if q.op.result().map(|r| r.0) == Some(reg))
        })
    }

    fn classical_phase(
        &mut self,
        now: u64,
        now_ns: u64,
        env: &mut Env,
        cfg: &MachineConfig,
    ) -> Result<ClassicalOutcome, SimFault> {
        let idx = self.classical_limit();
        let Some(slot) = self.window.get(idx).copied() else {
            return Ok(ClassicalOutcome::Idle);
        };
        let c = match slot.ins {
            Instruction::EndBlock => {
                self.window.truncate(idx);
                self.fetch_done = true;
                self.trace(env, now, TraceKind::Retire { pc: slot.pc, op: "END".into() });
                return Ok(ClassicalOutcome::Retired);
            }
            Instruction::Classical(c) => c,
            _ => unreachable!("classical_limit points at a classical slot"),
        };
        let mut redirect: Option<u32> = None;
        match c {
            ClassicalInstr::Fmr { rd, src } => {
                if self.contexts.iter().any(|x| x.result == src.0) {
                    return Err(SimFault::FmrOnOpenContext { pc: slot.pc, reg: src.0 });
                }
                if self.older_meas_pending(idx, src.0) {
                    return Ok(ClassicalOutcome::Stalled);
                }
                let e = *env.results.get(src.0);
                if !e.valid_at(now_ns) {
                    self.fmr_waiting = true;
                    return Ok(ClassicalOutcome::ReadoutWait);
                }
                self.fmr_waiting = false;
                self.write_reg(rd, i32::from(e.value), env);
                self.attr.chain = true;
            }
            ClassicalInstr::Ldi { rd, imm } => self.write_reg(rd, imm, env),
            ClassicalInstr::Mov { rd, rs } => {
                let v = self.read_reg(rs, env);
                self.write_reg(rd, v, env);
            }
            ClassicalInstr::Add { rd, rs, rt }
            | ClassicalInstr::Sub { rd, rs, rt }
            | ClassicalInstr::And { rd, rs, rt }
            | ClassicalInstr::Or { rd, rs, rt } => {
                let (a, b) = (self.read_reg(rs, env), self.read_reg(rt, env));
                let v = match c {
                    ClassicalInstr::Add { .. } => a.wrapping_add(b),
                    ClassicalInstr::Sub { .. } => a.wrapping_sub(b),
                    ClassicalInstr::And { .. } => a & b,
                    _ => a | b,
                };
                self.write_reg(rd, v, env);
            }
            ClassicalInstr::Cmp { rs, rt } => {
                let (a, b) = (self.read_reg(rs, env), self.read_reg(rt, env));
                self.flags = Flags { eq: a == b, lt: a < b };
            }
            ClassicalInstr::Br { cond, target } => {
                if cond.holds(self.flags) {
                    redirect = Some(target);
                }
            }
            ClassicalInstr::Jmp { target } => redirect = Some(target),
        }
        self.window.remove(idx);
        if let Some(target) = redirect {
            self.window.truncate(idx);
            self.pc = target;
            self.fetch_done = false;
            self.redirect_end = now + cfg.costs.branch_penalty;
        }
        self.trace(env, now, TraceKind::Retire { pc: slot.pc, op: c.mnemonic().into() });
        Ok(ClassicalOutcome::Retired)
    }

    fn quantum_phase(
        &mut self,
        now: u64,
        env: &mut Env,
        cfg: &MachineConfig,
    ) -> Result<Option<DispatchKind>, SimFault> {
        let limit = self.classical_limit();
        if limit == 0 {
            return Ok(None);
        }
        let clk = cfg.clock_period_ns;
        let now_ns = now * clk;
        let first = self.window[0];
        if let Instruction::Mrce(m) = first.ins {
            if self.scoreboard & (1 << m.target) != 0 {
                self.trace(env, now, TraceKind::Stall { reason: "MRCE target has an open context" });
                return Ok(None);
            }
            self.window.pop_front();
            let e = *env.results.get(m.result.0);
            if e.valid_at(now_ns) {
                let ready = e.ready_at.unwrap_or(now_ns);
                let block = self.run.as_ref().map(|r| r.block).unwrap_or(0);
                env.mrce.push(MrceRecord {
                    core: self.id,
                    block,
                    pc: first.pc,
                    qubit: m.target,
                    outcome: e.value,
                    result_ready_ns: ready,
                    switch_start_cycle: None,
                    switch_cycles: 0,
                    inject_ns: None,
                });
                return Ok(Some(match m.select(e.value).gate() {
                    Some(gate) => {
                        let op = QuantumOp::Single { gate, qubit: m.target };
                        self.enqueue_group(now, 0, vec![(first.pc, op)], env, cfg)
                    }
                    None => DispatchKind::ContextOnly,
                }));
            }
            self.contexts.push(Context {
                pc: first.pc,
                result: m.result.0,
                target: m.target,
                op0: m.op0,
                op1: m.op1,
            });
            self.scoreboard |= 1 << m.target;
            self.trace(env, now, TraceKind::MrceOpen { pc: first.pc, qubit: m.target });
            return Ok(Some(DispatchKind::ContextOnly));
        }

        let Instruction::Quantum(head) = first.ins else {
            unreachable!("non-classical, non-MRCE slot must be quantum");
        };
        let mut n = 0;
        while n < limit {
            match self.window[n].ins {
                Instruction::Quantum(q) if n == 0 || q.label == 0 => {
                    if q.op.qubit_mask() & self.scoreboard != 0 {
                        break;
                    }
                    n += 1;
                }
                _ => break,
            }
        }
        if n == 0 {
            self.trace(env, now, TraceKind::Stall { reason: "scoreboarded qubit" });
            return Ok(None);
        }
        let mut ops = Vec::with_capacity(n);
        for s in self.window.drain(..n) {
            let Instruction::Quantum(q) = s.ins else { unreachable!() };
            if !ops.is_empty() && q.label != 0 {
                return Err(SimFault::MixedLabels { pc: s.pc });
            }
            if let Some(r) = q.op.result() {
                env.results.mark_pending(r.0);
            }
            ops.push((s.pc, q.op));
        }
        Ok(Some(self.enqueue_group(now, head.label, ops, env, cfg)))
    }

    fn enqueue_group(
        &mut self,
        now: u64,
        label: u16,
        ops: Vec<(u32, QuantumOp)>,
        env: &mut Env,
        cfg: &MachineConfig,
    ) -> DispatchKind {
        let clk = cfg.clock_period_ns;
        let ready_ns = (now + 1) * clk;
        let run = self.run.as_mut().expect("active run");
        if !run.started {
            // A block whose first quantum group follows classical work
            // anchors at that group's readiness.
            run.started = true;
            let anchor = run.anchor_ns.max(ready_ns);
            self.prev_actual_ns = anchor;
            self.prev_nominal_ns = anchor;
        }
        let block = run.block;
        let delta = u64::from(label) * clk;
        let expected = self.prev_actual_ns + delta;
        let nominal = self.prev_nominal_ns + delta;
        let busy = ops
            .iter()
            .flat_map(|(_, op)| op.qubits().iter().collect::<Vec<_>>())
            .map(|q| self.cond_busy[q as usize])
            .max()
            .unwrap_or(0);
        let actual = expected.max(ready_ns).max(busy);
        if actual > expected {
            env.violations.push(Violation {
                core: self.id,
                block,
                pc: ops[0].0,
                scheduled_ns: expected,
                actual_ns: actual,
            });
        }
        self.prev_actual_ns = actual;
        self.prev_nominal_ns = nominal;

        let new_step = label > 0 || self.attr.current.is_none();
        let step = if new_step {
            self.attr.next_step
        } else {
            self.attr.current_index().expect("open step")
        };
        let qices = ops.len() as u32;
        self.trace(
            env,
            now,
            TraceKind::Dispatch {
                pcs: ops.iter().map(|(pc, _)| *pc).collect(),
                label,
                step,
            },
        );
        self.queue.push_back(Group {
            actual_ns: actual,
            nominal_ns: nominal,
            step,
            injected: false,
            ops,
        });
        if new_step {
            DispatchKind::NewStep { nominal_ns: nominal, qices }
        } else {
            DispatchKind::Continue { qices }
        }
    }

    fn resolvable_context(&self, now_ns: u64, env: &Env) -> Option<usize> {
        self.contexts
            .iter()
            .position(|c| env.results.get(c.result).valid_at(now_ns))
    }

    fn begin_switch(&mut self, i: usize, now: u64, env: &mut Env, cfg: &MachineConfig) {
        let clk = cfg.clock_period_ns;
        let ctx = self.contexts.remove(i);
        self.scoreboard &= !(1u64 << ctx.target);
        let e = *env.results.get(ctx.result);
        let ready = e.ready_at.expect("resolved context has a result");
        let cycles = cfg.costs.ctx_switch_cycles;
        let op = if e.value { ctx.op1 } else { ctx.op0 };
        let block = self.run.as_ref().map(|r| r.block).unwrap_or(0);
        let mut inject_ns = None;
        self.attr.pending.feedback += 1;
        if let Some(gate) = op.gate() {
            let t = ready.max((now + cycles) * clk).max(self.prev_actual_ns);
            self.prev_actual_ns = t;
            self.cond_busy[ctx.target as usize] = t + env.qpu.cfg.duration(gate);
            let step = self.attr.next_step;
            self.queue.push_back(Group {
                actual_ns: t,
                nominal_ns: t,
                step,
                injected: true,
                ops: vec![(ctx.pc, QuantumOp::Single { gate, qubit: ctx.target })],
            });
            self.attr.open_step(self.id, block, t, 1);
            self.attr.chain = false;
            inject_ns = Some(t);
        }
        env.mrce.push(MrceRecord {
            core: self.id,
            block,
            pc: ctx.pc,
            qubit: ctx.target,
            outcome: e.value,
            result_ready_ns: ready,
            switch_start_cycle: Some(now),
            switch_cycles: cycles,
            inject_ns,
        });
        self.trace(
            env,
            now,
            TraceKind::MrceResolve {
                pc: ctx.pc,
                qubit: ctx.target,
                outcome: e.value,
                switch_cycles: cycles,
            },
        );
        // The resolving cycle is always spent on the switch.
        self.switch = Some(Switch {
            end: now + cycles.max(1),
            has_step: inject_ns.is_some(),
        });
    }

    fn timing_tick(&mut self, now_ns: u64, env: &mut Env) -> bool {
        let mut issued = false;
        let block = self.run.as_ref().map(|r| r.block).unwrap_or(0);
        while self.queue.front().is_some_and(|g| g.actual_ns <= now_ns) {
            let g = self.queue.pop_front().expect("front exists");
            for (pc, op) in &g.ops {
                let gate = op.gate();
                let qubits = op.qubits();
                let dur = env.qpu.cfg.duration(gate);
                for ch in channels(gate, &qubits) {
                    env.qpu.accept_issue(IssueEvent {
                        time_ns: g.actual_ns,
                        nominal_ns: g.nominal_ns,
                        gate,
                        qubits,
                        channel: ch,
                        duration_ns: dur,
                        core: self.id,
                        block,
                        pc: *pc,
                        step: g.step,
                        injected: g.injected,
                    });
                }
                self.ops_end_ns = self.ops_end_ns.max(g.actual_ns + dur);
                if let QuantumOp::Meas { qubit, result } = op {
                    let (bit, ready) = env.qpu.measurement_result(*qubit, g.actual_ns, *pc);
                    env.results.write(result.0, bit, ready);
                }
            }
            issued = true;
        }
        issued
    }
}
