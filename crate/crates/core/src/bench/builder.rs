//! Program builder that derives timing labels from qubit occupancy.

use crate::isa::{
    BlockDirective, ClassicalInstr, DepSpec, Gate, Instruction, MrceInstr, MrceOp, Program,
    QuantumOp, Qubit, ResultReg,
};
use crate::qpu::QpuConfig;

/// Labels are computed against the default QPU timing so the shipped
/// programs are collision-free under default configurations.
pub(crate) struct Builder {
    prog: Program,
    durations: [u64; 3],
    free: [u64; 64],
    last: Option<u64>,
    /// MRCE instructions since the last group; each takes a dispatch cycle.
    slots: u64,
    open: Option<(String, u32, DepSpec)>,
    pub failure_points: Vec<u32>,
    pub random_points: Vec<u32>,
}

impl Builder {
    pub fn new(qubits: u32) -> Self {
        let q = QpuConfig::default();
        let cyc = |ns: u64| ns.div_ceil(q.clock_period_ns);
        Builder {
            prog: Program::new(qubits),
            durations: [cyc(q.single_gate_ns), cyc(q.two_gate_ns), cyc(q.meas_pulse_ns)],
            free: [0; 64],
            last: None,
            slots: 0,
            open: None,
            failure_points: Vec::new(),
            random_points: Vec::new(),
        }
    }

    pub fn pc(&self) -> u32 {
        self.prog.instructions.len() as u32
    }

    fn duration(&self, op: &QuantumOp) -> u64 {
        match op.gate() {
            Gate::Meas => self.durations[2],
            g if g.is_two_qubit() => self.durations[1],
            _ => self.durations[0],
        }
    }

    pub fn begin_block(&mut self, name: impl Into<String>, deps: DepSpec) {
        assert!(self.open.is_none(), "block already open");
        self.open = Some((name.into(), self.pc(), deps));
        self.free = [0; 64];
        self.last = None;
        self.slots = 0;
    }

    pub fn end_block(&mut self) {
        self.push(Instruction::EndBlock);
        let (name, pc_start, deps) = self.open.take().expect("no open block");
        self.prog.blocks.push(BlockDirective {
            name,
            pc_start,
            pc_end: self.pc() - 1,
            deps,
        });
    }

    fn push(&mut self, i: Instruction) -> u32 {
        let pc = self.pc();
        self.prog.instructions.push(i);
        pc
    }

    /// Emits one circuit step of operations on disjoint qubits and returns
    /// the pc of each operation.
    pub fn layer(&mut self, ops: &[QuantumOp]) -> Vec<u32> {
        let ready = ops
            .iter()
            .flat_map(|op| op.qubits().iter().collect::<Vec<_>>())
            .map(|q| self.free[q as usize])
            .max()
            .unwrap_or(0);
        let (t, label) = match self.last {
            None => (ready, 0),
            Some(last) => {
                let t = ready.max(last + 1 + self.slots);
                (t, t - last)
            }
        };
        let mut pcs = Vec::with_capacity(ops.len());
        for (i, op) in ops.iter().enumerate() {
            let l = if i == 0 { label } else { 0 };
            pcs.push(self.push(Instruction::quantum(
                u16::try_from(l).expect("label fits"),
                *op,
            )));
            let d = self.duration(op);
            for q in op.qubits().iter() {
                self.free[q as usize] = t + d;
            }
        }
        self.last = Some(t);
        self.slots = 0;
        pcs
    }

    pub fn classical(&mut self, c: ClassicalInstr) -> u32 {
        self.push(Instruction::Classical(c))
    }

    pub fn mrce(&mut self, result: u8, target: Qubit, op0: MrceOp, op1: MrceOp) -> u32 {
        self.slots += 1;
        self.push(Instruction::Mrce(MrceInstr {
            result: ResultReg(result),
            target,
            op0,
            op1,
        }))
    }

    /// Points a previously emitted branch at `target`.
    pub fn patch(&mut self, pc: u32, target: u32) {
        match &mut self.prog.instructions[pc as usize] {
            Instruction::Classical(ClassicalInstr::Br { target: t, .. })
            | Instruction::Classical(ClassicalInstr::Jmp { target: t }) => *t = target,
            other => panic!("pc {pc} is not a branch: {other}"),
        }
    }

    pub fn finish(self) -> (Program, Vec<u32>, Vec<u32>) {
        assert!(self.open.is_none(), "unterminated block");
        (self.prog, self.failure_points, self.random_points)
    }
}

pub(crate) fn single(gate: Gate, qubit: Qubit) -> QuantumOp {
    QuantumOp::Single { gate, qubit }
}

pub(crate) fn two(gate: Gate, a: Qubit, b: Qubit) -> QuantumOp {
    QuantumOp::Two { gate, a, b }
}

pub(crate) fn meas(qubit: Qubit, result: u8) -> QuantumOp {
    QuantumOp::Meas {
        qubit,
        result: ResultReg(result),
    }
}
