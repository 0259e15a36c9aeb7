//! Static checks run before a program is loaded into the block table.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::instr::*;
use super::{DepSpec, Program};

pub const BLOCK_TABLE_CAPACITY: usize = 64;

/// Where a diagnostic points. At least one field is always set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Location {
    pub line: Option<u32>,
    pub pc: Option<u32>,
    pub block: Option<String>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(l) = self.line {
            parts.push(format!("line {l}"));
        }
        if let Some(pc) = self.pc {
            parts.push(format!("pc {pc}"));
        }
        if let Some(b) = &self.block {
            parts.push(format!("block {b}"));
        }
        if parts.is_empty() {
            parts.push("program".to_string());
        }
        write!(f, "{}", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

struct Sink<'a> {
    p: &'a Program,
    out: Vec<Diagnostic>,
}

impl Sink<'_> {
    fn at_pc(&mut self, pc: u32, msg: String) {
        self.out.push(Diagnostic {
            location: Location {
                line: self.p.line_of(pc),
                pc: Some(pc),
                block: None,
            },
            message: msg,
        });
    }

    fn at_block(&mut self, idx: usize, msg: String) {
        let name = self
            .p
            .blocks
            .get(idx)
            .map(|b| b.name.clone())
            .unwrap_or_else(|| "main".to_string());
        self.out.push(Diagnostic {
            location: Location {
                line: self.p.block_line(idx),
                pc: None,
                block: Some(name),
            },
            message: msg,
        });
    }
}

/// Returns every problem found; an empty list means the program can be
/// loaded.
pub fn validate_program(p: &Program) -> Vec<Diagnostic> {
    let mut s = Sink { p, out: Vec::new() };

    if p.blocks.len() > BLOCK_TABLE_CAPACITY {
        s.at_block(
            BLOCK_TABLE_CAPACITY,
            format!(
                "block table capacity exceeded: {} blocks, {} entries available",
                p.blocks.len(),
                BLOCK_TABLE_CAPACITY
            ),
        );
    }
    if p.qubit_count > MAX_QUBITS {
        s.out.push(Diagnostic {
            location: Location {
                line: (!p.lines.is_empty()).then_some(1),
                block: None,
                pc: None,
            }
            .or_program(),
            message: format!("qubit count {} exceeds {}", p.qubit_count, MAX_QUBITS),
        });
    }

    check_operands(&mut s);
    check_result_producers(&mut s);
    check_blocks(&mut s);
    s.out
}

impl Location {
    fn or_program(mut self) -> Self {
        if self.line.is_none() && self.pc.is_none() && self.block.is_none() {
            self.block = Some("<program>".to_string());
        }
        self
    }
}

fn check_operands(s: &mut Sink) {
    let p = s.p;
    for (pc, ins) in p.instructions.iter().enumerate() {
        let pc = pc as u32;
        let mut qubits: Vec<Qubit> = Vec::new();
        let mut regs: Vec<Reg> = Vec::new();
        let mut results: Vec<ResultReg> = Vec::new();
        match ins {
            Instruction::Quantum(q) => {
                qubits.extend(q.op.qubits().iter());
                if let QuantumOp::Two { a, b, .. } = q.op {
                    if a == b {
                        s.at_pc(pc, format!("{} needs two distinct qubits", q.op.gate()));
                    }
                }
                results.extend(q.op.result());
            }
            Instruction::Classical(c) => {
                regs.extend(c.sources());
                regs.extend(c.dest());
                if let ClassicalInstr::Fmr { src, .. } = c {
                    results.push(*src);
                }
            }
            Instruction::Mrce(m) => {
                qubits.push(m.target);
                results.push(m.result);
            }
            Instruction::EndBlock => {}
        }
        for q in qubits {
            if u32::from(q) >= p.qubit_count {
                s.at_pc(pc, format!("qubit q{q} out of range (qubit count {})", p.qubit_count));
            }
        }
        for r in regs {
            if r.0 >= GP_REGISTERS {
                s.at_pc(pc, format!("register r{} out of range", r.0));
            }
        }
        for r in results {
            if r.0 >= RESULT_REGISTERS {
                s.at_pc(pc, format!("result register r{} out of range", r.0));
            }
        }
    }
}

fn check_result_producers(s: &mut Sink) {
    let p = s.p;
    let produced: HashSet<u8> = p
        .instructions
        .iter()
        .filter_map(|i| match i {
            Instruction::Quantum(q) => q.op.result().map(|r| r.0),
            _ => None,
        })
        .collect();
    for (pc, ins) in p.instructions.iter().enumerate() {
        let src = match ins {
            Instruction::Classical(ClassicalInstr::Fmr { src, .. }) => *src,
            Instruction::Mrce(m) => m.result,
            _ => continue,
        };
        if !produced.contains(&src.0) {
            s.at_pc(
                pc as u32,
                format!("result register r{} never produced by any MEAS", src.0),
            );
        }
    }
}

fn check_blocks(s: &mut Sink) {
    let p = s.p;
    let blocks = p.effective_blocks();
    let n = p.instructions.len() as u32;

    let mut names: HashMap<&str, usize> = HashMap::new();
    for (i, b) in blocks.iter().enumerate() {
        if names.insert(b.name.as_str(), i).is_some() {
            s.at_block(i, format!("duplicate block name `{}`", b.name));
        }
    }

    let mut ok_range = vec![true; blocks.len()];
    for (i, b) in blocks.iter().enumerate() {
        if b.pc_start > b.pc_end || b.pc_end >= n {
            s.at_block(
                i,
                format!(
                    "block range [{}, {}] invalid for a {}-word program",
                    b.pc_start, b.pc_end, n
                ),
            );
            ok_range[i] = false;
        }
        if let DepSpec::Direct(deps) = &b.deps {
            for d in deps {
                if d == &b.name {
                    s.at_block(i, format!("block `{}` depends on itself", b.name));
                } else if !names.contains_key(d.as_str()) {
                    s.at_block(i, format!("unknown dependency `{d}`"));
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..blocks.len()).filter(|&i| ok_range[i]).collect();
    order.sort_by_key(|&i| blocks[i].pc_start);
    for w in order.windows(2) {
        let (a, b) = (&blocks[w[0]], &blocks[w[1]]);
        if b.pc_start <= a.pc_end {
            s.at_block(w[1], format!("block `{}` overlaps block `{}`", b.name, a.name));
        }
    }

    for (i, b) in blocks.iter().enumerate() {
        if !ok_range[i] {
            continue;
        }
        let mut targets_ok = true;
        for pc in b.pc_start..=b.pc_end {
            if let Instruction::Classical(c) = &p.instructions[pc as usize] {
                if let Some(t) = c.branch_target() {
                    if !b.contains(t) {
                        s.at_pc(
                            pc,
                            format!("branch target {t} outside block `{}` [{}, {}]", b.name, b.pc_start, b.pc_end),
                        );
                        targets_ok = false;
                    }
                }
            }
        }
        if targets_ok {
            if let Some(pc) = trapped_pc(p, b.pc_start, b.pc_end) {
                s.at_pc(pc, format!("block `{}` cannot terminate from this instruction", b.name));
            }
        }
    }
}

/// Finds a reachable instruction from which no path leaves the block.
fn trapped_pc(p: &Program, start: u32, end: u32) -> Option<u32> {
    let len = (end - start + 1) as usize;
    let exit = len;
    let succ = |i: usize| -> Vec<usize> {
        let pc = start as usize + i;
        let next = if i + 1 < len { i + 1 } else { exit };
        match &p.instructions[pc] {
            Instruction::EndBlock => vec![exit],
            Instruction::Classical(ClassicalInstr::Jmp { target }) => {
                vec![(*target - start) as usize]
            }
            Instruction::Classical(ClassicalInstr::Br { target, .. }) => {
                vec![next, (*target - start) as usize]
            }
            _ => vec![next],
        }
    };

    let mut reachable = vec![false; len + 1];
    let mut stack = vec![0usize];
    reachable[0] = true;
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); len + 1];
    for i in 0..len {
        for j in succ(i) {
            preds[j].push(i);
        }
    }
    while let Some(i) = stack.pop() {
        if i == exit {
            continue;
        }
        for j in succ(i) {
            if !reachable[j] {
                reachable[j] = true;
                stack.push(j);
            }
        }
    }

    let mut escapes = vec![false; len + 1];
    escapes[exit] = true;
    let mut stack = vec![exit];
    while let Some(j) = stack.pop() {
        for &i in &preds[j] {
            if !escapes[i] {
                escapes[i] = true;
                stack.push(i);
            }
        }
    }

    (0..len)
        .find(|&i| reachable[i] && !escapes[i])
        .map(|i| start + i as u32)
}
