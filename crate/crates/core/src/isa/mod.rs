//! Timed assembly language: instruction model, text grammar, 32-bit
//! encoding, container format and static validation.

mod binary;
mod encode;
mod instr;
mod parse;
mod validate;

pub use binary::{read_binary, write_binary, BinaryError, MAGIC};
pub use encode::{decode_instruction, encode_instruction, DecodeError, EncodeError, Opcode};
pub use instr::*;
pub use parse::{parse_program, ParseError, ParseErrorKind};
pub use validate::{validate_program, Diagnostic, Location};

use std::fmt;

use serde::{Deserialize, Serialize};

/// How a block declares the blocks it must wait for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepSpec {
    /// Names of blocks that must be done first (possibly empty).
    Direct(Vec<String>),
    Priority(u32),
}

/// A `.block` directive: name, inclusive word-address range, dependencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDirective {
    pub name: String,
    pub pc_start: u32,
    pub pc_end: u32,
    pub deps: DepSpec,
}

impl BlockDirective {
    pub fn word_count(&self) -> u32 {
        self.pc_end + 1 - self.pc_start
    }

    pub fn contains(&self, pc: u32) -> bool {
        (self.pc_start..=self.pc_end).contains(&pc)
    }
}

/// An assembled program: instructions addressed by word index plus the
/// block directives that partition them.
#[derive(Debug, Clone, Default)]
pub struct Program {
    pub qubit_count: u32,
    pub instructions: Vec<Instruction>,
    pub blocks: Vec<BlockDirective>,
    /// Source line of each instruction, when parsed from text.
    pub(crate) lines: Vec<u32>,
    pub(crate) block_lines: Vec<u32>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.qubit_count == other.qubit_count
            && self.instructions == other.instructions
            && self.blocks == other.blocks
    }
}

impl Eq for Program {}

impl Program {
    pub fn new(qubit_count: u32) -> Self {
        Program {
            qubit_count,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Source line of the instruction at `pc`, if the program came from text.
    pub fn line_of(&self, pc: u32) -> Option<u32> {
        self.lines.get(pc as usize).copied().filter(|&l| l > 0)
    }

    pub fn block_line(&self, idx: usize) -> Option<u32> {
        self.block_lines.get(idx).copied().filter(|&l| l > 0)
    }

    /// Declared blocks, or a single implicit `main` block covering every
    /// instruction when the source has no `.block` directives.
    pub fn effective_blocks(&self) -> Vec<BlockDirective> {
        if !self.blocks.is_empty() || self.instructions.is_empty() {
            return self.blocks.clone();
        }
        vec![BlockDirective {
            name: "main".to_string(),
            pc_start: 0,
            pc_end: self.instructions.len() as u32 - 1,
            deps: DepSpec::Direct(Vec::new()),
        }]
    }

    pub fn uses_priorities(&self) -> bool {
        self.blocks
            .iter()
            .any(|b| matches!(b.deps, DepSpec::Priority(_)))
    }

    pub fn quantum_count(&self) -> usize {
        self.instructions.iter().filter(|i| i.is_quantum()).count()
    }

    pub fn classical_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Classical(_)))
            .count()
    }

    /// Canonical assembly text; `parse_program(&p.to_string())` yields `p`.
    pub fn print(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, ".qubits {}", self.qubit_count)?;
        for b in &self.blocks {
            write!(f, ".block {} start={} end={} ", b.name, b.pc_start, b.pc_end)?;
            match &b.deps {
                DepSpec::Priority(p) => writeln!(f, "prio={p}")?,
                DepSpec::Direct(d) if d.is_empty() => writeln!(f, "deps=none")?,
                DepSpec::Direct(d) => writeln!(f, "deps={}", d.join(","))?,
            }
        }
        for (pc, i) in self.instructions.iter().enumerate() {
            writeln!(f, "{i}    # {pc}")?;
        }
        Ok(())
    }
}
