//! Instruction model for the timed assembly language.
//!
//! Quantum instructions carry a timing label: the number of clock cycles
//! between the issue of the previous quantum instruction's operation and the
//! issue of this one. Classical instructions carry no label; their cost is
//! modeled by the processor pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Architectural limits of the instruction encoding.
pub const MAX_QUBITS: u32 = 64;
pub const GP_REGISTERS: u8 = 32;
pub const RESULT_REGISTERS: u8 = 64;
/// General purpose registers at or above this index live in the register
/// file shared by every processor.
pub const SHARED_REG_BASE: u8 = 24;

/// Angles are stored in units of 1/1024 turn.
pub const ANGLE_STEPS: u16 = 1024;

pub type Qubit = u8;

/// General purpose register index (`r0`..`r31`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Reg(pub u8);

/// Measurement result register index. Written only by the acquisition chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResultReg(pub u8);

/// A rotation angle quantized to 1/1024 turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Angle(u16);

impl Angle {
    pub fn from_steps(steps: u16) -> Self {
        Angle(steps % ANGLE_STEPS)
    }

    pub fn from_radians(rad: f64) -> Self {
        let turns = rad / std::f64::consts::TAU;
        let steps = (turns * ANGLE_STEPS as f64).round() as i64;
        Angle(steps.rem_euclid(ANGLE_STEPS as i64) as u16)
    }

    pub fn steps(self) -> u16 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0 as f64 * std::f64::consts::TAU / ANGLE_STEPS as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    Rx,
    Ry,
    Rz,
    Cnot,
    Cz,
    Meas,
}

impl Gate {
    pub const ALL: [Gate; 10] = [
        Gate::X,
        Gate::Y,
        Gate::Z,
        Gate::H,
        Gate::Rx,
        Gate::Ry,
        Gate::Rz,
        Gate::Cnot,
        Gate::Cz,
        Gate::Meas,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Gate::X => "X",
            Gate::Y => "Y",
            Gate::Z => "Z",
            Gate::H => "H",
            Gate::Rx => "RX",
            Gate::Ry => "RY",
            Gate::Rz => "RZ",
            Gate::Cnot => "CNOT",
            Gate::Cz => "CZ",
            Gate::Meas => "MEAS",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Gate> {
        Gate::ALL
            .iter()
            .copied()
            .find(|g| g.mnemonic().eq_ignore_ascii_case(s))
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, Gate::Cnot | Gate::Cz)
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Gate::Rx | Gate::Ry | Gate::Rz)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// The operation part of a quantum instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantumOp {
    /// X, Y, Z or H.
    Single { gate: Gate, qubit: Qubit },
    /// RX, RY or RZ.
    Rotation { gate: Gate, qubit: Qubit, angle: Angle },
    /// CNOT (control, target) or CZ.
    Two { gate: Gate, a: Qubit, b: Qubit },
    Meas { qubit: Qubit, result: ResultReg },
}

impl QuantumOp {
    pub fn gate(&self) -> Gate {
        match *self {
            QuantumOp::Single { gate, .. }
            | QuantumOp::Rotation { gate, .. }
            | QuantumOp::Two { gate, .. } => gate,
            QuantumOp::Meas { .. } => Gate::Meas,
        }
    }

    /// Operand qubits in instruction order.
    pub fn qubits(&self) -> Qubits {
        match *self {
            QuantumOp::Single { qubit, .. }
            | QuantumOp::Rotation { qubit, .. }
            | QuantumOp::Meas { qubit, .. } => Qubits::one(qubit),
            QuantumOp::Two { a, b, .. } => Qubits::two(a, b),
        }
    }

    pub fn qubit_mask(&self) -> u64 {
        self.qubits().iter().fold(0u64, |m, q| m | (1u64 << q))
    }

    pub fn angle(&self) -> Option<Angle> {
        match *self {
            QuantumOp::Rotation { angle, .. } => Some(angle),
            _ => None,
        }
    }

    pub fn result(&self) -> Option<ResultReg> {
        match *self {
            QuantumOp::Meas { result, .. } => Some(result),
            _ => None,
        }
    }
}

/// One or two qubit operands, stored inline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Qubits {
    q: [Qubit; 2],
    len: u8,
}

impl Qubits {
    pub fn one(q: Qubit) -> Self {
        Qubits { q: [q, 0], len: 1 }
    }

    pub fn two(a: Qubit, b: Qubit) -> Self {
        Qubits { q: [a, b], len: 2 }
    }

    pub fn as_slice(&self) -> &[Qubit] {
        &self.q[..self.len as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = Qubit> + '_ {
        self.as_slice().iter().copied()
    }
}

impl Serialize for Qubits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Qubits {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<Qubit>::deserialize(d)?;
        match v.as_slice() {
            [a] => Ok(Qubits::one(*a)),
            [a, b] => Ok(Qubits::two(*a, *b)),
            _ => Err(serde::de::Error::custom("expected one or two qubits")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantumInstr {
    pub label: u16,
    pub op: QuantumOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cond {
    Eq,
    Ne,
    Lt,
    Ge,
    Gt,
    Le,
}

impl Cond {
    pub const ALL: [Cond; 6] = [Cond::Eq, Cond::Ne, Cond::Lt, Cond::Ge, Cond::Gt, Cond::Le];

    pub fn suffix(self) -> &'static str {
        match self {
            Cond::Eq => "eq",
            Cond::Ne => "ne",
            Cond::Lt => "lt",
            Cond::Ge => "ge",
            Cond::Gt => "gt",
            Cond::Le => "le",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Cond> {
        Cond::ALL
            .iter()
            .copied()
            .find(|c| c.suffix().eq_ignore_ascii_case(s))
    }

    pub fn holds(self, flags: Flags) -> bool {
        match self {
            Cond::Eq => flags.eq,
            Cond::Ne => !flags.eq,
            Cond::Lt => flags.lt,
            Cond::Ge => !flags.lt,
            Cond::Gt => !flags.lt && !flags.eq,
            Cond::Le => flags.lt || flags.eq,
        }
    }
}

/// Comparison flags written by CMP.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub eq: bool,
    pub lt: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassicalInstr {
    Ldi { rd: Reg, imm: i32 },
    Mov { rd: Reg, rs: Reg },
    Add { rd: Reg, rs: Reg, rt: Reg },
    Sub { rd: Reg, rs: Reg, rt: Reg },
    And { rd: Reg, rs: Reg, rt: Reg },
    Or { rd: Reg, rs: Reg, rt: Reg },
    Cmp { rs: Reg, rt: Reg },
    Br { cond: Cond, target: u32 },
    Jmp { target: u32 },
    /// Blocking read of a measurement result register into `rd`.
    Fmr { rd: Reg, src: ResultReg },
}

impl ClassicalInstr {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            ClassicalInstr::Ldi { .. } => "LDI",
            ClassicalInstr::Mov { .. } => "MOV",
            ClassicalInstr::Add { .. } => "ADD",
            ClassicalInstr::Sub { .. } => "SUB",
            ClassicalInstr::And { .. } => "AND",
            ClassicalInstr::Or { .. } => "OR",
            ClassicalInstr::Cmp { .. } => "CMP",
            ClassicalInstr::Br { .. } => "BR",
            ClassicalInstr::Jmp { .. } => "JMP",
            ClassicalInstr::Fmr { .. } => "FMR",
        }
    }

    pub fn branch_target(&self) -> Option<u32> {
        match *self {
            ClassicalInstr::Br { target, .. } | ClassicalInstr::Jmp { target } => Some(target),
            _ => None,
        }
    }

    /// Registers read by this instruction.
    pub fn sources(&self) -> Vec<Reg> {
        match *self {
            ClassicalInstr::Mov { rs, .. } => vec![rs],
            ClassicalInstr::Add { rs, rt, .. }
            | ClassicalInstr::Sub { rs, rt, .. }
            | ClassicalInstr::And { rs, rt, .. }
            | ClassicalInstr::Or { rs, rt, .. }
            | ClassicalInstr::Cmp { rs, rt } => vec![rs, rt],
            _ => Vec::new(),
        }
    }

    pub fn dest(&self) -> Option<Reg> {
        match *self {
            ClassicalInstr::Ldi { rd, .. }
            | ClassicalInstr::Mov { rd, .. }
            | ClassicalInstr::Add { rd, .. }
            | ClassicalInstr::Sub { rd, .. }
            | ClassicalInstr::And { rd, .. }
            | ClassicalInstr::Or { rd, .. }
            | ClassicalInstr::Fmr { rd, .. } => Some(rd),
            _ => None,
        }
    }
}

/// Operation selected by an MRCE instruction. Only single-qubit gates fit
/// the one-target encoding; `Nop` applies nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MrceOp {
    Nop,
    X,
    Y,
    Z,
    H,
}

impl MrceOp {
    pub const ALL: [MrceOp; 5] = [MrceOp::Nop, MrceOp::X, MrceOp::Y, MrceOp::Z, MrceOp::H];

    pub fn mnemonic(self) -> &'static str {
        match self {
            MrceOp::Nop => "NOP",
            MrceOp::X => "X",
            MrceOp::Y => "Y",
            MrceOp::Z => "Z",
            MrceOp::H => "H",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<MrceOp> {
        MrceOp::ALL
            .iter()
            .copied()
            .find(|o| o.mnemonic().eq_ignore_ascii_case(s))
    }

    pub fn gate(self) -> Option<Gate> {
        match self {
            MrceOp::Nop => None,
            MrceOp::X => Some(Gate::X),
            MrceOp::Y => Some(Gate::Y),
            MrceOp::Z => Some(Gate::Z),
            MrceOp::H => Some(Gate::H),
        }
    }
}

/// Measurement result conditional execution: apply `op0` to `target` when
/// `result` reads 0, `op1` when it reads 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MrceInstr {
    pub result: ResultReg,
    pub target: Qubit,
    pub op0: MrceOp,
    pub op1: MrceOp,
}

impl MrceInstr {
    pub fn select(&self, bit: bool) -> MrceOp {
        if bit {
            self.op1
        } else {
            self.op0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Quantum(QuantumInstr),
    Classical(ClassicalInstr),
    Mrce(MrceInstr),
    EndBlock,
}

impl Instruction {
    pub fn quantum(label: u16, op: QuantumOp) -> Self {
        Instruction::Quantum(QuantumInstr { label, op })
    }

    pub fn single(label: u16, gate: Gate, qubit: Qubit) -> Self {
        Self::quantum(label, QuantumOp::Single { gate, qubit })
    }

    pub fn two(label: u16, gate: Gate, a: Qubit, b: Qubit) -> Self {
        Self::quantum(label, QuantumOp::Two { gate, a, b })
    }

    pub fn meas(label: u16, qubit: Qubit, result: u8) -> Self {
        Self::quantum(
            label,
            QuantumOp::Meas {
                qubit,
                result: ResultReg(result),
            },
        )
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, Instruction::Quantum(_))
    }

    pub fn is_classical_path(&self) -> bool {
        matches!(self, Instruction::Classical(_) | Instruction::EndBlock)
    }
}

fn write_reg(f: &mut fmt::Formatter<'_>, r: Reg) -> fmt::Result {
    write!(f, "r{}", r.0)
}

impl fmt::Display for QuantumOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            QuantumOp::Single { gate, qubit } => write!(f, "{gate} q{qubit}"),
            QuantumOp::Rotation { gate, qubit, angle } => {
                write!(f, "{gate} q{qubit}, {}", angle.radians())
            }
            QuantumOp::Two { gate, a, b } => write!(f, "{gate} q{a}, q{b}"),
            QuantumOp::Meas { qubit, result } => write!(f, "MEAS q{qubit} -> r{}", result.0),
        }
    }
}

impl fmt::Display for ClassicalInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ClassicalInstr::Ldi { rd, imm } => {
                f.write_str("LDI ")?;
                write_reg(f, rd)?;
                write!(f, ", {imm}")
            }
            ClassicalInstr::Mov { rd, rs } => write!(f, "MOV r{}, r{}", rd.0, rs.0),
            ClassicalInstr::Add { rd, rs, rt }
            | ClassicalInstr::Sub { rd, rs, rt }
            | ClassicalInstr::And { rd, rs, rt }
            | ClassicalInstr::Or { rd, rs, rt } => {
                write!(f, "{} r{}, r{}, r{}", self.mnemonic(), rd.0, rs.0, rt.0)
            }
            ClassicalInstr::Cmp { rs, rt } => write!(f, "CMP r{}, r{}", rs.0, rt.0),
            ClassicalInstr::Br { cond, target } => write!(f, "BR.{} {target}", cond.suffix()),
            ClassicalInstr::Jmp { target } => write!(f, "JMP {target}"),
            ClassicalInstr::Fmr { rd, src } => write!(f, "FMR r{}, r{}", rd.0, src.0),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Quantum(q) => write!(f, "{} {}", q.label, q.op),
            Instruction::Classical(c) => write!(f, "{c}"),
            Instruction::Mrce(m) => write!(
                f,
                "MRCE r{}, q{}, {}, {}",
                m.result.0,
                m.target,
                m.op0.mnemonic(),
                m.op1.mnemonic()
            ),
            Instruction::EndBlock => f.write_str("END"),
        }
    }
}
