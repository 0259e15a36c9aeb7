//! Fixed-length 32-bit instruction words.
//!
//! Every word carries its opcode in bits [31:26]. Field layouts:
//!
//! | kind                   | fields                                                        |
//! |------------------------|---------------------------------------------------------------|
//! | X/Y/Z/H                | label[25:12] qubit[11:6]                                      |
//! | CNOT/CZ                | label[25:12] a[11:6] b[5:0]                                   |
//! | MEAS                   | label[25:12] qubit[11:6] result[5:0]                          |
//! | RX/RY/RZ               | label[25:16] qubit[15:10] angle[9:0] (1/1024 turn)            |
//! | LDI                    | rd[25:21] imm[20:0] (two's complement)                        |
//! | MOV/ADD/SUB/AND/OR/CMP | rd[25:21] rs[20:16] rt[15:11]                                 |
//! | BR                     | cond[25:23] target[22:0]                                      |
//! | JMP                    | target[25:0]                                                  |
//! | FMR                    | rd[25:21] result[20:15]                                       |
//! | MRCE                   | q_result_addr[25:20] q_target_addr[19:14] op0[13:7] op1[6:0]  |
//! | END                    | (opcode only)                                                 |

use thiserror::Error;

use super::instr::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    X = 0x01,
    Y = 0x02,
    Z = 0x03,
    H = 0x04,
    Rx = 0x05,
    Ry = 0x06,
    Rz = 0x07,
    Cnot = 0x08,
    Cz = 0x09,
    Meas = 0x0A,
    Ldi = 0x10,
    Mov = 0x11,
    Add = 0x12,
    Sub = 0x13,
    And = 0x14,
    Or = 0x15,
    Cmp = 0x16,
    Br = 0x17,
    Jmp = 0x18,
    Fmr = 0x19,
    Mrce = 0x20,
    End = 0x3F,
}

impl Opcode {
    fn from_bits(b: u32) -> Option<Opcode> {
        use Opcode::*;
        Some(match b {
            0x01 => X,
            0x02 => Y,
            0x03 => Z,
            0x04 => H,
            0x05 => Rx,
            0x06 => Ry,
            0x07 => Rz,
            0x08 => Cnot,
            0x09 => Cz,
            0x0A => Meas,
            0x10 => Ldi,
            0x11 => Mov,
            0x12 => Add,
            0x13 => Sub,
            0x14 => And,
            0x15 => Or,
            0x16 => Cmp,
            0x17 => Br,
            0x18 => Jmp,
            0x19 => Fmr,
            0x20 => Mrce,
            0x3F => End,
            _ => return None,
        })
    }

    fn of_gate(g: Gate) -> Opcode {
        match g {
            Gate::X => Opcode::X,
            Gate::Y => Opcode::Y,
            Gate::Z => Opcode::Z,
            Gate::H => Opcode::H,
            Gate::Rx => Opcode::Rx,
            Gate::Ry => Opcode::Ry,
            Gate::Rz => Opcode::Rz,
            Gate::Cnot => Opcode::Cnot,
            Gate::Cz => Opcode::Cz,
            Gate::Meas => Opcode::Meas,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("field `{field}` value {value} does not fit in {bits} bits")]
    FieldOverflow {
        field: &'static str,
        value: i64,
        bits: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unknown opcode {0:#04x}")]
    UnknownOpcode(u32),
    #[error("invalid field `{field}` = {value}")]
    InvalidField { field: &'static str, value: u32 },
}

fn field(value: u32, bits: u32, name: &'static str) -> Result<u32, EncodeError> {
    if bits < 32 && value >> bits != 0 {
        Err(EncodeError::FieldOverflow {
            field: name,
            value: value as i64,
            bits,
        })
    } else {
        Ok(value)
    }
}

fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

fn mrce_code(op: MrceOp) -> u32 {
    match op.gate() {
        None => 0,
        Some(g) => Opcode::of_gate(g) as u32,
    }
}

fn mrce_op(code: u32) -> Result<MrceOp, DecodeError> {
    Ok(match code {
        0 => MrceOp::Nop,
        0x01 => MrceOp::X,
        0x02 => MrceOp::Y,
        0x03 => MrceOp::Z,
        0x04 => MrceOp::H,
        v => return Err(DecodeError::InvalidField { field: "mrce op", value: v }),
    })
}

pub fn encode_instruction(i: &Instruction) -> Result<u32, EncodeError> {
    let op = |o: Opcode| (o as u32) << 26;
    let q = |v: u8| field(v as u32, 6, "qubit");
    let r = |v: Reg| field(v.0 as u32, 5, "register");
    let rr = |v: ResultReg| field(v.0 as u32, 6, "result register");
    Ok(match *i {
        Instruction::Quantum(QuantumInstr { label, op: qop }) => {
            let code = op(Opcode::of_gate(qop.gate()));
            match qop {
                QuantumOp::Single { qubit, .. } => {
                    code | field(label as u32, 14, "label")? << 12 | q(qubit)? << 6
                }
                QuantumOp::Two { a, b, .. } => {
                    code | field(label as u32, 14, "label")? << 12 | q(a)? << 6 | q(b)?
                }
                QuantumOp::Meas { qubit, result } => {
                    code | field(label as u32, 14, "label")? << 12 | q(qubit)? << 6 | rr(result)?
                }
                QuantumOp::Rotation { qubit, angle, .. } => {
                    code | field(label as u32, 10, "label")? << 16
                        | q(qubit)? << 10
                        | angle.steps() as u32
                }
            }
        }
        Instruction::Classical(c) => match c {
            ClassicalInstr::Ldi { rd, imm } => {
                if !(-(1 << 20)..(1 << 20)).contains(&imm) {
                    return Err(EncodeError::FieldOverflow {
                        field: "immediate",
                        value: imm as i64,
                        bits: 21,
                    });
                }
                op(Opcode::Ldi) | r(rd)? << 21 | (imm as u32 & 0x1F_FFFF)
            }
            ClassicalInstr::Mov { rd, rs } => op(Opcode::Mov) | r(rd)? << 21 | r(rs)? << 16,
            ClassicalInstr::Add { rd, rs, rt } => {
                op(Opcode::Add) | r(rd)? << 21 | r(rs)? << 16 | r(rt)? << 11
            }
            ClassicalInstr::Sub { rd, rs, rt } => {
                op(Opcode::Sub) | r(rd)? << 21 | r(rs)? << 16 | r(rt)? << 11
            }
            ClassicalInstr::And { rd, rs, rt } => {
                op(Opcode::And) | r(rd)? << 21 | r(rs)? << 16 | r(rt)? << 11
            }
            ClassicalInstr::Or { rd, rs, rt } => {
                op(Opcode::Or) | r(rd)? << 21 | r(rs)? << 16 | r(rt)? << 11
            }
            ClassicalInstr::Cmp { rs, rt } => op(Opcode::Cmp) | r(rs)? << 16 | r(rt)? << 11,
            ClassicalInstr::Br { cond, target } => {
                let c = Cond::ALL.iter().position(|&x| x == cond).unwrap() as u32;
                op(Opcode::Br) | c << 23 | field(target, 23, "branch target")?
            }
            ClassicalInstr::Jmp { target } => op(Opcode::Jmp) | field(target, 26, "jump target")?,
            ClassicalInstr::Fmr { rd, src } => op(Opcode::Fmr) | r(rd)? << 21 | rr(src)? << 15,
        },
        Instruction::Mrce(m) => {
            op(Opcode::Mrce)
                | field(m.result.0 as u32, 6, "q_result_addr")? << 20
                | field(m.target as u32, 6, "q_target_addr")? << 14
                | mrce_code(m.op0) << 7
                | mrce_code(m.op1)
        }
        Instruction::EndBlock => op(Opcode::End),
    })
}

pub fn decode_instruction(word: u32) -> Result<Instruction, DecodeError> {
    let opc = Opcode::from_bits(word >> 26).ok_or(DecodeError::UnknownOpcode(word >> 26))?;
    let reg = |hi| Reg(bits(word, hi, hi - 4) as u8);
    let gate = |g| -> Result<Instruction, DecodeError> {
        let label = bits(word, 25, 12) as u16;
        let a = bits(word, 11, 6) as u8;
        let b = bits(word, 5, 0) as u8;
        let qop = match g {
            Gate::Cnot | Gate::Cz => QuantumOp::Two { gate: g, a, b },
            Gate::Meas => QuantumOp::Meas {
                qubit: a,
                result: ResultReg(b),
            },
            _ => {
                if b != 0 {
                    return Err(DecodeError::InvalidField {
                        field: "reserved",
                        value: b.into(),
                    });
                }
                QuantumOp::Single { gate: g, qubit: a }
            }
        };
        Ok(Instruction::quantum(label, qop))
    };
    let rot = |g| {
        Instruction::quantum(
            bits(word, 25, 16) as u16,
            QuantumOp::Rotation {
                gate: g,
                qubit: bits(word, 15, 10) as u8,
                angle: Angle::from_steps(bits(word, 9, 0) as u16),
            },
        )
    };
    let cls = Instruction::Classical;
    Ok(match opc {
        Opcode::X => gate(Gate::X)?,
        Opcode::Y => gate(Gate::Y)?,
        Opcode::Z => gate(Gate::Z)?,
        Opcode::H => gate(Gate::H)?,
        Opcode::Cnot => gate(Gate::Cnot)?,
        Opcode::Cz => gate(Gate::Cz)?,
        Opcode::Meas => gate(Gate::Meas)?,
        Opcode::Rx => rot(Gate::Rx),
        Opcode::Ry => rot(Gate::Ry),
        Opcode::Rz => rot(Gate::Rz),
        Opcode::Ldi => {
            let raw = bits(word, 20, 0);
            let imm = ((raw << 11) as i32) >> 11;
            cls(ClassicalInstr::Ldi { rd: reg(25), imm })
        }
        Opcode::Mov => cls(ClassicalInstr::Mov {
            rd: reg(25),
            rs: reg(20),
        }),
        Opcode::Add => cls(ClassicalInstr::Add {
            rd: reg(25),
            rs: reg(20),
            rt: reg(15),
        }),
        Opcode::Sub => cls(ClassicalInstr::Sub {
            rd: reg(25),
            rs: reg(20),
            rt: reg(15),
        }),
        Opcode::And => cls(ClassicalInstr::And {
            rd: reg(25),
            rs: reg(20),
            rt: reg(15),
        }),
        Opcode::Or => cls(ClassicalInstr::Or {
            rd: reg(25),
            rs: reg(20),
            rt: reg(15),
        }),
        Opcode::Cmp => cls(ClassicalInstr::Cmp {
            rs: reg(20),
            rt: reg(15),
        }),
        Opcode::Br => {
            let c = bits(word, 25, 23);
            let cond = *Cond::ALL
                .get(c as usize)
                .ok_or(DecodeError::InvalidField {
                    field: "cond",
                    value: c,
                })?;
            cls(ClassicalInstr::Br {
                cond,
                target: bits(word, 22, 0),
            })
        }
        Opcode::Jmp => cls(ClassicalInstr::Jmp {
            target: bits(word, 25, 0),
        }),
        Opcode::Fmr => cls(ClassicalInstr::Fmr {
            rd: reg(25),
            src: ResultReg(bits(word, 20, 15) as u8),
        }),
        Opcode::Mrce => Instruction::Mrce(MrceInstr {
            result: ResultReg(bits(word, 25, 20) as u8),
            target: bits(word, 19, 14) as u8,
            op0: mrce_op(bits(word, 13, 7))?,
            op1: mrce_op(bits(word, 6, 0))?,
        }),
        Opcode::End => Instruction::EndBlock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mrce_layout() {
        let m = Instruction::Mrce(MrceInstr {
            result: ResultReg(0),
            target: 1,
            op0: MrceOp::Nop,
            op1: MrceOp::X,
        });
        let w = encode_instruction(&m).unwrap();
        assert_eq!(w >> 26, Opcode::Mrce as u32);
        assert_eq!(bits(w, 25, 20), 0);
        assert_eq!(bits(w, 19, 14), 1);
        assert_eq!(bits(w, 13, 7), 0);
        assert_eq!(bits(w, 6, 0), Opcode::X as u32);
        assert_eq!(decode_instruction(w).unwrap(), m);
    }

    #[test]
    fn overflow_is_reported() {
        let i = Instruction::single(0, Gate::H, 64);
        assert!(matches!(
            encode_instruction(&i),
            Err(EncodeError::FieldOverflow { field: "qubit", .. })
        ));
        let i = Instruction::quantum(
            1024,
            QuantumOp::Rotation {
                gate: Gate::Rx,
                qubit: 0,
                angle: Angle::from_steps(1),
            },
        );
        assert!(encode_instruction(&i).is_err());
        let i = Instruction::Classical(ClassicalInstr::Ldi {
            rd: Reg(1),
            imm: 1 << 20,
        });
        assert!(encode_instruction(&i).is_err());
    }

    #[test]
    fn unknown_opcode() {
        assert_eq!(
            decode_instruction(0x3E << 26),
            Err(DecodeError::UnknownOpcode(0x3E))
        );
    }

    pub(crate) fn arb_instruction() -> impl Strategy<Value = Instruction> {
        let q = 0u8..64;
        let reg = (0u8..32).prop_map(Reg);
        let rres = (0u8..64).prop_map(ResultReg);
        let single = prop::sample::select(vec![Gate::X, Gate::Y, Gate::Z, Gate::H]);
        let rotg = prop::sample::select(vec![Gate::Rx, Gate::Ry, Gate::Rz]);
        let twog = prop::sample::select(vec![Gate::Cnot, Gate::Cz]);
        let mop = prop::sample::select(MrceOp::ALL.to_vec());
        let cond = prop::sample::select(Cond::ALL.to_vec());
        prop_oneof![
            (0u16..1 << 14, single, q.clone())
                .prop_map(|(l, gate, qubit)| Instruction::quantum(l, QuantumOp::Single { gate, qubit })),
            (0u16..1 << 10, rotg, q.clone(), 0u16..1024).prop_map(|(l, gate, qubit, s)| {
                Instruction::quantum(
                    l,
                    QuantumOp::Rotation {
                        gate,
                        qubit,
                        angle: Angle::from_steps(s),
                    },
                )
            }),
            (0u16..1 << 14, twog, q.clone(), q.clone())
                .prop_map(|(l, gate, a, b)| Instruction::quantum(l, QuantumOp::Two { gate, a, b })),
            (0u16..1 << 14, q.clone(), rres.clone())
                .prop_map(|(l, qubit, result)| Instruction::quantum(l, QuantumOp::Meas { qubit, result })),
            (reg.clone(), -(1i32 << 20)..(1 << 20))
                .prop_map(|(rd, imm)| Instruction::Classical(ClassicalInstr::Ldi { rd, imm })),
            (reg.clone(), reg.clone())
                .prop_map(|(rd, rs)| Instruction::Classical(ClassicalInstr::Mov { rd, rs })),
            (0u8..4, reg.clone(), reg.clone(), reg.clone()).prop_map(|(k, rd, rs, rt)| {
                Instruction::Classical(match k {
                    0 => ClassicalInstr::Add { rd, rs, rt },
                    1 => ClassicalInstr::Sub { rd, rs, rt },
                    2 => ClassicalInstr::And { rd, rs, rt },
                    _ => ClassicalInstr::Or { rd, rs, rt },
                })
            }),
            (reg.clone(), reg.clone())
                .prop_map(|(rs, rt)| Instruction::Classical(ClassicalInstr::Cmp { rs, rt })),
            (cond, 0u32..1 << 23)
                .prop_map(|(cond, target)| Instruction::Classical(ClassicalInstr::Br { cond, target })),
            (0u32..1 << 26).prop_map(|target| Instruction::Classical(ClassicalInstr::Jmp { target })),
            (reg, rres.clone())
                .prop_map(|(rd, src)| Instruction::Classical(ClassicalInstr::Fmr { rd, src })),
            (rres, q, mop.clone(), mop).prop_map(|(result, target, op0, op1)| {
                Instruction::Mrce(MrceInstr {
                    result,
                    target,
                    op0,
                    op1,
                })
            }),
            Just(Instruction::EndBlock),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 10_000, rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

        #[test]
        fn encode_decode_round_trip(i in arb_instruction()) {
            let w = encode_instruction(&i).unwrap();
            prop_assert_eq!(decode_instruction(w).unwrap(), i);
        }
    }
}
