//! Assembly text grammar.
//!
//! ```text
//! .qubits 3
//! .block W1 start=0 end=2 deps=none
//! 0 H q0
//! 0 H q1
//! 1 CNOT q0, q1
//! ```
//!
//! Quantum lines start with a timing label; classical lines do not.
//! `name:` defines a branch label; branch targets may be labels or word
//! addresses. `#` starts a comment.

use std::collections::HashMap;

use thiserror::Error;

use super::instr::*;
use super::{BlockDirective, DepSpec, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: u32,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("program mixes `deps=` and `prio=` block directives")]
    MixedDependencyStyles,
    #[error("dangling branch target `{0}`")]
    DanglingTarget(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
}

fn err(line: u32, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn syntax(line: u32, msg: impl Into<String>) -> ParseError {
    err(line, ParseErrorKind::Syntax(msg.into()))
}

enum Target {
    Resolved(u32),
    Label(String),
}

struct PendingBranch {
    pc: usize,
    line: u32,
    target: Target,
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut prog = Program::default();
    let mut declared_qubits: Option<u32> = None;
    let mut labels: HashMap<String, u32> = HashMap::new();
    let mut pending: Vec<PendingBranch> = Vec::new();
    let mut style: Option<bool> = None; // true = priority

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u32 + 1;
        let mut line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }

        if let Some(rest) = line.strip_prefix('.') {
            let mut toks = rest.split_whitespace();
            match toks.next() {
                Some("qubits") => {
                    let n = toks
                        .next()
                        .ok_or_else(|| syntax(line_no, ".qubits needs a count"))?;
                    declared_qubits = Some(parse_uint(n, line_no)?);
                }
                Some("block") => {
                    let dir = parse_block(toks, line_no)?;
                    let is_prio = matches!(dir.deps, DepSpec::Priority(_));
                    match style {
                        Some(s) if s != is_prio => {
                            return Err(err(line_no, ParseErrorKind::MixedDependencyStyles))
                        }
                        _ => style = Some(is_prio),
                    }
                    prog.blocks.push(dir);
                    prog.block_lines.push(line_no);
                }
                Some(other) => return Err(syntax(line_no, format!("unknown directive .{other}"))),
                None => return Err(syntax(line_no, "empty directive")),
            }
            continue;
        }

        // Branch label definition, optionally followed by an instruction.
        if let Some((head, tail)) = line.split_once(':') {
            let name = head.trim();
            if is_ident(name) {
                let pc = prog.instructions.len() as u32;
                if labels.insert(name.to_string(), pc).is_some() {
                    return Err(err(line_no, ParseErrorKind::DuplicateLabel(name.into())));
                }
                line = tail.trim();
                if line.is_empty() {
                    continue;
                }
            }
        }

        let pc = prog.instructions.len();
        let (instr, target) = parse_instruction(line, line_no)?;
        if let Some(target) = target {
            pending.push(PendingBranch {
                pc,
                line: line_no,
                target,
            });
        }
        prog.instructions.push(instr);
        prog.lines.push(line_no);
    }

    let n = prog.instructions.len() as u32;
    for p in pending {
        let addr = match p.target {
            Target::Resolved(a) if a < n => a,
            Target::Resolved(a) => {
                return Err(err(p.line, ParseErrorKind::DanglingTarget(a.to_string())))
            }
            Target::Label(name) => match labels.get(&name) {
                Some(&a) if a < n => a,
                _ => return Err(err(p.line, ParseErrorKind::DanglingTarget(name))),
            },
        };
        if let Instruction::Classical(c) = &mut prog.instructions[p.pc] {
            match c {
                ClassicalInstr::Br { target, .. } | ClassicalInstr::Jmp { target } => {
                    *target = addr
                }
                _ => unreachable!("only branches carry targets"),
            }
        }
    }

    prog.qubit_count = declared_qubits.unwrap_or_else(|| {
        prog.instructions
            .iter()
            .flat_map(|i| match i {
                Instruction::Quantum(q) => q.op.qubits().as_slice().to_vec(),
                Instruction::Mrce(m) => vec![m.target],
                _ => Vec::new(),
            })
            .map(|q| q as u32 + 1)
            .max()
            .unwrap_or(0)
    });
    Ok(prog)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_uint(s: &str, line: u32) -> Result<u32, ParseError> {
    s.parse::<u32>()
        .map_err(|_| syntax(line, format!("expected a nonnegative integer, got `{s}`")))
}

fn parse_block<'a>(
    mut toks: impl Iterator<Item = &'a str>,
    line: u32,
) -> Result<BlockDirective, ParseError> {
    let name = toks
        .next()
        .ok_or_else(|| syntax(line, ".block needs a name"))?
        .to_string();
    let (mut start, mut end, mut deps) = (None, None, None);
    for tok in toks {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected key=value, got `{tok}`")))?;
        match k {
            "start" => start = Some(parse_uint(v, line)?),
            "end" => end = Some(parse_uint(v, line)?),
            "deps" => {
                let names = if v.eq_ignore_ascii_case("none") {
                    Vec::new()
                } else {
                    v.split(',')
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect()
                };
                deps = Some(DepSpec::Direct(names));
            }
            "prio" => deps = Some(DepSpec::Priority(parse_uint(v, line)?)),
            other => return Err(syntax(line, format!("unknown block key `{other}`"))),
        }
    }
    let pc_start = start.ok_or_else(|| syntax(line, ".block needs start="))?;
    let pc_end = end.ok_or_else(|| syntax(line, ".block needs end="))?;
    if pc_end < pc_start {
        return Err(syntax(line, "block end precedes start"));
    }
    Ok(BlockDirective {
        name,
        pc_start,
        pc_end,
        deps: deps.unwrap_or(DepSpec::Direct(Vec::new())),
    })
}

fn operands(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect()
}

fn indexed(tok: &str, prefixes: &[&str], line: u32) -> Result<u8, ParseError> {
    let t = tok.trim();
    for p in prefixes {
        if let Some(num) = t.strip_prefix(p) {
            if let Ok(v) = num.parse::<u8>() {
                return Ok(v);
            }
        }
    }
    Err(syntax(line, format!("expected {}<n>, got `{t}`", prefixes[0])))
}

fn qubit(tok: &str, line: u32) -> Result<Qubit, ParseError> {
    indexed(tok, &["q"], line)
}

fn reg(tok: &str, line: u32) -> Result<Reg, ParseError> {
    indexed(tok, &["r"], line).map(Reg)
}

fn result_reg(tok: &str, line: u32) -> Result<ResultReg, ParseError> {
    indexed(tok, &["r", "qr"], line).map(ResultReg)
}

fn arity(ops: &[&str], n: usize, mnemonic: &str, line: u32) -> Result<(), ParseError> {
    if ops.len() == n {
        Ok(())
    } else {
        Err(syntax(
            line,
            format!("{mnemonic} takes {n} operand(s), got {}", ops.len()),
        ))
    }
}

fn parse_instruction(line: &str, ln: u32) -> Result<(Instruction, Option<Target>), ParseError> {
    let first = line.split_whitespace().next().unwrap_or("");
    if first.chars().all(|c| c.is_ascii_digit()) {
        let label: u16 = first
            .parse()
            .map_err(|_| syntax(ln, format!("timing label `{first}` out of range")))?;
        let rest = line[first.len()..].trim_start();
        let mnem = rest.split_whitespace().next().unwrap_or("");
        let gate = Gate::from_mnemonic(mnem)
            .ok_or_else(|| err(ln, ParseErrorKind::UnknownMnemonic(mnem.to_string())))?;
        let args = rest[mnem.len()..].trim();
        let op = parse_quantum_op(gate, args, ln)?;
        return Ok((Instruction::quantum(label, op), None));
    }

    let args = line[first.len()..].trim();
    let (mnem, cond) = match first.split_once('.') {
        Some((m, c)) => (m, Some(c)),
        None => (first, None),
    };
    let upper = mnem.to_ascii_uppercase();
    if Gate::from_mnemonic(mnem).is_some() {
        return Err(syntax(ln, format!("quantum instruction `{mnem}` needs a timing label")));
    }
    let ops = operands(args);
    let c = match upper.as_str() {
        "LDI" => {
            arity(&ops, 2, "LDI", ln)?;
            let imm = ops[1]
                .parse::<i32>()
                .map_err(|_| syntax(ln, format!("bad immediate `{}`", ops[1])))?;
            ClassicalInstr::Ldi {
                rd: reg(ops[0], ln)?,
                imm,
            }
        }
        "MOV" => {
            arity(&ops, 2, "MOV", ln)?;
            ClassicalInstr::Mov {
                rd: reg(ops[0], ln)?,
                rs: reg(ops[1], ln)?,
            }
        }
        "ADD" | "SUB" | "AND" | "OR" => {
            arity(&ops, 3, &upper, ln)?;
            let (rd, rs, rt) = (reg(ops[0], ln)?, reg(ops[1], ln)?, reg(ops[2], ln)?);
            match upper.as_str() {
                "ADD" => ClassicalInstr::Add { rd, rs, rt },
                "SUB" => ClassicalInstr::Sub { rd, rs, rt },
                "AND" => ClassicalInstr::And { rd, rs, rt },
                _ => ClassicalInstr::Or { rd, rs, rt },
            }
        }
        "CMP" => {
            arity(&ops, 2, "CMP", ln)?;
            ClassicalInstr::Cmp {
                rs: reg(ops[0], ln)?,
                rt: reg(ops[1], ln)?,
            }
        }
        "FMR" => {
            arity(&ops, 2, "FMR", ln)?;
            ClassicalInstr::Fmr {
                rd: reg(ops[0], ln)?,
                src: result_reg(ops[1], ln)?,
            }
        }
        "BR" | "JMP" => {
            arity(&ops, 1, &upper, ln)?;
            let target = match ops[0].parse::<u32>() {
                Ok(a) => Target::Resolved(a),
                Err(_) if is_ident(ops[0]) => Target::Label(ops[0].to_string()),
                Err(_) => return Err(syntax(ln, format!("bad branch target `{}`", ops[0]))),
            };
            let instr = if upper == "BR" {
                let c = cond.ok_or_else(|| syntax(ln, "BR needs a condition, e.g. BR.eq"))?;
                let cond = Cond::from_suffix(c)
                    .ok_or_else(|| err(ln, ParseErrorKind::UnknownMnemonic(first.into())))?;
                ClassicalInstr::Br { cond, target: 0 }
            } else {
                ClassicalInstr::Jmp { target: 0 }
            };
            return Ok((Instruction::Classical(instr), Some(target)));
        }
        "MRCE" => {
            arity(&ops, 4, "MRCE", ln)?;
            let op = |t: &str| {
                MrceOp::from_mnemonic(t)
                    .ok_or_else(|| syntax(ln, format!("MRCE operation `{t}` is not NOP/X/Y/Z/H")))
            };
            return Ok((
                Instruction::Mrce(MrceInstr {
                    result: result_reg(ops[0], ln)?,
                    target: qubit(ops[1], ln)?,
                    op0: op(ops[2])?,
                    op1: op(ops[3])?,
                }),
                None,
            ));
        }
        "END" => {
            arity(&ops, 0, "END", ln)?;
            return Ok((Instruction::EndBlock, None));
        }
        _ => return Err(err(ln, ParseErrorKind::UnknownMnemonic(first.to_string()))),
    };
    if cond.is_some() {
        return Err(syntax(ln, format!("`{first}` takes no condition suffix")));
    }
    Ok((Instruction::Classical(c), None))
}

fn parse_quantum_op(gate: Gate, args: &str, ln: u32) -> Result<QuantumOp, ParseError> {
    if gate == Gate::Meas {
        let (q, r) = args
            .split_once("->")
            .ok_or_else(|| syntax(ln, "MEAS needs `q<n> -> r<n>`"))?;
        return Ok(QuantumOp::Meas {
            qubit: qubit(q, ln)?,
            result: result_reg(r, ln)?,
        });
    }
    let ops = operands(args);
    if gate.is_two_qubit() {
        arity(&ops, 2, gate.mnemonic(), ln)?;
        return Ok(QuantumOp::Two {
            gate,
            a: qubit(ops[0], ln)?,
            b: qubit(ops[1], ln)?,
        });
    }
    if gate.is_rotation() {
        arity(&ops, 2, gate.mnemonic(), ln)?;
        let rad = ops[1]
            .parse::<f64>()
            .map_err(|_| syntax(ln, format!("bad angle `{}`", ops[1])))?;
        return Ok(QuantumOp::Rotation {
            gate,
            qubit: qubit(ops[0], ln)?,
            angle: Angle::from_radians(rad),
        });
    }
    arity(&ops, 1, gate.mnemonic(), ln)?;
    Ok(QuantumOp::Single {
        gate,
        qubit: qubit(ops[0], ln)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_example_labels() {
        let p = parse_program("0 H q0\n0 H q1\n1 CNOT q0, q1").unwrap();
        assert_eq!(p.instructions.len(), 3);
        let labels: Vec<u16> = p
            .instructions
            .iter()
            .map(|i| match i {
                Instruction::Quantum(q) => q.label,
                _ => panic!("expected quantum"),
            })
            .collect();
        assert_eq!(labels, [0, 0, 1]);
        assert_eq!(p.qubit_count, 2);
    }

    #[test]
    fn empty_source() {
        let p = parse_program(".qubits 1\n").unwrap();
        assert!(p.instructions.is_empty());
        assert_eq!(p.qubit_count, 1);
    }

    #[test]
    fn active_reset_pair() {
        let p = parse_program("0 MEAS q0 -> r0\nMRCE r0, q0, NOP, X").unwrap();
        assert_eq!(p.instructions[0], Instruction::meas(0, 0, 0));
        assert_eq!(
            p.instructions[1],
            Instruction::Mrce(MrceInstr {
                result: ResultReg(0),
                target: 0,
                op0: MrceOp::Nop,
                op1: MrceOp::X
            })
        );
        // print -> parse oracle
        assert_eq!(parse_program(&p.print()).unwrap(), p);
    }

    #[test]
    fn labels_resolve_forward_and_backward() {
        let src = "loop:\n0 H q0\nBR.eq done\nJMP loop\ndone: END\n";
        let p = parse_program(src).unwrap();
        assert_eq!(
            p.instructions[1],
            Instruction::Classical(ClassicalInstr::Br {
                cond: Cond::Eq,
                target: 3
            })
        );
        assert_eq!(
            p.instructions[2],
            Instruction::Classical(ClassicalInstr::Jmp { target: 0 })
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_program("0 H q0\n0 FOO q1").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.kind, ParseErrorKind::UnknownMnemonic("FOO".into()));

        let e = parse_program("JMP nowhere").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DanglingTarget("nowhere".into()));

        let e = parse_program("JMP 7\n").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::DanglingTarget("7".into()));

        let e = parse_program("H q0").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));

        let e = parse_program("0 CNOT q0").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn mixed_dependency_styles_rejected() {
        let src = ".block A start=0 end=0 deps=none\n.block B start=1 end=1 prio=1\n0 H q0\n0 H q1";
        let e = parse_program(src).unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(e.kind, ParseErrorKind::MixedDependencyStyles);
    }

    #[test]
    fn block_directives() {
        let src = ".qubits 2\n.block W1 start=0 end=0 deps=none\n.block W2 start=1 end=1 deps=W1\n0 H q0\n0 H q1";
        let p = parse_program(src).unwrap();
        assert_eq!(p.blocks.len(), 2);
        assert_eq!(p.blocks[1].deps, DepSpec::Direct(vec!["W1".into()]));
        assert_eq!(p.block_line(1), Some(3));
    }

    #[test]
    fn rotation_angle_round_trip() {
        let p = parse_program("0 RX q0, 1.5707963267948966\n0 RZ q1, -3.14159").unwrap();
        let q = parse_program(&p.print()).unwrap();
        assert_eq!(p, q);
        match p.instructions[0] {
            Instruction::Quantum(QuantumInstr {
                op: QuantumOp::Rotation { angle, .. },
                ..
            }) => assert_eq!(angle.steps(), 256),
            _ => panic!(),
        }
    }
}
