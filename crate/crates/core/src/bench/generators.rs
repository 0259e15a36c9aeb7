//! Parameterized benchmark programs.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use super::builder::{meas, single, two, Builder};
use super::Benchmark;
use crate::isa::{Angle, ClassicalInstr, Cond, DepSpec, Gate, MrceOp, QuantumOp, Qubit, Reg};
use crate::qpu::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("{needed} qubits needed, at most {limit} available")]
    QubitBudget { needed: u32, limit: u32 },
    #[error("parameter `{0}` must be at least 1")]
    Zero(&'static str),
}

const QUBIT_LIMIT: u32 = 64;

fn r(i: u8) -> Reg {
    Reg(i)
}

fn ldi(rd: u8, imm: i32) -> ClassicalInstr {
    ClassicalInstr::Ldi { rd: r(rd), imm }
}

fn cmp(a: u8, b: u8) -> ClassicalInstr {
    ClassicalInstr::Cmp { rs: r(a), rt: r(b) }
}

fn fmr(rd: u8, src: u8) -> ClassicalInstr {
    ClassicalInstr::Fmr {
        rd: r(rd),
        src: crate::isa::ResultReg(src),
    }
}

fn br(cond: Cond) -> ClassicalInstr {
    ClassicalInstr::Br { cond, target: 0 }
}

fn jmp(target: u32) -> ClassicalInstr {
    ClassicalInstr::Jmp { target }
}

fn add(rd: u8, rs: u8, rt: u8) -> ClassicalInstr {
    ClassicalInstr::Add {
        rd: r(rd),
        rs: r(rs),
        rt: r(rt),
    }
}

fn no_deps() -> DepSpec {
    DepSpec::Direct(Vec::new())
}

fn finish(name: &str, b: Builder) -> Benchmark {
    let (program, failure_points, random_points) = b.finish();
    Benchmark {
        name: name.to_string(),
        program,
        failure_points,
        random_points,
    }
}

/// `steps` circuit steps, each applying one single-qubit gate to every one
/// of `qubits` qubits.
pub fn gen_dense(qubits: u32, steps: u32) -> Result<Benchmark, GenError> {
    if qubits == 0 {
        return Err(GenError::Zero("qubits"));
    }
    if steps == 0 {
        return Err(GenError::Zero("steps"));
    }
    if qubits > QUBIT_LIMIT {
        return Err(GenError::QubitBudget {
            needed: qubits,
            limit: QUBIT_LIMIT,
        });
    }
    let gates = [Gate::H, Gate::X, Gate::Y, Gate::Z];
    let mut b = Builder::new(qubits);
    b.begin_block("main", no_deps());
    for s in 0..steps {
        let g = gates[s as usize % gates.len()];
        let ops: Vec<QuantumOp> = (0..qubits).map(|q| single(g, q as Qubit)).collect();
        b.layer(&ops);
    }
    b.end_block();
    Ok(finish("dense", b))
}

/// Deterministic entanglement creation: three rotations, two CZ gates, a
/// measurement of q2 and an X on q0 when it reads 1.
pub fn gen_feedforward() -> Benchmark {
    let mut b = Builder::new(3);
    b.begin_block("main", no_deps());
    let ry = |q| QuantumOp::Rotation {
        gate: Gate::Ry,
        qubit: q,
        angle: Angle::from_radians(FRAC_PI_2),
    };
    b.layer(&[ry(0), ry(1), ry(2)]);
    b.layer(&[two(Gate::Cz, 0, 2)]);
    b.layer(&[two(Gate::Cz, 1, 2)]);
    let m = b.layer(&[meas(2, 0)]);
    b.random_points.extend(m);
    b.classical(fmr(1, 0));
    b.classical(ldi(2, 1));
    b.classical(cmp(1, 2));
    let skip = b.classical(br(Cond::Ne));
    b.layer(&[single(Gate::X, 0)]);
    let end = b.pc();
    b.patch(skip, end);
    b.end_block();
    finish("feedforward", b)
}

/// `n` independent repeat-until-success blocks. Block i entangles data
/// qubits 3i, 3i+1 with ancilla 3i+2, measures the ancilla and on failure
/// corrects the ancilla, resets the data qubits and starts over.
pub fn gen_parallel_rus(n: u32) -> Result<Benchmark, GenError> {
    if n == 0 {
        return Err(GenError::Zero("n"));
    }
    if 3 * n > QUBIT_LIMIT {
        return Err(GenError::QubitBudget {
            needed: 3 * n,
            limit: QUBIT_LIMIT,
        });
    }
    let mut b = Builder::new(3 * n);
    for i in 0..n {
        let (d0, d1, a) = ((3 * i) as Qubit, (3 * i + 1) as Qubit, (3 * i + 2) as Qubit);
        let (ra, r0, r1) = ((3 * i) as u8, (3 * i + 1) as u8, (3 * i + 2) as u8);
        b.begin_block(format!("W{}", i + 1), no_deps());
        let top = b.pc();
        b.layer(&[single(Gate::H, d0), single(Gate::H, d1)]);
        b.layer(&[two(Gate::Cnot, d0, a)]);
        b.layer(&[two(Gate::Cnot, d1, a)]);
        b.layer(&[single(Gate::H, d0), single(Gate::H, d1)]);
        let m = b.layer(&[meas(a, ra)]);
        b.failure_points.extend(m);
        b.classical(fmr(1, ra));
        b.classical(ldi(2, 0));
        b.classical(cmp(1, 2));
        let ok = b.classical(br(Cond::Eq));
        let resets = b.layer(&[single(Gate::X, a), meas(d0, r0), meas(d1, r1)]);
        b.random_points.extend(&resets[1..]);
        b.mrce(r0, d0, MrceOp::Nop, MrceOp::X);
        b.mrce(r1, d1, MrceOp::Nop, MrceOp::X);
        b.classical(jmp(top));
        let end = b.pc();
        b.patch(ok, end);
        b.end_block();
    }
    Ok(finish("parallel_rus", b))
}

fn rb_sequence(len: u32) -> Vec<Gate> {
    let gates = [Gate::X, Gate::Y, Gate::Z, Gate::H];
    let mut rng = SplitMix64::new(0x5EED_0000_0000_0000 ^ u64::from(len));
    (0..len)
        .map(|_| gates[(rng.next_u64() % gates.len() as u64) as usize])
        .collect()
}

/// Active reset of q0 through MRCE while `len` randomized-benchmarking gates
/// run on q1.
pub fn gen_active_reset_plus_rb(len: u32) -> Result<Benchmark, GenError> {
    if len == 0 {
        return Err(GenError::Zero("len"));
    }
    let mut b = Builder::new(2);
    b.begin_block("main", no_deps());
    let m = b.layer(&[meas(0, 0)]);
    b.random_points.extend(m);
    b.mrce(0, 0, MrceOp::Nop, MrceOp::X);
    for g in rb_sequence(len) {
        b.layer(&[single(g, 1)]);
    }
    b.end_block();
    Ok(finish("active_reset_plus_rb", b))
}

/// The same circuit with the reset written as FMR plus a branch.
pub fn gen_active_reset_plus_rb_branch(len: u32) -> Result<Benchmark, GenError> {
    if len == 0 {
        return Err(GenError::Zero("len"));
    }
    let mut b = Builder::new(2);
    b.begin_block("main", no_deps());
    let m = b.layer(&[meas(0, 0)]);
    b.random_points.extend(m);
    for g in rb_sequence(len) {
        b.layer(&[single(g, 1)]);
    }
    b.classical(fmr(1, 0));
    b.classical(ldi(2, 1));
    b.classical(cmp(1, 2));
    let skip = b.classical(br(Cond::Ne));
    b.layer(&[single(Gate::X, 0)]);
    let end = b.pc();
    b.patch(skip, end);
    b.end_block();
    Ok(finish("active_reset_plus_rb_branch", b))
}

/// Qubit layout of the Steane syndrome benchmark.
pub mod steane {
    pub const DATA: u32 = 7;
    pub const STABILIZERS: u32 = 6;
    pub const ROUNDS: u32 = 3;
    pub const QUBITS: u32 = DATA + 4 * STABILIZERS + STABILIZERS;
    /// Shared register holding stabilizer `s`'s count of odd rounds.
    pub const COUNT_REG: u8 = 24;
    /// Shared register holding the voted syndrome word.
    pub const SYNDROME_REG: u8 = 30;

    /// Data qubits touched by stabilizer `s` (X type for s < 3, Z type
    /// otherwise). Qubit j is in the support of bit b iff bit b of j+1 is set.
    pub fn support(s: u32) -> [u8; 4] {
        let bit = s % 3;
        let mut out = [0u8; 4];
        let mut k = 0;
        for j in 0..DATA {
            if (j + 1) >> bit & 1 == 1 {
                out[k] = j as u8;
                k += 1;
            }
        }
        out
    }

    pub fn cat(s: u32, i: u32) -> u8 {
        (DATA + 4 * s + i) as u8
    }

    pub fn verify(s: u32) -> u8 {
        (DATA + 4 * STABILIZERS + s) as u8
    }

    pub fn verify_result(s: u32) -> u8 {
        s as u8
    }

    pub fn cat_result(s: u32, i: u32) -> u8 {
        (STABILIZERS + 4 * s + i) as u8
    }
}

/// Groups operations into steps greedily: each operation goes into the
/// first step after the last one touching any of its qubits.
fn layers(ops: &[QuantumOp]) -> Vec<Vec<QuantumOp>> {
    let mut out: Vec<Vec<QuantumOp>> = Vec::new();
    let mut last_use = [None::<usize>; 64];
    for op in ops {
        let at = op
            .qubits()
            .iter()
            .filter_map(|q| last_use[q as usize])
            .max()
            .map_or(0, |l| l + 1);
        if at == out.len() {
            out.push(Vec::new());
        }
        out[at].push(*op);
        for q in op.qubits().iter() {
            last_use[q as usize] = Some(at);
        }
    }
    out
}

/// Shor-style syndrome extraction for the 7-qubit Steane code: verified
/// four-qubit cat states, three measurement rounds and a majority vote,
/// followed by a table-lookup correction. Emits a priority block table.
pub fn gen_steane_syndrome() -> Benchmark {
    use steane::*;
    let mut b = Builder::new(QUBITS);
    let mut prio = 1;

    // Logical |0>: each X generator gets a pivot outside the other supports.
    b.begin_block("init", DepSpec::Priority(prio));
    for reg in COUNT_REG..=SYNDROME_REG {
        b.classical(ldi(reg, 0));
    }
    let pivots = [0u8, 1, 3];
    b.layer(&pivots.map(|p| single(Gate::H, p)));
    let mut cnots = Vec::new();
    for (s, &p) in pivots.iter().enumerate() {
        for q in support(s as u32) {
            if q != p {
                cnots.push(two(Gate::Cnot, p, q));
            }
        }
    }
    for l in layers(&cnots) {
        b.layer(&l);
    }
    b.end_block();

    for round in 0..ROUNDS {
        prio += 1;
        for s in 0..STABILIZERS {
            steane_prep(&mut b, s, round, prio);
        }
        // Every pair of stabilizers overlaps on the data block, so coupling
        // is serial: one block for the X type, one for the Z type.
        for (kind, gate) in [Gate::Cnot, Gate::Cz].into_iter().enumerate() {
            prio += 1;
            let name = if kind == 0 { "couple_x" } else { "couple_z" };
            b.begin_block(format!("{name}{round}"), DepSpec::Priority(prio));
            let mut ops = Vec::new();
            for s in (3 * kind as u32)..(3 * kind as u32 + 3) {
                for (i, d) in support(s).into_iter().enumerate() {
                    ops.push(two(gate, cat(s, i as u32), d));
                }
            }
            for l in layers(&ops) {
                b.layer(&l);
            }
            b.end_block();
        }
        prio += 1;
        for s in 0..STABILIZERS {
            steane_measure(&mut b, s, round, prio);
        }
    }

    // X-type syndrome bits locate a Z error, Z-type bits an X error.
    // Majority of three rounds: a count of two or more sets the bit.
    prio += 1;
    for s in 0..STABILIZERS {
        b.begin_block(format!("vote{s}"), DepSpec::Priority(prio));
        b.classical(ldi(1, 2));
        b.classical(cmp(COUNT_REG + s as u8, 1));
        let skip = b.classical(br(Cond::Lt));
        b.classical(ldi(2, 1 << s));
        b.classical(ClassicalInstr::Or {
            rd: r(SYNDROME_REG),
            rs: r(SYNDROME_REG),
            rt: r(2),
        });
        let end = b.pc();
        b.patch(skip, end);
        b.end_block();
    }

    prio += 1;
    b.begin_block("correct", DepSpec::Priority(prio));
    for (shift, gate) in [(0u32, Gate::Z), (3, Gate::X)] {
        b.classical(ldi(1, 7 << shift));
        b.classical(ClassicalInstr::And {
            rd: r(2),
            rs: r(SYNDROME_REG),
            rt: r(1),
        });
        let mut to_done = Vec::new();
        for j in 0..DATA {
            b.classical(ldi(3, ((j + 1) << shift) as i32));
            b.classical(cmp(2, 3));
            let next = b.classical(br(Cond::Ne));
            b.layer(&[single(gate, j as u8)]);
            to_done.push(b.classical(jmp(0)));
            let here = b.pc();
            b.patch(next, here);
        }
        let done = b.pc();
        for pc in to_done {
            b.patch(pc, done);
        }
    }
    b.end_block();
    finish("steane", b)
}

fn steane_prep(b: &mut Builder, s: u32, round: u32, prio: u32) {
    use steane::*;
    let c: Vec<u8> = (0..4).map(|i| cat(s, i)).collect();
    let v = verify(s);
    b.begin_block(format!("prep{round}_{s}"), DepSpec::Priority(prio));
    // Every retry reaches here with c0 held by an open reset context, so
    // the first gate cannot overtake the reset.
    let top = b.pc();
    b.layer(&[single(Gate::H, c[0])]);
    b.layer(&[two(Gate::Cnot, c[0], c[1])]);
    b.layer(&[two(Gate::Cnot, c[0], c[2]), two(Gate::Cnot, c[1], c[3])]);
    // Parity check of the two ends of the cat state.
    b.layer(&[two(Gate::Cnot, c[0], v)]);
    b.layer(&[two(Gate::Cnot, c[3], v)]);
    let m = b.layer(&[meas(v, verify_result(s))]);
    b.failure_points.extend(m);
    b.classical(fmr(1, verify_result(s)));
    b.classical(ldi(2, 0));
    b.classical(cmp(1, 2));
    let ok = b.classical(br(Cond::Eq));
    let mut ops = vec![single(Gate::X, v)];
    ops.extend((0..4).map(|i| meas(c[i as usize], cat_result(s, i))));
    let pcs = b.layer(&ops);
    b.random_points.extend(&pcs[1..]);
    for i in 0..4 {
        b.mrce(cat_result(s, i), c[i as usize], MrceOp::Nop, MrceOp::X);
    }
    b.classical(jmp(top));
    let end = b.pc();
    b.patch(ok, end);
    b.end_block();
}

fn steane_measure(b: &mut Builder, s: u32, round: u32, prio: u32) {
    use steane::*;
    b.begin_block(format!("meas{round}_{s}"), DepSpec::Priority(prio));
    if s < 3 {
        let hs: Vec<QuantumOp> = (0..4).map(|i| single(Gate::H, cat(s, i))).collect();
        b.layer(&hs);
    }
    let ms: Vec<QuantumOp> = (0..4).map(|i| meas(cat(s, i), cat_result(s, i))).collect();
    let pcs = b.layer(&ms);
    b.random_points.extend(pcs);
    for i in 0..4u8 {
        b.classical(fmr(1 + i, cat_result(s, u32::from(i))));
    }
    b.classical(add(1, 1, 2));
    b.classical(add(1, 1, 3));
    b.classical(add(1, 1, 4));
    b.classical(ldi(5, 1));
    b.classical(ClassicalInstr::And {
        rd: r(1),
        rs: r(1),
        rt: r(5),
    });
    let count = COUNT_REG + s as u8;
    b.classical(add(count, count, 1));
    for i in 0..4 {
        b.mrce(cat_result(s, i), cat(s, i), MrceOp::Nop, MrceOp::X);
    }
    b.end_block();
}

/// The two-qubit-step example from the timing-label description:
/// H on q0 and q1 at the same time, CNOT one cycle later.
pub fn timing_example() -> crate::isa::Program {
    crate::isa::parse_program(".qubits 2\n0 H q0\n0 H q1\n1 CNOT q0, q1\n")
        .expect("example parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{validate_program, Instruction};

    fn labels(b: &Benchmark) -> Vec<u16> {
        b.program
            .instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::Quantum(q) => Some(q.label),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn dense_labels() {
        let b = gen_dense(3, 3).unwrap();
        assert_eq!(labels(&b), vec![0, 0, 0, 2, 0, 0, 2, 0, 0]);
        assert!(validate_program(&b.program).is_empty());
    }

    #[test]
    fn feedforward_shape() {
        let b = gen_feedforward();
        assert_eq!(labels(&b), vec![0, 0, 0, 2, 4, 4, 1]);
        assert!(validate_program(&b.program).is_empty());
    }

    #[test]
    fn rus_blocks_share_no_qubits() {
        let b = gen_parallel_rus(2).unwrap();
        assert!(validate_program(&b.program).is_empty());
        assert_eq!(b.program.blocks.len(), 2);
        let mask = |blk: &crate::isa::BlockDirective| {
            b.program.instructions[blk.pc_start as usize..=blk.pc_end as usize]
                .iter()
                .fold(0u64, |m, i| match i {
                    Instruction::Quantum(q) => m | q.op.qubit_mask(),
                    _ => m,
                })
        };
        assert_eq!(mask(&b.program.blocks[0]), 0b000_111);
        assert_eq!(mask(&b.program.blocks[1]), 0b111_000);
        let branches = b
            .program
            .instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Classical(c) if c.branch_target().is_some()))
            .count();
        assert_eq!(branches, 4);
        assert!(matches!(gen_parallel_rus(22), Err(GenError::QubitBudget { .. })));
    }

    #[test]
    fn rb_variants_validate() {
        for b in [
            gen_active_reset_plus_rb(20).unwrap(),
            gen_active_reset_plus_rb_branch(20).unwrap(),
        ] {
            assert!(validate_program(&b.program).is_empty(), "{}", b.name);
        }
    }

    #[test]
    fn steane_structure() {
        let b = gen_steane_syndrome();
        assert!(validate_program(&b.program).is_empty());
        assert_eq!(b.program.qubit_count, 37);
        assert!(b.program.uses_priorities());
        let prios: std::collections::BTreeSet<u32> = b
            .program
            .blocks
            .iter()
            .map(|d| match d.deps {
                DepSpec::Priority(p) => p,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(b.program.blocks.len(), 50);
        assert_eq!(prios.len(), 15);
        assert_eq!(b.failure_points.len(), 18);
    }

    #[test]
    fn steane_supports_match_syndrome_code() {
        assert_eq!(steane::support(0), [0, 2, 4, 6]);
        assert_eq!(steane::support(1), [1, 2, 5, 6]);
        assert_eq!(steane::support(2), [3, 4, 5, 6]);
        assert_eq!(steane::support(3), steane::support(0));
    }
}
