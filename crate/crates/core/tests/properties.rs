use std::collections::BTreeMap;

use proptest::prelude::*;

use qcp_sim::isa::{
    decode_instruction, encode_instruction, parse_program, read_binary, write_binary, Angle,
    BlockDirective, ClassicalInstr, Cond, DepSpec, Gate, Instruction, MrceInstr, MrceOp, Program,
    QuantumOp, Reg, ResultReg,
};
use qcp_sim::program::{
    advance_priority_counter, build_table, convert_dependencies, deps_satisfied, BlockStatus,
};
use qcp_sim::qpu::IssueEvent;
use qcp_sim::sched::SchedAction;
use qcp_sim::{run_program, MachineConfig};

const SINGLE: [Gate; 4] = [Gate::X, Gate::Y, Gate::Z, Gate::H];

fn quantum_op(qubits: u8) -> impl Strategy<Value = QuantumOp> {
    let q = 0..qubits;
    prop_oneof![
        (0..4usize, q.clone()).prop_map(|(g, qubit)| QuantumOp::Single { gate: SINGLE[g], qubit }),
        (0..3usize, q.clone(), 0..1024u16).prop_map(|(g, qubit, a)| QuantumOp::Rotation {
            gate: [Gate::Rx, Gate::Ry, Gate::Rz][g],
            qubit,
            angle: Angle::from_steps(a),
        }),
        (any::<bool>(), q.clone(), 1..qubits).prop_map(move |(cz, a, d)| QuantumOp::Two {
            gate: if cz { Gate::Cz } else { Gate::Cnot },
            a,
            b: (a + d) % qubits,
        }),
        (q, 0..64u8).prop_map(|(qubit, r)| QuantumOp::Meas { qubit, result: ResultReg(r) }),
    ]
}

fn any_instruction(len: u32) -> impl Strategy<Value = Instruction> {
    let reg = (0..32u8).prop_map(Reg);
    prop_oneof![
        (0..1024u16, quantum_op(8)).prop_map(|(label, op)| Instruction::quantum(label, op)),
        (reg.clone(), -(1i32 << 20)..(1 << 20)).prop_map(|(rd, imm)| Instruction::Classical(ClassicalInstr::Ldi { rd, imm })),
        (reg.clone(), reg.clone(), reg.clone(), 0..4usize).prop_map(|(rd, rs, rt, k)| {
            Instruction::Classical(match k {
                0 => ClassicalInstr::Add { rd, rs, rt },
                1 => ClassicalInstr::Sub { rd, rs, rt },
                2 => ClassicalInstr::And { rd, rs, rt },
                _ => ClassicalInstr::Or { rd, rs, rt },
            })
        }),
        (reg.clone(), reg.clone()).prop_map(|(rs, rt)| Instruction::Classical(ClassicalInstr::Cmp { rs, rt })),
        (0..6usize, 0..len).prop_map(|(c, target)| Instruction::Classical(ClassicalInstr::Br { cond: Cond::ALL[c], target })),
        (0..len).prop_map(|target| Instruction::Classical(ClassicalInstr::Jmp { target })),
        (reg, 0..64u8).prop_map(|(rd, r)| Instruction::Classical(ClassicalInstr::Fmr { rd, src: ResultReg(r) })),
        (0..64u8, 0..8u8, 0..5usize, 0..5usize).prop_map(|(r, target, a, b)| Instruction::Mrce(MrceInstr {
            result: ResultReg(r),
            target,
            op0: MrceOp::ALL[a],
            op1: MrceOp::ALL[b],
        })),
        Just(Instruction::EndBlock),
    ]
}

/// Arbitrary (not necessarily valid) programs for round-trip checks.
fn any_program() -> impl Strategy<Value = Program> {
    (1..40u32)
        .prop_flat_map(|len| (prop::collection::vec(any_instruction(len), len as usize), 1..4u32, any::<bool>()))
        .prop_map(|(instructions, nblocks, prio)| {
            let mut p = Program::new(8);
            let len = instructions.len() as u32;
            p.instructions = instructions;
            let per = len.div_ceil(nblocks);
            let mut start = 0;
            let mut i = 0;
            while start < len {
                let end = (start + per - 1).min(len - 1);
                let deps = if prio {
                    DepSpec::Priority(i)
                } else if i == 0 {
                    DepSpec::Direct(Vec::new())
                } else {
                    DepSpec::Direct(vec![format!("b{}", i - 1)])
                };
                p.blocks.push(BlockDirective { name: format!("b{i}"), pc_start: start, pc_end: end, deps });
                start = end + 1;
                i += 1;
            }
            p
        })
}

/// A control-free block of timed layers. Each layer is a set of disjoint
/// single-qubit gates; labels are random but never zero between layers.
fn layered_block(qubits: u8) -> impl Strategy<Value = Vec<Instruction>> {
    prop::collection::vec((1..12u16, prop::collection::btree_set(0..qubits, 1..=qubits as usize), 0..4usize), 1..12)
        .prop_map(|layers| {
            let mut out = Vec::new();
            for (i, (label, qs, g)) in layers.into_iter().enumerate() {
                for (j, q) in qs.into_iter().enumerate() {
                    let l = if j == 0 && i > 0 { label } else { 0 };
                    out.push(Instruction::single(l, SINGLE[g], q));
                }
            }
            out
        })
}

/// Multi-block control-free programs with a random dependency DAG. Block i
/// may depend only on blocks with a smaller index.
fn dag_program() -> impl Strategy<Value = Program> {
    (1..7usize)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(layered_block(4), n),
                prop::collection::vec(any::<u64>(), n),
                prop::collection::vec(0..4u32, n),
                any::<bool>(),
            )
        })
        .prop_map(|(blocks, masks, prios, use_prio)| {
            let mut p = Program::new(4);
            for (i, body) in blocks.into_iter().enumerate() {
                let start = p.instructions.len() as u32;
                p.instructions.extend(body);
                p.instructions.push(Instruction::EndBlock);
                let deps = if use_prio {
                    DepSpec::Priority(prios[i])
                } else {
                    DepSpec::Direct(
                        (0..i).filter(|d| masks[i] >> d & 1 == 1).map(|d| format!("b{d}")).collect(),
                    )
                };
                p.blocks.push(BlockDirective {
                    name: format!("b{i}"),
                    pc_start: start,
                    pc_end: p.instructions.len() as u32 - 1,
                    deps,
                });
            }
            p
        })
}

fn activations(events: &[qcp_sim::sched::SchedEvent]) -> BTreeMap<usize, u64> {
    events
        .iter()
        .filter_map(|e| match e.action {
            SchedAction::Activate { block, .. } => Some((block, e.cycle)),
            _ => None,
        })
        .collect()
}

fn completions(events: &[qcp_sim::sched::SchedEvent]) -> BTreeMap<usize, u64> {
    events
        .iter()
        .filter_map(|e| match e.action {
            SchedAction::Done { block, .. } => Some((block, e.cycle)),
            _ => None,
        })
        .collect()
}

/// Scheduled issue times relative to each block's first issue. A block's
/// anchor depends on when the scheduler starts it, which may legitimately
/// vary with width; the label timeline inside it may not.
fn scheduled_ops(events: &[IssueEvent]) -> Vec<(usize, Gate, Vec<u8>, u64)> {
    let mut first: BTreeMap<usize, u64> = BTreeMap::new();
    for e in events {
        let f = first.entry(e.block).or_insert(e.nominal_ns);
        *f = (*f).min(e.nominal_ns);
    }
    let mut v: Vec<_> = events
        .iter()
        .map(|e| (e.block, e.gate, e.qubits.as_slice().to_vec(), e.nominal_ns - first[&e.block]))
        .collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn text_round_trip(p in any_program()) {
        let text = p.to_string();
        let back = parse_program(&text).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn binary_round_trip(p in any_program()) {
        for i in &p.instructions {
            let w = encode_instruction(i).unwrap();
            prop_assert_eq!(&decode_instruction(w).unwrap(), i);
        }
        let mut bytes = Vec::new();
        write_binary(&p, &mut bytes).unwrap();
        prop_assert_eq!(read_binary(bytes.as_slice()).unwrap(), p);
    }

    #[test]
    fn direct_readiness_matches_dependency_sets(p in dag_program(), done in any::<u64>()) {
        prop_assume!(!p.uses_priorities());
        let t = build_table(&p).unwrap();
        let done = done & ((1u64 << t.len()) - 1);
        for (b, dir) in p.blocks.iter().enumerate() {
            let DepSpec::Direct(names) = &dir.deps else { unreachable!() };
            let oracle = names.iter().all(|n| {
                let d = p.blocks.iter().position(|x| &x.name == n).unwrap();
                done >> d & 1 == 1
            });
            prop_assert_eq!(deps_satisfied(&t, done, 0, b), oracle);
        }
    }

    #[test]
    fn settled_counter_is_lowest_unfinished_priority(p in dag_program(), order in any::<u64>()) {
        prop_assume!(p.uses_priorities());
        let t = build_table(&p).unwrap();
        let mut statuses = vec![BlockStatus::Wait; t.len()];
        let settle = |statuses: &[BlockStatus], mut c: u32| loop {
            let n = advance_priority_counter(&t, statuses, c);
            if n == c { return c; }
            c = n;
        };
        let mut counter = settle(&statuses, 0);
        let mut rng = order;
        loop {
            let expected = (0..t.len())
                .filter(|&b| statuses[b] != BlockStatus::Done)
                .filter_map(|b| t.priority(b))
                .min()
                .unwrap_or(t.max_priority().unwrap() + 1);
            prop_assert_eq!(counter, expected);
            let ready: Vec<usize> = (0..t.len())
                .filter(|&b| statuses[b] != BlockStatus::Done && deps_satisfied(&t, 0, counter, b))
                .collect();
            if ready.is_empty() { break; }
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            statuses[ready[(rng >> 33) as usize % ready.len()]] = BlockStatus::Done;
            counter = settle(&statuses, counter);
        }
        prop_assert!(statuses.iter().all(|s| *s == BlockStatus::Done));
    }

    #[test]
    fn scheduler_never_starts_a_block_early(p in dag_program(), cores in 1..5usize, prefetch in any::<bool>()) {
        let mut cfg = MachineConfig::default().with_cores(cores);
        cfg.prefetch = prefetch;
        let out = run_program(&p, &cfg).unwrap();
        let t = build_table(&p).unwrap();
        let start = activations(&out.report.sched_events);
        let done = completions(&out.report.sched_events);
        prop_assert_eq!(done.len(), t.len());
        for b in 0..t.len() {
            let preds: Vec<usize> = match t.priority(b) {
                Some(pr) => (0..t.len()).filter(|&d| t.priority(d).unwrap() < pr).collect(),
                None => (0..t.len()).filter(|&d| t.dep_mask(b) >> d & 1 == 1).collect(),
            };
            for d in preds {
                prop_assert!(done[&d] <= start[&b], "block {} started at {} before {} finished at {}", b, start[&b], d, done[&d]);
            }
        }
    }

    #[test]
    fn one_core_runs_blocks_back_to_back(p in dag_program()) {
        let out = run_program(&p, &MachineConfig::default()).unwrap();
        let mut spans: Vec<(u64, u64)> = out.report.blocks.iter().map(|b| (b.activated_at, b.done_at)).collect();
        spans.sort();
        for w in spans.windows(2) {
            prop_assert!(w[0].1 <= w[1].0);
        }
    }

    #[test]
    fn width_does_not_change_the_schedule(p in dag_program(), cores in 1..3usize) {
        let cfg = MachineConfig::default().with_cores(cores);
        let reference = run_program(&p, &cfg.with_width(1)).unwrap();
        let mut prev_tr = reference.report.avg_tr;
        for w in [2, 4, 8] {
            let out = run_program(&p, &cfg.with_width(w)).unwrap();
            prop_assert_eq!(scheduled_ops(&out.events), scheduled_ops(&reference.events));
            prop_assert!(out.report.avg_tr <= prev_tr + 1e-12, "TR rose at width {}", w);
            prev_tr = out.report.avg_tr;
        }
    }

    #[test]
    fn issues_never_precede_their_schedule(p in dag_program(), w in prop::sample::select(vec![1usize, 2, 4, 8])) {
        let out = run_program(&p, &MachineConfig::default().with_width(w)).unwrap();
        let mut last: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for e in &out.events {
            prop_assert!(e.time_ns >= e.nominal_ns);
            let prev = last.insert((e.core, e.block), e.time_ns).unwrap_or(0);
            prop_assert!(e.time_ns >= prev);
        }
        for s in &out.report.steps {
            prop_assert_eq!(s.bucket_sum(), s.ces);
        }
    }

    #[test]
    fn representation_round_trip_keeps_layers(p in dag_program()) {
        prop_assume!(!p.uses_priorities());
        let prio = convert_dependencies(&p, true).unwrap();
        let t = build_table(&prio).unwrap();
        let direct = build_table(&p).unwrap();
        // A block's priority exceeds every dependency's.
        for b in 0..t.len() {
            for d in 0..t.len() {
                if direct.dep_mask(b) >> d & 1 == 1 {
                    prop_assert!(t.priority(d).unwrap() < t.priority(b).unwrap());
                }
            }
        }
        // Converting back yields a DAG that still contains every edge's
        // ordering: a run under it respects the original dependencies.
        let back = convert_dependencies(&prio, false).unwrap();
        let out = run_program(&back, &MachineConfig::default().with_cores(3)).unwrap();
        let start = activations(&out.report.sched_events);
        let done = completions(&out.report.sched_events);
        for b in 0..t.len() {
            for d in 0..t.len() {
                if direct.dep_mask(b) >> d & 1 == 1 {
                    prop_assert!(done[&d] <= start[&b]);
                }
            }
        }
    }
}
