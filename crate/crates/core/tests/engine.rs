use qcp_sim::bench::{
    gen_active_reset_plus_rb, gen_dense, gen_feedforward, gen_parallel_rus, gen_steane_syndrome,
    run_repetitions, seed_for, steane, Benchmark, ExperimentSpec,
};
use qcp_sim::isa::{parse_program, validate_program, Gate};
use qcp_sim::metrics::{speedup, steps_of, step_operation_count};
use qcp_sim::{run_program, DependencyRepr, MachineConfig, Prepared, RunError, SimFault};

fn with_bias(b: &Benchmark, p: f64) -> MachineConfig {
    let mut cfg = MachineConfig::default();
    cfg.qpu.outcome_bias = b.bias(p);
    cfg
}

#[test]
fn dense_ces_follows_width() {
    // ceil(8 / W) dispatch cycles per step, TR = CES * 10 / 20.
    let b = gen_dense(8, 20).unwrap();
    for (w, tr) in [(1, 4.0), (2, 2.0), (4, 1.0), (8, 0.5)] {
        let r = run_program(&b.program, &MachineConfig::default().with_width(w)).unwrap().report;
        assert!(r.steps.iter().all(|s| s.tr == tr), "width {w}");
        assert!(r.steps.iter().all(|s| s.qices == 8 || w < 8));
    }
}

#[test]
fn single_gate_dense_is_width_independent() {
    let b = gen_dense(1, 1).unwrap();
    let trs: Vec<f64> = [1, 2, 4, 8]
        .iter()
        .map(|&w| run_program(&b.program, &MachineConfig::default().with_width(w)).unwrap().report.avg_tr)
        .collect();
    assert!(trs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn feedforward_without_correction_has_four_steps() {
    let b = gen_feedforward();
    let mut cfg = MachineConfig::default();
    cfg.qpu.outcome_bias = b.forced(false, 0.0);
    let out = run_program(&b.program, &cfg).unwrap();
    assert_eq!(out.report.steps.len(), 4);
    let steps = steps_of(&out.events);
    let counts: Vec<usize> = steps.iter().map(|s| step_operation_count(s)).collect();
    assert_eq!(counts, vec![3, 1, 1, 1]);
}

#[test]
fn generators_validate_and_never_collide() {
    let mut programs = vec![
        gen_dense(8, 30).unwrap(),
        gen_feedforward(),
        gen_parallel_rus(2).unwrap(),
        gen_parallel_rus(21).unwrap(),
        gen_active_reset_plus_rb(20).unwrap(),
        gen_steane_syndrome(),
    ];
    programs.push(qcp_sim::bench::gen_active_reset_plus_rb_branch(20).unwrap());
    for b in &programs {
        assert!(validate_program(&b.program).is_empty(), "{}", b.name);
        for bias in [0.0, 0.1, 0.5] {
            for cores in [1, 2, 6] {
                for w in [1, 8] {
                    let cfg = with_bias(b, bias).with_cores(cores).with_width(w);
                    let p = Prepared::new(&b.program, &cfg).unwrap();
                    for rep in 0..5 {
                        let mut c = cfg.clone();
                        c.seed = seed_for(3, rep);
                        let r = p.run(&c).unwrap_or_else(|e| panic!("{} bias {bias}: {e}", b.name)).report;
                        assert!(r.collisions.is_empty(), "{} bias {bias} cores {cores} w {w}: {:?}", b.name, r.collisions[0]);
                    }
                }
            }
        }
    }
}

#[test]
fn rus_on_one_core_serializes_the_blocks() {
    let b = gen_parallel_rus(2).unwrap();
    let out = run_program(&b.program, &with_bias(&b, 0.0)).unwrap();
    let w1_last = out.events.iter().filter(|e| e.block == 0).map(|e| e.time_ns).max().unwrap();
    let w2_first = out.events.iter().filter(|e| e.block == 1).map(|e| e.time_ns).min().unwrap();
    assert!(w2_first > w1_last);
    let two = run_program(&b.program, &with_bias(&b, 0.0).with_cores(2)).unwrap();
    let w2_first_parallel = two.events.iter().filter(|e| e.block == 1).map(|e| e.time_ns).min().unwrap();
    assert!(w2_first_parallel < w1_last);
}

#[test]
fn rus_with_bias_zero_runs_the_body_once() {
    let b = gen_parallel_rus(1).unwrap();
    let out = run_program(&b.program, &with_bias(&b, 0.0)).unwrap();
    let meas = out.events.iter().filter(|e| e.gate == Gate::Meas).count();
    assert_eq!(meas, 1);
}

#[test]
fn rus_retries_until_success() {
    let b = gen_parallel_rus(1).unwrap();
    let cfg = with_bias(&b, 0.5);
    let p = Prepared::new(&b.program, &cfg).unwrap();
    let mut retried = false;
    for rep in 0..50 {
        let mut c = cfg.clone();
        c.seed = seed_for(0, rep);
        let out = p.run(&c).unwrap();
        let ancilla = out.events.iter().filter(|e| e.gate == Gate::Meas && e.qubits.as_slice() == [2]).count();
        // Each failed attempt ends in a correction X on the ancilla.
        let corrections = out.events.iter().filter(|e| e.gate == Gate::X && e.qubits.as_slice() == [2]).count();
        assert_eq!(corrections, ancilla - 1);
        retried |= ancilla > 1;
    }
    assert!(retried);
}

#[test]
fn steane_counts_and_zero_bias() {
    let b = gen_steane_syndrome();
    assert_eq!(b.program.qubit_count, steane::QUBITS);
    assert_eq!(b.program.blocks.len(), 50);
    let out = run_program(&b.program, &with_bias(&b, 0.0).with_cores(6)).unwrap();
    let verify_meas = out
        .events
        .iter()
        .filter(|e| e.gate == Gate::Meas && b.failure_points.contains(&e.pc))
        .count();
    // Six verifications per round, none repeated.
    assert_eq!(verify_meas, 18);
    let order = &out.report.block_order;
    assert_eq!(order.len(), 50);
    assert_eq!(b.program.blocks[*order.last().unwrap()].name, "correct");
}

#[test]
fn steane_vote_matches_counts() {
    // With every cat outcome forced to 1 each parity is 4 & 1 = 0, so the
    // syndrome word stays clear and no correction gate is issued.
    let b = gen_steane_syndrome();
    let mut cfg = MachineConfig::default().with_cores(6);
    cfg.qpu.outcome_bias = b.forced(true, 0.0);
    let out = run_program(&b.program, &cfg).unwrap();
    let correct = b.program.blocks.iter().position(|d| d.name == "correct").unwrap();
    assert!(out.events.iter().all(|e| e.block != correct));
}

#[test]
fn dependency_representations_give_valid_runs() {
    let b = gen_steane_syndrome();
    for repr in [DependencyRepr::AsDeclared, DependencyRepr::Direct, DependencyRepr::Priority] {
        let mut cfg = with_bias(&b, 0.1).with_cores(4);
        cfg.dependency_repr = repr;
        let out = run_program(&b.program, &cfg).unwrap();
        assert_eq!(out.report.block_order.len(), 50, "{repr:?}");
    }
}

#[test]
fn seed_stride_changes_outcomes() {
    let b = gen_steane_syndrome();
    let cfg = with_bias(&b, 0.2);
    let p = Prepared::new(&b.program, &cfg).unwrap();
    let s = run_repetitions(&p, &cfg, &ExperimentSpec { repetitions: 20, base_seed: 9 }).unwrap();
    let mut distinct = s.times_ns.clone();
    distinct.sort_unstable();
    distinct.dedup();
    assert!(distinct.len() > 1);
    assert!(s.min_ns <= s.p50_ns && s.p50_ns <= s.p90_ns && s.p90_ns <= s.max_ns);
    let again = run_repetitions(&p, &cfg, &ExperimentSpec { repetitions: 20, base_seed: 9 }).unwrap();
    assert_eq!(s.times_ns, again.times_ns);
}

#[test]
fn mrce_reset_runs_during_readout() {
    let b = gen_active_reset_plus_rb(20).unwrap();
    let mut cfg = MachineConfig::default();
    cfg.qpu.outcome_bias = b.forced(true, 0.0);
    let out = run_program(&b.program, &cfg).unwrap();
    let rec = &out.report.mrce[0];
    let x = out.events.iter().find(|e| e.injected).unwrap();
    assert_eq!(x.gate, Gate::X);
    assert_eq!(Some(x.time_ns), rec.inject_ns);
    assert!(x.time_ns >= rec.result_ready_ns);
}

#[test]
fn watchdog_reports_a_stalled_core() {
    let b = gen_feedforward();
    let mut cfg = MachineConfig::default();
    cfg.qpu.outcome_bias = b.forced(true, 0.0);
    cfg.deadlock_timeout = 10;
    match run_program(&b.program, &cfg) {
        Err(RunError::Fault(SimFault::Deadlock { pc, .. })) => assert_eq!(pc, 6),
        other => panic!("expected deadlock, got {other:?}"),
    }
}

#[test]
fn oversized_programs_are_rejected() {
    let b = gen_steane_syndrome();
    let mut cfg = MachineConfig::default();
    cfg.qpu.qubit_count = 16;
    assert!(matches!(run_program(&b.program, &cfg), Err(RunError::Invalid(_))));
    let bad = parse_program(".qubits 2\nFMR r1, r3\n0 X q0\n").unwrap();
    let err = run_program(&bad, &MachineConfig::default()).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("never produced"));
}

#[test]
fn speedup_requires_the_same_program() {
    let a = gen_dense(4, 4).unwrap();
    let b = gen_dense(4, 5).unwrap();
    let cfg = MachineConfig::default();
    let ra = run_program(&a.program, &cfg).unwrap().report;
    let rb = run_program(&b.program, &cfg).unwrap().report;
    assert!(speedup(&ra, &rb).is_err());
    let r1 = run_program(&a.program, &cfg.with_width(1)).unwrap().report;
    assert!(speedup(&r1, &ra).unwrap() > 1.0);
}

#[test]
fn binary_image_runs_like_the_text() {
    let b = gen_parallel_rus(2).unwrap();
    let mut bytes = Vec::new();
    qcp_sim::isa::write_binary(&b.program, &mut bytes).unwrap();
    let back = qcp_sim::isa::read_binary(bytes.as_slice()).unwrap();
    let text = parse_program(&b.program.to_string()).unwrap();
    let cfg = with_bias(&b, 0.3);
    let r0 = run_program(&b.program, &cfg).unwrap().report;
    let r1 = run_program(&back, &cfg).unwrap().report;
    let r2 = run_program(&text, &cfg).unwrap().report;
    assert_eq!(r0, r1);
    assert_eq!(r0, r2);
}
