//! Seeded repetitions and core-count sweeps.

use serde::{Deserialize, Serialize};

use crate::config::MachineConfig;
use crate::engine::Prepared;
use crate::error::SimFault;

/// Seed increment between repetitions.
pub const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn seed_for(base: u64, rep: u32) -> u64 {
    base.wrapping_add(u64::from(rep).wrapping_mul(SEED_STRIDE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub repetitions: u32,
    pub base_seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            repetitions: 1,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionSummary {
    pub repetitions: u32,
    pub mean_ns: f64,
    pub min_ns: u64,
    pub p50_ns: u64,
    pub p90_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
    pub mean_avg_tr: f64,
    pub violations: usize,
    pub collisions: usize,
    #[serde(skip)]
    pub times_ns: Vec<u64>,
}

fn percentile(sorted: &[u64], p: f64) -> u64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Runs `spec.repetitions` seeds of one configuration. The configuration's
/// own seed is ignored in favour of the spec's base seed.
pub fn run_repetitions(
    prepared: &Prepared,
    cfg: &MachineConfig,
    spec: &ExperimentSpec,
) -> Result<RepetitionSummary, SimFault> {
    assert!(spec.repetitions >= 1, "at least one repetition");
    let mut cfg = cfg.clone();
    cfg.record_events = false;
    cfg.trace_cycles = false;
    let mut times = Vec::with_capacity(spec.repetitions as usize);
    let mut tr = 0.0;
    let (mut violations, mut collisions) = (0, 0);
    for rep in 0..spec.repetitions {
        cfg.seed = seed_for(spec.base_seed, rep);
        let out = prepared.run(&cfg)?;
        times.push(out.report.total_exec_ns);
        tr += out.report.avg_tr;
        violations += out.report.violations.len();
        collisions += out.report.collisions.len();
    }
    let mut sorted = times.clone();
    sorted.sort_unstable();
    let n = spec.repetitions as f64;
    Ok(RepetitionSummary {
        repetitions: spec.repetitions,
        mean_ns: times.iter().sum::<u64>() as f64 / n,
        min_ns: sorted[0],
        p50_ns: percentile(&sorted, 0.5),
        p90_ns: percentile(&sorted, 0.9),
        p99_ns: percentile(&sorted, 0.99),
        max_ns: sorted[sorted.len() - 1],
        mean_avg_tr: tr / n,
        violations,
        collisions,
        times_ns: times,
    })
}

/// Best-case speedup of `cores` processors over the measured single-core
/// time: the multicore run is repeated with scheduling and allocation free.
pub fn ideal_speedup(
    prepared: &Prepared,
    base: &MachineConfig,
    cores: usize,
    spec: &ExperimentSpec,
    single_core_mean_ns: f64,
) -> Result<f64, SimFault> {
    let cfg = base.clone().with_cores(cores).zero_cost();
    let s = run_repetitions(prepared, &cfg, spec)?;
    Ok(single_core_mean_ns / s.mean_ns)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorePoint {
    pub cores: usize,
    pub summary: RepetitionSummary,
    pub speedup: f64,
    pub ideal_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupCurve {
    pub program_hash: String,
    pub failure_bias: Option<f64>,
    pub points: Vec<CorePoint>,
}

impl SpeedupCurve {
    /// Sweeps core counts; speedups are relative to a single-core run with
    /// the same seeds, which is added if `cores` lacks it.
    pub fn measure(
        prepared: &Prepared,
        base: &MachineConfig,
        cores: &[usize],
        spec: &ExperimentSpec,
    ) -> Result<Self, SimFault> {
        let single = run_repetitions(prepared, &base.clone().with_cores(1), spec)?;
        let mut points = Vec::with_capacity(cores.len());
        for &n in cores {
            let summary = if n == 1 {
                single.clone()
            } else {
                run_repetitions(prepared, &base.clone().with_cores(n), spec)?
            };
            let ideal = ideal_speedup(prepared, base, n, spec, single.mean_ns)?;
            points.push(CorePoint {
                cores: n,
                speedup: single.mean_ns / summary.mean_ns,
                ideal_speedup: ideal,
                summary,
            });
        }
        Ok(SpeedupCurve {
            program_hash: prepared.hash.clone(),
            failure_bias: None,
            points,
        })
    }
}
