//! Benchmark generators, the repetition runner and generator lookup by
//! name for the command line.

mod builder;
mod generators;
mod runner;

pub use generators::{
    gen_active_reset_plus_rb, gen_active_reset_plus_rb_branch, gen_dense, gen_feedforward,
    gen_parallel_rus, gen_steane_syndrome, steane, timing_example, GenError,
};
pub use runner::{
    ideal_speedup, run_repetitions, seed_for, CorePoint, ExperimentSpec, RepetitionSummary,
    SpeedupCurve, SEED_STRIDE,
};

use std::collections::BTreeMap;

use crate::isa::Program;
use crate::qpu::OutcomeBias;

/// A generated program plus the measurement sites whose outcomes drive it.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub name: String,
    pub program: Program,
    /// MEAS pcs where outcome 1 means a repeat-until-success failure.
    pub failure_points: Vec<u32>,
    /// MEAS pcs whose outcomes are unbiased coin flips.
    pub random_points: Vec<u32>,
}

impl Benchmark {
    /// Outcome model with failure probability `failure` at every failure
    /// point and 0.5 at every random point; all other measurements read 0.
    pub fn bias(&self, failure: f64) -> OutcomeBias {
        let mut points = BTreeMap::new();
        for &pc in &self.random_points {
            points.insert(pc, 0.5);
        }
        for &pc in &self.failure_points {
            points.insert(pc, failure);
        }
        OutcomeBias {
            default: 0.0,
            points,
        }
    }

    /// Outcome model forcing every random point to `bit`.
    pub fn forced(&self, bit: bool, failure: f64) -> OutcomeBias {
        let mut b = self.bias(failure);
        let p = if bit { 1.0 } else { 0.0 };
        for &pc in &self.random_points {
            b.points.insert(pc, p);
        }
        b
    }
}

/// Looks up a generator by name. Parameters come as `key=value` pairs.
pub fn by_name(name: &str, params: &BTreeMap<String, u32>) -> Result<Benchmark, String> {
    let get = |k: &str, default: u32| params.get(k).copied().unwrap_or(default);
    let known: &[&str] = match name {
        "dense" => &["qubits", "steps"],
        "parallel_rus" | "rus" => &["n"],
        "active_reset_plus_rb" | "rb" | "active_reset_plus_rb_branch" | "rb_branch" => &["len"],
        _ => &[],
    };
    if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(format!("generator `{name}` has no parameter `{k}`"));
    }
    let out = match name {
        "dense" => gen_dense(get("qubits", 8), get("steps", 100)),
        "feedforward" => Ok(gen_feedforward()),
        "parallel_rus" | "rus" => gen_parallel_rus(get("n", 2)),
        "active_reset_plus_rb" | "rb" => gen_active_reset_plus_rb(get("len", 20)),
        "active_reset_plus_rb_branch" | "rb_branch" => {
            gen_active_reset_plus_rb_branch(get("len", 20))
        }
        "steane" => Ok(gen_steane_syndrome()),
        _ => return Err(format!("unknown benchmark `{name}`")),
    };
    out.map_err(|e| e.to_string())
}

pub const NAMES: [&str; 6] = [
    "dense",
    "feedforward",
    "parallel_rus",
    "active_reset_plus_rb",
    "active_reset_plus_rb_branch",
    "steane",
];
