//! Machine configuration. Every field has a default, so `{}` is a valid
//! config file.

use serde::{Deserialize, Serialize};

use crate::qpu::QpuConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    pub sched_response: u64,
    /// Words per cycle moved into a core cache; 0 means unlimited.
    pub fetch_bandwidth: u64,
    pub t_switch: u64,
    pub branch_penalty: u64,
    pub ctx_switch_cycles: u64,
    pub pipeline_depth: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            sched_response: 4,
            fetch_bandwidth: 4,
            t_switch: 2,
            branch_penalty: 2,
            ctx_switch_cycles: 3,
            pipeline_depth: 3,
        }
    }
}

impl CostConfig {
    /// Cycles to load a block of `words` into a cache and start it.
    pub fn alloc_cost(&self, words: u64) -> u64 {
        let fetch = match self.fetch_bandwidth {
            0 => 0,
            bw => words.div_ceil(bw),
        };
        self.sched_response + fetch
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyRepr {
    /// Use whatever the program declares.
    #[default]
    AsDeclared,
    Direct,
    Priority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineConfig {
    pub cores: usize,
    pub superscalar_width: usize,
    pub clock_period_ns: u64,
    pub qpu: QpuConfig,
    pub costs: CostConfig,
    pub seed: u64,
    pub prefetch: bool,
    pub dependency_repr: DependencyRepr,
    pub deadlock_timeout: u64,
    /// Gate time used as the denominator of the time ratio.
    pub tr_gate_ns: u64,
    /// Keep the full issue-event log (needed for traces and equivalence checks).
    pub record_events: bool,
    /// Keep per-cycle core trace records.
    pub trace_cycles: bool,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            cores: 1,
            superscalar_width: 8,
            clock_period_ns: 10,
            qpu: QpuConfig::default(),
            costs: CostConfig::default(),
            seed: 0,
            prefetch: true,
            dependency_repr: DependencyRepr::AsDeclared,
            deadlock_timeout: 1_000_000,
            tr_gate_ns: 20,
            record_events: true,
            trace_cycles: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid config: {0}")]
pub struct ConfigError(pub String);

impl MachineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cores == 0 {
            return Err(ConfigError("cores must be at least 1".into()));
        }
        if ![1, 2, 4, 8].contains(&self.superscalar_width) {
            return Err(ConfigError(format!(
                "superscalar_width must be 1, 2, 4 or 8 (got {})",
                self.superscalar_width
            )));
        }
        if self.clock_period_ns == 0 || self.tr_gate_ns == 0 {
            return Err(ConfigError("clock_period_ns and tr_gate_ns must be positive".into()));
        }
        if self.cores > 64 {
            return Err(ConfigError("at most 64 cores".into()));
        }
        Ok(())
    }

    /// Same machine with every scheduling and allocation cost set to zero.
    pub fn zero_cost(&self) -> Self {
        let mut c = self.clone();
        c.costs.sched_response = 0;
        c.costs.fetch_bandwidth = 0;
        c.costs.t_switch = 0;
        c.prefetch = false;
        c
    }

    pub fn with_cores(&self, cores: usize) -> Self {
        MachineConfig {
            cores,
            ..self.clone()
        }
    }

    pub fn with_width(&self, w: usize) -> Self {
        MachineConfig {
            superscalar_width: w,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alloc_cost_arithmetic() {
        let c = CostConfig::default();
        assert_eq!(c.alloc_cost(40), 14);
        assert_eq!(c.alloc_cost(0), 4);
        assert_eq!(c.alloc_cost(41), 15);
        let z = MachineConfig::default().zero_cost().costs;
        assert_eq!(z.alloc_cost(1000), 0);
    }

    #[test]
    fn empty_json_gives_defaults() {
        let c: MachineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, MachineConfig::default());
        let c: MachineConfig = serde_json::from_str(r#"{"cores": 6, "qpu": {"meas_pulse_ns": 600}}"#).unwrap();
        assert_eq!(c.cores, 6);
        assert_eq!(c.qpu.meas_pulse_ns, 600);
        assert_eq!(c.qpu.daq_ns, 150);
    }

    #[test]
    fn width_checked() {
        assert!(MachineConfig::default().with_width(3).validate().is_err());
        assert!(MachineConfig::default().with_cores(0).validate().is_err());
    }
}
