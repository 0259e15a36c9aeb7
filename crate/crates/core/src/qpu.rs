//! Device model: gate durations, qubit occupancy, seeded measurement
//! outcomes and readout latency. Qubits are outcome generators, not state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::isa::{Gate, Qubits, RESULT_REGISTERS};

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Probability of reading 1, per program point (word address of the MEAS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutcomeBias {
    pub default: f64,
    pub points: BTreeMap<u32, f64>,
}

impl Default for OutcomeBias {
    fn default() -> Self {
        OutcomeBias {
            default: 0.0,
            points: BTreeMap::new(),
        }
    }
}

impl OutcomeBias {
    pub fn uniform(p: f64) -> Self {
        OutcomeBias {
            default: p,
            points: BTreeMap::new(),
        }
    }

    pub fn at(&self, pc: u32) -> f64 {
        self.points.get(&pc).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpuConfig {
    pub qubit_count: u32,
    pub single_gate_ns: u64,
    pub two_gate_ns: u64,
    pub meas_pulse_ns: u64,
    pub daq_ns: u64,
    pub jitter_ns: u64,
    pub clock_period_ns: u64,
    pub outcome_bias: OutcomeBias,
}

impl Default for QpuConfig {
    fn default() -> Self {
        QpuConfig {
            qubit_count: 64,
            single_gate_ns: 20,
            two_gate_ns: 40,
            meas_pulse_ns: 300,
            daq_ns: 150,
            jitter_ns: 0,
            clock_period_ns: 10,
            outcome_bias: OutcomeBias::default(),
        }
    }
}

impl QpuConfig {
    pub fn duration(&self, g: Gate) -> u64 {
        match g {
            Gate::Meas => self.meas_pulse_ns,
            g if g.is_two_qubit() => self.two_gate_ns,
            _ => self.single_gate_ns,
        }
    }

    pub fn feedback_latency_ns(&self) -> u64 {
        self.meas_pulse_ns + self.daq_ns
    }
}

/// Ground-truth record of one operation sent to one analog channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IssueEvent {
    pub time_ns: u64,
    /// Issue time on the pure label timeline, ignoring slips.
    pub nominal_ns: u64,
    pub gate: Gate,
    pub qubits: Qubits,
    pub channel: u32,
    pub duration_ns: u64,
    pub core: usize,
    pub block: usize,
    pub pc: u32,
    /// Circuit step index within the block execution.
    pub step: u32,
    /// Operations injected by a conditional-execution context switch.
    pub injected: bool,
}

impl IssueEvent {
    pub fn channel_qubit(&self) -> u32 {
        self.channel / 3
    }
}

/// Channel map: microwave on 3q, flux on 3q+1, readout on 3q+2.
pub fn channels(gate: Gate, qubits: &Qubits) -> Vec<u32> {
    qubits
        .iter()
        .map(|q| {
            let base = 3 * u32::from(q);
            match gate {
                Gate::Meas => base + 2,
                g if g.is_two_qubit() => base + 1,
                _ => base,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Collision {
    pub qubit: u32,
    pub time_ns: u64,
    pub busy_until_ns: u64,
    pub gate: Gate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ResultEntry {
    pub value: bool,
    pub ready_at: Option<u64>,
    /// Measurements dispatched to this register but not yet issued.
    pub pending: u32,
    pub writes: u32,
}

impl ResultEntry {
    pub fn valid_at(&self, now_ns: u64) -> bool {
        self.pending == 0 && self.ready_at.is_some_and(|t| t <= now_ns)
    }

    /// Time the newest value becomes readable, once known.
    pub fn known_ready(&self) -> Option<u64> {
        if self.pending == 0 {
            self.ready_at
        } else {
            None
        }
    }
}

/// Measurement result registers, written only by the acquisition model.
#[derive(Debug, Clone)]
pub struct ResultFile {
    pub entries: Vec<ResultEntry>,
}

impl Default for ResultFile {
    fn default() -> Self {
        ResultFile {
            entries: vec![ResultEntry::default(); RESULT_REGISTERS as usize],
        }
    }
}

impl ResultFile {
    pub fn get(&self, r: u8) -> &ResultEntry {
        &self.entries[r as usize]
    }

    pub fn mark_pending(&mut self, r: u8) {
        self.entries[r as usize].pending += 1;
    }

    pub fn write(&mut self, r: u8, value: bool, ready_at: u64) {
        let e = &mut self.entries[r as usize];
        e.pending = e.pending.saturating_sub(1);
        e.value = value;
        e.ready_at = Some(ready_at);
        e.writes += 1;
    }
}

#[derive(Debug, Clone)]
pub struct Qpu {
    pub cfg: QpuConfig,
    busy_until: Vec<u64>,
    outcome_rng: Vec<SplitMix64>,
    jitter_rng: Vec<SplitMix64>,
    record: bool,
    pub log: Vec<IssueEvent>,
    pub collisions: Vec<Collision>,
    pub last_issue_ns: u64,
    pub issued: u64,
}

impl Qpu {
    pub fn new(cfg: QpuConfig, seed: u64, record: bool) -> Self {
        let n = cfg.qubit_count.max(1) as usize;
        let stream = |q: usize, salt: u64| {
            SplitMix64::new(mix64(seed ^ mix64((q as u64 + 1).wrapping_mul(GOLDEN_GAMMA) ^ salt)))
        };
        Qpu {
            busy_until: vec![0; n],
            outcome_rng: (0..n).map(|q| stream(q, 0x6f75_7463)).collect(),
            jitter_rng: (0..n).map(|q| stream(q, 0x6a69_7474)).collect(),
            cfg,
            record,
            log: Vec::new(),
            collisions: Vec::new(),
            last_issue_ns: 0,
            issued: 0,
        }
    }

    /// Accepts one channel event; occupancy is tracked on the channel's qubit.
    /// Returns the collision, if any; the event is logged either way.
    pub fn accept_issue(&mut self, e: IssueEvent) -> Option<Collision> {
        let q = e.channel_qubit() as usize;
        assert!(q < self.busy_until.len(), "unmapped qubit q{q}");
        let mut hit = None;
        if self.busy_until[q] > e.time_ns {
            let c = Collision {
                qubit: q as u32,
                time_ns: e.time_ns,
                busy_until_ns: self.busy_until[q],
                gate: e.gate,
            };
            self.collisions.push(c.clone());
            hit = Some(c);
        }
        self.busy_until[q] = self.busy_until[q].max(e.time_ns + e.duration_ns);
        self.last_issue_ns = self.last_issue_ns.max(e.time_ns);
        self.issued += 1;
        if self.record {
            self.log.push(e);
        }
        hit
    }

    /// Draws the outcome of a measurement issued at `issue_ns` and returns
    /// `(bit, ready_ns)`.
    pub fn measurement_result(&mut self, qubit: u8, issue_ns: u64, pc: u32) -> (bool, u64) {
        let q = qubit as usize;
        let jitter = if self.cfg.jitter_ns > 0 {
            self.jitter_rng[q].next_u64() % (self.cfg.jitter_ns + 1)
        } else {
            0
        };
        let bit = self.outcome_rng[q].bernoulli(self.cfg.outcome_bias.at(pc));
        (bit, issue_ns + self.cfg.meas_pulse_ns + self.cfg.daq_ns + jitter)
    }

    pub fn busy_until(&self, q: u8) -> u64 {
        self.busy_until[q as usize]
    }
}
