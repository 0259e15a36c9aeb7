//! Block information table and the two dependency encodings.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::isa::{DepSpec, Program};

pub const TABLE_CAPACITY: usize = 64;

pub type BlockId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BlockStatus {
    Wait,
    Prefetch,
    InExecution,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dependency {
    /// Bit `i` set means the block waits for block `i`.
    Direct(u64),
    Priority(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockInfoEntry {
    pub block_id: BlockId,
    pub name: String,
    pub pc_start: u32,
    pub pc_end: u32,
    pub dependency: Dependency,
}

impl BlockInfoEntry {
    pub fn word_count(&self) -> u32 {
        self.pc_end + 1 - self.pc_start
    }

    /// 32-bit packed form of a priority entry: start[31:20] end[19:8]
    /// priority[7:0]. `None` for direct entries or fields that do not fit.
    pub fn packed(&self) -> Option<u32> {
        match self.dependency {
            Dependency::Priority(p) if self.pc_start < 4096 && self.pc_end < 4096 && p < 256 => {
                Some(self.pc_start << 20 | self.pc_end << 8 | p)
            }
            _ => None,
        }
    }

    pub fn unpack(block_id: BlockId, word: u32) -> BlockInfoEntry {
        BlockInfoEntry {
            block_id,
            name: format!("B{block_id}"),
            pc_start: word >> 20,
            pc_end: (word >> 8) & 0xFFF,
            dependency: Dependency::Priority(word & 0xFF),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockInfoTable {
    pub entries: Vec<BlockInfoEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("block table capacity exceeded: {0} blocks")]
    CapacityExceeded(usize),
    #[error("block `{block}` depends on unknown block `{dep}`")]
    UnresolvedDependency { block: String, dep: String },
    #[error("block `{0}` depends on itself")]
    SelfDependency(String),
    #[error("duplicate block name `{0}`")]
    DuplicateName(String),
    #[error("dependency cycle through block `{0}`")]
    Cycle(String),
    #[error("table mixes direct and priority dependencies")]
    MixedRepresentation,
}

pub fn build_table(p: &Program) -> Result<BlockInfoTable, TableError> {
    let blocks = p.effective_blocks();
    if blocks.len() > TABLE_CAPACITY {
        return Err(TableError::CapacityExceeded(blocks.len()));
    }
    let mut ids: HashMap<&str, BlockId> = HashMap::new();
    for (i, b) in blocks.iter().enumerate() {
        if ids.insert(&b.name, i).is_some() {
            return Err(TableError::DuplicateName(b.name.clone()));
        }
    }
    let priority = blocks.iter().any(|b| matches!(b.deps, DepSpec::Priority(_)));
    let mut entries = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        let dependency = match (&b.deps, priority) {
            (DepSpec::Priority(p), true) => Dependency::Priority(*p),
            (DepSpec::Direct(deps), false) => {
                let mut mask = 0u64;
                for d in deps {
                    let j = *ids.get(d.as_str()).ok_or_else(|| TableError::UnresolvedDependency {
                        block: b.name.clone(),
                        dep: d.clone(),
                    })?;
                    if j == i {
                        return Err(TableError::SelfDependency(b.name.clone()));
                    }
                    mask |= 1 << j;
                }
                Dependency::Direct(mask)
            }
            _ => return Err(TableError::MixedRepresentation),
        };
        entries.push(BlockInfoEntry {
            block_id: i,
            name: b.name.clone(),
            pc_start: b.pc_start,
            pc_end: b.pc_end,
            dependency,
        });
    }
    let t = BlockInfoTable { entries };
    if let Some(b) = t.find_cycle() {
        return Err(TableError::Cycle(t.entries[b].name.clone()));
    }
    Ok(t)
}

impl BlockInfoTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn uses_priorities(&self) -> bool {
        self.entries
            .iter()
            .any(|e| matches!(e.dependency, Dependency::Priority(_)))
    }

    pub fn dep_mask(&self, b: BlockId) -> u64 {
        match self.entries[b].dependency {
            Dependency::Direct(m) => m,
            Dependency::Priority(_) => 0,
        }
    }

    pub fn priority(&self, b: BlockId) -> Option<u32> {
        match self.entries[b].dependency {
            Dependency::Priority(p) => Some(p),
            Dependency::Direct(_) => None,
        }
    }

    pub fn max_priority(&self) -> Option<u32> {
        self.entries.iter().filter_map(|e| self.priority(e.block_id)).max()
    }

    pub fn priority_levels(&self) -> usize {
        let mut ps: Vec<u32> = self.entries.iter().filter_map(|e| self.priority(e.block_id)).collect();
        ps.sort_unstable();
        ps.dedup();
        ps.len()
    }

    /// Block containing `pc`, if any.
    pub fn block_of(&self, pc: u32) -> Option<BlockId> {
        self.entries
            .iter()
            .find(|e| (e.pc_start..=e.pc_end).contains(&pc))
            .map(|e| e.block_id)
    }

    fn find_cycle(&self) -> Option<BlockId> {
        // Kahn's algorithm over the direct masks.
        let n = self.len();
        let mut indeg: Vec<u32> = (0..n).map(|b| self.dep_mask(b).count_ones()).collect();
        let mut queue: Vec<BlockId> = (0..n).filter(|&b| indeg[b] == 0).collect();
        let mut seen = 0;
        while let Some(b) = queue.pop() {
            seen += 1;
            #[allow(clippy::needless_range_loop)]
            for c in 0..n {
                if self.dep_mask(c) & (1 << b) != 0 {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        queue.push(c);
                    }
                }
            }
        }
        if seen == n {
            None
        } else {
            (0..n).find(|&b| indeg[b] > 0)
        }
    }
}

/// Whether block `b` may be allocated given the done set and counter.
pub fn deps_satisfied(t: &BlockInfoTable, done_mask: u64, counter: u32, b: BlockId) -> bool {
    match t.entries[b].dependency {
        Dependency::Direct(m) => m & !done_mask == 0,
        Dependency::Priority(p) => p == counter,
    }
}

/// One counter step: increments when every block at the current priority
/// is done and the counter has not passed the last priority.
pub fn advance_priority_counter(t: &BlockInfoTable, statuses: &[BlockStatus], counter: u32) -> u32 {
    let Some(max) = t.max_priority() else {
        return counter;
    };
    if counter > max {
        return counter;
    }
    let level_done = t
        .entries
        .iter()
        .filter(|e| e.dependency == Dependency::Priority(counter))
        .all(|e| statuses[e.block_id] == BlockStatus::Done);
    if level_done {
        counter + 1
    } else {
        counter
    }
}

/// Whether block `b` (still waiting) may be loaded ahead of time: every
/// dependency is running or finished, but not all are finished.
pub fn prefetch_eligible(t: &BlockInfoTable, statuses: &[BlockStatus], counter: u32, b: BlockId) -> bool {
    let started = |s: BlockStatus| matches!(s, BlockStatus::InExecution | BlockStatus::Done);
    match t.entries[b].dependency {
        Dependency::Direct(m) => {
            let deps: Vec<BlockId> = (0..t.len()).filter(|&d| m & (1 << d) != 0).collect();
            !deps.is_empty()
                && deps.iter().all(|&d| started(statuses[d]))
                && deps.iter().any(|&d| statuses[d] != BlockStatus::Done)
        }
        Dependency::Priority(p) => {
            p == counter + 1
                && t
                    .entries
                    .iter()
                    .filter(|e| e.dependency == Dependency::Priority(counter))
                    .all(|e| started(statuses[e.block_id]))
        }
    }
}

/// Rewrites block dependencies into the requested representation.
///
/// Priority to direct: each block waits for every block of the next lower
/// priority present. Direct to priority: a block's priority is the length
/// of the longest dependency chain leading to it.
pub fn convert_dependencies(p: &Program, to_priority: bool) -> Result<Program, TableError> {
    let t = build_table(p)?;
    let mut out = p.clone();
    if out.blocks.is_empty() {
        return Ok(out);
    }
    if to_priority == t.uses_priorities() {
        return Ok(out);
    }
    if to_priority {
        let mut level = vec![0u32; t.len()];
        // Ids are not necessarily topological; iterate to a fixed point.
        let mut changed = true;
        while changed {
            changed = false;
            for b in 0..t.len() {
                let m = t.dep_mask(b);
                let l = (0..t.len())
                    .filter(|&d| m & (1 << d) != 0)
                    .map(|d| level[d] + 1)
                    .max()
                    .unwrap_or(0);
                if l != level[b] {
                    level[b] = l;
                    changed = true;
                }
            }
        }
        for (b, blk) in out.blocks.iter_mut().enumerate() {
            blk.deps = DepSpec::Priority(level[b]);
        }
    } else {
        let prios: Vec<u32> = (0..t.len()).map(|b| t.priority(b).unwrap_or(0)).collect();
        for (b, blk) in out.blocks.iter_mut().enumerate() {
            let below = prios.iter().copied().filter(|&q| q < prios[b]).max();
            let deps = match below {
                Some(q) => (0..t.len())
                    .filter(|&d| prios[d] == q)
                    .map(|d| t.entries[d].name.clone())
                    .collect(),
                None => Vec::new(),
            };
            blk.deps = DepSpec::Direct(deps);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::parse_program;

    fn table1() -> BlockInfoTable {
        let mut src = String::from(".qubits 1\n");
        src.push_str(".block W1 start=0 end=10 deps=none\n");
        src.push_str(".block W2 start=11 end=20 deps=none\n");
        src.push_str(".block W3 start=21 end=30 deps=W1,W2\n");
        src.push_str(".block W4 start=31 end=40 deps=W3\n");
        for _ in 0..41 {
            src.push_str("0 X q0\n");
        }
        build_table(&parse_program(&src).unwrap()).unwrap()
    }

    #[test]
    fn example_table() {
        let t = table1();
        assert_eq!(t.len(), 4);
        assert_eq!(t.entries[2].dependency, Dependency::Direct(0b0011));
        assert_eq!(t.entries[3].dependency, Dependency::Direct(0b0100));
        assert_eq!((t.entries[1].pc_start, t.entries[1].pc_end), (11, 20));
        assert!(deps_satisfied(&t, 0b11, 0, 2));
        assert!(!deps_satisfied(&t, 0b01, 0, 2));
        assert!(deps_satisfied(&t, 0, 0, 0));
    }

    #[test]
    fn priority_table_and_counter() {
        let src = ".qubits 1\n.block W1 start=0 end=0 prio=0\n.block W2 start=1 end=1 prio=0\n.block W3 start=2 end=2 prio=1\n.block W4 start=3 end=3 prio=2\n0 X q0\n0 X q0\n0 X q0\n0 X q0\n";
        let t = build_table(&parse_program(src).unwrap()).unwrap();
        let ps: Vec<_> = (0..4).map(|b| t.priority(b).unwrap()).collect();
        assert_eq!(ps, vec![0, 0, 1, 2]);
        use BlockStatus::*;
        assert_eq!(advance_priority_counter(&t, &[Done, Done, Wait, Wait], 0), 1);
        assert_eq!(advance_priority_counter(&t, &[Done, InExecution, Wait, Wait], 0), 0);
        let all = [Done; 4];
        assert_eq!(advance_priority_counter(&t, &all, 2), 3);
        assert_eq!(advance_priority_counter(&t, &all, 3), 3);
        let w = t.entries[3].packed().unwrap();
        assert_eq!(BlockInfoEntry::unpack(3, w).pc_start, 3);
        assert_eq!(BlockInfoEntry::unpack(3, w).dependency, Dependency::Priority(2));
    }

    #[test]
    fn single_block_no_deps() {
        let t = build_table(&parse_program(".qubits 1\n0 X q0\n").unwrap()).unwrap();
        assert_eq!(t.entries[0].dependency, Dependency::Direct(0));
    }

    #[test]
    fn cycles_rejected() {
        let src = ".qubits 1\n.block A start=0 end=0 deps=B\n.block B start=1 end=1 deps=A\n0 X q0\n0 X q0\n";
        assert!(matches!(
            build_table(&parse_program(src).unwrap()),
            Err(TableError::Cycle(_))
        ));
    }

    #[test]
    fn representation_conversion() {
        let t = table1();
        let mut src = String::from(".qubits 1\n");
        for e in &t.entries {
            let deps: Vec<String> = (0..4)
                .filter(|&d| t.dep_mask(e.block_id) & (1 << d) != 0)
                .map(|d| t.entries[d].name.clone())
                .collect();
            let deps = if deps.is_empty() { "none".to_string() } else { deps.join(",") };
            src.push_str(&format!(".block {} start={} end={} deps={}\n", e.name, e.pc_start, e.pc_end, deps));
        }
        for _ in 0..41 {
            src.push_str("0 X q0\n");
        }
        let p = parse_program(&src).unwrap();
        let pp = convert_dependencies(&p, true).unwrap();
        let tp = build_table(&pp).unwrap();
        assert_eq!((0..4).map(|b| tp.priority(b).unwrap()).collect::<Vec<_>>(), vec![0, 0, 1, 2]);
        let back = build_table(&convert_dependencies(&pp, false).unwrap()).unwrap();
        assert_eq!(back.dep_mask(2), 0b0011);
        assert_eq!(back.dep_mask(3), 0b0100);
    }

    #[test]
    fn prefetch_rule() {
        let t = table1();
        use BlockStatus::*;
        assert!(prefetch_eligible(&t, &[InExecution, InExecution, Wait, Wait], 0, 2));
        assert!(!prefetch_eligible(&t, &[InExecution, Wait, Wait, Wait], 0, 2));
        assert!(!prefetch_eligible(&t, &[Done, Done, Wait, Wait], 0, 2));
        assert!(!prefetch_eligible(&t, &[Wait, Wait, Wait, Wait], 0, 0));
    }
}
