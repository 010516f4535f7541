//! Shared word-addressed memory, private LRU caches and a write-invalidate
//! coherence directory, charged on a virtual clock.
//!
//! Addresses are word indices. The address space is laid out as `p`
//! fixed-size stack arenas (one per core) followed by a single global arena
//! that grows with `alloc`. Every transfer moves a whole block of `B` words.

mod lru;
mod store;

use serde::{Deserialize, Serialize};

pub use lru::Lru;
use store::PagedStore;

use crate::error::SimError;

pub type Word = u64;
pub type Addr = u64;
pub type BlockId = u64;
pub type CoreId = usize;
pub type Tick = u64;

/// Largest supported core count (directory holder sets are 64-bit masks).
pub const MAX_CORES: usize = 64;

const NO_OWNER: u8 = u8::MAX;

/// Latencies in ticks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub hit_cost: u64,
    /// `b`: cost of one cache or block miss.
    pub miss_cost: u64,
    /// `s_P`: charged to a thief on each successful steal.
    pub steal_cost: u64,
    /// `k`: ticks between a core's scheduler context switches.
    pub sched_interval: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            hit_cost: 1,
            miss_cost: 10,
            steal_cost: 20,
            sched_interval: 1,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.hit_cost == 0
            || self.miss_cost == 0
            || self.steal_cost == 0
            || self.sched_interval == 0
        {
            return Err(SimError::InvalidConfig("all costs must be >= 1".into()));
        }
        if self.miss_cost < self.hit_cost {
            return Err(SimError::InvalidConfig(
                "miss_cost must be >= hit_cost".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemConfig {
    pub cores: usize,
    /// Cache size `M` in words.
    pub cache_words: u64,
    /// Block size `B` in words.
    pub block_words: u64,
    /// Words reserved per core for its execution stack.
    pub stack_words: u64,
    /// Upper bound on the global arena.
    pub global_limit: u64,
    pub cost: CostModel,
    /// Keep a per-transfer event log (needed for interval block-delay queries).
    pub log_events: bool,
}

impl MemConfig {
    pub fn new(cores: usize, cache_words: u64, block_words: u64) -> Self {
        Self {
            cores,
            cache_words,
            block_words,
            stack_words: 1 << 18,
            global_limit: 1 << 34,
            cost: CostModel::default(),
            log_events: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.cores == 0 || self.cores > MAX_CORES {
            return Err(SimError::InvalidConfig(format!(
                "core count must be in 1..={MAX_CORES}, got {}",
                self.cores
            )));
        }
        if self.block_words == 0 || self.cache_words < self.block_words {
            return Err(SimError::InvalidConfig("need M >= B >= 1".into()));
        }
        self.cost.validate()
    }

    pub fn cache_blocks(&self) -> usize {
        (self.cache_words / self.block_words) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Cold,
    Capacity,
    Invalidation,
    /// Not a transfer: time spent waiting for another transfer of the block.
    Queue,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Cold => "cold",
            EventKind::Capacity => "capacity",
            EventKind::Invalidation => "invalidation",
            EventKind::Queue => "queue",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemEvent {
    pub tick: Tick,
    pub core: CoreId,
    pub block: BlockId,
    pub kind: EventKind,
    /// Queueing delay for `Queue` records, zero otherwise.
    pub wait: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AddrRange {
    pub start: Addr,
    pub len: u64,
}

impl AddrRange {
    pub fn end(&self) -> Addr {
        self.start + self.len
    }

    pub fn contains(&self, a: Addr) -> bool {
        a >= self.start && a < self.end()
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct DirEntry {
    holders: u64,
    /// Cores whose copy was removed by a remote write and not yet refetched.
    invalidated: u64,
    /// Cores that ever held the block.
    ever: u64,
    dirty: u8,
    busy_until: Tick,
    transfers: u32,
}

impl DirEntry {
    fn fresh() -> Self {
        Self {
            dirty: NO_OWNER,
            ..Default::default()
        }
    }
}

/// Per-core memory counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemCounters {
    pub hits: Vec<u64>,
    pub cold_misses: Vec<u64>,
    pub capacity_misses: Vec<u64>,
    pub invalidation_misses: Vec<u64>,
    /// Invalidation misses on stack-arena blocks.
    pub stack_invalidation_misses: Vec<u64>,
    /// Write hits on clean shared copies that needed other copies invalidated.
    pub upgrades: Vec<u64>,
    /// Ticks spent waiting behind other transfers of the same block.
    pub queue_ticks: Vec<u64>,
    /// Latency (including queueing) of invalidation misses.
    pub invalidation_ticks: Vec<u64>,
    pub reads: Vec<u64>,
    pub writes: Vec<u64>,
}

impl MemCounters {
    fn new(p: usize) -> Self {
        let z = vec![0; p];
        Self {
            hits: z.clone(),
            cold_misses: z.clone(),
            capacity_misses: z.clone(),
            invalidation_misses: z.clone(),
            stack_invalidation_misses: z.clone(),
            upgrades: z.clone(),
            queue_ticks: z.clone(),
            invalidation_ticks: z.clone(),
            reads: z.clone(),
            writes: z,
        }
    }

    pub fn cold_capacity(&self, core: CoreId) -> u64 {
        self.cold_misses[core] + self.capacity_misses[core]
    }

    pub fn total_cold_capacity(&self) -> u64 {
        self.cold_misses.iter().sum::<u64>() + self.capacity_misses.iter().sum::<u64>()
    }

    pub fn total_invalidation(&self) -> u64 {
        self.invalidation_misses.iter().sum()
    }

    pub fn total_misses(&self) -> u64 {
        self.total_cold_capacity() + self.total_invalidation()
    }
}

/// The simulated machine memory system.
pub struct MachineState {
    cfg: MemConfig,
    store: PagedStore,
    caches: Vec<Lru>,
    dir: Vec<DirEntry>,
    global_base: Addr,
    global_next: Addr,
    counters: MemCounters,
    events: Vec<MemEvent>,
    max_writes: u32,
    max_writes_addr: Option<Addr>,
}

impl MachineState {
    pub fn new(mut cfg: MemConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let b = cfg.block_words;
        cfg.stack_words = cfg.stack_words.div_ceil(b) * b;
        let global_base = cfg.stack_words * cfg.cores as u64;
        let caches = (0..cfg.cores)
            .map(|_| Lru::new(cfg.cache_blocks()))
            .collect();
        let dir = vec![DirEntry::fresh(); (global_base / b) as usize];
        Ok(Self {
            counters: MemCounters::new(cfg.cores),
            store: PagedStore::default(),
            caches,
            dir,
            global_base,
            global_next: global_base,
            events: Vec::new(),
            max_writes: 0,
            max_writes_addr: None,
            cfg,
        })
    }

    pub fn config(&self) -> &MemConfig {
        &self.cfg
    }

    pub fn block_of(&self, addr: Addr) -> BlockId {
        addr / self.cfg.block_words
    }

    /// Stack arena of `core`.
    pub fn stack_arena(&self, core: CoreId) -> AddrRange {
        AddrRange {
            start: core as u64 * self.cfg.stack_words,
            len: self.cfg.stack_words,
        }
    }

    pub fn is_stack_addr(&self, addr: Addr) -> bool {
        addr < self.global_base
    }

    /// Allocates `nwords` words, rounded up to whole blocks, in the global arena.
    pub fn alloc(&mut self, core: CoreId, nwords: u64) -> Result<AddrRange, SimError> {
        if nwords == 0 {
            return Err(SimError::InvalidConfig("alloc of zero words".into()));
        }
        if core >= self.cfg.cores {
            return Err(SimError::InvalidConfig(format!("no core {core}")));
        }
        let b = self.cfg.block_words;
        let len = nwords.div_ceil(b) * b;
        let used = self.global_next - self.global_base;
        if used + len > self.cfg.global_limit {
            return Err(SimError::OutOfMemory {
                requested: len,
                limit: self.cfg.global_limit,
            });
        }
        let start = self.global_next;
        self.global_next += len;
        self.dir
            .resize((self.global_next / b) as usize, DirEntry::fresh());
        Ok(AddrRange { start, len })
    }

    fn check(&self, addr: Addr) -> Result<(), SimError> {
        if addr < self.global_next {
            Ok(())
        } else {
            Err(SimError::Unallocated(addr))
        }
    }

    /// Uninstrumented load (setup and result extraction).
    pub fn peek(&self, addr: Addr) -> Word {
        self.store.get(addr)
    }

    /// Uninstrumented store (setup only; no write is counted).
    pub fn poke(&mut self, addr: Addr, w: Word) {
        self.store.set(addr, w);
    }

    /// Marks a range as holding fresh variables for the limited-access count.
    pub fn fresh_variables(&mut self, range: AddrRange) {
        self.store.reset_counts(range.start, range.len);
    }

    pub fn write_count(&self, addr: Addr) -> u32 {
        self.store.write_count(addr)
    }

    /// Largest number of writes any single variable received.
    pub fn max_writes_per_variable(&self) -> (u32, Option<Addr>) {
        (self.max_writes, self.max_writes_addr)
    }

    pub fn counters(&self) -> &MemCounters {
        &self.counters
    }

    pub fn events(&self) -> &[MemEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<MemEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn cache(&self, core: CoreId) -> &Lru {
        &self.caches[core]
    }

    /// Cores currently holding `block`, and the dirty owner if any.
    pub fn holders(&self, block: BlockId) -> (Vec<CoreId>, Option<CoreId>) {
        let e = self
            .dir
            .get(block as usize)
            .copied()
            .unwrap_or_else(DirEntry::fresh);
        let hs = (0..self.cfg.cores)
            .filter(|c| e.holders >> c & 1 == 1)
            .collect();
        let d = (e.dirty != NO_OWNER).then_some(e.dirty as usize);
        (hs, d)
    }

    /// Total transfers of `block` over the whole run (no event log needed).
    pub fn transfers(&self, block: BlockId) -> u64 {
        self.dir
            .get(block as usize)
            .map_or(0, |e| e.transfers as u64)
    }

    /// Number of transfers of `block` whose request tick lies in `[from, to]`.
    pub fn block_delay(&self, block: BlockId, from: Tick, to: Tick) -> Result<u64, SimError> {
        if !self.cfg.log_events {
            return Err(SimError::InvalidConfig(
                "block_delay needs the event log".into(),
            ));
        }
        Ok(block_delay_in(&self.events, block, from, to))
    }

    /// Checks the single-writer invariant over every block.
    pub fn check_coherence(&self) -> Result<(), String> {
        for (b, e) in self.dir.iter().enumerate() {
            if e.dirty != NO_OWNER && e.holders != 1u64 << e.dirty {
                return Err(format!(
                    "block {b}: dirty at {} but holders {:#b}",
                    e.dirty, e.holders
                ));
            }
            for c in 0..self.cfg.cores {
                let resident = self.caches[c].contains(b as u64);
                if resident != (e.holders >> c & 1 == 1) {
                    return Err(format!("block {b}: directory disagrees with cache {c}"));
                }
            }
        }
        for (c, cache) in self.caches.iter().enumerate() {
            if cache.len() > self.cfg.cache_blocks() {
                return Err(format!("cache {c} over capacity"));
            }
        }
        Ok(())
    }

    /// Brings `block` into `core`'s cache. Returns the latency.
    fn fetch(&mut self, core: CoreId, block: BlockId, now: Tick) -> u64 {
        let bit = 1u64 << core;
        let miss_cost = self.cfg.cost.miss_cost;
        let is_stack = block * self.cfg.block_words < self.global_base;
        let e = &mut self.dir[block as usize];
        let kind = if e.invalidated & bit != 0 {
            EventKind::Invalidation
        } else if e.ever & bit != 0 {
            EventKind::Capacity
        } else {
            EventKind::Cold
        };
        e.invalidated &= !bit;
        e.ever |= bit;
        let start = now.max(e.busy_until);
        let wait = start - now;
        e.busy_until = start + miss_cost;
        e.transfers += 1;
        // A dirty copy elsewhere is downgraded to clean-shared.
        if e.dirty != NO_OWNER {
            e.dirty = NO_OWNER;
        }
        e.holders |= bit;
        let latency = wait + miss_cost;
        match kind {
            EventKind::Cold => self.counters.cold_misses[core] += 1,
            EventKind::Capacity => self.counters.capacity_misses[core] += 1,
            EventKind::Invalidation => {
                self.counters.invalidation_misses[core] += 1;
                self.counters.invalidation_ticks[core] += latency;
                if is_stack {
                    self.counters.stack_invalidation_misses[core] += 1;
                }
            }
            EventKind::Queue => unreachable!(),
        }
        self.counters.queue_ticks[core] += wait;
        if self.cfg.log_events {
            if wait > 0 {
                self.events.push(MemEvent {
                    tick: now,
                    core,
                    block,
                    kind: EventKind::Queue,
                    wait,
                });
            }
            self.events.push(MemEvent {
                tick: now,
                core,
                block,
                kind,
                wait: 0,
            });
        }
        if let Some(victim) = self.caches[core].insert(block) {
            let v = &mut self.dir[victim as usize];
            v.holders &= !bit;
            if v.dirty as usize == core {
                // write-back folded into the miss cost
                v.dirty = NO_OWNER;
            }
        }
        latency
    }

    /// Instrumented load by `core` at virtual time `now`.
    pub fn read(&mut self, core: CoreId, addr: Addr, now: Tick) -> Result<(Word, u64), SimError> {
        self.check(addr)?;
        let block = self.block_of(addr);
        self.counters.reads[core] += 1;
        let latency = if self.caches[core].touch(block) {
            self.counters.hits[core] += 1;
            self.cfg.cost.hit_cost
        } else {
            self.fetch(core, block, now)
        };
        Ok((self.store.get(addr), latency))
    }

    /// Instrumented store by `core` at virtual time `now`. Returns the latency.
    pub fn write(
        &mut self,
        core: CoreId,
        addr: Addr,
        value: Word,
        now: Tick,
    ) -> Result<u64, SimError> {
        self.check(addr)?;
        let block = self.block_of(addr);
        let bit = 1u64 << core;
        self.counters.writes[core] += 1;
        let latency = if self.caches[core].touch(block) {
            let e = self.dir[block as usize];
            if e.dirty as usize == core {
                self.counters.hits[core] += 1;
                self.cfg.cost.hit_cost
            } else {
                self.counters.upgrades[core] += 1;
                self.cfg.cost.miss_cost
            }
        } else {
            self.fetch(core, block, now)
        };
        let others = self.dir[block as usize].holders & !bit;
        if others != 0 {
            for c in 0..self.cfg.cores {
                if others >> c & 1 == 1 {
                    self.caches[c].remove(block);
                }
            }
            let e = &mut self.dir[block as usize];
            e.holders &= !others;
            e.invalidated |= others;
        }
        let e = &mut self.dir[block as usize];
        e.dirty = core as u8;
        e.holders |= bit;
        let count = self.store.write_counted(addr, value);
        if count > self.max_writes {
            self.max_writes = count;
            self.max_writes_addr = Some(addr);
        }
        Ok(latency)
    }
}

/// Transfers of `block` recorded in `events` with request tick in `[from, to]`.
pub fn block_delay_in(events: &[MemEvent], block: BlockId, from: Tick, to: Tick) -> u64 {
    events
        .iter()
        .filter(|e| {
            e.block == block && e.kind != EventKind::Queue && e.tick >= from && e.tick <= to
        })
        .count() as u64
}
