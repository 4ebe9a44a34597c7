//! Demand-side model: set-associative LLC with way reservations plus a
//! per-bank open-row model that decides which misses activate a row.
//!
//! Reserved ways are invisible to demand traffic in both lookup and
//! victim selection; reserving a way force-evicts its occupant. Tracking
//! state never lives here, so demand behavior is independent of tracker
//! counter contents by construction.

use crate::geometry::{Geometry, PagePolicy, RowId};
use crate::trace::{AccessKind, ActivationCause, ActivationEvent, MemoryAccess};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Replacement {
    #[default]
    Srrip,
    Lru,
}

impl Replacement {
    pub fn name(&self) -> &'static str {
        match self {
            Replacement::Srrip => "srrip",
            Replacement::Lru => "lru",
        }
    }
}

impl std::str::FromStr for Replacement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "srrip" => Ok(Replacement::Srrip),
            "lru" => Ok(Replacement::Lru),
            other => Err(format!("unknown replacement policy: {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    valid: bool,
    dirty: bool,
    tag: u64,
    rrpv: u8,
    stamp: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct FrontendStats {
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
    pub forced_evictions: u64,
    /// Misses that could not fill because every way was reserved.
    pub bypasses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("way {way} of set {set} is already reserved")]
    AlreadyReserved { set: u64, way: u64 },
    #[error("way {way} out of range ({ways} ways)")]
    WayOutOfRange { way: u64, ways: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessOutcome {
    pub hit: bool,
    /// Demand activation caused by this access, if the miss reached a
    /// closed or different row.
    pub activation: Option<ActivationEvent>,
    /// Writeback activation when dirty-victim accounting is enabled.
    pub writeback_activation: Option<ActivationEvent>,
    pub writeback: bool,
    pub bypass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReserveOutcome {
    pub forced_eviction: bool,
    pub writeback: bool,
}

#[derive(Debug, Clone)]
pub struct MemoryFrontend {
    sets: u64,
    ways: u64,
    replacement: Replacement,
    policy: PagePolicy,
    /// If set, dirty writebacks activate the victim's row.
    pub count_writeback_acts: bool,
    lines: Vec<Line>,
    reserved: Vec<u64>,
    reserved_count: u64,
    open_rows: Vec<Option<RowId>>,
    tick: u64,
    seq_hash: u64,
    pub stats: FrontendStats,
}

impl MemoryFrontend {
    pub fn new(geom: &Geometry, replacement: Replacement) -> Self {
        assert!(geom.cfg.llc_ways <= 64, "reservation mask is 64 ways wide");
        MemoryFrontend {
            sets: geom.cfg.llc_sets,
            ways: geom.cfg.llc_ways,
            replacement,
            policy: geom.cfg.page_policy,
            count_writeback_acts: false,
            lines: vec![Line::default(); (geom.cfg.llc_sets * geom.cfg.llc_ways) as usize],
            reserved: vec![0; geom.cfg.llc_sets as usize],
            reserved_count: 0,
            open_rows: vec![None; geom.cfg.bank_count as usize],
            tick: 0,
            seq_hash: 0xcbf29ce484222325,
            stats: FrontendStats::default(),
        }
    }

    fn mix_seq(&mut self, v: u64) {
        self.seq_hash ^= v;
        self.seq_hash = self.seq_hash.wrapping_mul(0x100000001b3);
    }

    fn line(&mut self, set: u64, way: u64) -> &mut Line {
        debug_assert!(set < self.sets && way < self.ways);
        &mut self.lines[(set * self.ways + way) as usize]
    }

    fn is_reserved(&self, set: u64, way: u64) -> bool {
        self.reserved[set as usize] >> way & 1 == 1
    }

    pub fn reserved_mask(&self, set: u64) -> u64 {
        self.reserved[set as usize]
    }

    pub fn reserved_ways_total(&self) -> u64 {
        debug_assert_eq!(
            self.reserved_count,
            self.reserved
                .iter()
                .map(|m| u64::from(m.count_ones()))
                .sum::<u64>()
        );
        self.reserved_count
    }

    /// Highest per-set reservation count, for peak capacity metrics.
    pub fn reserved_ways_peak_set(&self) -> u64 {
        self.reserved
            .iter()
            .map(|m| u64::from(m.count_ones()))
            .max()
            .unwrap_or(0)
    }

    /// Row activation bookkeeping shared by demand fills and writebacks.
    fn touch_row(&mut self, time_ns: u64, row: RowId, geom: &Geometry) -> Option<ActivationEvent> {
        let bank = geom.bank_of_row(row) as usize;
        let activates = match self.policy {
            PagePolicy::CloseRow => true,
            PagePolicy::OpenRow => self.open_rows[bank] != Some(row),
        };
        self.open_rows[bank] = Some(row);
        activates.then_some(ActivationEvent {
            time_ns,
            row,
            cause: ActivationCause::Demand,
        })
    }

    pub fn access(&mut self, a: &MemoryAccess, geom: &Geometry) -> AccessOutcome {
        let m = geom.map_address(a.addr);
        let set = m.llc_set;
        self.tick += 1;
        let tick = self.tick;

        let mut outcome = AccessOutcome {
            hit: false,
            activation: None,
            writeback_activation: None,
            writeback: false,
            bypass: false,
        };

        for way in 0..self.ways {
            if self.is_reserved(set, way) {
                debug_assert!(!self.line(set, way).valid, "reserved way holds demand data");
                continue;
            }
            let line = self.line(set, way);
            if line.valid && line.tag == m.llc_tag {
                line.rrpv = 0;
                line.stamp = tick;
                if a.kind == AccessKind::Write {
                    line.dirty = true;
                }
                self.stats.hits += 1;
                outcome.hit = true;
                self.mix_seq(1);
                return outcome;
            }
        }

        // miss: the request reaches memory
        self.stats.misses += 1;
        outcome.activation = self.touch_row(a.time_ns, m.row_id, geom);

        let Some(victim) = self.pick_victim(set) else {
            self.stats.bypasses += 1;
            outcome.bypass = true;
            self.mix_seq(2 | 4);
            return outcome;
        };

        let set_bits = geom.layout.set_bits;
        let off_bits = geom.layout.line_offset_bits;
        let old = *self.line(set, victim);
        if old.valid && old.dirty {
            self.stats.writebacks += 1;
            outcome.writeback = true;
            if self.count_writeback_acts {
                let victim_addr = ((old.tag << set_bits) | set) << off_bits;
                let victim_row = geom.map_address(victim_addr).row_id;
                outcome.writeback_activation = self.touch_row(a.time_ns, victim_row, geom);
            }
        }
        *self.line(set, victim) = Line {
            valid: true,
            dirty: a.kind == AccessKind::Write,
            tag: m.llc_tag,
            rrpv: 2,
            stamp: tick,
        };
        self.mix_seq(2 | if outcome.writeback { 8 } else { 0 });
        outcome
    }

    /// Victim way among non-reserved ways: lowest invalid way first, then
    /// the replacement policy. None when every way is reserved.
    fn pick_victim(&mut self, set: u64) -> Option<u64> {
        let mask = self.reserved[set as usize];
        let candidates: Vec<u64> = (0..self.ways).filter(|w| mask >> w & 1 == 0).collect();
        if candidates.is_empty() {
            return None;
        }
        if let Some(&w) = candidates
            .iter()
            .find(|&&w| !self.lines[(set * self.ways + w) as usize].valid)
        {
            return Some(w);
        }
        match self.replacement {
            Replacement::Lru => candidates
                .iter()
                .copied()
                .min_by_key(|&w| self.lines[(set * self.ways + w) as usize].stamp),
            Replacement::Srrip => loop {
                if let Some(&w) = candidates
                    .iter()
                    .find(|&&w| self.lines[(set * self.ways + w) as usize].rrpv >= 3)
                {
                    break Some(w);
                }
                for &w in &candidates {
                    self.lines[(set * self.ways + w) as usize].rrpv += 1;
                }
            },
        }
    }

    /// Take a way away from demand use, force-evicting any occupant.
    /// The dropped line is tracked as a forced eviction (plus a writeback
    /// if dirty); its data is not preserved.
    pub fn reserve_way(&mut self, set: u64, way: u64) -> Result<ReserveOutcome, FrontendError> {
        if way >= self.ways {
            return Err(FrontendError::WayOutOfRange {
                way,
                ways: self.ways,
            });
        }
        if self.is_reserved(set, way) {
            return Err(FrontendError::AlreadyReserved { set, way });
        }
        self.reserved[set as usize] |= 1 << way;
        self.reserved_count += 1;
        let line = self.line(set, way);
        let out = ReserveOutcome {
            forced_eviction: line.valid,
            writeback: line.valid && line.dirty,
        };
        *line = Line::default();
        if out.forced_eviction {
            self.stats.forced_evictions += 1;
        }
        if out.writeback {
            self.stats.writebacks += 1;
        }
        Ok(out)
    }

    /// Drop every reservation. Reserved ways held no demand data, so
    /// nothing is written back.
    pub fn release_all_reservations(&mut self) {
        self.reserved.fill(0);
        self.reserved_count = 0;
    }

    /// Fingerprint of the demand-visible behaviour: the full per-access
    /// hit/miss/bypass/writeback sequence folded together with the final
    /// (valid, dirty, tag) state of every way and the reservation masks.
    /// Two runs interact identically with demand traffic iff this matches.
    pub fn demand_fingerprint(&self) -> u64 {
        let mut h: u64 = self.seq_hash;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x100000001b3);
        };
        for line in &self.lines {
            mix(line.valid as u64 | (line.dirty as u64) << 1);
            mix(if line.valid { line.tag } else { 0 });
        }
        for m in &self.reserved {
            mix(*m);
        }
        h
    }
}
