//! Memory Tracking Table: a per-row counter region in DRAM backing the
//! in-LLC tracking entries when a set overflows.
//!
//! The table is never cleared eagerly. A per-set `active` flag arms on
//! the first eviction of a window, at which point the set's counter
//! block is zeroed once (lazy reset); until then the table contents are
//! stale leftovers and are treated as absent. Every table read or write
//! is itself a DRAM row activation of the table row holding the counter,
//! reported as a metadata event so table rows are tracked like any other
//! row. The region covers every row in memory, including its own rows.

use crate::geometry::{Geometry, RowId, TimeNs};
use crate::trace::{ActivationCause, ActivationEvent};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MttStats {
    pub reads: u64,
    pub writes: u64,
    pub resets: u64,
}

#[derive(Debug, Clone)]
pub struct Mtt {
    counters: Vec<u32>,
    active: Vec<bool>,
    base_row: RowId,
    region_rows: u64,
    counter_bytes: u64,
    rows_per_set: u64,
    row_size_bytes: u64,
    line_bytes: u64,
    /// Charge lazy resets as per-line writes with metadata activations
    /// instead of one free bulk operation.
    pub charge_reset_writes: bool,
    pub stats: MttStats,
}

impl Mtt {
    pub fn new(geom: &Geometry, charge_reset_writes: bool) -> Self {
        let cfg = &geom.cfg;
        let counter_bytes = u64::from(geom.layout.counter_bits.div_ceil(8)).max(1);
        let region_rows = (cfg.row_count * counter_bytes).div_ceil(cfg.row_size_bytes);
        assert!(region_rows <= cfg.row_count, "table larger than memory");
        Mtt {
            counters: vec![0; cfg.row_count as usize],
            active: vec![false; cfg.llc_sets as usize],
            base_row: cfg.row_count - region_rows,
            region_rows,
            counter_bytes,
            rows_per_set: geom.layout.rows_per_set,
            row_size_bytes: cfg.row_size_bytes,
            line_bytes: cfg.line_bytes,
            charge_reset_writes,
            stats: MttStats::default(),
        }
    }

    pub fn base_row(&self) -> RowId {
        self.base_row
    }

    pub fn region_rows(&self) -> u64 {
        self.region_rows
    }

    /// Table storage in bytes at bit-packed counter density.
    pub fn storage_bytes(&self, row_count: u64, counter_bits: u32) -> u64 {
        (row_count * u64::from(counter_bits)).div_ceil(8)
    }

    /// DRAM row holding a row's counter; counters are packed densely at
    /// byte granularity.
    pub fn mtt_row_of(&self, row: RowId) -> RowId {
        self.base_row + (row * self.counter_bytes) / self.row_size_bytes
    }

    pub fn is_active(&self, set: u64) -> bool {
        self.active[set as usize]
    }

    /// Raw counter visibility for exactness checks; callers gate on
    /// `is_active` of the row's set.
    pub fn stored(&self, row: RowId) -> u64 {
        self.counters[row as usize] as u64
    }

    fn push(&self, events: &mut Vec<ActivationEvent>, time_ns: TimeNs, row: RowId) {
        events.push(ActivationEvent {
            time_ns,
            row: self.mtt_row_of(row),
            cause: ActivationCause::Metadata,
        });
    }

    /// Install count for a miss that still has a free slot. Before any
    /// eviction in the set this is a first touch and installs 1 with no
    /// table traffic; afterwards the table must be consulted because the
    /// row may have been evicted earlier in the window.
    pub fn on_miss_with_space(
        &mut self,
        set: u64,
        row: RowId,
        time_ns: TimeNs,
        events: &mut Vec<ActivationEvent>,
    ) -> u64 {
        if !self.active[set as usize] {
            return 1;
        }
        self.stats.reads += 1;
        self.push(events, time_ns, row);
        self.stored(row) + 1
    }

    /// Spill one count out of the LLC into the table. Arms the set's
    /// lazy reset if this is the first eviction of the window.
    pub fn spill(
        &mut self,
        set: u64,
        victim_row: RowId,
        victim_count: u64,
        time_ns: TimeNs,
        events: &mut Vec<ActivationEvent>,
    ) {
        if !self.active[set as usize] {
            self.active[set as usize] = true;
            self.lazy_reset(set, time_ns, events);
        }
        self.write(victim_row, victim_count, time_ns, events);
    }

    /// Spill the victim's count and fetch the incoming row's.
    pub fn evict_and_fetch(
        &mut self,
        set: u64,
        victim_row: RowId,
        victim_count: u64,
        incoming_row: RowId,
        time_ns: TimeNs,
        events: &mut Vec<ActivationEvent>,
    ) -> u64 {
        self.spill(set, victim_row, victim_count, time_ns, events);
        self.stats.reads += 1;
        self.push(events, time_ns, incoming_row);
        self.stored(incoming_row) + 1
    }

    pub fn write(
        &mut self,
        row: RowId,
        count: u64,
        time_ns: TimeNs,
        events: &mut Vec<ActivationEvent>,
    ) {
        self.counters[row as usize] = count as u32;
        self.stats.writes += 1;
        self.push(events, time_ns, row);
    }

    /// Zero the counter block of one set. Free as a bulk operation by
    /// default; optionally charged as line-granular writes that activate
    /// the table rows they touch.
    pub fn lazy_reset(&mut self, set: u64, time_ns: TimeNs, events: &mut Vec<ActivationEvent>) {
        let first = set * self.rows_per_set;
        let end = first + self.rows_per_set;
        self.counters[first as usize..end as usize].fill(0);
        self.stats.resets += 1;
        if self.charge_reset_writes {
            let byte_first = first * self.counter_bytes;
            let byte_last = end * self.counter_bytes - 1;
            self.stats.writes += byte_last / self.line_bytes - byte_first / self.line_bytes + 1;
            let row_first = self.base_row + byte_first / self.row_size_bytes;
            let row_last = self.base_row + byte_last / self.row_size_bytes;
            for row in row_first..=row_last {
                events.push(ActivationEvent {
                    time_ns,
                    row,
                    cause: ActivationCause::Metadata,
                });
            }
        }
    }

    /// Window boundary: re-arm lazy resets everywhere. Counters keep
    /// their stale values until a set's first eviction zeroes them.
    pub fn window_reset(&mut self) {
        self.active.fill(false);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Geometry, GeometryConfig};
    use crate::tracker::{TrackerConfig, Variant};

    fn desk() -> Geometry {
        let cfg = GeometryConfig {
            row_count: 32 << 10,
            row_size_bytes: 8192,
            bank_count: 8,
            line_bytes: 64,
            llc_sets: 64,
            llc_ways: 16,
            ..GeometryConfig::default()
        };
        let t = TrackerConfig {
            counter_bits: Some(11),
            ..TrackerConfig::new(Variant::StartM, 64)
        };
        Geometry::new(cfg, &t).unwrap()
    }

    #[test]
    fn region_mapping_frozen() {
        let geom = desk();
        let mtt = Mtt::new(&geom, false);
        // 32768 rows * 2 bytes / 8192-byte rows = 8 table rows at the top
        assert_eq!(mtt.region_rows(), 8);
        assert_eq!(mtt.base_row(), 32760);
        assert_eq!(mtt.mtt_row_of(0), 32760);
        assert_eq!(
            mtt.mtt_row_of(geom.cfg.row_count - 1),
            mtt.base_row() + mtt.region_rows() - 1
        );
        // the table's own counters land inside the region (self coverage)
        assert!(mtt.mtt_row_of(mtt.base_row()) < geom.cfg.row_count);
        // bit-packed storage: 32768 rows * 11 bits = 45056 bytes
        assert_eq!(mtt.storage_bytes(geom.cfg.row_count, 11), 45_056);
    }

    #[test]
    fn cold_miss_avoidance_and_roundtrip() {
        let geom = desk();
        let mut mtt = Mtt::new(&geom, false);
        let mut ev = Vec::new();

        // no eviction yet: first touch installs 1 without traffic
        assert_eq!(mtt.on_miss_with_space(3, 100, 0, &mut ev), 1);
        assert_eq!(mtt.stats, MttStats::default());
        assert!(ev.is_empty());

        // first eviction arms the set, resets its block, spills 7
        let n = mtt.evict_and_fetch(0, 5, 7, 6, 45, &mut ev);
        assert_eq!(n, 1, "incoming row was never spilled");
        assert_eq!(
            mtt.stats,
            MttStats {
                reads: 1,
                writes: 1,
                resets: 1
            }
        );
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| e.cause == ActivationCause::Metadata));

        // the spilled row returns through the free-slot path
        ev.clear();
        assert_eq!(mtt.on_miss_with_space(0, 5, 90, &mut ev), 8);
        assert_eq!(ev.len(), 1);

        // and through the evict path
        ev.clear();
        assert_eq!(mtt.evict_and_fetch(0, 9, 3, 5, 135, &mut ev), 8);
        assert_eq!(mtt.stats.resets, 1, "reset ran once per window");
    }

    #[test]
    fn stale_counters_do_not_leak_across_windows() {
        let geom = desk();
        let mut mtt = Mtt::new(&geom, false);
        let mut ev = Vec::new();
        mtt.evict_and_fetch(0, 5, 31, 6, 0, &mut ev);
        assert_eq!(mtt.stored(5), 31);

        mtt.window_reset();
        assert!(!mtt.is_active(0));
        // untouched table keeps the stale value, but a first touch in the
        // new window ignores it
        assert_eq!(mtt.on_miss_with_space(0, 5, 64_000_001, &mut ev), 1);
        // the first eviction zeroes the block before any fetch
        ev.clear();
        assert_eq!(mtt.evict_and_fetch(0, 9, 2, 5, 64_000_002, &mut ev), 1);
        assert_eq!(mtt.stored(5), 0);
    }

    #[test]
    fn charged_reset_emits_line_writes() {
        let geom = desk();
        let mut mtt = Mtt::new(&geom, true);
        let mut ev = Vec::new();
        mtt.evict_and_fetch(0, 5, 7, 6, 0, &mut ev);
        // set 0 block: 512 rows * 2 bytes = 1024 bytes = 16 lines, one row
        assert_eq!(mtt.stats.writes, 16 + 1);
        let reset_events = ev.iter().filter(|e| e.row == mtt.mtt_row_of(0)).count();
        assert!(reset_events >= 1);
    }
}
