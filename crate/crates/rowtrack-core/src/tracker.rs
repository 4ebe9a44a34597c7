//! Activation trackers that keep per-row counters inside reserved LLC
//! ways, plus the ideal flat-table reference tracker.
//!
//! Every variant is exact: a row's stored count always equals its true
//! activation count since the window start or its last mitigation, so a
//! mitigation fires on exactly the activation that reaches the effective
//! threshold. Variants differ only in where counters live and when ways
//! are reserved:
//!
//! * permanent: eight ways of every set hold untagged one-byte counters
//! * dynamic: sets escalate 0 -> 1 -> 2 -> 8 ways on demand; the 8-way
//!   terminal state switches to the untagged layout
//! * memory-backed: stays tagged at every state and spills overflow to
//!   the in-memory table
//! * memory-backed lite: capped at one way per set, leaning on the table
//! * ideal: a flat per-row counter array, no LLC footprint

use serde::{Deserialize, Serialize};

use crate::codec::{LineCodec, TrackLine, TrackingEntry};
use crate::frontend::MemoryFrontend;
use crate::geometry::{Geometry, RowId};
use crate::mtt::{Mtt, MttStats};
use crate::sac::{SacState, SacTable};
use crate::trace::ActivationEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    StartS,
    StartD,
    StartM,
    StartLite,
    Ideal,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::StartS,
        Variant::StartD,
        Variant::StartM,
        Variant::StartLite,
        Variant::Ideal,
    ];

    /// Variants whose 8-way state stores untagged one-byte counters.
    pub fn uses_untagged_terminal(self) -> bool {
        matches!(self, Variant::StartS | Variant::StartD)
    }

    pub fn uses_mtt(self) -> bool {
        matches!(self, Variant::StartM | Variant::StartLite)
    }

    pub fn is_ideal(self) -> bool {
        self == Variant::Ideal
    }

    pub fn max_sac_state(self) -> SacState {
        match self {
            Variant::StartLite => SacState::S1,
            _ => SacState::S3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::StartS => "start-s",
            Variant::StartD => "start-d",
            Variant::StartM => "start-m",
            Variant::StartLite => "start-lite",
            Variant::Ideal => "ideal",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "start-s" => Ok(Variant::StartS),
            "start-d" => Ok(Variant::StartD),
            "start-m" => Ok(Variant::StartM),
            "start-lite" => Ok(Variant::StartLite),
            "ideal" => Ok(Variant::Ideal),
            other => Err(format!(
                "unknown variant {other:?}; expected start-s, start-d, start-m, start-lite or ideal"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub variant: Variant,
    /// Disturbance threshold the device tolerates.
    pub t_rh: u64,
    /// Stored counter width; defaults to the narrowest width that can
    /// count to the effective threshold.
    pub counter_bits: Option<u32>,
    pub blast_radius: u32,
    /// Invalidate an entry on mitigation instead of keeping it resident
    /// with a zero counter.
    pub free_on_mitigate: bool,
    /// Charge lazy table resets as per-line writes.
    pub charge_reset_writes: bool,
}

impl TrackerConfig {
    pub fn new(variant: Variant, t_rh: u64) -> Self {
        TrackerConfig {
            variant,
            t_rh,
            counter_bits: None,
            blast_radius: 1,
            free_on_mitigate: false,
            charge_reset_writes: false,
        }
    }

    /// Tracking windows are not aligned to attack epochs, so acting at
    /// half the threshold bounds any straddled sum below t_rh.
    pub fn effective_threshold(&self) -> u64 {
        self.t_rh / 2
    }

    pub fn resolved_counter_bits(&self) -> u32 {
        self.counter_bits.unwrap_or_else(|| {
            let eff = self.effective_threshold().max(2);
            64 - (eff - 1).leading_zeros()
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrackerOutcome {
    /// Row whose counter reached the effective threshold on this event.
    pub mitigated: Option<RowId>,
    /// Table traffic generated while handling this event.
    pub metadata: Vec<ActivationEvent>,
    pub escalations: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TrackerStats {
    pub escalations: u64,
    pub installs: u64,
    pub evictions: u64,
}

pub struct StartTracker {
    cfg: TrackerConfig,
    codec: LineCodec,
    sac: SacTable,
    lines: Vec<TrackLine>,
    mtt: Option<Mtt>,
    eff: u64,
    pub stats: TrackerStats,
}

impl StartTracker {
    pub fn new(cfg: TrackerConfig, geom: &Geometry, frontend: &mut MemoryFrontend) -> Self {
        assert!(!cfg.variant.is_ideal());
        let codec = LineCodec::from_layout(&geom.layout);
        let sets = geom.cfg.llc_sets;
        let mut tracker = StartTracker {
            sac: SacTable::new(sets, cfg.variant.max_sac_state()),
            lines: (0..sets * 8)
                .map(|_| codec.new_line(geom.cfg.line_bytes as usize))
                .collect(),
            mtt: cfg
                .variant
                .uses_mtt()
                .then(|| Mtt::new(geom, cfg.charge_reset_writes)),
            eff: cfg.effective_threshold(),
            codec,
            cfg,
            stats: TrackerStats::default(),
        };
        if tracker.cfg.variant == Variant::StartS {
            // permanent reservation: the capacity loss is structural
            tracker.sac.fill(SacState::S3);
            for set in 0..sets {
                for way in 0..8 {
                    frontend
                        .reserve_way(set, way)
                        .expect("fresh frontend reservation");
                }
            }
        }
        tracker
    }

    pub fn sac(&self) -> &SacTable {
        &self.sac
    }

    pub fn mtt(&self) -> Option<&Mtt> {
        self.mtt.as_ref()
    }

    fn line_idx(set: u64, way: u64) -> usize {
        (set * 8 + way) as usize
    }

    fn untagged_now(&self, set: u64) -> bool {
        self.cfg.variant.uses_untagged_terminal() && self.sac.get(set) == SacState::S3
    }

    /// Way holding a tag at the current allocation width: single way,
    /// parity split, or the top tag bits across eight ways.
    fn hashed_way(&self, geom: &Geometry, tag: u64, state: SacState) -> u64 {
        match state {
            SacState::S0 => unreachable!("no allocation at S0"),
            SacState::S1 => 0,
            SacState::S2 => tag & 1,
            SacState::S3 => tag >> geom.layout.untagged_byte_bits,
        }
    }

    /// Store a freshly incremented count, emitting a mitigation when it
    /// reaches the effective threshold. The mitigated entry stays
    /// resident with a zero counter unless configured to free; freeing
    /// under a memory-backed variant must also zero the table copy, or a
    /// later fetch would resurrect the pre-mitigation count.
    #[allow(clippy::too_many_arguments)]
    fn store_count(
        &mut self,
        set: u64,
        way: u64,
        slot: usize,
        tag: u64,
        row: RowId,
        count: u64,
        time_ns: u64,
        out: &mut TrackerOutcome,
    ) {
        let line = &mut self.lines[Self::line_idx(set, way)];
        if count >= self.eff {
            out.mitigated = Some(row);
            if self.cfg.free_on_mitigate {
                self.codec.invalidate(line, slot);
                if let Some(mtt) = self.mtt.as_mut() {
                    if mtt.is_active(set) {
                        mtt.write(row, 0, time_ns, &mut out.metadata);
                    }
                }
            } else {
                self.codec
                    .write(line, slot, TrackingEntry { tag, counter: 0 });
            }
        } else {
            self.codec.write(
                line,
                slot,
                TrackingEntry {
                    tag,
                    counter: count,
                },
            );
        }
    }

    fn escalate(
        &mut self,
        set: u64,
        geom: &Geometry,
        frontend: &mut MemoryFrontend,
        time_ns: u64,
        out: &mut TrackerOutcome,
    ) {
        let esc = self.sac.escalate(set).expect("caller checked headroom");
        self.stats.escalations += 1;
        out.escalations += 1;
        for way in esc.ways_added.clone() {
            frontend
                .reserve_way(set, way)
                .expect("escalation order never re-reserves");
            self.lines[Self::line_idx(set, way)].clear();
        }
        match esc.state {
            SacState::S0 | SacState::S1 => {}
            SacState::S2 => {
                // parity split: even tags keep way 0, odd tags move to way 1
                let entries: Vec<TrackingEntry> = self
                    .codec
                    .iter_valid(&self.lines[Self::line_idx(set, 0)])
                    .map(|(_, e)| e)
                    .collect();
                self.lines[Self::line_idx(set, 0)].clear();
                for e in entries {
                    let way = e.tag & 1;
                    let line = &mut self.lines[Self::line_idx(set, way)];
                    let slot = self
                        .codec
                        .first_free(line)
                        .expect("split halves a full line");
                    self.codec.write(line, slot, e);
                }
            }
            SacState::S3 => {
                let mut entries: Vec<TrackingEntry> = Vec::new();
                for way in 0..2 {
                    entries.extend(
                        self.codec
                            .iter_valid(&self.lines[Self::line_idx(set, way)])
                            .map(|(_, e)| e),
                    );
                    self.lines[Self::line_idx(set, way)].clear();
                }
                if self.cfg.variant.uses_untagged_terminal() {
                    // reorganize to one byte per row at its designated spot
                    for e in entries {
                        let way = e.tag >> geom.layout.untagged_byte_bits;
                        let byte =
                            (e.tag & ((1u64 << geom.layout.untagged_byte_bits) - 1)) as usize;
                        self.lines[Self::line_idx(set, way)].bytes[byte] = e.counter as u8;
                    }
                } else {
                    // stay tagged, rehash across eight ways; both parity
                    // classes can share top bits, so a target way may
                    // overflow and spill its coldest entries to the table
                    for e in entries {
                        let way = e.tag >> geom.layout.untagged_byte_bits;
                        let line = &mut self.lines[Self::line_idx(set, way)];
                        if let Some(slot) = self.codec.first_free(line) {
                            self.codec.write(line, slot, e);
                            continue;
                        }
                        let (mslot, resident) =
                            self.codec.min_counter_slot(line).expect("full line");
                        let spilled = if resident.counter <= e.counter {
                            self.codec.write(line, mslot, e);
                            resident
                        } else {
                            e
                        };
                        self.stats.evictions += 1;
                        let victim_row = geom.row_of(set, spilled.tag);
                        self.mtt
                            .as_mut()
                            .expect("tagged 8-way terminal implies table backing")
                            .spill(set, victim_row, spilled.counter, time_ns, &mut out.metadata);
                    }
                }
            }
        }
    }

    pub fn on_activation(
        &mut self,
        ev: &ActivationEvent,
        geom: &Geometry,
        frontend: &mut MemoryFrontend,
    ) -> TrackerOutcome {
        let mut out = TrackerOutcome::default();
        let rm = geom.map_row(ev.row);
        let set = rm.set_index;

        loop {
            let state = self.sac.get(set);
            if state == SacState::S0 {
                self.escalate(set, geom, frontend, ev.time_ns, &mut out);
                continue;
            }

            if self.untagged_now(set) {
                let line = &mut self.lines[Self::line_idx(set, rm.untagged_way)];
                let count = u64::from(line.bytes[rm.untagged_byte as usize]) + 1;
                if count >= self.eff {
                    line.bytes[rm.untagged_byte as usize] = 0;
                    out.mitigated = Some(ev.row);
                } else {
                    line.bytes[rm.untagged_byte as usize] = count as u8;
                }
                return out;
            }

            let way = self.hashed_way(geom, rm.row_tag, state);
            let line = &self.lines[Self::line_idx(set, way)];

            if let Some(slot) = self.codec.find_tag(line, rm.row_tag) {
                let count = self.codec.read(line, slot).expect("slot is valid").counter + 1;
                self.store_count(
                    set, way, slot, rm.row_tag, ev.row, count, ev.time_ns, &mut out,
                );
                return out;
            }

            if let Some(slot) = self.codec.first_free(line) {
                self.stats.installs += 1;
                let count = match self.mtt.as_mut() {
                    Some(mtt) => mtt.on_miss_with_space(set, ev.row, ev.time_ns, &mut out.metadata),
                    None => 1,
                };
                self.store_count(
                    set, way, slot, rm.row_tag, ev.row, count, ev.time_ns, &mut out,
                );
                return out;
            }

            // hashed way is full: escalate while the set has headroom,
            // else evict the coldest entry through the table
            if state < self.sac.max_state() {
                self.escalate(set, geom, frontend, ev.time_ns, &mut out);
                continue;
            }
            let (vslot, victim) = self
                .codec
                .min_counter_slot(&self.lines[Self::line_idx(set, way)])
                .expect("full line has entries");
            self.stats.evictions += 1;
            let victim_row = geom.row_of(set, victim.tag);
            let count = self
                .mtt
                .as_mut()
                .expect("only table-backed variants evict")
                .evict_and_fetch(
                    set,
                    victim_row,
                    victim.counter,
                    ev.row,
                    ev.time_ns,
                    &mut out.metadata,
                );
            self.store_count(
                set, way, vslot, rm.row_tag, ev.row, count, ev.time_ns, &mut out,
            );
            return out;
        }
    }

    pub fn window_reset(&mut self, frontend: &mut MemoryFrontend) {
        for line in &mut self.lines {
            line.clear();
        }
        if self.cfg.variant == Variant::StartS {
            // reservations are permanent; only the counters restart
        } else {
            self.sac.reset_all();
            frontend.release_all_reservations();
        }
        if let Some(mtt) = self.mtt.as_mut() {
            mtt.window_reset();
        }
    }

    /// Stored count of a row as the hardware would resolve it: resident
    /// entry first, then the armed table, else zero.
    pub fn stored_count(&self, row: RowId, geom: &Geometry) -> u64 {
        let rm = geom.map_row(row);
        let set = rm.set_index;
        let state = self.sac.get(set);
        if state == SacState::S0 {
            return 0;
        }
        if self.untagged_now(set) {
            return u64::from(
                self.lines[Self::line_idx(set, rm.untagged_way)].bytes[rm.untagged_byte as usize],
            );
        }
        let way = self.hashed_way(geom, rm.row_tag, state);
        let line = &self.lines[Self::line_idx(set, way)];
        if let Some(slot) = self.codec.find_tag(line, rm.row_tag) {
            return self.codec.read(line, slot).expect("valid slot").counter;
        }
        match self.mtt.as_ref() {
            Some(mtt) if mtt.is_active(set) => mtt.stored(row),
            _ => 0,
        }
    }
}

pub struct IdealTracker {
    counters: Vec<u32>,
    eff: u64,
}

impl IdealTracker {
    pub fn new(cfg: &TrackerConfig, geom: &Geometry) -> Self {
        IdealTracker {
            counters: vec![0; geom.cfg.row_count as usize],
            eff: cfg.effective_threshold(),
        }
    }

    pub fn on_activation(&mut self, ev: &ActivationEvent) -> TrackerOutcome {
        let mut out = TrackerOutcome::default();
        let c = &mut self.counters[ev.row as usize];
        *c += 1;
        if u64::from(*c) >= self.eff {
            *c = 0;
            out.mitigated = Some(ev.row);
        }
        out
    }

    pub fn window_reset(&mut self) {
        self.counters.fill(0);
    }

    pub fn stored_count(&self, row: RowId) -> u64 {
        u64::from(self.counters[row as usize])
    }
}

pub enum Tracker {
    Start(Box<StartTracker>),
    Ideal(IdealTracker),
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, geom: &Geometry, frontend: &mut MemoryFrontend) -> Self {
        if cfg.variant.is_ideal() {
            Tracker::Ideal(IdealTracker::new(&cfg, geom))
        } else {
            Tracker::Start(Box::new(StartTracker::new(cfg, geom, frontend)))
        }
    }

    pub fn on_activation(
        &mut self,
        ev: &ActivationEvent,
        geom: &Geometry,
        frontend: &mut MemoryFrontend,
    ) -> TrackerOutcome {
        match self {
            Tracker::Start(t) => t.on_activation(ev, geom, frontend),
            Tracker::Ideal(t) => t.on_activation(ev),
        }
    }

    pub fn window_reset(&mut self, frontend: &mut MemoryFrontend) {
        match self {
            Tracker::Start(t) => t.window_reset(frontend),
            Tracker::Ideal(t) => t.window_reset(),
        }
    }

    pub fn stored_count(&self, row: RowId, geom: &Geometry) -> u64 {
        match self {
            Tracker::Start(t) => t.stored_count(row, geom),
            Tracker::Ideal(t) => t.stored_count(row),
        }
    }

    pub fn sac_histogram(&self, llc_sets: u64) -> [u64; 4] {
        match self {
            Tracker::Start(t) => t.sac().histogram(),
            Tracker::Ideal(_) => [llc_sets, 0, 0, 0],
        }
    }

    pub fn reserved_ways_total(&self) -> u64 {
        match self {
            Tracker::Start(t) => t.sac().reserved_ways_total(),
            Tracker::Ideal(_) => 0,
        }
    }

    pub fn mtt_stats(&self) -> MttStats {
        match self {
            Tracker::Start(t) => t.mtt().map(|m| m.stats).unwrap_or_default(),
            Tracker::Ideal(_) => MttStats::default(),
        }
    }

    pub fn tracker_stats(&self) -> TrackerStats {
        match self {
            Tracker::Start(t) => t.stats,
            Tracker::Ideal(_) => TrackerStats::default(),
        }
    }
}
