//! Victim-refresh mitigation with configurable blast radius.
//!
//! A mitigation refreshes the aggressor's neighbouring rows on each
//! side. Each victim refresh is itself a row activation and re-enters
//! the tracker, so refresh-driven hammering (Half-Double) is counted
//! like demand traffic; the resulting feedback cascade is drained to
//! quiescence before the next trace event, under a hard step cap.
//! Victim refreshes are DRAM-internal: they never touch LLC state.

use serde::Serialize;
use thiserror::Error;

use crate::frontend::MemoryFrontend;
use crate::geometry::{Geometry, RowId, TimeNs};
use crate::trace::{ActivationCause, ActivationEvent};
use crate::tracker::{Tracker, TrackerOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MitigationRecord {
    pub time_ns: TimeNs,
    /// Index of the trace event whose processing emitted this
    /// mitigation; every cascade step shares the trigger's index.
    pub event_index: u64,
    pub aggressor_row: RowId,
    pub blast_radius: u32,
    pub victim_rows: Vec<RowId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MitigationError {
    #[error(
        "mitigation cascade for event {event_index} at {time_ns} ns exceeded {cap} steps \
         (effective threshold too small for the blast radius)"
    )]
    CascadeOverflow {
        event_index: u64,
        time_ns: TimeNs,
        cap: u64,
    },
}

/// Per-cascade accounting, merged into run totals by the caller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CascadeOutcome {
    pub mitigations: u64,
    pub victim_refreshes: u64,
    pub metadata_activations: u64,
    pub escalations: u64,
}

/// Rows refreshed when `aggressor` is mitigated: up to `radius`
/// neighbours on each side, truncated at the aggressor's bank edges.
pub fn victim_rows(geom: &Geometry, aggressor: RowId, radius: u32) -> Vec<RowId> {
    let (lo, hi) = geom.bank_row_range(aggressor);
    let first = aggressor.saturating_sub(u64::from(radius)).max(lo);
    let last = (aggressor + u64::from(radius)).min(hi);
    (first..=last).filter(|&r| r != aggressor).collect()
}

pub struct Mitigator {
    pub blast_radius: u32,
    /// Hard bound on cascade steps per trace event; exceeding it means
    /// the configuration cannot quiesce (e.g. effective threshold 1).
    pub max_cascade_steps: u64,
    pub records: Vec<MitigationRecord>,
}

impl Mitigator {
    pub fn new(blast_radius: u32) -> Self {
        assert!((1..=4).contains(&blast_radius), "blast radius is 1..=4");
        Mitigator {
            blast_radius,
            max_cascade_steps: 100_000,
            records: Vec::new(),
        }
    }

    /// Record one mitigation and emit its victim-refresh activations.
    pub fn execute(
        &mut self,
        geom: &Geometry,
        aggressor: RowId,
        time_ns: TimeNs,
        event_index: u64,
    ) -> Vec<ActivationEvent> {
        let victims = victim_rows(geom, aggressor, self.blast_radius);
        self.records.push(MitigationRecord {
            time_ns,
            event_index,
            aggressor_row: aggressor,
            blast_radius: self.blast_radius,
            victim_rows: victims.clone(),
        });
        victims
            .into_iter()
            .map(|row| ActivationEvent {
                time_ns,
                row,
                cause: ActivationCause::VictimRefresh,
            })
            .collect()
    }

    /// Feed a tracker outcome's side effects (victim refreshes and
    /// table traffic) back through the tracker until nothing new is
    /// produced. Runs atomically at the trace-event boundary: every
    /// cascade activation carries the trigger's time and index. The
    /// observer sees each cascade activation with the mitigation it
    /// produced, in processing order.
    #[allow(clippy::too_many_arguments)]
    pub fn drain_cascade(
        &mut self,
        seed: TrackerOutcome,
        time_ns: TimeNs,
        event_index: u64,
        tracker: &mut Tracker,
        geom: &Geometry,
        frontend: &mut MemoryFrontend,
        mut observe: impl FnMut(&ActivationEvent, Option<RowId>),
    ) -> Result<CascadeOutcome, MitigationError> {
        let mut out = CascadeOutcome::default();
        let mut queue = std::collections::VecDeque::new();
        let absorb = |o: TrackerOutcome,
                      out: &mut CascadeOutcome,
                      queue: &mut std::collections::VecDeque<ActivationEvent>,
                      m: &mut Self| {
            out.escalations += u64::from(o.escalations);
            queue.extend(o.metadata);
            if let Some(row) = o.mitigated {
                out.mitigations += 1;
                queue.extend(m.execute(geom, row, time_ns, event_index));
            }
        };
        absorb(seed, &mut out, &mut queue, self);

        let mut steps = 0u64;
        while let Some(ev) = queue.pop_front() {
            steps += 1;
            if steps > self.max_cascade_steps {
                return Err(MitigationError::CascadeOverflow {
                    event_index,
                    time_ns,
                    cap: self.max_cascade_steps,
                });
            }
            match ev.cause {
                ActivationCause::VictimRefresh => out.victim_refreshes += 1,
                ActivationCause::Metadata => out.metadata_activations += 1,
                ActivationCause::Demand => unreachable!("cascades carry no demand events"),
            }
            let o = tracker.on_activation(&ev, geom, frontend);
            observe(&ev, o.mitigated);
            absorb(o, &mut out, &mut queue, self);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Replacement;
    use crate::geometry::GeometryConfig;
    use crate::tracker::{TrackerConfig, Variant};

    fn desk(variant: Variant, t_rh: u64) -> (Geometry, MemoryFrontend, Tracker) {
        let cfg = GeometryConfig {
            row_count: 32 << 10,
            row_size_bytes: 8192,
            bank_count: 8,
            line_bytes: 64,
            llc_sets: 64,
            llc_ways: 16,
            ..GeometryConfig::default()
        };
        let tcfg = TrackerConfig::new(variant, t_rh);
        let geom = Geometry::new(cfg, &tcfg).unwrap();
        let mut fe = MemoryFrontend::new(&geom, Replacement::Srrip);
        let tracker = Tracker::new(tcfg, &geom, &mut fe);
        (geom, fe, tracker)
    }

    fn demand(time_ns: TimeNs, row: RowId) -> ActivationEvent {
        ActivationEvent {
            time_ns,
            row,
            cause: ActivationCause::Demand,
        }
    }

    #[test]
    fn victims_flank_the_aggressor() {
        let (geom, _, _) = desk(Variant::Ideal, 256);
        assert_eq!(victim_rows(&geom, 100, 1), vec![99, 101]);
        assert_eq!(victim_rows(&geom, 100, 2), vec![98, 99, 101, 102]);
        assert_eq!(victim_rows(&geom, 100, 4).len(), 8);
    }

    #[test]
    fn victims_truncate_at_bank_edges() {
        let (geom, _, _) = desk(Variant::Ideal, 256);
        // 32K rows over 8 banks: bank 0 holds rows 0..4095
        assert_eq!(victim_rows(&geom, 0, 2), vec![1, 2]);
        assert_eq!(victim_rows(&geom, 4095, 2), vec![4093, 4094]);
        // first row of bank 1 must not reach back into bank 0
        assert_eq!(victim_rows(&geom, 4096, 1), vec![4097]);
    }

    #[test]
    fn empty_seed_is_a_no_op() {
        let (geom, mut fe, mut tracker) = desk(Variant::Ideal, 256);
        let mut m = Mitigator::new(1);
        let out = m
            .drain_cascade(
                TrackerOutcome::default(),
                0,
                0,
                &mut tracker,
                &geom,
                &mut fe,
                |_, _| {},
            )
            .unwrap();
        assert_eq!(out, CascadeOutcome::default());
        assert!(m.records.is_empty());
    }

    #[test]
    fn isolated_mitigation_has_depth_one() {
        let (geom, mut fe, mut tracker) = desk(Variant::Ideal, 256);
        let mut m = Mitigator::new(2);
        let mut seed = TrackerOutcome::default();
        for i in 1..=128 {
            seed = tracker.on_activation(&demand(45 * i, 100), &geom, &mut fe);
        }
        assert_eq!(seed.mitigated, Some(100));
        let out = m
            .drain_cascade(seed, 45 * 128, 127, &mut tracker, &geom, &mut fe, |_, _| {})
            .unwrap();
        assert_eq!(out.mitigations, 1);
        assert_eq!(out.victim_refreshes, 4);
        assert_eq!(m.records.len(), 1);
        assert_eq!(m.records[0].victim_rows, vec![98, 99, 101, 102]);
        assert_eq!(m.records[0].event_index, 127);
        // the victims' counters absorbed the refresh activations
        assert_eq!(tracker.stored_count(99, &geom), 1);
        assert_eq!(tracker.stored_count(101, &geom), 1);
    }

    #[test]
    fn preloaded_victim_cascades_to_depth_two() {
        let (geom, mut fe, mut tracker) = desk(Variant::Ideal, 256);
        let mut m = Mitigator::new(1);
        // park the neighbour one activation short of the threshold
        for i in 1..=127 {
            let out = tracker.on_activation(&demand(45 * i, 101), &geom, &mut fe);
            assert_eq!(out.mitigated, None);
        }
        let mut seed = TrackerOutcome::default();
        for i in 200..200 + 128 {
            seed = tracker.on_activation(&demand(45 * i, 100), &geom, &mut fe);
        }
        let out = m
            .drain_cascade(seed, 45 * 327, 327, &mut tracker, &geom, &mut fe, |_, _| {})
            .unwrap();
        assert_eq!(out.mitigations, 2, "victim refresh tipped the neighbour");
        assert_eq!(out.victim_refreshes, 4);
        let aggressors: Vec<RowId> = m.records.iter().map(|r| r.aggressor_row).collect();
        assert_eq!(aggressors, vec![100, 101]);
        assert_eq!(tracker.stored_count(101, &geom), 0);
    }

    /// With an effective threshold of 1 every victim refresh instantly
    /// re-mitigates, so neighbours ping-pong forever; the step cap must
    /// turn that into a diagnostic instead of a hang.
    #[test]
    fn unquiesceable_cascade_hits_the_cap() {
        let (geom, mut fe, mut tracker) = desk(Variant::Ideal, 2);
        let mut m = Mitigator::new(1);
        m.max_cascade_steps = 1_000;
        let seed = tracker.on_activation(&demand(45, 100), &geom, &mut fe);
        assert_eq!(seed.mitigated, Some(100), "threshold 1 mitigates instantly");
        let err = m
            .drain_cascade(seed, 45, 0, &mut tracker, &geom, &mut fe, |_, _| {})
            .unwrap_err();
        assert_eq!(
            err,
            MitigationError::CascadeOverflow {
                event_index: 0,
                time_ns: 45,
                cap: 1_000
            }
        );
    }

    /// Half-Double at unit scale: row 99 is only ever touched by victim
    /// refreshes, yet its accumulated count leads to its own mitigation.
    #[test]
    fn refresh_only_hammering_is_tracked() {
        let (geom, mut fe, mut tracker) = desk(Variant::StartS, 16);
        let mut m = Mitigator::new(1);
        let mut time = 0;
        let mut idx = 0;
        for _ in 0..8 {
            // hammer row 100 to its threshold (effective threshold 8)
            let mut seed = TrackerOutcome::default();
            for _ in 0..8 {
                time += 45;
                idx += 1;
                seed = tracker.on_activation(&demand(time, 100), &geom, &mut fe);
            }
            m.drain_cascade(seed, time, idx, &mut tracker, &geom, &mut fe, |_, _| {})
                .unwrap();
        }
        assert!(
            m.records.iter().any(|r| r.aggressor_row == 99),
            "purely refresh-driven row must be mitigated"
        );
        let total_victims: usize = m.records.iter().map(|r| r.victim_rows.len()).sum();
        assert!(total_victims >= 16);
    }
}
