//! Trace-driven run engine: feeds a trace through the demand frontend,
//! the tracker, and the mitigation cascade, closing refresh windows on
//! time boundaries and assembling a [`RunReport`].
//!
//! The engine is also where the security oracle hooks in. In `Inline`
//! mode every activation is mirrored into a ground-truth counter table
//! as it happens and stored counters are periodically compared against
//! it; in `Post` mode the paired activation/mitigation stream is kept
//! and replayed afterwards.

use std::collections::HashSet;

use crate::frontend::{MemoryFrontend, Replacement};
use crate::geometry::{Geometry, RowId, TimeNs};
use crate::metrics::{
    ActivationCounts, CapacityIntegral, LlcReport, OracleSummary, RunReport, WindowReport,
};
use crate::mitigation::{MitigationError, MitigationRecord, Mitigator};
use crate::oracle::{self, OracleError, TruthState, Violation};
use crate::trace::{ActivationCause, ActivationEvent, Trace};
use crate::tracker::{Tracker, TrackerConfig, Variant};

/// When and how the ground-truth oracle runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    /// Mirror every activation into the truth table as it is processed
    /// and sweep stored counters against it on an interval.
    #[default]
    Inline,
    /// Record the activation/mitigation stream and replay it afterwards.
    Post,
    Off,
}

impl OracleMode {
    pub fn name(&self) -> &'static str {
        match self {
            OracleMode::Inline => "inline",
            OracleMode::Post => "post",
            OracleMode::Off => "off",
        }
    }
}

impl std::str::FromStr for OracleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inline" => Ok(OracleMode::Inline),
            "post" => Ok(OracleMode::Post),
            "off" => Ok(OracleMode::Off),
            other => Err(format!("unknown oracle mode: {other}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub replacement: Replacement,
    pub oracle: OracleMode,
    /// Count dirty-writeback row activations against the tracker.
    pub count_writeback_acts: bool,
    /// Trace events between full stored-vs-truth sweeps in inline mode;
    /// 0 sweeps only at the end of the run.
    pub exactness_sweep_interval: u64,
    /// Hard bound on mitigation-cascade steps per trace event.
    pub max_cascade_steps: u64,
    /// Keep the paired activation/mitigation stream in the output even
    /// when the oracle does not need it.
    pub keep_oracle_stream: bool,
    /// Echoed into the report; the engine does not interpret them.
    pub pattern: Option<String>,
    pub seed: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            replacement: Replacement::Srrip,
            oracle: OracleMode::Inline,
            count_writeback_acts: false,
            exactness_sweep_interval: 4096,
            max_cascade_steps: 100_000,
            keep_oracle_stream: false,
            pattern: None,
            seed: None,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub violations: Vec<Violation>,
    pub mitigations: Vec<MitigationRecord>,
    /// Paired (activation, co-timed mitigation) stream, present when the
    /// oracle ran in `Post` mode or `keep_oracle_stream` was set.
    pub oracle_stream: Option<Vec<(ActivationEvent, Option<RowId>)>>,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Mitigation(#[from] MitigationError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

struct Engine<'a> {
    geom: &'a Geometry,
    frontend: MemoryFrontend,
    tracker: Tracker,
    mitigator: Mitigator,
    truth: Option<TruthState>,
    keep_stream: bool,
    stream: Vec<(ActivationEvent, Option<RowId>)>,
    violations: Vec<Violation>,
    counts: ActivationCounts,
    capacity: CapacityIntegral,
    windows: Vec<WindowReport>,
    window_index: u64,
    next_boundary: TimeNs,
    window_unique: HashSet<RowId>,
    window_mitigations: u64,
    touched: HashSet<RowId>,
    sweep_interval: u64,
    events_since_sweep: u64,
    exactness_checks: u64,
    events: u64,
    last_time: TimeNs,
}

impl<'a> Engine<'a> {
    fn new(geom: &'a Geometry, tcfg: &TrackerConfig, opts: &RunOptions) -> Self {
        let mut frontend = MemoryFrontend::new(geom, opts.replacement);
        frontend.count_writeback_acts = opts.count_writeback_acts;
        let tracker = Tracker::new(tcfg.clone(), geom, &mut frontend);
        let mut mitigator = Mitigator::new(tcfg.blast_radius);
        mitigator.max_cascade_steps = opts.max_cascade_steps;
        let truth = (opts.oracle == OracleMode::Inline)
            .then(|| TruthState::new(tcfg.t_rh, geom.cfg.window_ns));
        let mut capacity = CapacityIntegral::new(geom.cfg.llc_sets, geom.cfg.llc_ways);
        capacity.update(
            0,
            frontend.reserved_ways_total(),
            frontend.reserved_ways_peak_set(),
        );
        Engine {
            geom,
            frontend,
            tracker,
            mitigator,
            truth,
            keep_stream: opts.oracle == OracleMode::Post || opts.keep_oracle_stream,
            stream: Vec::new(),
            violations: Vec::new(),
            counts: ActivationCounts::default(),
            capacity,
            windows: Vec::new(),
            window_index: 0,
            next_boundary: geom.cfg.window_ns,
            window_unique: HashSet::new(),
            window_mitigations: 0,
            touched: HashSet::new(),
            sweep_interval: opts.exactness_sweep_interval,
            events_since_sweep: 0,
            exactness_checks: 0,
            events: 0,
            last_time: 0,
        }
    }

    fn sample_capacity(&mut self, time_ns: TimeNs) {
        self.capacity.update(
            time_ns,
            self.frontend.reserved_ways_total(),
            self.frontend.reserved_ways_peak_set(),
        );
    }

    fn snapshot_window(&mut self) {
        self.windows.push(WindowReport {
            index: self.window_index,
            unique_rows: self.window_unique.len() as u64,
            mitigations: self.window_mitigations,
            sac_histogram: self.tracker.sac_histogram(self.geom.cfg.llc_sets),
            reserved_ways: self.frontend.reserved_ways_total(),
        });
    }

    /// Cross a refresh-window boundary: snapshot the closing window,
    /// reset volatile counter state, and start the next window.
    fn close_window(&mut self) {
        let boundary = self.next_boundary;
        self.sample_capacity(boundary);
        self.snapshot_window();
        self.tracker.window_reset(&mut self.frontend);
        if let Some(truth) = &mut self.truth {
            truth.window_reset();
        }
        self.sample_capacity(boundary);
        self.window_unique.clear();
        self.window_mitigations = 0;
        self.window_index += 1;
        self.next_boundary += self.geom.cfg.window_ns;
    }

    fn advance_to(&mut self, time_ns: TimeNs) {
        while time_ns >= self.next_boundary {
            self.close_window();
        }
    }

    fn tally(counts: &mut ActivationCounts, cause: ActivationCause) {
        match cause {
            ActivationCause::Demand => counts.demand += 1,
            ActivationCause::VictimRefresh => counts.victim_refresh += 1,
            ActivationCause::Metadata => counts.metadata += 1,
        }
    }

    fn sweep_exactness(&mut self) {
        if let Some(truth) = &self.truth {
            self.exactness_checks += self.touched.len() as u64;
            self.violations.extend(truth.check_exactness(
                &self.tracker,
                self.geom,
                self.touched.iter().copied(),
            ));
        }
        self.events_since_sweep = 0;
    }

    fn process_activation(
        &mut self,
        ev: &ActivationEvent,
        event_index: u64,
    ) -> Result<(), SimError> {
        Self::tally(&mut self.counts, ev.cause);
        self.window_unique.insert(ev.row);
        self.touched.insert(ev.row);

        let out = self
            .tracker
            .on_activation(ev, self.geom, &mut self.frontend);
        if let Some(truth) = &mut self.truth {
            truth.record(ev, out.mitigated)?;
        }
        if self.keep_stream {
            self.stream.push((*ev, out.mitigated));
        }
        if out.mitigated.is_some() {
            self.window_mitigations += 1;
        }
        let escalated = out.escalations > 0;

        let mut deferred: Option<OracleError> = None;
        let cascade = self.mitigator.drain_cascade(
            out,
            ev.time_ns,
            event_index,
            &mut self.tracker,
            self.geom,
            &mut self.frontend,
            |cev, mitigated| {
                Self::tally(&mut self.counts, cev.cause);
                self.window_unique.insert(cev.row);
                self.touched.insert(cev.row);
                if let Some(truth) = &mut self.truth {
                    if let Err(e) = truth.record(cev, mitigated) {
                        deferred.get_or_insert(e);
                    }
                }
                if self.keep_stream {
                    self.stream.push((*cev, mitigated));
                }
                if mitigated.is_some() {
                    self.window_mitigations += 1;
                }
            },
        )?;
        if let Some(e) = deferred {
            return Err(e.into());
        }

        if escalated || cascade.escalations > 0 {
            self.sample_capacity(ev.time_ns);
        }
        Ok(())
    }

    fn step_end(&mut self, time_ns: TimeNs) {
        self.last_time = time_ns;
        self.events += 1;
        self.events_since_sweep += 1;
        if self.sweep_interval > 0 && self.events_since_sweep >= self.sweep_interval {
            self.sweep_exactness();
        }
    }

    fn feed(&mut self, trace: &Trace) -> Result<(), SimError> {
        match trace {
            Trace::Activations(events) => {
                for (i, ev) in events.iter().enumerate() {
                    self.advance_to(ev.time_ns);
                    self.process_activation(ev, i as u64)?;
                    self.step_end(ev.time_ns);
                }
            }
            Trace::Accesses(accesses) => {
                for (i, a) in accesses.iter().enumerate() {
                    self.advance_to(a.time_ns);
                    let outcome = self.frontend.access(a, self.geom);
                    for ev in outcome
                        .activation
                        .iter()
                        .chain(outcome.writeback_activation.iter())
                    {
                        self.process_activation(ev, i as u64)?;
                    }
                    self.step_end(a.time_ns);
                }
            }
        }
        Ok(())
    }

    fn finish(mut self, tcfg: &TrackerConfig, opts: &RunOptions) -> Result<RunOutput, SimError> {
        self.sweep_exactness();
        self.sample_capacity(self.last_time);
        self.snapshot_window();

        if opts.oracle == OracleMode::Post {
            self.violations.extend(oracle::replay(
                &self.stream,
                tcfg.t_rh,
                self.geom.cfg.window_ns,
            )?);
        }

        let mitigations = std::mem::take(&mut self.mitigator.records);
        debug_assert_eq!(
            mitigations.len() as u64,
            self.windows.iter().map(|w| w.mitigations).sum::<u64>()
        );
        let victim_refreshes = mitigations.iter().map(|m| m.victim_rows.len() as u64).sum();

        let report = RunReport {
            variant: tcfg.variant.name().to_string(),
            t_rh: tcfg.t_rh,
            effective_threshold: tcfg.effective_threshold(),
            blast_radius: tcfg.blast_radius,
            pattern: opts.pattern.clone(),
            seed: opts.seed,
            replacement: opts.replacement.name().to_string(),
            geometry: self.geom.cfg.clone(),
            events: self.events,
            duration_ns: self.last_time,
            activations: self.counts,
            mitigations: mitigations.len() as u64,
            victim_refreshes,
            llc: LlcReport {
                hits: self.frontend.stats.hits,
                misses: self.frontend.stats.misses,
                writebacks: self.frontend.stats.writebacks,
                forced_evictions: self.frontend.stats.forced_evictions,
                bypasses: self.frontend.stats.bypasses,
                demand_fingerprint: self.frontend.demand_fingerprint(),
            },
            mtt: self.tracker.mtt_stats(),
            tracker: self.tracker.tracker_stats(),
            capacity: self.capacity.finish(self.last_time),
            windows: self.windows,
            oracle: OracleSummary {
                mode: opts.oracle.name().to_string(),
                violations: self.violations.len() as u64,
                exactness_checks: self.exactness_checks,
            },
        };
        Ok(RunOutput {
            report,
            violations: self.violations,
            mitigations,
            oracle_stream: (opts.oracle == OracleMode::Post || opts.keep_oracle_stream)
                .then_some(self.stream),
        })
    }
}

/// Run one trace through a tracker configuration and report on it.
pub fn run(
    geom: &Geometry,
    tcfg: &TrackerConfig,
    opts: &RunOptions,
    trace: &Trace,
) -> Result<RunOutput, SimError> {
    let mut engine = Engine::new(geom, tcfg, opts);
    engine.feed(trace)?;
    engine.finish(tcfg, opts)
}

/// LLC hit/miss cost of a tracker relative to an untracked baseline on
/// the same access trace (the per-row baseline reserves no LLC space).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MissDelta {
    pub baseline_hits: u64,
    pub baseline_misses: u64,
    pub tracked_hits: u64,
    pub tracked_misses: u64,
}

impl MissDelta {
    pub fn extra_misses(&self) -> i64 {
        self.tracked_misses as i64 - self.baseline_misses as i64
    }

    pub fn miss_increase_pct(&self) -> f64 {
        if self.baseline_misses == 0 {
            return 0.0;
        }
        100.0 * self.extra_misses() as f64 / self.baseline_misses as f64
    }
}

/// Run `trace` twice — once with per-row ideal tracking (which reserves
/// no cache space) and once with `tcfg` — and compare LLC behavior.
pub fn miss_delta(
    geom: &Geometry,
    tcfg: &TrackerConfig,
    opts: &RunOptions,
    trace: &Trace,
) -> Result<(RunOutput, MissDelta), SimError> {
    let mut base_cfg = tcfg.clone();
    base_cfg.variant = Variant::Ideal;
    let mut base_opts = opts.clone();
    base_opts.oracle = OracleMode::Off;
    base_opts.keep_oracle_stream = false;
    let baseline = run(geom, &base_cfg, &base_opts, trace)?;
    let tracked = run(geom, tcfg, opts, trace)?;
    let delta = MissDelta {
        baseline_hits: baseline.report.llc.hits,
        baseline_misses: baseline.report.llc.misses,
        tracked_hits: tracked.report.llc.hits,
        tracked_misses: tracked.report.llc.misses,
    };
    Ok((tracked, delta))
}
