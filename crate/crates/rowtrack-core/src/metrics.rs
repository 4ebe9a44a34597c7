//! Quantitative run outputs: activation/mitigation totals, LLC and
//! table traffic, reserved-capacity statistics, and per-window summaries,
//! emitted as JSON (one report) or CSV (one row per run for sweeps).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{GeometryConfig, TimeNs};
use crate::mitigation::MitigationRecord;
use crate::mtt::MttStats;
use crate::tracker::TrackerStats;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationCounts {
    pub demand: u64,
    pub victim_refresh: u64,
    pub metadata: u64,
}

impl ActivationCounts {
    pub fn total(&self) -> u64 {
        self.demand + self.victim_refresh + self.metadata
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlcReport {
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
    pub forced_evictions: u64,
    pub bypasses: u64,
    /// Hash of the demand hit/miss sequence and final cache contents;
    /// equal fingerprints mean the tracker did not perturb demand.
    pub demand_fingerprint: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    /// Time-weighted mean of reserved ways / total ways.
    pub mean_fraction: f64,
    /// Highest instantaneous reserved fraction of the whole LLC.
    pub peak_fraction: f64,
    /// Highest reserved fraction inside any single set.
    pub peak_set_fraction: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowReport {
    pub index: u64,
    /// Distinct rows activated (any cause) inside the window.
    pub unique_rows: u64,
    pub mitigations: u64,
    /// Set counts per allocation state at the end of the window.
    pub sac_histogram: [u64; 4],
    /// Reserved ways at the end of the window, before the reset.
    pub reserved_ways: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub mode: String,
    pub violations: u64,
    /// Per-row exactness comparisons performed.
    pub exactness_checks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: String,
    pub t_rh: u64,
    pub effective_threshold: u64,
    pub blast_radius: u32,
    pub pattern: Option<String>,
    pub seed: Option<u64>,
    pub replacement: String,
    pub geometry: GeometryConfig,
    pub events: u64,
    pub duration_ns: TimeNs,
    pub activations: ActivationCounts,
    pub mitigations: u64,
    pub victim_refreshes: u64,
    pub llc: LlcReport,
    pub mtt: MttStats,
    pub tracker: TrackerStats,
    pub capacity: CapacityReport,
    pub windows: Vec<WindowReport>,
    pub oracle: OracleSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?}; expected json or csv")),
        }
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Column names for the one-row-per-run CSV emitted by sweeps.
    pub fn csv_header() -> &'static str {
        "variant,t_rh,effective_threshold,blast_radius,pattern,seed,row_count,llc_sets,\
         llc_ways,replacement,events,duration_ns,acts_demand,acts_victim_refresh,\
         acts_metadata,acts_total,mitigations,victim_refreshes,llc_hits,llc_misses,\
         llc_writebacks,llc_forced_evictions,llc_bypasses,demand_fingerprint,mtt_reads,\
         mtt_writes,mtt_resets,escalations,installs,evictions,capacity_mean,capacity_peak,\
         capacity_peak_set,window_count,unique_rows_max,oracle_mode,oracle_violations"
    }

    pub fn to_csv_row(&self) -> String {
        let unique_rows_max = self
            .windows
            .iter()
            .map(|w| w.unique_rows)
            .max()
            .unwrap_or(0);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:#018x},{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{}",
            self.variant,
            self.t_rh,
            self.effective_threshold,
            self.blast_radius,
            self.pattern.as_deref().unwrap_or(""),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.geometry.row_count,
            self.geometry.llc_sets,
            self.geometry.llc_ways,
            self.replacement,
            self.events,
            self.duration_ns,
            self.activations.demand,
            self.activations.victim_refresh,
            self.activations.metadata,
            self.activations.total(),
            self.mitigations,
            self.victim_refreshes,
            self.llc.hits,
            self.llc.misses,
            self.llc.writebacks,
            self.llc.forced_evictions,
            self.llc.bypasses,
            self.llc.demand_fingerprint,
            self.mtt.reads,
            self.mtt.writes,
            self.mtt.resets,
            self.tracker.escalations,
            self.tracker.installs,
            self.tracker.evictions,
            self.capacity.mean_fraction,
            self.capacity.peak_fraction,
            self.capacity.peak_set_fraction,
            self.windows.len(),
            unique_rows_max,
            self.oracle.mode,
            self.oracle.violations,
        )
    }

    pub fn write_to(&self, path: &Path, format: Format) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        match format {
            Format::Json => writeln!(f, "{}", self.to_json()),
            Format::Csv => writeln!(f, "{}\n{}", Self::csv_header(), self.to_csv_row()),
        }
    }
}

/// Time-weighted integral of the reserved-capacity fraction. Updates
/// are only needed when reservations change; the fraction is held
/// constant between updates.
#[derive(Debug, Clone)]
pub struct CapacityIntegral {
    total_ways: u64,
    ways_per_set: u64,
    last_time: TimeNs,
    current: f64,
    integral: f64,
    peak: f64,
    peak_set: f64,
}

impl CapacityIntegral {
    pub fn new(llc_sets: u64, llc_ways: u64) -> Self {
        CapacityIntegral {
            total_ways: llc_sets * llc_ways,
            ways_per_set: llc_ways,
            last_time: 0,
            current: 0.0,
            integral: 0.0,
            peak: 0.0,
            peak_set: 0.0,
        }
    }

    /// Record that reservations changed at `time`: the previous fraction
    /// held from the last change until now.
    pub fn update(&mut self, time: TimeNs, reserved_total: u64, peak_set_ways: u64) {
        debug_assert!(time >= self.last_time);
        self.integral += self.current * (time - self.last_time) as f64;
        self.last_time = time;
        self.current = reserved_total as f64 / self.total_ways as f64;
        self.peak = self.peak.max(self.current);
        self.peak_set = self
            .peak_set
            .max(peak_set_ways as f64 / self.ways_per_set as f64);
    }

    pub fn finish(mut self, end: TimeNs) -> CapacityReport {
        self.integral += self.current * (end - self.last_time) as f64;
        CapacityReport {
            mean_fraction: if end == 0 {
                self.current
            } else {
                self.integral / end as f64
            },
            peak_fraction: self.peak,
            peak_set_fraction: self.peak_set,
        }
    }
}

/// One mitigation-log line: the minimal cross-variant comparable record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MitigationLogEntry {
    pub time_ns: TimeNs,
    pub row_id: u64,
    pub variant: String,
}

/// Emit the mitigation log as JSON-lines.
pub fn write_mitigation_log(
    records: &[MitigationRecord],
    variant: &str,
    mut w: impl Write,
) -> std::io::Result<()> {
    for r in records {
        let entry = MitigationLogEntry {
            time_ns: r.time_ns,
            row_id: r.aggressor_row,
            variant: variant.to_string(),
        };
        writeln!(
            w,
            "{}",
            serde_json::to_string(&entry).expect("log entry serializes")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> RunReport {
        RunReport {
            variant: "start-d".into(),
            t_rh: 256,
            effective_threshold: 128,
            blast_radius: 1,
            pattern: Some("uniform".into()),
            seed: Some(7),
            replacement: "srrip".into(),
            geometry: GeometryConfig::default(),
            events: 1000,
            duration_ns: 45_000,
            activations: ActivationCounts {
                demand: 1000,
                victim_refresh: 14,
                metadata: 0,
            },
            mitigations: 7,
            victim_refreshes: 14,
            llc: LlcReport {
                hits: 400,
                misses: 600,
                writebacks: 20,
                forced_evictions: 3,
                bypasses: 0,
                demand_fingerprint: 0xDEADBEEF,
            },
            mtt: MttStats::default(),
            tracker: TrackerStats {
                escalations: 5,
                installs: 60,
                evictions: 0,
            },
            capacity: CapacityReport {
                mean_fraction: 0.01,
                peak_fraction: 0.02,
                peak_set_fraction: 0.125,
            },
            windows: vec![WindowReport {
                index: 0,
                unique_rows: 60,
                mitigations: 7,
                sac_histogram: [16380, 3, 1, 0],
                reserved_ways: 5,
            }],
            oracle: OracleSummary {
                mode: "inline".into(),
                violations: 0,
                exactness_checks: 1000,
            },
        }
    }

    #[test]
    fn json_round_trips() {
        let r = sample_report();
        let parsed: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed, r);
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let header_cols = RunReport::csv_header().split(',').count();
        let row_cols = sample_report().to_csv_row().split(',').count();
        assert_eq!(header_cols, row_cols);
        assert_eq!(header_cols, 37);
    }

    #[test]
    fn identical_reports_emit_identical_bytes() {
        let a = sample_report();
        let b = sample_report();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv_row(), b.to_csv_row());
    }

    #[test]
    fn capacity_integral_is_piecewise_exact() {
        let mut c = CapacityIntegral::new(64, 16);
        // 0 reserved until t=10, half reserved until t=30
        c.update(10, 512, 8);
        let report = c.finish(30);
        assert!((report.mean_fraction - 0.5 * 20.0 / 30.0).abs() < 1e-12);
        assert_eq!(report.peak_fraction, 0.5);
        assert_eq!(report.peak_set_fraction, 0.5);
    }

    #[test]
    fn empty_capacity_integral_is_zero() {
        let c = CapacityIntegral::new(64, 16);
        let report = c.finish(0);
        assert_eq!(report.mean_fraction, 0.0);
        assert_eq!(report.peak_fraction, 0.0);
    }

    #[test]
    fn mitigation_log_lines_parse_back() {
        let records = vec![
            MitigationRecord {
                time_ns: 45,
                event_index: 0,
                aggressor_row: 100,
                blast_radius: 1,
                victim_rows: vec![99, 101],
            },
            MitigationRecord {
                time_ns: 90,
                event_index: 1,
                aggressor_row: 7,
                blast_radius: 1,
                victim_rows: vec![6, 8],
            },
        ];
        let mut buf = Vec::new();
        write_mitigation_log(&records, "ideal", &mut buf).unwrap();
        let lines: Vec<MitigationLogEntry> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].row_id, 100);
        assert_eq!(lines[1].time_ns, 90);
        assert_eq!(lines[1].variant, "ideal");
    }
}
