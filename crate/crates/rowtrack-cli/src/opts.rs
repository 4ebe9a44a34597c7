//! Command-line surface: argument structs and the parsing helpers that
//! turn them into core configuration types.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rowtrack_core::frontend::Replacement;
use rowtrack_core::geometry::{Geometry, GeometryConfig, PagePolicy};
use rowtrack_core::metrics::Format;
use rowtrack_core::sim::OracleMode;
use rowtrack_core::trace::{Pattern, PatternSpec};
use rowtrack_core::tracker::{TrackerConfig, Variant};
use rowtrack_core::RowId;

#[derive(Debug, Parser)]
#[command(
    name = "rowtrack",
    version,
    about = "Simulate DRAM activation tracking inside a last-level cache",
    after_help = "Logging: set ROWTRACK_LOG=debug (or trace) for diagnostics on stderr."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trace against one tracker configuration and report on it.
    Run(RunArgs),
    /// Run a pattern across an axis of configurations; one CSV row each.
    Sweep(SweepArgs),
    /// Generate a trace file from a built-in access pattern.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// TOML file with geometry keys (row_count, llc_sets, ...).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// DRAM rows in the system.
    #[arg(long, value_name = "N")]
    pub rows: Option<u64>,
    /// Bytes per DRAM row.
    #[arg(long, value_name = "BYTES")]
    pub row_bytes: Option<u64>,
    /// DRAM banks the rows divide into.
    #[arg(long, value_name = "N")]
    pub banks: Option<u64>,
    /// Cache line size in bytes.
    #[arg(long, value_name = "BYTES")]
    pub line_bytes: Option<u64>,
    /// LLC set count.
    #[arg(long, value_name = "N")]
    pub sets: Option<u64>,
    /// LLC associativity.
    #[arg(long, value_name = "N")]
    pub ways: Option<u64>,
    /// Row-cycle time in nanoseconds (activation pacing).
    #[arg(long, value_name = "NS")]
    pub trc_ns: Option<u64>,
    /// Refresh-window length in nanoseconds (counter reset cadence).
    #[arg(long, value_name = "NS")]
    pub window_ns: Option<u64>,
    /// Bank page policy: open-row or close-row.
    #[arg(long, value_name = "POLICY")]
    pub page_policy: Option<PagePolicy>,
    /// XOR-fold low row bits into the set index.
    #[arg(long)]
    pub xor_fold: bool,
}

impl GeometryArgs {
    pub fn resolve(&self) -> Result<GeometryConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => GeometryConfig::default(),
        };
        if let Some(v) = self.rows {
            cfg.row_count = v;
        }
        if let Some(v) = self.row_bytes {
            cfg.row_size_bytes = v;
        }
        if let Some(v) = self.banks {
            cfg.bank_count = v;
        }
        if let Some(v) = self.line_bytes {
            cfg.line_bytes = v;
        }
        if let Some(v) = self.sets {
            cfg.llc_sets = v;
        }
        if let Some(v) = self.ways {
            cfg.llc_ways = v;
        }
        if let Some(v) = self.trc_ns {
            cfg.trc_ns = v;
        }
        if let Some(v) = self.window_ns {
            cfg.window_ns = v;
        }
        if let Some(v) = self.page_policy {
            cfg.page_policy = v;
        }
        if self.xor_fold {
            cfg.xor_fold_hash = true;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrackerArgs {
    /// Tracker variant: start-s, start-d, start-m, start-lite or ideal.
    #[arg(long, default_value = "start-d")]
    pub variant: Variant,
    /// Rowhammer threshold; mitigation fires at half of it.
    #[arg(long, default_value_t = 4096)]
    pub trh: u64,
    /// Rows refreshed on each side of a mitigated aggressor.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=4))]
    pub blast: u32,
    /// Stored counter width; defaults to the width that fits trh.
    #[arg(long, value_name = "BITS")]
    pub counter_bits: Option<u32>,
    /// Drop a row's tracking entry when the row is mitigated.
    #[arg(long)]
    pub free_on_mitigate: bool,
    /// Charge lazy table resets as line-granular DRAM writes.
    #[arg(long)]
    pub charge_reset_writes: bool,
}

impl TrackerArgs {
    pub fn resolve(&self) -> TrackerConfig {
        let mut cfg = TrackerConfig::new(self.variant, self.trh);
        cfg.blast_radius = self.blast;
        cfg.counter_bits = self.counter_bits;
        cfg.free_on_mitigate = self.free_on_mitigate;
        cfg.charge_reset_writes = self.charge_reset_writes;
        cfg
    }
}

#[derive(Debug, Args)]
pub struct PatternArgs {
    /// Built-in pattern: uniform, zipf, stream, single-sided,
    /// double-sided, many-sided, decoy-rotation or mtt-thrash.
    #[arg(long)]
    pub pattern: Option<Pattern>,
    /// Trace length in nanoseconds; defaults to one refresh window.
    #[arg(long, value_name = "NS", conflicts_with = "duration_ms")]
    pub duration_ns: Option<u64>,
    /// Trace length in milliseconds.
    #[arg(long, value_name = "MS")]
    pub duration_ms: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Row pool the pattern draws from: "a..b", "a..b:step" or "r1,r2,...".
    /// Repeatable; entries accumulate.
    #[arg(long, value_name = "SPEC")]
    pub pool: Vec<String>,
    /// Draw N distinct pool rows uniformly from the whole geometry.
    #[arg(long, value_name = "N")]
    pub pool_random: Option<u64>,
    /// Hammer targets for the *-sided patterns.
    #[arg(long, value_name = "ROWS", value_delimiter = ',')]
    pub aggressors: Vec<RowId>,
    /// Zipf exponent for the zipf pattern.
    #[arg(long, default_value_t = 1.2)]
    pub zipf: f64,
    /// Decoy rows per rotation for decoy-rotation.
    #[arg(long, default_value_t = 16)]
    pub decoys: u32,
    /// Cap per-bank activations at the post-refresh window budget.
    #[arg(long)]
    pub refresh_discount: bool,
    /// Emit memory accesses (exercising the cache) instead of a raw
    /// activation stream.
    #[arg(long)]
    pub accesses: bool,
}

impl PatternArgs {
    pub fn resolve(&self, geom: &Geometry) -> Result<Option<PatternSpec>> {
        let Some(pattern) = self.pattern else {
            return Ok(None);
        };
        let mut spec = PatternSpec::new(pattern, self.seed);
        spec.duration_ns = match (self.duration_ns, self.duration_ms) {
            (Some(ns), _) => ns,
            (None, Some(ms)) => {
                if !(ms.is_finite() && ms > 0.0) {
                    bail!("--duration-ms must be a positive number");
                }
                (ms * 1e6).round() as u64
            }
            (None, None) => geom.cfg.window_ns,
        };
        spec.row_pool = parse_pools(&self.pool)?;
        if let Some(n) = self.pool_random {
            spec.row_pool.extend(random_rows(geom, n, self.seed));
        }
        spec.aggressor_rows = self.aggressors.clone();
        spec.zipf_s = self.zipf;
        spec.decoy_count = self.decoys;
        spec.refresh_discount = self.refresh_discount;
        for &row in spec.row_pool.iter().chain(&spec.aggressor_rows) {
            if row >= geom.cfg.row_count {
                bail!(
                    "row {row} is outside the geometry (row_count {})",
                    geom.cfg.row_count
                );
            }
        }
        Ok(Some(spec))
    }
}

/// Parse pool specs: each item is "a..b", "a..b:step" or a comma list.
pub fn parse_pools(specs: &[String]) -> Result<Vec<RowId>> {
    let mut rows = Vec::new();
    for spec in specs {
        if let Some((range, step)) = split_range(spec)? {
            let (start, end) = range;
            if step == 0 {
                bail!("pool step must be positive in {spec:?}");
            }
            if end <= start {
                bail!("empty pool range {spec:?}");
            }
            rows.extend((start..end).step_by(step as usize));
        } else {
            for part in spec.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                rows.push(
                    part.parse::<u64>()
                        .with_context(|| format!("bad pool row {part:?}"))?,
                );
            }
        }
    }
    Ok(rows)
}

fn split_range(spec: &str) -> Result<Option<((u64, u64), u64)>> {
    let Some((start, rest)) = spec.split_once("..") else {
        return Ok(None);
    };
    let (end, step) = match rest.split_once(':') {
        Some((end, step)) => (
            end,
            step.parse::<u64>()
                .with_context(|| format!("bad pool step in {spec:?}"))?,
        ),
        None => (rest, 1),
    };
    let start = start
        .trim()
        .parse::<u64>()
        .with_context(|| format!("bad pool start in {spec:?}"))?;
    let end = end
        .trim()
        .parse::<u64>()
        .with_context(|| format!("bad pool end in {spec:?}"))?;
    Ok(Some(((start, end), step)))
}

/// Distinct uniformly-drawn rows; a multiplicative-hash permutation walk
/// keeps this deterministic per seed without an RNG dependency here.
fn random_rows(geom: &Geometry, n: u64, seed: u64) -> Vec<RowId> {
    let count = geom.cfg.row_count;
    let n = n.min(count);
    let mut rows = Vec::with_capacity(n as usize);
    let mut x = seed;
    let mut seen = std::collections::HashSet::with_capacity(n as usize);
    while (rows.len() as u64) < n {
        x = x
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .rotate_left(27)
            .wrapping_add(0x2545_F491_4F6C_DD1D);
        let row = x % count;
        if seen.insert(row) {
            rows.push(row);
        }
    }
    rows
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub tracker: TrackerArgs,
    #[command(flatten)]
    pub pattern: PatternArgs,
    /// Read the trace from a file instead of generating a pattern.
    #[arg(long, value_name = "FILE", conflicts_with = "pattern")]
    pub trace: Option<PathBuf>,
    /// Oracle mode: inline, post or off.
    #[arg(long, default_value = "inline")]
    pub oracle: OracleMode,
    /// LLC replacement policy: srrip or lru.
    #[arg(long, default_value = "srrip")]
    pub replacement: Replacement,
    /// Count dirty-writeback activations against the tracker.
    #[arg(long)]
    pub count_writeback_acts: bool,
    /// Trace events between inline stored-vs-truth sweeps (0: end only).
    #[arg(long, default_value_t = 4096, value_name = "N")]
    pub sweep_interval: u64,
    /// Cascade step bound per trace event.
    #[arg(long, default_value_t = 100_000, value_name = "N")]
    pub max_cascade: u64,
    /// Report file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long, default_value = "json")]
    pub format: Format,
    /// Write mitigations as JSON lines to this file.
    #[arg(long, value_name = "FILE")]
    pub mitigation_log: Option<PathBuf>,
    /// Also report LLC miss impact against an untracked baseline run.
    #[arg(long)]
    pub miss_delta: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Trh,
    Blast,
    Sets,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "trh" => Ok(SweepAxis::Trh),
            "blast" => Ok(SweepAxis::Blast),
            "sets" => Ok(SweepAxis::Sets),
            other => Err(format!(
                "unknown sweep axis {other:?}; expected trh, blast or sets"
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub tracker: TrackerArgs,
    #[command(flatten)]
    pub pattern: PatternArgs,
    /// Configuration axis to sweep: trh, blast or sets.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Axis values; defaults depend on the axis.
    #[arg(long, value_delimiter = ',', value_name = "V1,V2,...")]
    pub values: Vec<u64>,
    /// Variants to include; defaults to all of them.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<Variant>,
    /// Oracle mode per run: inline, post or off.
    #[arg(long, default_value = "inline")]
    pub oracle: OracleMode,
    /// CSV output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub pattern: PatternArgs,
    /// Trace output file.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_specs_parse() {
        assert_eq!(parse_pools(&["3..7".into()]).unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_pools(&["10..25:5".into()]).unwrap(), vec![10, 15, 20]);
        assert_eq!(parse_pools(&["1,9, 4".into()]).unwrap(), vec![1, 9, 4]);
        assert_eq!(
            parse_pools(&["0..2".into(), "8,9".into()]).unwrap(),
            vec![0, 1, 8, 9]
        );
        assert!(parse_pools(&["5..5".into()]).is_err());
        assert!(parse_pools(&["1..9:0".into()]).is_err());
        assert!(parse_pools(&["x..9".into()]).is_err());
        assert!(parse_pools(&["1,a".into()]).is_err());
    }

    #[test]
    fn cli_parses_run_command() {
        let cli = Cli::try_parse_from([
            "rowtrack",
            "run",
            "--variant",
            "start-m",
            "--trh",
            "256",
            "--pattern",
            "single-sided",
            "--aggressors",
            "100,200",
            "--duration-ms",
            "2",
            "--oracle",
            "post",
            "--format",
            "csv",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run");
        };
        assert_eq!(args.tracker.variant, Variant::StartM);
        assert_eq!(args.tracker.trh, 256);
        assert_eq!(args.pattern.aggressors, vec![100, 200]);
        assert_eq!(args.oracle, OracleMode::Post);
    }

    #[test]
    fn trace_and_pattern_conflict() {
        let res = Cli::try_parse_from([
            "rowtrack",
            "run",
            "--pattern",
            "uniform",
            "--trace",
            "t.txt",
        ]);
        assert!(res.is_err());
    }

    #[test]
    fn blast_radius_is_bounded() {
        assert!(Cli::try_parse_from(["rowtrack", "run", "--blast", "5"]).is_err());
        assert!(Cli::try_parse_from(["rowtrack", "run", "--blast", "0"]).is_err());
    }

    #[test]
    fn random_rows_are_distinct_and_in_range() {
        let tcfg = TrackerConfig::new(Variant::StartD, 256);
        let geom = Geometry::new(
            GeometryConfig {
                row_count: 32 << 10,
                row_size_bytes: 8192,
                bank_count: 8,
                llc_sets: 64,
                llc_ways: 16,
                ..GeometryConfig::default()
            },
            &tcfg,
        )
        .unwrap();
        let rows = random_rows(&geom, 500, 42);
        assert_eq!(rows.len(), 500);
        let distinct: std::collections::HashSet<_> = rows.iter().collect();
        assert_eq!(distinct.len(), 500);
        assert!(rows.iter().all(|&r| r < 32 << 10));
        assert_eq!(rows, random_rows(&geom, 500, 42));
        assert_ne!(rows, random_rows(&geom, 500, 43));
    }
}
