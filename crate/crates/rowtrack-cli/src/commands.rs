//! Subcommand implementations. Each returns the process exit code:
//! 0 clean, 1 when the oracle flagged violations, errors map to 2.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use rowtrack_core::geometry::{Geometry, GeometryConfig};
use rowtrack_core::metrics::{write_mitigation_log, Format, RunReport};
use rowtrack_core::sim::{self, RunOptions, RunOutput};
use rowtrack_core::trace::{self, Trace};
use rowtrack_core::tracker::{TrackerConfig, Variant};

use crate::opts::{GenArgs, PatternArgs, RunArgs, SweepArgs, SweepAxis};

fn build_geometry(cfg: GeometryConfig, tcfg: &TrackerConfig) -> Result<Geometry> {
    Geometry::new(cfg, tcfg).map_err(|errs| {
        let msgs: Vec<String> = errs.iter().map(ToString::to_string).collect();
        anyhow!("invalid geometry: {}", msgs.join("; "))
    })
}

fn make_trace(pattern: &PatternArgs, geom: &Geometry) -> Result<Option<Trace>> {
    let Some(spec) = pattern.resolve(geom)? else {
        return Ok(None);
    };
    let trace = if pattern.accesses {
        Trace::Accesses(trace::generate(&spec, geom)?)
    } else {
        Trace::Activations(trace::generate_activations(&spec, geom)?)
    };
    Ok(Some(trace))
}

fn load_trace(path: &Path) -> Result<Trace> {
    let f = File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
    trace::read_trace(BufReader::new(f))
        .with_context(|| format!("parsing trace {}", path.display()))
}

fn emit_report(report: &RunReport, out: Option<&Path>, format: Format) -> Result<()> {
    match out {
        Some(path) => report
            .write_to(path, format)
            .with_context(|| format!("writing report {}", path.display()))?,
        // Write, don't println!: a consumer closing the pipe must surface
        // as an error for main to map to a clean exit, not a panic.
        None => {
            let mut w = std::io::stdout().lock();
            match format {
                Format::Json => writeln!(w, "{}", report.to_json())?,
                Format::Csv => writeln!(w, "{}\n{}", RunReport::csv_header(), report.to_csv_row())?,
            }
        }
    }
    Ok(())
}

fn report_violations(out: &RunOutput) -> i32 {
    if out.violations.is_empty() {
        return 0;
    }
    eprintln!(
        "oracle flagged {} violation(s) for {}",
        out.violations.len(),
        out.report.variant
    );
    for v in out.violations.iter().take(5) {
        eprintln!("  {v:?}");
    }
    if out.violations.len() > 5 {
        eprintln!("  ... and {} more", out.violations.len() - 5);
    }
    1
}

pub fn run(args: RunArgs) -> Result<i32> {
    let tcfg = args.tracker.resolve();
    let geom = build_geometry(args.geometry.resolve()?, &tcfg)?;

    let (trace, pattern_name, seed) = if let Some(path) = &args.trace {
        (load_trace(path)?, None, None)
    } else {
        let trace = make_trace(&args.pattern, &geom)?
            .ok_or_else(|| anyhow!("nothing to run: pass --pattern or --trace"))?;
        (
            trace,
            args.pattern.pattern.map(|p| p.name().to_string()),
            Some(args.pattern.seed),
        )
    };
    log::info!(
        "running {} events against {} (t_rh {})",
        trace.len(),
        tcfg.variant.name(),
        tcfg.t_rh
    );

    let opts = RunOptions {
        replacement: args.replacement,
        oracle: args.oracle,
        count_writeback_acts: args.count_writeback_acts,
        exactness_sweep_interval: args.sweep_interval,
        max_cascade_steps: args.max_cascade,
        keep_oracle_stream: false,
        pattern: pattern_name,
        seed,
    };

    let out = if args.miss_delta {
        let (out, delta) = sim::miss_delta(&geom, &tcfg, &opts, &trace)?;
        eprintln!(
            "miss delta: baseline {} misses / {} hits, tracked {} misses / {} hits ({:+.2}% misses)",
            delta.baseline_misses,
            delta.baseline_hits,
            delta.tracked_misses,
            delta.tracked_hits,
            delta.miss_increase_pct()
        );
        out
    } else {
        sim::run(&geom, &tcfg, &opts, &trace)?
    };

    // Side-effect files first: they must be complete even if the report
    // consumer closes stdout early.
    if let Some(path) = &args.mitigation_log {
        let f = File::create(path)
            .with_context(|| format!("creating mitigation log {}", path.display()))?;
        write_mitigation_log(&out.mitigations, &out.report.variant, BufWriter::new(f))?;
    }
    emit_report(&out.report, args.out.as_deref(), args.format)?;
    Ok(report_violations(&out))
}

pub fn sweep(args: SweepArgs) -> Result<i32> {
    let values: Vec<u64> = if args.values.is_empty() {
        match args.axis {
            SweepAxis::Trh => vec![16, 64, 256, 1024, 4096],
            SweepAxis::Blast => vec![1, 2, 3, 4],
            SweepAxis::Sets => vec![64, 128, 256, 512, 1024],
        }
    } else {
        args.values.clone()
    };
    let variants: Vec<Variant> = if args.variants.is_empty() {
        vec![
            Variant::Ideal,
            Variant::StartS,
            Variant::StartD,
            Variant::StartM,
            Variant::StartLite,
        ]
    } else {
        args.variants.clone()
    };
    let base_cfg = args.geometry.resolve()?;
    let jobs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| values.iter().map(move |&x| (v, x)))
        .collect();
    log::info!("sweeping {} axis over {} runs", values.len(), jobs.len());

    let rows: Vec<(String, u64)> = jobs
        .par_iter()
        .map(|&(variant, value)| -> Result<(String, u64)> {
            let mut tcfg = args.tracker.resolve();
            tcfg.variant = variant;
            let mut cfg = base_cfg.clone();
            match args.axis {
                SweepAxis::Trh => tcfg.t_rh = value,
                SweepAxis::Blast => {
                    if !(1..=4).contains(&value) {
                        bail!("blast radius {value} out of range 1..=4");
                    }
                    tcfg.blast_radius = value as u32;
                }
                SweepAxis::Sets => cfg.llc_sets = value,
            }
            let geom = build_geometry(cfg, &tcfg)?;
            let trace = make_trace(&args.pattern, &geom)?
                .ok_or_else(|| anyhow!("sweep needs --pattern"))?;
            let opts = RunOptions {
                oracle: args.oracle,
                pattern: args.pattern.pattern.map(|p| p.name().to_string()),
                seed: Some(args.pattern.seed),
                ..RunOptions::default()
            };
            let out = sim::run(&geom, &tcfg, &opts, &trace)?;
            if !out.violations.is_empty() {
                eprintln!(
                    "oracle flagged {} violation(s) for {} at {:?}={}",
                    out.violations.len(),
                    out.report.variant,
                    args.axis,
                    value
                );
            }
            Ok((out.report.to_csv_row(), out.violations.len() as u64))
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from(RunReport::csv_header());
    for (row, _) in &rows {
        csv.push('\n');
        csv.push_str(row);
    }
    match &args.out {
        Some(path) => {
            let mut f = File::create(path)
                .with_context(|| format!("creating sweep output {}", path.display()))?;
            writeln!(f, "{csv}")?;
        }
        None => writeln!(std::io::stdout().lock(), "{csv}")?,
    }
    Ok(if rows.iter().any(|(_, v)| *v > 0) {
        1
    } else {
        0
    })
}

pub fn gen(args: GenArgs) -> Result<i32> {
    if args.pattern.pattern.is_none() {
        bail!("gen needs --pattern");
    }
    // Trace generation is geometry-dependent but tracker-independent;
    // any valid tracker satisfies the layout checks.
    let tcfg = TrackerConfig::new(Variant::Ideal, 4096);
    let geom = build_geometry(args.geometry.resolve()?, &tcfg)?;
    let spec = args
        .pattern
        .resolve(&geom)?
        .expect("pattern presence checked above");
    let f = File::create(&args.out)
        .with_context(|| format!("creating trace {}", args.out.display()))?;
    let mut w = BufWriter::new(f);
    let count = if args.pattern.accesses {
        let events = trace::generate(&spec, &geom)?;
        trace::write_accesses(&mut w, &events)?;
        events.len()
    } else {
        let events = trace::generate_activations(&spec, &geom)?;
        trace::write_activations(&mut w, &events)?;
        events.len()
    };
    w.flush()?;
    eprintln!("wrote {count} events to {}", args.out.display());
    Ok(0)
}
