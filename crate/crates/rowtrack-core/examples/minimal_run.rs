//! Minimal end-to-end run; mirrors the README's library example.

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use rowtrack_core::geometry::{Geometry, GeometryConfig};
    use rowtrack_core::sim::{self, RunOptions};
    use rowtrack_core::trace::{Pattern, PatternSpec, Trace};
    use rowtrack_core::tracker::{TrackerConfig, Variant};

    let tcfg = TrackerConfig::new(Variant::StartD, 256);
    let geom =
        Geometry::new(GeometryConfig::default(), &tcfg).map_err(|errs| format!("{errs:?}"))?;
    let mut spec = PatternSpec::new(Pattern::Uniform, 7);
    spec.row_pool = (0..4096).collect();
    let trace = Trace::Activations(rowtrack_core::trace::generate_activations(&spec, &geom)?);
    let out = sim::run(&geom, &tcfg, &RunOptions::default(), &trace)?;
    assert!(out.violations.is_empty());
    println!("{}", out.report.to_json());
    Ok(())
}
