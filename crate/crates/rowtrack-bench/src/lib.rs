//! Shared fixtures for the benchmark targets: a mid-size geometry and
//! deterministic workloads that exercise each pipeline stage.

use rowtrack_core::geometry::{Geometry, GeometryConfig};
use rowtrack_core::trace::{self, ActivationEvent, MemoryAccess, Pattern, PatternSpec};
use rowtrack_core::tracker::{TrackerConfig, Variant};

/// 256K rows over 512 sets: large enough that set state and the table
/// region matter, small enough to build per-iteration.
pub fn bench_geometry(variant: Variant, t_rh: u64) -> (Geometry, TrackerConfig) {
    let cfg = GeometryConfig {
        row_count: 256 << 10,
        row_size_bytes: 8192,
        bank_count: 32,
        llc_sets: 512,
        llc_ways: 16,
        ..GeometryConfig::default()
    };
    let tcfg = TrackerConfig::new(variant, t_rh);
    let geom = Geometry::new(cfg, &tcfg).expect("bench geometry is valid");
    (geom, tcfg)
}

/// Zipf-skewed demand activations: hot rows escalate sets while the
/// tail keeps installing fresh tags.
pub fn activation_workload(geom: &Geometry, events: u64) -> Vec<ActivationEvent> {
    let spec = PatternSpec {
        pattern: Pattern::Zipf,
        row_pool: (0..4096).map(|i| i * 61 % geom.cfg.row_count).collect(),
        duration_ns: events * geom.cfg.trc_ns,
        zipf_s: 1.1,
        aggressor_rows: vec![],
        decoy_count: 0,
        seed: 0xBEEF,
        refresh_discount: false,
    };
    trace::generate_activations(&spec, geom).expect("workload generates")
}

/// Streaming reads over a working set sized to collide in the cache.
pub fn access_workload(geom: &Geometry, events: u64) -> Vec<MemoryAccess> {
    let spec = PatternSpec {
        pattern: Pattern::Stream,
        row_pool: (0..2048).collect(),
        duration_ns: events * geom.cfg.trc_ns,
        zipf_s: 0.0,
        aggressor_rows: vec![],
        decoy_count: 0,
        seed: 0xF00D,
        refresh_discount: false,
    };
    trace::generate(&spec, geom).expect("workload generates")
}
