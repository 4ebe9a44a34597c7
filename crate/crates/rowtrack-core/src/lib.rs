//! Trace-driven simulation of in-LLC Rowhammer activation tracking.
//!
//! The library models a last-level cache whose data array doubles as a
//! per-DRAM-row activation counter store. A family of tracker variants
//! trades reserved cache capacity against tracking coverage, backed by
//! an in-DRAM table when a cache set overflows. A brute-force oracle
//! replays every trace against flat per-row truth counters and flags
//! any activation the tracker would have missed.

pub mod codec;
pub mod frontend;
pub mod geometry;
pub mod metrics;
pub mod mitigation;
pub mod mtt;
pub mod oracle;
pub mod sac;
pub mod sim;
pub mod trace;
pub mod tracker;

pub use frontend::{MemoryFrontend, Replacement};
pub use geometry::{Geometry, GeometryConfig, GeometryError, PagePolicy, RowId, TimeNs};
pub use metrics::{Format, RunReport};
pub use mitigation::{MitigationRecord, Mitigator};
pub use oracle::{TruthState, Violation};
pub use sim::{run, MissDelta, OracleMode, RunOptions, RunOutput, SimError};
pub use trace::{ActivationCause, ActivationEvent, MemoryAccess, Pattern, PatternSpec, Trace};
pub use tracker::{Tracker, TrackerConfig, Variant};
