//! Trace events, file formats, and deterministic workload generators.
//!
//! Two stream kinds exist: memory accesses (full LLC + row-buffer path)
//! and raw row activations (tracker-only path, no cache effects). Both
//! are plain line-oriented text:
//!
//! ```text
//! <time_ns> <hex_addr> <R|W>     access trace
//! <time_ns> <row_id>  <D|V|M>    activation trace
//! ```
//!
//! Generators pace events so a bank never sees two activations closer
//! than trc_ns, and can optionally cap each bank at the per-window
//! activation budget that remains after refresh overhead.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Geometry, RowId, TimeNs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessKind {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryAccess {
    pub time_ns: TimeNs,
    pub addr: u64,
    pub kind: AccessKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationCause {
    Demand,
    VictimRefresh,
    Metadata,
}

impl ActivationCause {
    pub fn letter(self) -> char {
        match self {
            ActivationCause::Demand => 'D',
            ActivationCause::VictimRefresh => 'V',
            ActivationCause::Metadata => 'M',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationEvent {
    pub time_ns: TimeNs,
    pub row: RowId,
    pub cause: ActivationCause,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Uniform,
    Zipf,
    Stream,
    SingleSided,
    DoubleSided,
    ManySided,
    DecoyRotation,
    MttThrash,
}

impl Pattern {
    pub const ALL: [Pattern; 8] = [
        Pattern::Uniform,
        Pattern::Zipf,
        Pattern::Stream,
        Pattern::SingleSided,
        Pattern::DoubleSided,
        Pattern::ManySided,
        Pattern::DecoyRotation,
        Pattern::MttThrash,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Pattern::Uniform => "uniform",
            Pattern::Zipf => "zipf",
            Pattern::Stream => "stream",
            Pattern::SingleSided => "single-sided",
            Pattern::DoubleSided => "double-sided",
            Pattern::ManySided => "many-sided",
            Pattern::DecoyRotation => "decoy-rotation",
            Pattern::MttThrash => "mtt-thrash",
        }
    }

    /// Hammer-style patterns aim for the peak activation rate and are
    /// usually driven as raw activation streams.
    pub fn is_adversarial(self) -> bool {
        !matches!(self, Pattern::Uniform | Pattern::Zipf | Pattern::Stream)
    }
}

impl std::str::FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Pattern::ALL
            .iter()
            .find(|p| p.name() == s || p.name().replace('-', "_") == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = Pattern::ALL.iter().map(|p| p.name()).collect();
                format!(
                    "unknown pattern {s:?}; expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub pattern: Pattern,
    /// Row population the pattern draws from; role is pattern-specific
    /// (sample space, stream order, decoy source, thrash cycle).
    pub row_pool: Vec<RowId>,
    pub duration_ns: TimeNs,
    /// Zipf exponent; 0 degenerates to uniform.
    pub zipf_s: f64,
    /// Hammer targets. double_sided reads the victim from slot 0 and
    /// hammers its two neighbors.
    pub aggressor_rows: Vec<RowId>,
    pub decoy_count: u32,
    pub seed: u64,
    /// Cap per-bank activations at the post-refresh window budget.
    pub refresh_discount: bool,
}

impl PatternSpec {
    pub fn new(pattern: Pattern, seed: u64) -> Self {
        PatternSpec {
            pattern,
            row_pool: Vec::new(),
            duration_ns: 0,
            zipf_s: 0.0,
            aggressor_rows: Vec::new(),
            decoy_count: 0,
            seed,
            refresh_discount: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: time goes backwards")]
    NonMonotonicTime { line: usize },
    #[error("pattern needs {needed} activations per window, budget is {budget}")]
    InfeasibleRate { needed: u64, budget: u64 },
    #[error("pattern has no rows to draw from: {0}")]
    EmptyPool(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fraction of a refresh window usable for activations once periodic
/// refresh is discounted; at 45 ns row-cycle time this leaves the
/// familiar 1.36M-activations-per-bank budget.
pub const REFRESH_DISCOUNT: f64 = 0.95625;

/// Per-bank activation budget inside one tracking window. The discount
/// shaves whole nanoseconds off the window before it is divided into
/// row-cycle slots.
pub fn acts_per_window(window_ns: u64, trc_ns: u64, refresh_discount: bool) -> u64 {
    if refresh_discount {
        (window_ns as f64 * REFRESH_DISCOUNT).round() as u64 / trc_ns
    } else {
        window_ns / trc_ns
    }
}

/// Schedules row touches with per-bank trc spacing, non-decreasing global
/// time, and the optional per-window activation cap.
struct Pacer<'a> {
    geom: &'a Geometry,
    next_bank_time: Vec<TimeNs>,
    bank_window_acts: Vec<u64>,
    bank_window_idx: Vec<u64>,
    last_time: TimeNs,
    cap: Option<u64>,
}

impl<'a> Pacer<'a> {
    fn new(geom: &'a Geometry, refresh_discount: bool) -> Self {
        let banks = geom.cfg.bank_count as usize;
        Pacer {
            geom,
            next_bank_time: vec![0; banks],
            bank_window_acts: vec![0; banks],
            bank_window_idx: vec![0; banks],
            last_time: 0,
            cap: refresh_discount
                .then(|| acts_per_window(geom.cfg.window_ns, geom.cfg.trc_ns, true)),
        }
    }

    /// Time for the next touch of `row`, or None once past `duration_ns`.
    fn schedule(&mut self, row: RowId, duration_ns: TimeNs) -> Option<TimeNs> {
        let bank = self.geom.bank_of_row(row) as usize;
        let window = self.geom.cfg.window_ns;
        let mut t = self.next_bank_time[bank].max(self.last_time);
        if let Some(cap) = self.cap {
            let widx = t / window;
            if widx != self.bank_window_idx[bank] {
                self.bank_window_idx[bank] = widx;
                self.bank_window_acts[bank] = 0;
            }
            if self.bank_window_acts[bank] >= cap {
                // budget burnt: this bank idles until the next window
                t = (widx + 1) * window;
                self.bank_window_idx[bank] = widx + 1;
                self.bank_window_acts[bank] = 0;
            }
            self.bank_window_acts[bank] += 1;
        }
        // the activation must complete inside the trace duration
        if t + self.geom.cfg.trc_ns > duration_ns {
            return None;
        }
        self.next_bank_time[bank] = t + self.geom.cfg.trc_ns;
        self.last_time = t;
        Some(t)
    }
}

/// Row-touch plan shared by both renderers.
fn plan_rows(spec: &PatternSpec, geom: &Geometry) -> Result<Vec<(TimeNs, RowId)>, TraceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pacer = Pacer::new(geom, spec.refresh_discount);
    let mut out = Vec::new();
    let mut emit = |pacer: &mut Pacer, row: RowId| -> bool {
        match pacer.schedule(row, spec.duration_ns) {
            Some(t) => {
                out.push((t, row));
                true
            }
            None => false,
        }
    };

    match spec.pattern {
        Pattern::Uniform => {
            if spec.row_pool.is_empty() {
                return Err(TraceError::EmptyPool("uniform needs row_pool"));
            }
            loop {
                let row = spec.row_pool[rng.gen_range(0..spec.row_pool.len())];
                if !emit(&mut pacer, row) {
                    break;
                }
            }
        }
        Pattern::Zipf => {
            if spec.row_pool.is_empty() {
                return Err(TraceError::EmptyPool("zipf needs row_pool"));
            }
            // rank-ordered CDF over the pool; s = 0 is uniform
            let mut cdf = Vec::with_capacity(spec.row_pool.len());
            let mut acc = 0.0f64;
            for i in 0..spec.row_pool.len() {
                acc += 1.0 / ((i + 1) as f64).powf(spec.zipf_s);
                cdf.push(acc);
            }
            loop {
                let u = rng.gen::<f64>() * acc;
                let i = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                if !emit(&mut pacer, spec.row_pool[i]) {
                    break;
                }
            }
        }
        Pattern::Stream => {
            if spec.row_pool.is_empty() {
                return Err(TraceError::EmptyPool("stream needs row_pool"));
            }
            'outer: loop {
                for &row in &spec.row_pool {
                    if !emit(&mut pacer, row) {
                        break 'outer;
                    }
                }
            }
        }
        Pattern::SingleSided => {
            let &row = spec
                .aggressor_rows
                .first()
                .ok_or(TraceError::EmptyPool("single_sided needs an aggressor"))?;
            while emit(&mut pacer, row) {}
        }
        Pattern::DoubleSided => {
            let &victim = spec
                .aggressor_rows
                .first()
                .ok_or(TraceError::EmptyPool("double_sided needs a victim row"))?;
            let (lo, hi) = geom.bank_row_range(victim);
            let mut pair = Vec::new();
            if victim > lo {
                pair.push(victim - 1);
            }
            if victim < hi {
                pair.push(victim + 1);
            }
            if pair.is_empty() {
                return Err(TraceError::EmptyPool("victim has no in-bank neighbors"));
            }
            'outer: loop {
                for &row in &pair {
                    if !emit(&mut pacer, row) {
                        break 'outer;
                    }
                }
            }
        }
        Pattern::ManySided => {
            if spec.aggressor_rows.is_empty() {
                return Err(TraceError::EmptyPool("many_sided needs aggressors"));
            }
            'outer: loop {
                for &row in &spec.aggressor_rows {
                    if !emit(&mut pacer, row) {
                        break 'outer;
                    }
                }
            }
        }
        Pattern::DecoyRotation => {
            if spec.aggressor_rows.is_empty() {
                return Err(TraceError::EmptyPool("decoy_rotation needs aggressors"));
            }
            let decoys: Vec<RowId> = spec
                .row_pool
                .iter()
                .copied()
                .filter(|r| !spec.aggressor_rows.contains(r))
                .collect();
            if decoys.is_empty() && spec.decoy_count > 0 {
                return Err(TraceError::EmptyPool(
                    "decoy_rotation needs non-aggressor pool rows",
                ));
            }
            let mut next_decoy = 0usize;
            'outer: loop {
                for &row in &spec.aggressor_rows {
                    if !emit(&mut pacer, row) {
                        break 'outer;
                    }
                }
                for _ in 0..spec.decoy_count {
                    let row = decoys[next_decoy % decoys.len()];
                    next_decoy += 1;
                    if !emit(&mut pacer, row) {
                        break 'outer;
                    }
                }
            }
        }
        Pattern::MttThrash => {
            if spec.row_pool.is_empty() {
                return Err(TraceError::EmptyPool("mtt_thrash needs row_pool"));
            }
            // each cycle must fit a window's activation budget, otherwise
            // the per-window unique-row target is unreachable
            let mut banks: Vec<u64> = spec.row_pool.iter().map(|&r| geom.bank_of_row(r)).collect();
            banks.sort_unstable();
            banks.dedup();
            let budget = banks.len() as u64
                * acts_per_window(geom.cfg.window_ns, geom.cfg.trc_ns, spec.refresh_discount);
            if spec.row_pool.len() as u64 > budget {
                return Err(TraceError::InfeasibleRate {
                    needed: spec.row_pool.len() as u64,
                    budget,
                });
            }
            // Random visit order, reshuffled every pass: each cycle still
            // touches every pool row exactly once, but counter-guided
            // eviction cannot pin a stable resident subset the way a
            // fixed rotation would.
            let mut order: Vec<RowId> = spec.row_pool.clone();
            'outer: loop {
                for k in (1..order.len()).rev() {
                    order.swap(k, rng.gen_range(0..=k));
                }
                for &row in &order {
                    if !emit(&mut pacer, row) {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Render the pattern as raw demand activations (tracker-only path).
pub fn generate_activations(
    spec: &PatternSpec,
    geom: &Geometry,
) -> Result<Vec<ActivationEvent>, TraceError> {
    Ok(plan_rows(spec, geom)?
        .into_iter()
        .map(|(time_ns, row)| ActivationEvent {
            time_ns,
            row,
            cause: ActivationCause::Demand,
        })
        .collect())
}

/// Render the pattern as memory accesses. Successive touches of a row
/// rotate through its lines; uniform traffic mixes in writes.
pub fn generate(spec: &PatternSpec, geom: &Geometry) -> Result<Vec<MemoryAccess>, TraceError> {
    let plan = plan_rows(spec, geom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0acc);
    let lines = geom.lines_per_row();
    let mut next_line: std::collections::HashMap<RowId, u64> = Default::default();
    Ok(plan
        .into_iter()
        .map(|(time_ns, row)| {
            let k = next_line.entry(row).or_insert(0);
            let addr = geom.row_line_addr(row, *k);
            *k = (*k + 1) % lines;
            let kind = if spec.pattern == Pattern::Uniform && rng.gen_ratio(1, 4) {
                AccessKind::Write
            } else {
                AccessKind::Read
            };
            MemoryAccess {
                time_ns,
                addr,
                kind,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trace {
    Accesses(Vec<MemoryAccess>),
    Activations(Vec<ActivationEvent>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Accesses(v) => v.len(),
            Trace::Activations(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn write_accesses<W: Write>(mut w: W, events: &[MemoryAccess]) -> Result<(), TraceError> {
    for e in events {
        let k = match e.kind {
            AccessKind::Read => 'R',
            AccessKind::Write => 'W',
        };
        writeln!(w, "{} {:#x} {}", e.time_ns, e.addr, k)?;
    }
    Ok(())
}

pub fn write_activations<W: Write>(mut w: W, events: &[ActivationEvent]) -> Result<(), TraceError> {
    for e in events {
        writeln!(w, "{} {} {}", e.time_ns, e.row, e.cause.letter())?;
    }
    Ok(())
}

/// Parse a trace, detecting the stream kind from the event-letter column.
pub fn read_trace<R: BufRead>(r: R) -> Result<Trace, TraceError> {
    let mut accesses = Vec::new();
    let mut activations = Vec::new();
    let mut last_time: Option<TimeNs> = None;
    let mut kind: Option<bool> = None; // true = access trace

    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut fields = text.split_ascii_whitespace();
        let (Some(t), Some(loc), Some(tail), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(TraceError::Malformed {
                line: line_no,
                msg: "expected three fields".into(),
            });
        };
        let malformed = |msg: String| TraceError::Malformed { line: line_no, msg };
        let time_ns: u64 = t
            .parse()
            .map_err(|_| malformed(format!("bad time {t:?}")))?;
        if last_time.is_some_and(|prev| time_ns < prev) {
            return Err(TraceError::NonMonotonicTime { line: line_no });
        }
        last_time = Some(time_ns);

        let is_access = match tail {
            "R" | "W" => true,
            "D" | "V" | "M" => false,
            other => return Err(malformed(format!("bad event kind {other:?}"))),
        };
        if *kind.get_or_insert(is_access) != is_access {
            return Err(malformed("mixed access and activation records".into()));
        }

        if is_access {
            let digits = loc.strip_prefix("0x").unwrap_or(loc);
            let addr = u64::from_str_radix(digits, 16)
                .map_err(|_| malformed(format!("bad address {loc:?}")))?;
            let kind = if tail == "R" {
                AccessKind::Read
            } else {
                AccessKind::Write
            };
            accesses.push(MemoryAccess {
                time_ns,
                addr,
                kind,
            });
        } else {
            let row = loc
                .parse()
                .map_err(|_| malformed(format!("bad row id {loc:?}")))?;
            let cause = match tail {
                "D" => ActivationCause::Demand,
                "V" => ActivationCause::VictimRefresh,
                _ => ActivationCause::Metadata,
            };
            activations.push(ActivationEvent {
                time_ns,
                row,
                cause,
            });
        }
    }
    Ok(if kind == Some(true) {
        Trace::Accesses(accesses)
    } else {
        Trace::Activations(activations)
    })
}
