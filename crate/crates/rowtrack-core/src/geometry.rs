//! DRAM/LLC geometry: bit-level address decomposition and the derived
//! layout of tracking entries inside reserved cache lines.
//!
//! All structural sizes are powers of two except `llc_ways`, so every
//! mapping is a pure bit slice. A row id is globally flat, bank-major:
//! `row_id = bank * rows_per_bank + in_bank_row`, which keeps `row_id +- 1`
//! inside the same bank (physical adjacency for blast-radius math).

use serde::{Deserialize, Serialize};

use crate::tracker::{TrackerConfig, Variant};

pub type RowId = u64;
pub type TimeNs = u64;

/// Row-buffer policy of the modeled banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PagePolicy {
    /// A row stays open; re-access to the open row does not activate.
    #[default]
    OpenRow,
    /// Every memory access activates its row.
    CloseRow,
}

/// Physical geometry of the modeled system. Loaded from a flat key-value
/// config file; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub row_count: u64,
    pub row_size_bytes: u64,
    pub bank_count: u64,
    #[serde(default = "defaults::line_bytes")]
    pub line_bytes: u64,
    pub llc_sets: u64,
    pub llc_ways: u64,
    #[serde(default = "defaults::trc_ns")]
    pub trc_ns: u64,
    #[serde(default = "defaults::window_ns")]
    pub window_ns: u64,
    #[serde(default)]
    pub page_policy: PagePolicy,
    /// XOR-fold the low row bits into the set index. Off by default:
    /// the plain top-bits slice is the documented mapping.
    #[serde(default)]
    pub xor_fold_hash: bool,
}

impl std::str::FromStr for PagePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "open-row" | "open_row" => Ok(PagePolicy::OpenRow),
            "close-row" | "close_row" => Ok(PagePolicy::CloseRow),
            other => Err(format!(
                "unknown page policy {other:?}; expected open-row or close-row"
            )),
        }
    }
}

mod defaults {
    pub fn line_bytes() -> u64 {
        64
    }
    pub fn trc_ns() -> u64 {
        45
    }
    pub fn window_ns() -> u64 {
        64_000_000
    }
}

impl Default for GeometryConfig {
    /// Reference geometry: 64 GiB of 8 KiB rows over 128 banks behind a
    /// 16 MiB 16-way LLC with 64 B lines.
    fn default() -> Self {
        GeometryConfig {
            row_count: 8 << 20,
            row_size_bytes: 8192,
            bank_count: 128,
            line_bytes: 64,
            llc_sets: 16_384,
            llc_ways: 16,
            trc_ns: 45,
            window_ns: 64_000_000,
            page_policy: PagePolicy::OpenRow,
            xor_fold_hash: false,
        }
    }
}

impl GeometryConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, GeometryError> {
        toml::from_str(text).map_err(|e| GeometryError::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn total_bytes(&self) -> u64 {
        self.row_count * self.row_size_bytes
    }

    pub fn rows_per_bank(&self) -> u64 {
        self.row_count / self.bank_count
    }

    pub fn llc_bytes(&self) -> u64 {
        self.llc_sets * self.llc_ways * self.line_bytes
    }
}

/// Where a row's tracking state lives inside its LLC set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMapping {
    pub set_index: u64,
    pub row_tag: u64,
    /// Way holding this row's counter once the set is in 8-way untagged mode.
    pub untagged_way: u64,
    /// Byte offset of the counter within that way's line.
    pub untagged_byte: u64,
}

/// Decomposition of a physical byte address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMapping {
    pub bank: u64,
    pub row_id: RowId,
    pub llc_set: u64,
    pub llc_tag: u64,
}

/// Bit layout derived from a (geometry, tracker) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DerivedLayout {
    pub row_bits: u32,
    pub set_bits: u32,
    /// Row bits left after the set index; stored in tagged entries.
    pub tag_bits: u32,
    pub rows_per_set: u64,
    pub counter_bits: u32,
    pub effective_threshold: u64,
    /// Bytes per tagged entry. The valid bit is carried in-band when the
    /// tag+counter packing leaves a spare bit, out of band otherwise, so
    /// the byte budget always equals ceil((tag_bits + counter_bits)/8)
    /// rounded up to fit the flag when it has room.
    pub tagged_entry_bytes: u64,
    pub entries_per_line: u64,
    pub valid_bit_in_band: bool,
    /// Way-select bits of the untagged layout (top of the tag, at most 3).
    pub untagged_way_bits: u32,
    /// Byte-select bits of the untagged layout (rest of the tag).
    pub untagged_byte_bits: u32,
    pub bank_bits: u32,
    pub rows_per_bank: u64,
    pub line_offset_bits: u32,
}

impl DerivedLayout {
    /// Two SAC bits per set, packed.
    pub fn sac_table_bytes(&self, llc_sets: u64) -> u64 {
        llc_sets * 2 / 8
    }

    /// Tagged entry capacity with every set at the 1-way state.
    pub fn all_s1_entries(&self, llc_sets: u64) -> u64 {
        llc_sets * self.entries_per_line
    }

    /// Tagged entry capacity with every set at the 8-way state.
    pub fn all_s3_entries(&self, llc_sets: u64) -> u64 {
        llc_sets * self.entries_per_line * 8
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("{field} = {value} is not a power of two")]
    NonPowerOfTwo { field: &'static str, value: u64 },
    #[error("{counter_bits}-bit counter cannot reach effective threshold {effective_threshold}")]
    CounterTooNarrow {
        counter_bits: u32,
        effective_threshold: u64,
    },
    #[error("untagged mode infeasible: {reason}")]
    UntaggedModeInfeasible { reason: String },
    #[error("llc_ways = {llc_ways}, but this tracker needs at least {required} reservable ways")]
    WaysInsufficient { llc_ways: u64, required: u64 },
    #[error("{field} = {value} below minimum {min}")]
    TooSmall {
        field: &'static str,
        value: u64,
        min: u64,
    },
    #[error("unsupported combination: {reason}")]
    Unsupported { reason: String },
    #[error("config: {0}")]
    Config(String),
}

fn check_pow2(field: &'static str, value: u64, out: &mut Vec<GeometryError>) {
    if !value.is_power_of_two() {
        out.push(GeometryError::NonPowerOfTwo { field, value });
    }
}

/// Validate a geometry against a tracker configuration and derive the
/// tracking-entry bit layout. Collects every violation instead of
/// stopping at the first.
pub fn validate(
    cfg: &GeometryConfig,
    tracker: &TrackerConfig,
) -> Result<DerivedLayout, Vec<GeometryError>> {
    let mut errs = Vec::new();
    check_pow2("row_count", cfg.row_count, &mut errs);
    check_pow2("row_size_bytes", cfg.row_size_bytes, &mut errs);
    check_pow2("bank_count", cfg.bank_count, &mut errs);
    check_pow2("line_bytes", cfg.line_bytes, &mut errs);
    check_pow2("llc_sets", cfg.llc_sets, &mut errs);
    if cfg.row_count < cfg.llc_sets {
        errs.push(GeometryError::TooSmall {
            field: "row_count",
            value: cfg.row_count,
            min: cfg.llc_sets,
        });
    }
    if cfg.row_count < cfg.bank_count {
        errs.push(GeometryError::TooSmall {
            field: "row_count",
            value: cfg.row_count,
            min: cfg.bank_count,
        });
    }
    if cfg.row_size_bytes < cfg.line_bytes {
        errs.push(GeometryError::TooSmall {
            field: "row_size_bytes",
            value: cfg.row_size_bytes,
            min: cfg.line_bytes,
        });
    }
    if cfg.trc_ns == 0 {
        errs.push(GeometryError::TooSmall {
            field: "trc_ns",
            value: 0,
            min: 1,
        });
    }
    if cfg.window_ns == 0 {
        errs.push(GeometryError::TooSmall {
            field: "window_ns",
            value: 0,
            min: 1,
        });
    }
    if tracker.t_rh < 2 {
        errs.push(GeometryError::TooSmall {
            field: "t_rh",
            value: tracker.t_rh,
            min: 2,
        });
    }
    if !errs.is_empty() {
        return Err(errs);
    }

    let row_bits = cfg.row_count.trailing_zeros();
    let set_bits = cfg.llc_sets.trailing_zeros();
    let tag_bits = row_bits - set_bits;
    let rows_per_set = cfg.row_count / cfg.llc_sets;
    let effective_threshold = tracker.effective_threshold();
    let counter_bits = tracker.resolved_counter_bits();

    // The counter only ever stores values below the effective threshold:
    // the increment that reaches it emits a mitigation and stores zero.
    // Width is therefore sufficient iff 2^bits >= threshold.
    if counter_bits >= 64 || (1u64 << counter_bits) < effective_threshold {
        errs.push(GeometryError::CounterTooNarrow {
            counter_bits,
            effective_threshold,
        });
    }

    if tracker.variant.uses_untagged_terminal() {
        if counter_bits > 8 {
            errs.push(GeometryError::UntaggedModeInfeasible {
                reason: format!("untagged counters are one byte, counter_bits = {counter_bits}"),
            });
        }
        if rows_per_set > 8 * cfg.line_bytes {
            errs.push(GeometryError::UntaggedModeInfeasible {
                reason: format!(
                    "rows_per_set = {rows_per_set} exceeds the 8-way byte budget {}",
                    8 * cfg.line_bytes
                ),
            });
        }
    }

    if tracker.variant.uses_mtt() && cfg.xor_fold_hash {
        // the lazy table reset zeroes one contiguous per-set counter
        // block; folding scatters a set's rows across the table
        errs.push(GeometryError::Unsupported {
            reason: "xor_fold_hash cannot back tracking state with the in-memory table".into(),
        });
    }

    let required_ways = match tracker.variant {
        Variant::Ideal => 0,
        Variant::StartLite => 1,
        Variant::StartS | Variant::StartD | Variant::StartM => 8,
    };
    if cfg.llc_ways < required_ways {
        errs.push(GeometryError::WaysInsufficient {
            llc_ways: cfg.llc_ways,
            required: required_ways,
        });
    }

    let packed_bits = tag_bits + counter_bits;
    let tagged_entry_bytes = u64::from(packed_bits.div_ceil(8)).max(1);
    let valid_bit_in_band = u64::from(packed_bits) < tagged_entry_bytes * 8;
    let entries_per_line = cfg.line_bytes / tagged_entry_bytes;
    if entries_per_line == 0 && !tracker.variant.is_ideal() {
        errs.push(GeometryError::TooSmall {
            field: "line_bytes",
            value: cfg.line_bytes,
            min: tagged_entry_bytes,
        });
    }

    if !errs.is_empty() {
        return Err(errs);
    }

    let untagged_way_bits = tag_bits.min(3);
    Ok(DerivedLayout {
        row_bits,
        set_bits,
        tag_bits,
        rows_per_set,
        counter_bits,
        effective_threshold,
        tagged_entry_bytes,
        entries_per_line,
        valid_bit_in_band,
        untagged_way_bits,
        untagged_byte_bits: tag_bits - untagged_way_bits,
        bank_bits: cfg.bank_count.trailing_zeros(),
        rows_per_bank: cfg.rows_per_bank(),
        line_offset_bits: cfg.line_bytes.trailing_zeros(),
    })
}

/// A validated geometry with the derived layout and mapping helpers.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub cfg: GeometryConfig,
    pub layout: DerivedLayout,
}

impl Geometry {
    pub fn new(cfg: GeometryConfig, tracker: &TrackerConfig) -> Result<Self, Vec<GeometryError>> {
        let layout = validate(&cfg, tracker)?;
        Ok(Geometry { cfg, layout })
    }

    fn fold_set(&self, hi: u64, lo: u64) -> u64 {
        if !self.cfg.xor_fold_hash || self.layout.set_bits == 0 {
            return hi;
        }
        let mask = self.cfg.llc_sets - 1;
        let mut acc = hi;
        let mut rest = lo;
        let mut bits = self.layout.tag_bits;
        while bits > 0 {
            acc ^= rest & mask;
            rest >>= self.layout.set_bits;
            bits = bits.saturating_sub(self.layout.set_bits);
        }
        acc & mask
    }

    /// Tracking-side placement of a row: set by the top row bits (optionally
    /// xor-folded), tag from the low bits, untagged way/byte from the tag.
    pub fn map_row(&self, row: RowId) -> RowMapping {
        debug_assert!(row < self.cfg.row_count);
        let l = &self.layout;
        let hi = row >> l.tag_bits;
        let tag = row & (l.rows_per_set - 1);
        RowMapping {
            set_index: self.fold_set(hi, tag),
            row_tag: tag,
            untagged_way: tag >> l.untagged_byte_bits,
            untagged_byte: tag & ((1u64 << l.untagged_byte_bits) - 1),
        }
    }

    /// Inverse of `map_row` restricted to (set, tag); only valid without
    /// xor folding when reconstructing from a stored tag.
    pub fn row_of(&self, set_index: u64, row_tag: u64) -> RowId {
        let hi = if self.cfg.xor_fold_hash {
            self.fold_set(set_index, row_tag)
        } else {
            set_index
        };
        (hi << self.layout.tag_bits) | row_tag
    }

    /// Demand-side decomposition: line offset, then bank interleave at line
    /// granularity, then the in-bank row from the top bits.
    pub fn map_address(&self, addr: u64) -> AddressMapping {
        debug_assert!(addr < self.cfg.total_bytes(), "address out of range");
        let l = &self.layout;
        let line_addr = addr >> l.line_offset_bits;
        let bank = line_addr & (self.cfg.bank_count - 1);
        let in_bank_row = addr >> (self.cfg.row_size_bytes.trailing_zeros() + l.bank_bits);
        AddressMapping {
            bank,
            row_id: bank * l.rows_per_bank + in_bank_row,
            llc_set: line_addr & (self.cfg.llc_sets - 1),
            llc_tag: line_addr >> l.set_bits,
        }
    }

    /// Base address of a row's first line.
    pub fn row_base_addr(&self, row: RowId) -> u64 {
        let l = &self.layout;
        let bank = row / l.rows_per_bank;
        let in_bank = row % l.rows_per_bank;
        in_bank * self.cfg.row_size_bytes * self.cfg.bank_count + bank * self.cfg.line_bytes
    }

    /// Address of the k-th line belonging to a row. Lines of one row are
    /// strided by bank_count lines in the flat address space.
    pub fn row_line_addr(&self, row: RowId, k: u64) -> u64 {
        debug_assert!(k < self.lines_per_row());
        self.row_base_addr(row) + k * self.cfg.line_bytes * self.cfg.bank_count
    }

    pub fn lines_per_row(&self) -> u64 {
        self.cfg.row_size_bytes / self.cfg.line_bytes
    }

    pub fn bank_of_row(&self, row: RowId) -> u64 {
        row / self.layout.rows_per_bank
    }

    /// Row-id range [lo, hi] sharing this row's bank.
    pub fn bank_row_range(&self, row: RowId) -> (RowId, RowId) {
        let lo = (row / self.layout.rows_per_bank) * self.layout.rows_per_bank;
        (lo, lo + self.layout.rows_per_bank - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::{TrackerConfig, Variant};
    use proptest::prelude::*;

    fn tcfg(variant: Variant, t_rh: u64, counter_bits: u32) -> TrackerConfig {
        TrackerConfig {
            counter_bits: Some(counter_bits),
            ..TrackerConfig::new(variant, t_rh)
        }
    }

    /// Reference geometry, 8M rows over 16K sets.
    fn reference() -> GeometryConfig {
        GeometryConfig::default()
    }

    fn desk() -> GeometryConfig {
        GeometryConfig {
            row_count: 32 << 10,
            row_size_bytes: 8192,
            bank_count: 8,
            line_bytes: 64,
            llc_sets: 64,
            llc_ways: 16,
            ..GeometryConfig::default()
        }
    }

    #[test]
    fn reference_layout_tagged_two_byte_entries() {
        let layout = validate(&reference(), &tcfg(Variant::StartD, 256, 7)).unwrap();
        assert_eq!(layout.row_bits, 23);
        assert_eq!(layout.set_bits, 14);
        assert_eq!(layout.tag_bits, 9);
        assert_eq!(layout.rows_per_set, 512);
        assert_eq!(layout.tagged_entry_bytes, 2);
        assert_eq!(layout.entries_per_line, 32);
        assert!(!layout.valid_bit_in_band);
        assert_eq!(layout.effective_threshold, 128);
    }

    #[test]
    fn wide_layout_three_byte_entries() {
        // 512 GiB scale: 64M rows, same 16K-set LLC.
        let cfg = GeometryConfig {
            row_count: 64 << 20,
            ..reference()
        };
        let layout = validate(&cfg, &tcfg(Variant::StartM, 4096, 11)).unwrap();
        assert_eq!(layout.tag_bits, 12);
        assert_eq!(layout.tagged_entry_bytes, 3);
        assert_eq!(layout.entries_per_line, 21);
        assert!(layout.valid_bit_in_band);
        assert_eq!(layout.all_s1_entries(cfg.llc_sets), 344_064);
        assert_eq!(layout.all_s3_entries(cfg.llc_sets), 2_752_512);
    }

    #[test]
    fn desk_layout_six_bit_counter() {
        let layout = validate(&desk(), &tcfg(Variant::StartD, 64, 6)).unwrap();
        assert_eq!(layout.tag_bits, 9);
        assert_eq!(layout.tagged_entry_bytes, 2);
        assert!(layout.valid_bit_in_band);
        assert_eq!(layout.effective_threshold, 32);
    }

    #[test]
    fn structural_constants_reference() {
        let cfg = reference();
        let layout = validate(&cfg, &tcfg(Variant::StartD, 256, 7)).unwrap();
        assert_eq!(layout.sac_table_bytes(cfg.llc_sets), 4096);
        assert_eq!(layout.all_s1_entries(cfg.llc_sets), 524_288);
        // One byte per row at 8-way untagged: half of the 16 MiB LLC.
        assert_eq!(cfg.row_count, cfg.llc_bytes() / 2);
        assert_eq!(cfg.llc_sets * 8 * cfg.line_bytes, cfg.llc_bytes() / 2);
    }

    #[test]
    fn map_row_frozen_example() {
        let geom = Geometry::new(reference(), &tcfg(Variant::StartD, 256, 7)).unwrap();
        let row = (5 << 9) | 0b101_000011;
        let m = geom.map_row(row);
        assert_eq!(m.set_index, 5);
        assert_eq!(m.row_tag, 0b101_000011);
        assert_eq!(m.untagged_way, 5);
        assert_eq!(m.untagged_byte, 3);

        let last = geom.cfg.row_count - 1;
        let m = geom.map_row(last);
        assert_eq!(m.set_index, geom.cfg.llc_sets - 1);
        assert_eq!(m.row_tag, geom.layout.rows_per_set - 1);
        assert_eq!(m.untagged_way, 7);
        assert_eq!(m.untagged_byte, geom.layout.rows_per_set / 8 - 1);
    }

    #[test]
    fn map_address_frozen_examples() {
        let geom = Geometry::new(reference(), &tcfg(Variant::StartD, 256, 7)).unwrap();
        let a0 = geom.map_address(0);
        assert_eq!((a0.bank, a0.row_id, a0.llc_set), (0, 0, 0));

        // One line over: next bank, same row region.
        let a1 = geom.map_address(geom.cfg.line_bytes);
        assert_eq!(a1.bank, 1);
        assert_eq!(a1.row_id, geom.layout.rows_per_bank);

        // One full row-interleave period over: row 1 of bank 0.
        let a2 = geom.map_address(geom.cfg.row_size_bytes * geom.cfg.bank_count);
        assert_eq!(a2.bank, 0);
        assert_eq!(a2.row_id, 1);
    }

    #[test]
    fn row_line_addresses_map_back() {
        let geom = Geometry::new(desk(), &tcfg(Variant::StartD, 64, 6)).unwrap();
        for row in [0u64, 1, 7, 4095, 4096, 32767] {
            for k in [0, 1, geom.lines_per_row() - 1] {
                let addr = geom.row_line_addr(row, k);
                let m = geom.map_address(addr);
                assert_eq!(m.row_id, row, "row {row} line {k}");
                assert_eq!(m.bank, geom.bank_of_row(row));
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let t = tcfg(Variant::StartD, 256, 7);
        let errs = validate(
            &GeometryConfig {
                row_count: 3000,
                ..reference()
            },
            &t,
        )
        .unwrap_err();
        assert!(matches!(
            errs[0],
            GeometryError::NonPowerOfTwo {
                field: "row_count",
                ..
            }
        ));

        // 6-bit counter cannot count to the 128-threshold.
        let errs = validate(&reference(), &tcfg(Variant::StartD, 256, 6)).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, GeometryError::CounterTooNarrow { .. })));

        // Boundary: 2^bits == threshold is accepted, the counter resets
        // exactly when it would saturate.
        assert!(validate(&reference(), &tcfg(Variant::StartD, 256, 7)).is_ok());

        // Untagged byte budget: 64M rows / 16K sets = 4096 rows per set
        // exceeds 8 * 64 bytes.
        let errs = validate(
            &GeometryConfig {
                row_count: 64 << 20,
                ..reference()
            },
            &tcfg(Variant::StartD, 256, 7),
        )
        .unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, GeometryError::UntaggedModeInfeasible { .. })));

        let errs = validate(
            &GeometryConfig {
                llc_ways: 4,
                ..reference()
            },
            &t,
        )
        .unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, GeometryError::WaysInsufficient { .. })));
    }

    #[test]
    fn config_file_roundtrip_and_unknown_keys() {
        let text = "row_count = 32768\nrow_size_bytes = 8192\nbank_count = 8\n\
                    llc_sets = 64\nllc_ways = 16\n";
        let cfg = GeometryConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.line_bytes, 64);
        assert_eq!(cfg.window_ns, 64_000_000);
        assert_eq!(cfg.trc_ns, 45);
        assert_eq!(cfg.page_policy, PagePolicy::OpenRow);

        let bad = GeometryConfig::from_toml_str(&format!("{text}typo_key = 3\n"));
        assert!(matches!(bad, Err(GeometryError::Config(_))));
    }

    proptest! {
        #[test]
        fn map_row_bijection(row in 0u64..(32 << 10), fold in proptest::bool::ANY) {
            let geom = Geometry::new(
                GeometryConfig { xor_fold_hash: fold, ..desk() },
                &tcfg(Variant::StartD, 64, 6),
            ).unwrap();
            let m = geom.map_row(row);
            prop_assert!(m.set_index < geom.cfg.llc_sets);
            prop_assert!(m.row_tag < geom.layout.rows_per_set);
            prop_assert_eq!(geom.row_of(m.set_index, m.row_tag), row);
            // way/byte split is itself a bijection on the tag
            let tag = (m.untagged_way << geom.layout.untagged_byte_bits) | m.untagged_byte;
            prop_assert_eq!(tag, m.row_tag);
        }

        #[test]
        fn map_address_consistent(addr in 0u64..(32u64 << 10) * 8192) {
            let geom = Geometry::new(desk(), &tcfg(Variant::StartD, 64, 6)).unwrap();
            let m = geom.map_address(addr);
            prop_assert!(m.row_id < geom.cfg.row_count);
            prop_assert_eq!(m.bank, geom.bank_of_row(m.row_id));
            prop_assert!(m.llc_set < geom.cfg.llc_sets);
            // reconstruct the line address from (set, tag)
            let line_addr = (m.llc_tag << geom.layout.set_bits) | m.llc_set;
            prop_assert_eq!(line_addr, addr >> geom.layout.line_offset_bits);
        }
    }
}
