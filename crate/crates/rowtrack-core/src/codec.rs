//! Bit-level codec for tracking entries packed into reserved cache lines.
//!
//! A tagged entry is `tag | counter << tag_bits`, little-endian in
//! `entry_bytes` bytes. The valid flag is packed in-band when the entry
//! has a spare bit; otherwise it lives in a per-line shadow bitmap (the
//! 2-byte layout has no spare bit, validity there costs no line bytes).
//! Untagged lines are plain one-byte-per-row counter arrays.

use crate::geometry::DerivedLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackingEntry {
    pub tag: u64,
    pub counter: u64,
}

/// One reserved line: the byte image plus the validity bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackLine {
    pub bytes: Box<[u8]>,
    valid: Box<[u64]>,
}

impl TrackLine {
    pub fn new(line_bytes: usize, entries_per_line: usize) -> Self {
        TrackLine {
            bytes: vec![0u8; line_bytes].into_boxed_slice(),
            valid: vec![0u64; entries_per_line.div_ceil(64).max(1)].into_boxed_slice(),
        }
    }

    pub fn clear(&mut self) {
        self.bytes.fill(0);
        self.valid.fill(0);
    }

    fn is_valid(&self, slot: usize) -> bool {
        self.valid[slot / 64] >> (slot % 64) & 1 == 1
    }

    fn set_valid(&mut self, slot: usize, v: bool) {
        if v {
            self.valid[slot / 64] |= 1 << (slot % 64);
        } else {
            self.valid[slot / 64] &= !(1 << (slot % 64));
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LineCodec {
    pub tag_bits: u32,
    pub counter_bits: u32,
    pub entry_bytes: usize,
    pub entries_per_line: usize,
    pub valid_in_band: bool,
}

impl LineCodec {
    pub fn from_layout(l: &DerivedLayout) -> Self {
        assert!(l.tagged_entry_bytes <= 8, "entry wider than u64");
        LineCodec {
            tag_bits: l.tag_bits,
            counter_bits: l.counter_bits,
            entry_bytes: l.tagged_entry_bytes as usize,
            entries_per_line: l.entries_per_line as usize,
            valid_in_band: l.valid_bit_in_band,
        }
    }

    pub fn new_line(&self, line_bytes: usize) -> TrackLine {
        TrackLine::new(line_bytes, self.entries_per_line)
    }

    fn raw(&self, line: &TrackLine, slot: usize) -> u64 {
        let off = slot * self.entry_bytes;
        let mut v = 0u64;
        for (i, b) in line.bytes[off..off + self.entry_bytes].iter().enumerate() {
            v |= (*b as u64) << (8 * i);
        }
        v
    }

    fn put_raw(&self, line: &mut TrackLine, slot: usize, v: u64) {
        let off = slot * self.entry_bytes;
        for i in 0..self.entry_bytes {
            line.bytes[off + i] = (v >> (8 * i)) as u8;
        }
    }

    pub fn read(&self, line: &TrackLine, slot: usize) -> Option<TrackingEntry> {
        if !line.is_valid(slot) {
            return None;
        }
        let raw = self.raw(line, slot);
        Some(TrackingEntry {
            tag: raw & self.mask(self.tag_bits),
            counter: (raw >> self.tag_bits) & self.mask(self.counter_bits),
        })
    }

    pub fn write(&self, line: &mut TrackLine, slot: usize, e: TrackingEntry) {
        debug_assert!(e.tag <= self.mask(self.tag_bits));
        debug_assert!(e.counter <= self.mask(self.counter_bits));
        let mut raw = e.tag | (e.counter << self.tag_bits);
        if self.valid_in_band {
            raw |= 1 << (self.tag_bits + self.counter_bits);
        }
        self.put_raw(line, slot, raw);
        line.set_valid(slot, true);
    }

    pub fn invalidate(&self, line: &mut TrackLine, slot: usize) {
        self.put_raw(line, slot, 0);
        line.set_valid(slot, false);
    }

    pub fn find_tag(&self, line: &TrackLine, tag: u64) -> Option<usize> {
        (0..self.entries_per_line).find(|&s| self.read(line, s).is_some_and(|e| e.tag == tag))
    }

    pub fn first_free(&self, line: &TrackLine) -> Option<usize> {
        (0..self.entries_per_line).find(|&s| !line.is_valid(s))
    }

    pub fn iter_valid<'a>(
        &'a self,
        line: &'a TrackLine,
    ) -> impl Iterator<Item = (usize, TrackingEntry)> + 'a {
        (0..self.entries_per_line).filter_map(move |s| self.read(line, s).map(|e| (s, e)))
    }

    /// Valid entry with the smallest counter, ties to the lowest slot.
    pub fn min_counter_slot(&self, line: &TrackLine) -> Option<(usize, TrackingEntry)> {
        self.iter_valid(line)
            .min_by_key(|(slot, e)| (e.counter, *slot))
    }

    fn mask(&self, bits: u32) -> u64 {
        if bits == 0 {
            0
        } else {
            u64::MAX >> (64 - bits)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn codec(tag_bits: u32, counter_bits: u32, line_bytes: usize) -> LineCodec {
        let packed = tag_bits + counter_bits;
        let entry_bytes = (packed.div_ceil(8)).max(1) as usize;
        LineCodec {
            tag_bits,
            counter_bits,
            entry_bytes,
            entries_per_line: line_bytes / entry_bytes,
            valid_in_band: (packed as usize) < entry_bytes * 8,
        }
    }

    #[test]
    fn frozen_two_byte_image() {
        // 9-bit tag 0b101000011, 7-bit counter 100:
        // raw = 323 | 100 << 9 = 0xC943, little-endian [0x43, 0xC9].
        let c = codec(9, 7, 64);
        assert!(!c.valid_in_band);
        assert_eq!(c.entries_per_line, 32);
        let mut line = c.new_line(64);
        c.write(
            &mut line,
            3,
            TrackingEntry {
                tag: 0b101_000011,
                counter: 100,
            },
        );
        assert_eq!(&line.bytes[6..8], &[0x43, 0xC9]);
        assert_eq!(
            c.read(&line, 3),
            Some(TrackingEntry {
                tag: 323,
                counter: 100
            })
        );
        assert_eq!(c.read(&line, 2), None);
        assert_eq!(c.find_tag(&line, 323), Some(3));
        assert_eq!(c.first_free(&line), Some(0));
    }

    #[test]
    fn frozen_three_byte_image_with_inband_valid() {
        // 12-bit tag 0xABC, 11-bit counter 0x3FF, valid bit 23:
        // raw = 0xBFFABC, little-endian [0xBC, 0xFA, 0xBF].
        let c = codec(12, 11, 64);
        assert!(c.valid_in_band);
        assert_eq!(c.entries_per_line, 21);
        let mut line = c.new_line(64);
        c.write(
            &mut line,
            0,
            TrackingEntry {
                tag: 0xABC,
                counter: 0x3FF,
            },
        );
        assert_eq!(&line.bytes[0..3], &[0xBC, 0xFA, 0xBF]);
        c.invalidate(&mut line, 0);
        assert_eq!(c.read(&line, 0), None);
        assert_eq!(&line.bytes[0..3], &[0, 0, 0]);
    }

    #[test]
    fn min_counter_victim_breaks_ties_low() {
        let c = codec(9, 7, 64);
        let mut line = c.new_line(64);
        for (slot, counter) in [(0, 5u64), (1, 3), (2, 3), (3, 9)] {
            c.write(
                &mut line,
                slot,
                TrackingEntry {
                    tag: slot as u64,
                    counter,
                },
            );
        }
        let (slot, e) = c.min_counter_slot(&line).unwrap();
        assert_eq!((slot, e.counter), (1, 3));
    }

    proptest! {
        #[test]
        fn roundtrip_any_geometry(
            tag_bits in 1u32..16,
            counter_bits in 1u32..12,
            writes in proptest::collection::vec((0usize..21, 0u64..4096, 0u64..2048), 1..40),
        ) {
            let c = codec(tag_bits, counter_bits, 64);
            prop_assume!(c.entries_per_line >= 21);
            let mut line = c.new_line(64);
            let mut model: std::collections::HashMap<usize, TrackingEntry> =
                Default::default();
            for (slot, tag, counter) in writes {
                let e = TrackingEntry {
                    tag: tag & ((1 << tag_bits) - 1),
                    counter: counter & ((1 << counter_bits) - 1),
                };
                c.write(&mut line, slot, e);
                model.insert(slot, e);
            }
            for slot in 0..c.entries_per_line {
                prop_assert_eq!(c.read(&line, slot), model.get(&slot).copied());
            }
        }
    }
}
