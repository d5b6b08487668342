//! MSB-first bit packing over in-memory byte buffers.
//!
//! Fields are written most-significant bit first and bytes fill from their
//! high bit down, so a canonical prefix code can be decoded by consuming bits
//! left to right. Alignment pads with zero bits.

use thiserror::Error;

/// Widest field accepted by a single write or read.
pub const MAX_FIELD_BITS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitError {
    #[error("field width {0} exceeds {MAX_FIELD_BITS} bits")]
    WidthTooLarge(u32),
    #[error("value {value:#x} does not fit in {width} bits")]
    ValueTooWide { value: u64, width: u32 },
    #[error("truncated input: needed {needed} bits at bit offset {bit_offset}, {available} available")]
    Truncated {
        bit_offset: u64,
        needed: u32,
        available: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    buffer: Vec<u8>,
    bit_position: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bytes: usize) -> Self {
        Self {
            buffer: Vec::with_capacity(bytes),
            bit_position: 0,
        }
    }

    pub fn bit_position(&self) -> u64 {
        self.bit_position
    }

    pub fn is_aligned(&self) -> bool {
        self.bit_position.is_multiple_of(8)
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u32, width: u32) -> Result<(), BitError> {
        if width > MAX_FIELD_BITS {
            return Err(BitError::WidthTooLarge(width));
        }
        if width < 32 && (value as u64) >> width != 0 {
            return Err(BitError::ValueTooWide {
                value: value as u64,
                width,
            });
        }
        let mut remaining = width;
        while remaining > 0 {
            let used = (self.bit_position % 8) as u32;
            if used == 0 {
                self.buffer.push(0);
            }
            let free = 8 - used;
            let take = free.min(remaining);
            let chunk = ((value as u64 >> (remaining - take)) & ((1u64 << take) - 1)) as u8;
            let last = self.buffer.last_mut().expect("byte pushed above");
            *last |= chunk << (free - take);
            remaining -= take;
            self.bit_position += take as u64;
        }
        Ok(())
    }

    pub fn write_bit(&mut self, bit: bool) {
        self.write_bits(bit as u32, 1).expect("single bit always fits");
    }

    /// Pads with zero bits up to the next byte boundary. No-op when aligned.
    pub fn align_to_byte(&mut self) {
        let rem = self.bit_position % 8;
        if rem != 0 {
            // pending byte already holds zeros in its unused low bits
            self.bit_position += 8 - rem;
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buffer
    }

    /// Aligns and returns the finished buffer.
    pub fn into_bytes(mut self) -> Vec<u8> {
        self.align_to_byte();
        self.buffer
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    source: &'a [u8],
    bit_position: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(source: &'a [u8]) -> Self {
        Self {
            source,
            bit_position: 0,
        }
    }

    pub fn bit_position(&self) -> u64 {
        self.bit_position
    }

    pub fn bits_remaining(&self) -> u64 {
        self.source.len() as u64 * 8 - self.bit_position
    }

    pub fn is_aligned(&self) -> bool {
        self.bit_position.is_multiple_of(8)
    }

    /// Reads a `width`-bit field written by [`BitWriter::write_bits`].
    pub fn read_bits(&mut self, width: u32) -> Result<u32, BitError> {
        if width > MAX_FIELD_BITS {
            return Err(BitError::WidthTooLarge(width));
        }
        if (width as u64) > self.bits_remaining() {
            return Err(BitError::Truncated {
                bit_offset: self.bit_position,
                needed: width,
                available: self.bits_remaining(),
            });
        }
        let mut value = 0u64;
        let mut remaining = width;
        while remaining > 0 {
            let byte = self.source[(self.bit_position / 8) as usize];
            let used = (self.bit_position % 8) as u32;
            let avail = 8 - used;
            let take = avail.min(remaining);
            let chunk = (byte >> (avail - take)) & (((1u16 << take) - 1) as u8);
            value = (value << take) | chunk as u64;
            remaining -= take;
            self.bit_position += take as u64;
        }
        Ok(value as u32)
    }

    pub fn read_bit(&mut self) -> Result<bool, BitError> {
        Ok(self.read_bits(1)? == 1)
    }

    /// Skips to the next byte boundary and returns the skipped bits, so the
    /// caller can insist they are zero.
    pub fn align_to_byte(&mut self) -> u32 {
        let rem = (self.bit_position % 8) as u32;
        if rem == 0 {
            return 0;
        }
        self.read_bits(8 - rem)
            .expect("a partial byte always has its tail available")
    }

    pub fn byte_position(&self) -> usize {
        self.bit_position.div_ceil(8) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_bits_then_pad() {
        let mut w = BitWriter::new();
        w.write_bits(0b101, 3).unwrap();
        assert_eq!(w.into_bytes(), vec![0b1010_0000]);
    }

    #[test]
    fn zero_width_write_is_noop() {
        let mut w = BitWriter::new();
        w.write_bits(0, 0).unwrap();
        assert_eq!(w.bit_position(), 0);
        assert!(w.as_bytes().is_empty());
        assert!(matches!(
            w.write_bits(1, 0),
            Err(BitError::ValueTooWide { .. })
        ));
    }

    #[test]
    fn thirteen_bits_align_to_two_bytes() {
        let mut w = BitWriter::new();
        w.write_bits(0x1fff, 13).unwrap();
        assert_eq!(w.bit_position(), 13);
        w.align_to_byte();
        assert_eq!(w.bit_position(), 16);
        let bytes = w.as_bytes();
        assert_eq!(bytes.len(), 2);
        assert_eq!(bytes[1] & 0b111, 0);
        w.align_to_byte();
        assert_eq!(w.bit_position(), 16);
        assert_eq!(w.as_bytes().len(), 2);
    }

    #[test]
    fn usage_errors() {
        let mut w = BitWriter::new();
        assert_eq!(w.write_bits(0, 33), Err(BitError::WidthTooLarge(33)));
        assert!(w.write_bits(8, 3).is_err());
        w.write_bits(u32::MAX, 32).unwrap();
        assert_eq!(w.into_bytes(), vec![0xff; 4]);
    }

    #[test]
    fn read_zero_and_past_end() {
        let data = [0xa5u8];
        let mut r = BitReader::new(&data);
        assert_eq!(r.read_bits(0).unwrap(), 0);
        assert_eq!(r.bit_position(), 0);
        assert_eq!(r.read_bits(4).unwrap(), 0xa);
        assert!(matches!(
            r.read_bits(5),
            Err(BitError::Truncated {
                bit_offset: 4,
                needed: 5,
                available: 4
            })
        ));
        assert_eq!(r.bit_position(), 4);
        assert_eq!(r.read_bits(4).unwrap(), 0x5);
        assert!(r.read_bit().is_err());
    }

    #[test]
    fn random_round_trip_thousand_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let fields: Vec<(u32, u32)> = (0..1000)
            .map(|_| {
                let n = rng.gen_range(0..=32u32);
                let v = if n == 0 { 0 } else { rng.gen::<u32>() >> (32 - n) };
                (v, n)
            })
            .collect();
        let mut w = BitWriter::new();
        for &(v, n) in &fields {
            w.write_bits(v, n).unwrap();
        }
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes);
        for &(v, n) in &fields {
            assert_eq!(r.read_bits(n).unwrap(), v);
        }
        assert!(r.bits_remaining() < 8);
    }

    proptest! {
        #[test]
        fn round_trip_and_zero_padding(fields in prop::collection::vec((any::<u32>(), 0u32..=32), 0..64)) {
            let fields: Vec<(u32, u32)> = fields
                .into_iter()
                .map(|(v, n)| (if n == 0 { 0 } else if n == 32 { v } else { v & ((1 << n) - 1) }, n))
                .collect();
            let mut w = BitWriter::new();
            for &(v, n) in &fields {
                w.write_bits(v, n).unwrap();
            }
            let total = w.bit_position();
            let bytes = w.into_bytes();
            prop_assert_eq!(bytes.len() as u64, total.div_ceil(8));
            let pad = (8 - total % 8) % 8;
            if pad > 0 {
                prop_assert_eq!(bytes.last().unwrap() & ((1u8 << pad) - 1), 0);
            }
            let mut r = BitReader::new(&bytes);
            for &(v, n) in &fields {
                prop_assert_eq!(r.read_bits(n).unwrap(), v);
            }
            prop_assert_eq!(r.align_to_byte(), 0);
        }
    }
}
