//! Symbol alphabets and the value bucketing shared by positions and lengths.
//!
//! Values 0..=3 are their own buckets. From bucket 4 on, bucket `b` carries
//! `b/2 - 1` extra bits and starts at `(2 + b%2) << extra`, so each pair of
//! buckets doubles the covered range.

/// Position-table symbol closing a block.
pub const END_OF_BLOCK: u16 = 0;
/// Position-table symbol announcing a table rebuild.
pub const REBUILD: u16 = 1;
/// Position-table symbol for a tuple without a match.
pub const LITERAL_ONLY: u16 = 2;
/// First position-bucket symbol.
pub const POSITION_BASE: u16 = 3;
/// Literal-table symbol for a match that ends the packet.
pub const NO_LITERAL: u16 = 256;
pub const LITERAL_SYMBOLS: usize = 257;

pub fn bucket_of(value: u32) -> u16 {
    if value < 4 {
        return value as u16;
    }
    let high = 31 - value.leading_zeros();
    (2 * high + ((value >> (high - 1)) & 1)) as u16
}

pub fn extra_bits(bucket: u16) -> u32 {
    if bucket < 4 {
        0
    } else {
        bucket as u32 / 2 - 1
    }
}

pub fn bucket_base(bucket: u16) -> u32 {
    if bucket < 4 {
        bucket as u32
    } else {
        (2 + bucket as u32 % 2) << extra_bits(bucket)
    }
}

/// Number of buckets needed to cover every value in `[0, max_value]`.
pub fn bucket_count(max_value: u32) -> usize {
    bucket_of(max_value) as usize + 1
}

/// Splits a value into `(bucket, extra_payload, extra_width)`.
pub fn split_value(value: u32) -> (u16, u32, u32) {
    let b = bucket_of(value);
    (b, value - bucket_base(b), extra_bits(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabets {
    position_buckets: usize,
    length_buckets: usize,
    min_match: usize,
}

impl Alphabets {
    /// `window_capacity` bounds positions to `[0, window_capacity)` and match
    /// lengths are bucketed on `length - min_match`.
    pub fn new(window_capacity: usize, min_match: usize, max_match: usize) -> Self {
        assert!(window_capacity >= 1 && max_match >= min_match);
        Alphabets {
            position_buckets: bucket_count((window_capacity - 1) as u32),
            length_buckets: bucket_count((max_match - min_match) as u32),
            min_match,
        }
    }

    pub fn position_buckets(&self) -> usize {
        self.position_buckets
    }

    pub fn position_size(&self) -> usize {
        POSITION_BASE as usize + self.position_buckets
    }

    pub fn length_size(&self) -> usize {
        self.length_buckets
    }

    pub fn literal_size(&self) -> usize {
        LITERAL_SYMBOLS
    }

    pub fn min_match(&self) -> usize {
        self.min_match
    }

    pub fn position_symbol(&self, position: usize) -> u16 {
        POSITION_BASE + bucket_of(position as u32)
    }

    pub fn length_symbol(&self, length: usize) -> u16 {
        bucket_of((length - self.min_match) as u32)
    }

    pub fn literal_symbol(literal: Option<u8>) -> u16 {
        literal.map_or(NO_LITERAL, u16::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_layout() {
        let expect = [
            (0, 0, 0),
            (3, 3, 0),
            (4, 4, 1),
            (5, 6, 1),
            (6, 8, 2),
            (7, 12, 2),
            (8, 16, 3),
        ];
        for (b, base, extra) in expect {
            assert_eq!(bucket_base(b), base, "bucket {b}");
            assert_eq!(extra_bits(b), extra, "bucket {b}");
        }
    }

    #[test]
    fn exhaustive_round_trip_to_2_16() {
        for v in 0..(1u32 << 16) {
            let (b, payload, width) = split_value(v);
            assert!(width == 0 && payload == 0 || payload < (1 << width));
            assert_eq!(bucket_base(b) + payload, v);
        }
    }

    #[test]
    fn sampled_round_trip_to_2_24() {
        let mut v = 1u32 << 16;
        while v < 1 << 24 {
            let (b, payload, width) = split_value(v);
            assert!(payload < (1 << width));
            assert_eq!(bucket_base(b) + payload, v);
            v += 7919;
        }
    }

    #[test]
    fn default_alphabet_sizes() {
        let a = Alphabets::new(32768, 3, 258);
        assert_eq!(a.position_buckets(), 30);
        assert_eq!(a.position_size(), 33);
        assert_eq!(a.length_size(), 16);
        assert_eq!(a.length_symbol(3), 0);
        assert_eq!(a.length_symbol(258), 15);
        // single-length range collapses to one bucket
        assert_eq!(Alphabets::new(16, 4, 4).length_size(), 1);
    }
}
