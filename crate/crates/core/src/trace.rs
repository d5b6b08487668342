//! Packet traces and the PKT1 file format.
//!
//! ```text
//! "PKT1" | version u8 = 1 | count u32 LE | count × (len u32 LE | payload)
//! ```

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

pub const TRACE_MAGIC: &[u8; 4] = b"PKT1";
pub const TRACE_VERSION: u8 = 1;
pub const TRACE_HEADER_LEN: usize = 9;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
}

fn format_err(offset: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Format {
        offset,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketTrace {
    pub packets: Vec<Vec<u8>>,
}

impl PacketTrace {
    pub fn new(packets: Vec<Vec<u8>>) -> Self {
        PacketTrace { packets }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.packets.iter().map(|p| p.len() as u64).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.packets.iter().map(Vec::as_slice)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TRACE_HEADER_LEN + self.total_bytes() as usize + 4 * self.len());
        out.extend_from_slice(TRACE_MAGIC);
        out.push(TRACE_VERSION);
        out.extend_from_slice(&(self.packets.len() as u32).to_le_bytes());
        for p in &self.packets {
            out.extend_from_slice(&(p.len() as u32).to_le_bytes());
            out.extend_from_slice(p);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TraceError> {
        if bytes.len() < 4 || &bytes[..4] != TRACE_MAGIC {
            return Err(format_err(0, "bad magic, expected \"PKT1\""));
        }
        match bytes.get(4) {
            Some(&TRACE_VERSION) => {}
            Some(v) => return Err(format_err(4, format!("unsupported version {v}"))),
            None => return Err(format_err(4, "truncated header")),
        }
        let count = read_u32(bytes, 5)? as usize;
        let mut offset = TRACE_HEADER_LEN;
        // each record needs at least its length prefix
        let mut packets = Vec::with_capacity(count.min((bytes.len() - offset) / 4));
        for i in 0..count {
            let len = read_u32(bytes, offset)
                .map_err(|_| format_err(offset, format!("truncated length of packet {i}")))?
                as usize;
            let start = offset + 4;
            let end = start
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| {
                    format_err(
                        bytes.len(),
                        format!("packet {i} needs {len} payload bytes from byte {start}"),
                    )
                })?;
            packets.push(bytes[start..end].to_vec());
            offset = end;
        }
        if offset != bytes.len() {
            return Err(format_err(
                offset,
                format!("{} bytes after the {count} declared packets", bytes.len() - offset),
            ));
        }
        Ok(PacketTrace { packets })
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, TraceError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(offset, "truncated integer"))
}

pub fn write_trace(path: impl AsRef<Path>, trace: &PacketTrace) -> Result<(), TraceError> {
    fs::write(path, trace.to_bytes())?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<PacketTrace, TraceError> {
    PacketTrace::from_bytes(&fs::read(path)?)
}

/// Packet-length classes used for ratio attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeCategory {
    /// 0–10 bytes
    VerySmall,
    /// 11–100 bytes
    Small,
    /// 101–1000 bytes
    Medium,
    /// over 1000 bytes
    Large,
}

impl SizeCategory {
    pub const ALL: [SizeCategory; 4] = [
        SizeCategory::VerySmall,
        SizeCategory::Small,
        SizeCategory::Medium,
        SizeCategory::Large,
    ];

    pub fn of(len: usize) -> Self {
        match len {
            0..=10 => SizeCategory::VerySmall,
            11..=100 => SizeCategory::Small,
            101..=1000 => SizeCategory::Medium,
            _ => SizeCategory::Large,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SizeCategory::VerySmall => "very_small",
            SizeCategory::Small => "small",
            SizeCategory::Medium => "medium",
            SizeCategory::Large => "large",
        }
    }

    pub fn range_label(self) -> &'static str {
        match self {
            SizeCategory::VerySmall => "0-10",
            SizeCategory::Small => "11-100",
            SizeCategory::Medium => "101-1000",
            SizeCategory::Large => ">1000",
        }
    }
}

/// Histogram bucket of a packet length: bucket 0 is 0–10, bucket i ≥ 1 is
/// `10i+1 ..= 10(i+1)`.
pub fn histogram_bucket(len: usize) -> usize {
    if len <= 10 {
        0
    } else {
        (len - 1) / 10
    }
}

pub fn histogram_bucket_range(bucket: usize) -> (usize, usize) {
    if bucket == 0 {
        (0, 10)
    } else {
        (10 * bucket + 1, 10 * (bucket + 1))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub packet_count: u64,
    pub total_bytes: u64,
    pub histogram: Vec<u64>,
    pub category_counts: [u64; 4],
    pub category_bytes: [u64; 4],
}

impl TraceStats {
    /// Fraction of packets no longer than `len` bytes.
    pub fn fraction_at_most(&self, len: usize) -> f64 {
        if self.packet_count == 0 {
            return 0.0;
        }
        let covered: u64 = self
            .histogram
            .iter()
            .enumerate()
            .filter(|(b, _)| histogram_bucket_range(*b).1 <= len)
            .map(|(_, c)| c)
            .sum();
        covered as f64 / self.packet_count as f64
    }

    pub fn mean_len(&self) -> f64 {
        if self.packet_count == 0 {
            0.0
        } else {
            self.total_bytes as f64 / self.packet_count as f64
        }
    }
}

pub fn trace_stats(trace: &PacketTrace) -> TraceStats {
    let mut stats = TraceStats::default();
    for p in trace.iter() {
        let len = p.len();
        stats.packet_count += 1;
        stats.total_bytes += len as u64;
        let b = histogram_bucket(len);
        if stats.histogram.len() <= b {
            stats.histogram.resize(b + 1, 0);
        }
        stats.histogram[b] += 1;
        let c = SizeCategory::of(len).index();
        stats.category_counts[c] += 1;
        stats.category_bytes[c] += len as u64;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_trace_is_nine_bytes() {
        let bytes = PacketTrace::default().to_bytes();
        assert_eq!(bytes.len(), 9);
        assert_eq!(&bytes[..5], b"PKT1\x01");
        assert_eq!(PacketTrace::from_bytes(&bytes).unwrap(), PacketTrace::default());
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let t = PacketTrace::new(vec![b"abc".to_vec(), b"hello".to_vec()]);
        let bytes = t.to_bytes();
        let cut = &bytes[..bytes.len() - 1];
        match PacketTrace::from_bytes(cut) {
            Err(TraceError::Format { offset, .. }) => assert_eq!(offset, cut.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            PacketTrace::from_bytes(b"PKT2\x01\0\0\0\0"),
            Err(TraceError::Format { offset: 0, .. })
        ));
        assert!(matches!(
            PacketTrace::from_bytes(b"PKT1\x02\0\0\0\0"),
            Err(TraceError::Format { offset: 4, .. })
        ));
        assert!(matches!(
            PacketTrace::from_bytes(b"PKT1\x01\0\0"),
            Err(TraceError::Format { offset: 5, .. })
        ));
        // count says 2, one record present
        let mut b = PacketTrace::new(vec![vec![1]]).to_bytes();
        b[5] = 2;
        assert!(matches!(
            PacketTrace::from_bytes(&b),
            Err(TraceError::Format { offset: 14, .. })
        ));
        // count says 0, one record present
        let mut b = PacketTrace::new(vec![vec![1]]).to_bytes();
        b[5] = 0;
        assert!(matches!(
            PacketTrace::from_bytes(&b),
            Err(TraceError::Format { offset: 9, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pkt1");
        let t = PacketTrace::new(vec![vec![], b"x".to_vec(), vec![0; 300]]);
        write_trace(&path, &t).unwrap();
        assert_eq!(read_trace(&path).unwrap(), t);
    }

    #[test]
    fn histogram_boundaries() {
        let t = PacketTrace::new([5, 10, 11, 21].iter().map(|&n| vec![0; n]).collect());
        let s = trace_stats(&t);
        assert_eq!(s.histogram, vec![2, 1, 1]);
        assert_eq!(histogram_bucket_range(2), (21, 30));
        assert_eq!(s.category_counts, [2, 2, 0, 0]);
        assert_eq!(s.fraction_at_most(10), 0.5);
        assert_eq!(s.fraction_at_most(20), 0.75);
    }

    #[test]
    fn empty_stats() {
        let s = trace_stats(&PacketTrace::default());
        assert_eq!(s, TraceStats::default());
        assert_eq!(s.fraction_at_most(20), 0.0);
    }

    #[test]
    fn categories() {
        assert_eq!(SizeCategory::of(0), SizeCategory::VerySmall);
        assert_eq!(SizeCategory::of(10), SizeCategory::VerySmall);
        assert_eq!(SizeCategory::of(11), SizeCategory::Small);
        assert_eq!(SizeCategory::of(100), SizeCategory::Small);
        assert_eq!(SizeCategory::of(101), SizeCategory::Medium);
        assert_eq!(SizeCategory::of(1000), SizeCategory::Medium);
        assert_eq!(SizeCategory::of(1001), SizeCategory::Large);
    }

    proptest! {
        #[test]
        fn round_trip_and_conservation(packets in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..1200), 0..40)) {
            let t = PacketTrace::new(packets);
            prop_assert_eq!(PacketTrace::from_bytes(&t.to_bytes()).unwrap(), t.clone());
            let s = trace_stats(&t);
            prop_assert_eq!(s.histogram.iter().sum::<u64>(), s.packet_count);
            prop_assert_eq!(s.category_bytes.iter().sum::<u64>(), s.total_bytes);
            prop_assert_eq!(s.category_counts.iter().sum::<u64>(), s.packet_count);
        }
    }
}
