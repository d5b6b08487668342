//! Rebuild-driven adaptive Huffman coding.
//!
//! Tables change only when a REBUILD symbol is sent. Both sides then rebuild
//! all three tables from the same bounded ledger of recent tuples, so no
//! table description ever goes on the wire. Every symbol carries a baseline
//! weight of one, which keeps each table a complete prefix code that can
//! still encode symbols never seen before.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::alphabet::{Alphabets, END_OF_BLOCK, LITERAL_ONLY, REBUILD};
use crate::bitstream::{BitError, BitReader, BitWriter};
use crate::codec::Tuple;

pub const MAX_CODE_LEN: u8 = 32;

/// Optimal prefix-code lengths for `weights`.
///
/// Merges the two lightest subtrees, ordering equal weights by the smallest
/// symbol each subtree contains. A single-symbol alphabet gets a zero-length
/// code.
pub fn huffman_code_lengths(weights: &[u64]) -> Vec<u8> {
    let n = weights.len();
    match n {
        0 => return Vec::new(),
        1 => return vec![0],
        _ => {}
    }
    // nodes 0..n are leaves; internal nodes are appended with their parent
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(u64, usize, usize)>> = weights
        .iter()
        .enumerate()
        .map(|(sym, &w)| Reverse((w, sym, sym)))
        .collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((w1, s1, a)) = heap.pop().unwrap();
        let Reverse((w2, s2, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((w1 + w2, s1.min(s2), next)));
        next += 1;
    }
    let root = next - 1;
    let mut depth = vec![0u8; 2 * n - 1];
    // parents always have larger ids, so a reverse sweep sees them first
    for id in (0..root).rev() {
        depth[id] = depth[parent[id]] + 1;
    }
    depth.truncate(n);
    depth
}

/// Σ 2^-len == 1, computed exactly.
pub fn kraft_is_complete(lengths: &[u8]) -> bool {
    if lengths.len() == 1 {
        return lengths[0] == 0;
    }
    let total: u128 = lengths
        .iter()
        .map(|&l| if l == 0 { u128::MAX } else { 1u128 << (64 - l as u32) })
        .fold(0u128, |acc, x| acc.saturating_add(x));
    total == 1u128 << 64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTable {
    lengths: Vec<u8>,
    codes: Vec<u32>,
    max_len: u8,
    count: [u32; MAX_CODE_LEN as usize + 1],
    first_code: [u64; MAX_CODE_LEN as usize + 1],
    first_index: [u32; MAX_CODE_LEN as usize + 1],
    sorted: Vec<u16>,
}

impl CodeTable {
    /// Canonical codes for a length profile: shorter codes first, equal
    /// lengths in symbol order.
    pub fn from_lengths(lengths: Vec<u8>) -> Self {
        assert!(!lengths.is_empty());
        let max_len = *lengths.iter().max().unwrap();
        assert!(max_len <= MAX_CODE_LEN, "code length {max_len} too long");
        let mut count = [0u32; MAX_CODE_LEN as usize + 1];
        for &l in &lengths {
            count[l as usize] += 1;
        }
        let mut first_code = [0u64; MAX_CODE_LEN as usize + 1];
        let mut first_index = [0u32; MAX_CODE_LEN as usize + 1];
        let mut code = 0u64;
        let mut index = 0u32;
        for l in 1..=MAX_CODE_LEN as usize {
            code = (code + count[l - 1] as u64 * (l > 1) as u64) << 1;
            first_code[l] = code;
            first_index[l] = index;
            index += count[l];
        }
        let mut sorted: Vec<u16> = (0..lengths.len() as u16).collect();
        sorted.sort_by_key(|&s| (lengths[s as usize], s));
        let mut next = first_code;
        let codes = lengths
            .iter()
            .map(|&l| {
                if l == 0 {
                    return 0;
                }
                let c = next[l as usize];
                next[l as usize] += 1;
                c as u32
            })
            .collect();
        CodeTable {
            lengths,
            codes,
            max_len,
            count,
            first_code,
            first_index,
            sorted,
        }
    }

    pub fn from_weights(weights: &[u64]) -> Self {
        Self::from_lengths(huffman_code_lengths(weights))
    }

    pub fn lengths(&self) -> &[u8] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn code(&self, symbol: u16) -> (u32, u8) {
        (self.codes[symbol as usize], self.lengths[symbol as usize])
    }

    pub fn is_complete(&self) -> bool {
        kraft_is_complete(&self.lengths)
    }

    pub fn encode_symbol(&self, symbol: u16, w: &mut BitWriter) -> Result<(), BitError> {
        let (code, len) = self.code(symbol);
        w.write_bits(code, len as u32)
    }

    /// Reads one symbol. `Ok(None)` means the bits match no codeword, which
    /// only happens for incomplete tables.
    pub fn decode_symbol(&self, r: &mut BitReader<'_>) -> Result<Option<u16>, BitError> {
        if self.max_len == 0 {
            return Ok(Some(self.sorted[0]));
        }
        let mut code = 0u64;
        for l in 1..=self.max_len as usize {
            code = (code << 1) | r.read_bits(1)? as u64;
            let offset = code.wrapping_sub(self.first_code[l]);
            if code >= self.first_code[l] && offset < self.count[l] as u64 {
                let idx = self.first_index[l] as usize + offset as usize;
                return Ok(Some(self.sorted[idx]));
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeTableSet {
    pub position: CodeTable,
    pub length: CodeTable,
    pub literal: CodeTable,
}

impl CodeTableSet {
    pub fn tables(&self) -> [&CodeTable; 3] {
        [&self.position, &self.length, &self.literal]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Special {
    EndOfBlock,
    Rebuild,
}

impl Special {
    pub fn symbol(self) -> u16 {
        match self {
            Special::EndOfBlock => END_OF_BLOCK,
            Special::Rebuild => REBUILD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LedgerEntry {
    Tuple(Tuple),
    Special(Special),
}

/// Bounded FIFO of recent tuples and specials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    ring: VecDeque<LedgerEntry>,
    capacity: usize,
    tuples_seen: u64,
    // folds in every entry ever pushed, including evicted ones
    history: u64,
}

impl Ledger {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Ledger {
            ring: VecDeque::with_capacity(capacity),
            capacity,
            tuples_seen: 0,
            history: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn tuples_seen(&self) -> u64 {
        self.tuples_seen
    }

    pub fn history(&self) -> u64 {
        self.history
    }

    pub fn entries(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.ring.iter()
    }

    pub fn push_tuple(&mut self, t: Tuple) {
        self.tuples_seen += 1;
        self.push(LedgerEntry::Tuple(t));
    }

    pub fn push_special(&mut self, s: Special) {
        self.push(LedgerEntry::Special(s));
    }

    fn push(&mut self, entry: LedgerEntry) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.history = fold_entry(self.history, &entry);
        self.ring.push_back(entry);
    }
}

fn fold_entry(mut h: u64, entry: &LedgerEntry) -> u64 {
    let words: [u64; 3] = match *entry {
        LedgerEntry::Tuple(t) => [
            1 + t.position.map_or(0, |p| p as u64 + 1),
            t.length as u64,
            t.literal.map_or(256, u64::from),
        ],
        LedgerEntry::Special(s) => [2, s.symbol() as u64, 0],
    };
    for w in words {
        h ^= w;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
        h ^= h >> 29;
    }
    h
}

/// Fires at tuple counts 2, 4, 8, … up to `cap`, then every `cap` tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RebuildSchedule {
    next_rebuild_at: u64,
    interval: u64,
    cap: u64,
}

impl RebuildSchedule {
    pub fn new(cap: u64) -> Self {
        assert!(cap >= 1);
        RebuildSchedule {
            next_rebuild_at: 2,
            interval: 1,
            cap,
        }
    }

    pub fn next_rebuild_at(&self) -> u64 {
        self.next_rebuild_at
    }

    pub fn is_due(&self, tuples_seen: u64) -> bool {
        tuples_seen == self.next_rebuild_at
    }

    /// Returns whether a rebuild is due and, if so, moves to the next point.
    pub fn check(&mut self, tuples_seen: u64) -> bool {
        if !self.is_due(tuples_seen) {
            return false;
        }
        self.interval = (self.interval * 2).min(self.cap);
        self.next_rebuild_at = tuples_seen + self.interval;
        true
    }
}

/// Tables from ledger counts plus the baseline weight of one per symbol.
pub fn build_tables(ledger: &Ledger, alphabets: &Alphabets) -> CodeTableSet {
    let mut position = vec![1u64; alphabets.position_size()];
    let mut length = vec![1u64; alphabets.length_size()];
    let mut literal = vec![1u64; alphabets.literal_size()];
    for entry in ledger.entries() {
        match entry {
            LedgerEntry::Tuple(t) => {
                match t.position {
                    Some(p) => {
                        position[alphabets.position_symbol(p) as usize] += 1;
                        length[alphabets.length_symbol(t.length) as usize] += 1;
                    }
                    None => position[LITERAL_ONLY as usize] += 1,
                }
                literal[Alphabets::literal_symbol(t.literal) as usize] += 1;
            }
            LedgerEntry::Special(s) => position[s.symbol() as usize] += 1,
        }
    }
    // Total weight stays below 2^16 + alphabet size, far short of the
    // Fibonacci weight a 33-bit code would need.
    CodeTableSet {
        position: CodeTable::from_weights(&position),
        length: CodeTable::from_weights(&length),
        literal: CodeTable::from_weights(&literal),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn toy_frequencies() {
        assert_eq!(huffman_code_lengths(&[5, 2, 1, 1]), vec![1, 2, 3, 3]);
    }

    #[test]
    fn equal_weights_are_balanced() {
        for n in [2usize, 3, 4, 5, 16, 33, 257] {
            let lens = huffman_code_lengths(&vec![1; n]);
            let min = *lens.iter().min().unwrap();
            let max = *lens.iter().max().unwrap();
            assert!(max - min <= 1, "n={n}: {lens:?}");
            assert!(kraft_is_complete(&lens));
        }
        let t = CodeTable::from_weights(&[1, 1, 1, 1]);
        for s in 0..4 {
            assert_eq!(t.code(s).1, 2);
        }
    }

    #[test]
    fn canonical_ordering() {
        let t = CodeTable::from_lengths(vec![2, 1, 3, 3]);
        assert_eq!(t.code(1), (0b0, 1));
        assert_eq!(t.code(0), (0b10, 2));
        assert_eq!(t.code(2), (0b110, 3));
        assert_eq!(t.code(3), (0b111, 3));
    }

    #[test]
    fn single_symbol_table_uses_no_bits() {
        let t = CodeTable::from_weights(&[9]);
        assert!(t.is_complete());
        let mut w = BitWriter::new();
        t.encode_symbol(0, &mut w).unwrap();
        assert_eq!(w.bit_position(), 0);
        let mut r = BitReader::new(&[]);
        assert_eq!(t.decode_symbol(&mut r).unwrap(), Some(0));
    }

    #[test]
    fn every_literal_round_trips() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let weights: Vec<u64> = (0..257).map(|_| rng.gen_range(1..1000)).collect();
        for t in [
            CodeTable::from_weights(&weights),
            CodeTable::from_weights(&[1; 257]),
        ] {
            let mut w = BitWriter::new();
            for s in 0..257u16 {
                t.encode_symbol(s, &mut w).unwrap();
            }
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes);
            for s in 0..257u16 {
                let before = r.bit_position();
                assert_eq!(t.decode_symbol(&mut r).unwrap(), Some(s));
                assert_eq!(r.bit_position() - before, t.code(s).1 as u64);
            }
        }
    }

    #[test]
    fn random_tables_random_streams() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.gen_range(2..=16);
            let weights: Vec<u64> = (0..n).map(|_| rng.gen_range(1..100)).collect();
            let t = CodeTable::from_weights(&weights);
            assert!(t.is_complete());
            let stream: Vec<u16> = (0..1000).map(|_| rng.gen_range(0..n as u16)).collect();
            let mut w = BitWriter::new();
            for &s in &stream {
                t.encode_symbol(s, &mut w).unwrap();
            }
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes);
            for &s in &stream {
                assert_eq!(t.decode_symbol(&mut r).unwrap(), Some(s));
            }
        }
    }

    #[test]
    fn truncated_decode_errors() {
        let t = CodeTable::from_weights(&[1; 8]);
        let mut r = BitReader::new(&[]);
        assert!(t.decode_symbol(&mut r).is_err());
    }

    #[test]
    fn ledger_ring() {
        let t = Tuple::literal(b'x');
        let mut l = Ledger::new(3);
        for i in 0..4u8 {
            l.push_tuple(Tuple::literal(i));
            assert_eq!(l.tuples_seen(), i as u64 + 1);
        }
        let kept: Vec<_> = l.entries().copied().collect();
        assert_eq!(
            kept,
            (1..4u8)
                .map(|i| LedgerEntry::Tuple(Tuple::literal(i)))
                .collect::<Vec<_>>()
        );
        let mut l = Ledger::new(8);
        l.push_tuple(t);
        l.push_tuple(t);
        assert_eq!(l.entries().filter(|e| **e == LedgerEntry::Tuple(t)).count(), 2);
        l.push_special(Special::Rebuild);
        assert_eq!(l.tuples_seen(), 2);
        assert_eq!(l.len(), 3);
    }

    #[test]
    fn schedule_fire_points() {
        let mut s = RebuildSchedule::new(512);
        assert!(!s.check(1));
        let fired: Vec<u64> = (1..=2048).filter(|&t| s.check(t)).collect();
        assert_eq!(
            fired,
            vec![2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 1536, 2048]
        );
        let mut s = RebuildSchedule::new(512);
        assert!(s.check(2));
    }

    #[test]
    fn build_is_deterministic_and_counts_specials() {
        let a = Alphabets::new(1024, 3, 18);
        let mut l = Ledger::new(64);
        let fresh = build_tables(&l, &a);
        for t in fresh.tables() {
            assert!(t.is_complete());
        }
        for _ in 0..10 {
            l.push_special(Special::EndOfBlock);
        }
        l.push_tuple(Tuple::matched(700, 5, Some(b'q')));
        let t1 = build_tables(&l, &a);
        let t2 = build_tables(&l, &a);
        assert_eq!(t1, t2);
        let eob = t1.position.code(END_OF_BLOCK).1;
        assert!(t1.position.lengths().iter().all(|&len| len >= eob));
        assert!(t1.position.code(END_OF_BLOCK).1 < fresh.position.code(END_OF_BLOCK).1);
    }
}
