//! Packet encoder and decoder.
//!
//! Each packet is parsed greedily against the shared window into
//! `(position, length, literal)` tuples, which are entropy coded with the
//! current tables and closed by END_OF_BLOCK plus zero padding. The block is
//! a self-contained whole-byte unit; the window and ledger carry over to the
//! next packet on both sides.
//!
//! Tuple wire layout:
//!
//! ```text
//! match:        pos-bucket sym | pos extra bits | len-bucket sym | len extra bits | literal sym
//! literal-only: LITERAL_ONLY   | literal sym
//! ```
//!
//! The literal symbol of a match may be NO_LITERAL, which is legal only when
//! the match ends the packet.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::alphabet::{
    bucket_base, extra_bits, split_value, Alphabets, END_OF_BLOCK, LITERAL_ONLY, NO_LITERAL,
    POSITION_BASE, REBUILD,
};
use crate::bitstream::{BitError, BitReader, BitWriter};
use crate::huffman::{build_tables, CodeTableSet, Ledger, LedgerEntry, RebuildSchedule, Special};
use crate::window::Window;

/// Largest packet accepted by the encoder or produced by the decoder.
pub const MAX_PACKET_LEN: usize = 1 << 20;
/// Upper bound on `block_size * max_blocks`.
pub const MAX_WINDOW_CAPACITY: usize = 1 << 24;
/// Largest `max_match` the container header can carry.
pub const MAX_MATCH_LIMIT: u16 = 258;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tuple {
    pub position: Option<usize>,
    pub length: usize,
    pub literal: Option<u8>,
}

impl Tuple {
    pub fn literal(byte: u8) -> Self {
        Tuple {
            position: None,
            length: 0,
            literal: Some(byte),
        }
    }

    pub fn matched(position: usize, length: usize, literal: Option<u8>) -> Self {
        Tuple {
            position: Some(position),
            length,
            literal,
        }
    }

    /// Bytes this tuple expands to.
    pub fn expanded_len(&self) -> usize {
        self.length + self.literal.is_some() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("min_match must be at least 2 (got {0})")]
    MinMatchTooSmall(u8),
    #[error("max_match {max} must lie in [max(min_match, 3), {MAX_MATCH_LIMIT}] (min_match {min})")]
    MaxMatchOutOfRange { min: u8, max: u16 },
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("window capacity {0} exceeds {MAX_WINDOW_CAPACITY}")]
    WindowTooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodecConfig {
    pub block_size: u32,
    pub max_blocks: u16,
    pub ledger_size: u16,
    pub rebuild_cap: u16,
    pub min_match: u8,
    pub max_match: u16,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            block_size: 8192,
            max_blocks: 4,
            ledger_size: 4096,
            rebuild_cap: 512,
            min_match: 3,
            max_match: 258,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.min_match < 2 {
            return Err(ConfigError::MinMatchTooSmall(self.min_match));
        }
        if self.max_match < (self.min_match as u16).max(3) || self.max_match > MAX_MATCH_LIMIT {
            return Err(ConfigError::MaxMatchOutOfRange {
                min: self.min_match,
                max: self.max_match,
            });
        }
        for (name, v) in [
            ("block_size", self.block_size as u64),
            ("max_blocks", self.max_blocks as u64),
            ("ledger_size", self.ledger_size as u64),
            ("rebuild_cap", self.rebuild_cap as u64),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        let cap = self.window_capacity();
        if cap > MAX_WINDOW_CAPACITY {
            return Err(ConfigError::WindowTooLarge(cap));
        }
        Ok(())
    }

    pub fn window_capacity(&self) -> usize {
        self.block_size as usize * self.max_blocks as usize
    }

    pub fn alphabets(&self) -> Alphabets {
        Alphabets::new(
            self.window_capacity(),
            self.min_match as usize,
            self.max_match as usize,
        )
    }
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("packet of {len} bytes exceeds the {MAX_PACKET_LEN}-byte limit")]
    Oversize { len: usize },
    #[error("corrupt block at bit {bit_offset} (byte {}): {reason}", bit_offset / 8)]
    Corrupt { bit_offset: u64, reason: String },
}

impl CodecError {
    fn corrupt(bit_offset: u64, reason: impl Into<String>) -> Self {
        CodecError::Corrupt {
            bit_offset,
            reason: reason.into(),
        }
    }
}

impl From<BitError> for CodecError {
    fn from(e: BitError) -> Self {
        match e {
            BitError::Truncated { bit_offset, .. } => {
                CodecError::corrupt(bit_offset, "truncated block")
            }
            other => CodecError::corrupt(0, other.to_string()),
        }
    }
}

/// SHA-256 over window bytes, ledger contents and table code lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateDigest(pub [u8; 32]);

impl std::fmt::Display for StateDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// State both directions keep in lockstep.
#[derive(Debug, Clone)]
struct CodecState {
    config: CodecConfig,
    alphabets: Alphabets,
    window: Window,
    tables: CodeTableSet,
    ledger: Ledger,
    packets_processed: u64,
}

impl CodecState {
    fn new(config: CodecConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let alphabets = config.alphabets();
        let ledger = Ledger::new(config.ledger_size as usize);
        let tables = build_tables(&ledger, &alphabets);
        Ok(CodecState {
            config,
            alphabets,
            window: Window::new(config.block_size as usize, config.max_blocks as usize),
            tables,
            ledger,
            packets_processed: 0,
        })
    }

    fn rebuild(&mut self) {
        self.ledger.push_special(Special::Rebuild);
        self.tables = build_tables(&self.ledger, &self.alphabets);
    }

    fn digest(&self) -> StateDigest {
        let mut h = Sha256::new();
        h.update(b"aphc-state");
        h.update((self.window.block_count() as u64).to_le_bytes());
        for block in self.window.blocks() {
            h.update((block.data().len() as u64).to_le_bytes());
            h.update(block.data());
        }
        h.update(self.ledger.tuples_seen().to_le_bytes());
        h.update(self.ledger.history().to_le_bytes());
        h.update((self.ledger.len() as u64).to_le_bytes());
        for entry in self.ledger.entries() {
            match *entry {
                LedgerEntry::Tuple(t) => {
                    h.update([0]);
                    h.update(t.position.map_or(u64::MAX, |p| p as u64).to_le_bytes());
                    h.update((t.length as u64).to_le_bytes());
                    h.update(Alphabets::literal_symbol(t.literal).to_le_bytes());
                }
                LedgerEntry::Special(s) => {
                    h.update([1]);
                    h.update(s.symbol().to_le_bytes());
                }
            }
        }
        for table in self.tables.tables() {
            h.update((table.len() as u64).to_le_bytes());
            h.update(table.lengths());
        }
        StateDigest(h.finalize().into())
    }
}

/// Greedy parse of `data` against `window`. Positions refer to the window
/// as it stands; the packet itself is not yet part of it.
pub fn parse_with_window(window: &Window, data: &[u8], min_match: usize, max_match: usize) -> Vec<Tuple> {
    let mut tuples = Vec::new();
    let mut cursor = 0;
    while cursor < data.len() {
        let rest = &data[cursor..];
        let tuple = match window.find_match(rest, min_match, max_match) {
            Some(m) => Tuple::matched(m.position, m.length, rest.get(m.length).copied()),
            None => Tuple::literal(rest[0]),
        };
        cursor += tuple.expanded_len();
        tuples.push(tuple);
    }
    tuples
}

#[derive(Debug, Clone)]
pub struct Encoder {
    state: CodecState,
    schedule: RebuildSchedule,
    rebuild_log: Option<Vec<u64>>,
}

impl Encoder {
    pub fn new(config: CodecConfig) -> Result<Self, ConfigError> {
        Ok(Encoder {
            state: CodecState::new(config)?,
            schedule: RebuildSchedule::new(config.rebuild_cap as u64),
            rebuild_log: None,
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.state.config
    }

    pub fn window(&self) -> &Window {
        &self.state.window
    }

    pub fn ledger(&self) -> &Ledger {
        &self.state.ledger
    }

    pub fn tables(&self) -> &CodeTableSet {
        &self.state.tables
    }

    pub fn packets_processed(&self) -> u64 {
        self.state.packets_processed
    }

    /// Starts recording the tuple count at every rebuild.
    pub fn record_rebuilds(&mut self) {
        self.rebuild_log.get_or_insert_with(Vec::new);
    }

    pub fn rebuild_points(&self) -> &[u64] {
        self.rebuild_log.as_deref().unwrap_or(&[])
    }

    pub fn state_hash(&self) -> StateDigest {
        self.state.digest()
    }

    pub fn parse_packet(&self, data: &[u8]) -> Vec<Tuple> {
        parse_with_window(
            &self.state.window,
            data,
            self.state.config.min_match as usize,
            self.state.config.max_match as usize,
        )
    }

    pub fn encode_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, CodecError> {
        let mut tables_seen = |_: &CodeTableSet| {};
        self.encode_packet_observed(data, &mut tables_seen)
    }

    /// Like [`encode_packet`](Self::encode_packet), calling `observe` with
    /// every table set built along the way.
    pub fn encode_packet_observed(
        &mut self,
        data: &[u8],
        observe: &mut dyn FnMut(&CodeTableSet),
    ) -> Result<Vec<u8>, CodecError> {
        if data.len() > MAX_PACKET_LEN {
            return Err(CodecError::Oversize { len: data.len() });
        }
        let tuples = self.parse_packet(data);
        let mut w = BitWriter::with_capacity(data.len() + 4);
        for t in tuples {
            let seen = self.state.ledger.tuples_seen();
            if self.schedule.check(seen) {
                self.state.tables.position.encode_symbol(REBUILD, &mut w)?;
                self.state.rebuild();
                observe(&self.state.tables);
                if let Some(log) = self.rebuild_log.as_mut() {
                    log.push(seen);
                }
            }
            self.write_tuple(&t, &mut w)?;
            self.state.ledger.push_tuple(t);
        }
        self.state
            .tables
            .position
            .encode_symbol(END_OF_BLOCK, &mut w)?;
        self.state.ledger.push_special(Special::EndOfBlock);
        self.state.window.append(data);
        self.state.packets_processed += 1;
        Ok(w.into_bytes())
    }

    fn write_tuple(&self, t: &Tuple, w: &mut BitWriter) -> Result<(), CodecError> {
        let tables = &self.state.tables;
        match t.position {
            None => {
                tables.position.encode_symbol(LITERAL_ONLY, w)?;
            }
            Some(p) => {
                let (bucket, payload, width) = split_value(p as u32);
                tables.position.encode_symbol(POSITION_BASE + bucket, w)?;
                w.write_bits(payload, width)?;
                let lv = (t.length - self.state.config.min_match as usize) as u32;
                let (bucket, payload, width) = split_value(lv);
                tables.length.encode_symbol(bucket, w)?;
                w.write_bits(payload, width)?;
            }
        }
        tables
            .literal
            .encode_symbol(Alphabets::literal_symbol(t.literal), w)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Decoder {
    state: CodecState,
}

impl Decoder {
    pub fn new(config: CodecConfig) -> Result<Self, ConfigError> {
        Ok(Decoder {
            state: CodecState::new(config)?,
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.state.config
    }

    pub fn window(&self) -> &Window {
        &self.state.window
    }

    pub fn ledger(&self) -> &Ledger {
        &self.state.ledger
    }

    pub fn tables(&self) -> &CodeTableSet {
        &self.state.tables
    }

    pub fn packets_processed(&self) -> u64 {
        self.state.packets_processed
    }

    pub fn state_hash(&self) -> StateDigest {
        self.state.digest()
    }

    /// Decodes exactly one block; trailing bytes are corruption.
    ///
    /// After an error the decoder state is unspecified and the stream must be
    /// abandoned.
    pub fn decode_packet(&mut self, block: &[u8]) -> Result<Vec<u8>, CodecError> {
        let (out, used) = self.decode_block(block)?;
        if used != block.len() {
            return Err(CodecError::corrupt(
                used as u64 * 8,
                format!("{} trailing bytes after END_OF_BLOCK", block.len() - used),
            ));
        }
        Ok(out)
    }

    /// Decodes back-to-back blocks until `bytes` is exhausted.
    pub fn decode_stream(&mut self, mut bytes: &[u8]) -> Result<Vec<Vec<u8>>, CodecError> {
        let mut packets = Vec::new();
        let mut consumed = 0u64;
        while !bytes.is_empty() {
            let (out, used) = self.decode_block(bytes).map_err(|e| match e {
                CodecError::Corrupt { bit_offset, reason } => CodecError::Corrupt {
                    bit_offset: bit_offset + consumed * 8,
                    reason,
                },
                other => other,
            })?;
            packets.push(out);
            bytes = &bytes[used..];
            consumed += used as u64;
        }
        Ok(packets)
    }

    /// Decodes the block at the front of `bytes`, returning the packet and
    /// the number of bytes the block occupied.
    pub fn decode_block(&mut self, bytes: &[u8]) -> Result<(Vec<u8>, usize), CodecError> {
        let mut r = BitReader::new(bytes);
        let mut out = Vec::new();
        let mut packet_closed = false;
        loop {
            let at = r.bit_position();
            let sym = self
                .state
                .tables
                .position
                .decode_symbol(&mut r)?
                .ok_or_else(|| CodecError::corrupt(at, "invalid position code"))?;
            if packet_closed && sym != END_OF_BLOCK {
                return Err(CodecError::corrupt(at, "data after a tuple without literal"));
            }
            match sym {
                END_OF_BLOCK => {
                    self.state.ledger.push_special(Special::EndOfBlock);
                    let pad_at = r.bit_position();
                    if r.align_to_byte() != 0 {
                        return Err(CodecError::corrupt(pad_at, "non-zero padding"));
                    }
                    break;
                }
                REBUILD => self.state.rebuild(),
                LITERAL_ONLY => {
                    let lit_at = r.bit_position();
                    let lit = self.read_literal(&mut r)?.ok_or_else(|| {
                        CodecError::corrupt(lit_at, "NO_LITERAL in a literal-only tuple")
                    })?;
                    out.push(lit);
                    self.state.ledger.push_tuple(Tuple::literal(lit));
                }
                _ => {
                    let bucket = sym - POSITION_BASE;
                    let position = (bucket_base(bucket) + r.read_bits(extra_bits(bucket))?) as usize;
                    if position >= self.state.window.total_live() {
                        return Err(CodecError::corrupt(
                            at,
                            format!(
                                "position {position} outside live window of {} bytes",
                                self.state.window.total_live()
                            ),
                        ));
                    }
                    let len_at = r.bit_position();
                    let lbucket = self
                        .state
                        .tables
                        .length
                        .decode_symbol(&mut r)?
                        .ok_or_else(|| CodecError::corrupt(len_at, "invalid length code"))?;
                    let lvalue = bucket_base(lbucket) + r.read_bits(extra_bits(lbucket))?;
                    let length = self.state.config.min_match as usize + lvalue as usize;
                    if length > self.state.config.max_match as usize {
                        return Err(CodecError::corrupt(
                            len_at,
                            format!("match length {length} above maximum"),
                        ));
                    }
                    if !self.state.window.copy_range(position, length, &mut out) {
                        return Err(CodecError::corrupt(
                            at,
                            format!("match {position}+{length} runs past the live window"),
                        ));
                    }
                    let literal = self.read_literal(&mut r)?;
                    match literal {
                        Some(b) => out.push(b),
                        None => packet_closed = true,
                    }
                    self.state
                        .ledger
                        .push_tuple(Tuple::matched(position, length, literal));
                }
            }
            if out.len() > MAX_PACKET_LEN {
                return Err(CodecError::corrupt(r.bit_position(), "decoded packet too large"));
            }
        }
        self.state.window.append(&out);
        self.state.packets_processed += 1;
        Ok((out, r.byte_position()))
    }

    fn read_literal(&self, r: &mut BitReader<'_>) -> Result<Option<u8>, CodecError> {
        let at = r.bit_position();
        let sym = self
            .state
            .tables
            .literal
            .decode_symbol(r)?
            .ok_or_else(|| CodecError::corrupt(at, "invalid literal code"))?;
        Ok((sym != NO_LITERAL).then_some(sym as u8))
    }
}
