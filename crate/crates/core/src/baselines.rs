//! Per-packet codec adapters.
//!
//! Every adapter is a pair of stateful stream halves. The compressor flushes
//! after each packet so its output can be decoded on its own, given that
//! every earlier output reached the decompressor in order. `deflate-sync`
//! wraps zlib with `Z_SYNC_FLUSH`; `lzma-sync` wraps liblzma's `.xz` encoder
//! with `LZMA_SYNC_FLUSH`. Both are compiled in behind cargo features and
//! show up as unavailable otherwise.

use thiserror::Error;

use crate::codec::{CodecConfig, CodecError, Decoder, Encoder};

pub const NULL: &str = "null";
pub const APHC: &str = "aphc";
pub const DEFLATE_SYNC: &str = "deflate-sync";
pub const LZMA_SYNC: &str = "lzma-sync";

/// Every codec name the toolkit knows, available or not.
pub const KNOWN_CODECS: [&str; 4] = [NULL, APHC, DEFLATE_SYNC, LZMA_SYNC];

pub const DEFAULT_DEFLATE_LEVEL: u32 = 9;
pub const DEFAULT_LZMA_LEVEL: u32 = 3;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{codec}: library error: {detail}")]
    Library { codec: &'static str, detail: String },
    #[error("codec {0} is not available in this build")]
    Unavailable(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown codec {name:?}; available: {}", available.join(", "))]
pub struct LookupError {
    pub name: String,
    pub available: Vec<&'static str>,
}

pub trait PacketCompressor: Send {
    fn compress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError>;
}

pub trait PacketDecompressor: Send {
    fn decompress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError>;
}

/// Tunables for the codecs that have any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecSettings {
    pub aphc: CodecConfig,
    pub deflate_level: u32,
    pub lzma_level: u32,
}

impl Default for CodecSettings {
    fn default() -> Self {
        CodecSettings {
            aphc: CodecConfig::default(),
            deflate_level: DEFAULT_DEFLATE_LEVEL,
            lzma_level: DEFAULT_LZMA_LEVEL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecSpec {
    Null,
    Aphc(CodecConfig),
    DeflateSync { level: u32 },
    LzmaSync { level: u32 },
}

impl CodecSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CodecSpec::Null => NULL,
            CodecSpec::Aphc(_) => APHC,
            CodecSpec::DeflateSync { .. } => DEFLATE_SYNC,
            CodecSpec::LzmaSync { .. } => LZMA_SYNC,
        }
    }

    pub fn is_available(&self) -> bool {
        match self {
            CodecSpec::Null | CodecSpec::Aphc(_) => true,
            CodecSpec::DeflateSync { .. } => cfg!(feature = "deflate"),
            CodecSpec::LzmaSync { .. } => cfg!(feature = "lzma"),
        }
    }

    /// Parameter summary for report headers.
    pub fn settings(&self) -> String {
        match self {
            CodecSpec::Null => "identity".to_string(),
            CodecSpec::Aphc(c) => format!(
                "block_size {}, max_blocks {}, ledger_size {}, rebuild_cap {}, min_match {}, max_match {}",
                c.block_size, c.max_blocks, c.ledger_size, c.rebuild_cap, c.min_match, c.max_match
            ),
            CodecSpec::DeflateSync { level } => format!(
                "zlib level {level}, window bits 15, memory level 8 (library defaults), Z_SYNC_FLUSH per packet"
            ),
            CodecSpec::LzmaSync { level } => format!(
                "liblzma .xz preset {level} (extreme off), CRC64 check, LZMA_SYNC_FLUSH per packet"
            ),
        }
    }

    pub fn compressor(&self) -> Result<Box<dyn PacketCompressor>, AdapterError> {
        match *self {
            CodecSpec::Null => Ok(Box::new(Identity)),
            CodecSpec::Aphc(cfg) => Ok(Box::new(AphcCompressor(
                Encoder::new(cfg).map_err(CodecError::from)?,
            ))),
            #[cfg(feature = "deflate")]
            CodecSpec::DeflateSync { level } => Ok(Box::new(deflate::Compressor::new(level)?)),
            #[cfg(feature = "lzma")]
            CodecSpec::LzmaSync { level } => Ok(Box::new(lzma::Compressor::new(level)?)),
            #[allow(unreachable_patterns)]
            _ => Err(AdapterError::Unavailable(self.name())),
        }
    }

    pub fn decompressor(&self) -> Result<Box<dyn PacketDecompressor>, AdapterError> {
        match *self {
            CodecSpec::Null => Ok(Box::new(Identity)),
            CodecSpec::Aphc(cfg) => Ok(Box::new(AphcDecompressor(
                Decoder::new(cfg).map_err(CodecError::from)?,
            ))),
            #[cfg(feature = "deflate")]
            CodecSpec::DeflateSync { .. } => Ok(Box::new(deflate::Decompressor::new())),
            #[cfg(feature = "lzma")]
            CodecSpec::LzmaSync { .. } => Ok(Box::new(lzma::Decompressor::new()?)),
            #[allow(unreachable_patterns)]
            _ => Err(AdapterError::Unavailable(self.name())),
        }
    }
}

/// Names of the codecs usable in this build.
pub fn list_codecs() -> Vec<&'static str> {
    let settings = CodecSettings::default();
    KNOWN_CODECS
        .iter()
        .filter(|n| lookup(n, &settings).is_ok_and(|s| s.is_available()))
        .copied()
        .collect()
}

/// Resolves a known codec name, whether or not it was compiled in.
pub fn lookup(name: &str, settings: &CodecSettings) -> Result<CodecSpec, LookupError> {
    match name {
        NULL => Ok(CodecSpec::Null),
        APHC => Ok(CodecSpec::Aphc(settings.aphc)),
        DEFLATE_SYNC => Ok(CodecSpec::DeflateSync {
            level: settings.deflate_level,
        }),
        LZMA_SYNC => Ok(CodecSpec::LzmaSync {
            level: settings.lzma_level,
        }),
        _ => Err(LookupError {
            name: name.to_string(),
            available: list_codecs(),
        }),
    }
}

struct Identity;

impl PacketCompressor for Identity {
    fn compress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
        Ok(data.to_vec())
    }
}

impl PacketDecompressor for Identity {
    fn decompress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
        Ok(data.to_vec())
    }
}

struct AphcCompressor(Encoder);

impl PacketCompressor for AphcCompressor {
    fn compress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
        Ok(self.0.encode_packet(data)?)
    }
}

struct AphcDecompressor(Decoder);

impl PacketDecompressor for AphcDecompressor {
    fn decompress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
        Ok(self.0.decode_packet(data)?)
    }
}

#[cfg(feature = "deflate")]
mod deflate {
    use flate2::{Compress, Compression, Decompress, FlushCompress, FlushDecompress};

    use super::{AdapterError, PacketCompressor, PacketDecompressor, DEFLATE_SYNC};

    fn lib_err(e: impl std::fmt::Display) -> AdapterError {
        AdapterError::Library {
            codec: DEFLATE_SYNC,
            detail: e.to_string(),
        }
    }

    pub struct Compressor(Compress);

    impl Compressor {
        pub fn new(level: u32) -> Result<Self, AdapterError> {
            if level > 9 {
                return Err(lib_err(format!("invalid zlib level {level}")));
            }
            Ok(Compressor(Compress::new(Compression::new(level), true)))
        }
    }

    impl PacketCompressor for Compressor {
        fn compress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
            let start = self.0.total_in();
            let mut out = Vec::with_capacity(data.len() + 64);
            loop {
                if out.len() == out.capacity() {
                    out.reserve(out.capacity().max(64));
                }
                let consumed = (self.0.total_in() - start) as usize;
                self.0
                    .compress_vec(&data[consumed..], &mut out, FlushCompress::Sync)
                    .map_err(lib_err)?;
                // the flush is complete once zlib stops short of filling the buffer
                if (self.0.total_in() - start) as usize == data.len() && out.len() < out.capacity() {
                    return Ok(out);
                }
            }
        }
    }

    pub struct Decompressor(Decompress);

    impl Decompressor {
        pub fn new() -> Self {
            Decompressor(Decompress::new(true))
        }
    }

    impl PacketDecompressor for Decompressor {
        fn decompress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
            let start = self.0.total_in();
            let mut out = Vec::with_capacity(data.len() * 4 + 64);
            loop {
                if out.len() == out.capacity() {
                    out.reserve(out.capacity());
                }
                let consumed = (self.0.total_in() - start) as usize;
                let before = (consumed, out.len());
                self.0
                    .decompress_vec(&data[consumed..], &mut out, FlushDecompress::Sync)
                    .map_err(lib_err)?;
                let consumed = (self.0.total_in() - start) as usize;
                if consumed == data.len() && out.len() < out.capacity() {
                    return Ok(out);
                }
                if (consumed, out.len()) == before {
                    return Err(lib_err("inflate made no progress"));
                }
            }
        }
    }
}

#[cfg(feature = "lzma")]
mod lzma {
    use xz2::stream::{Action, Check, Status, Stream};

    use super::{AdapterError, PacketCompressor, PacketDecompressor, LZMA_SYNC};

    fn lib_err(e: impl std::fmt::Display) -> AdapterError {
        AdapterError::Library {
            codec: LZMA_SYNC,
            detail: e.to_string(),
        }
    }

    pub struct Compressor(Stream);

    impl Compressor {
        pub fn new(level: u32) -> Result<Self, AdapterError> {
            Ok(Compressor(
                Stream::new_easy_encoder(level, Check::Crc64).map_err(lib_err)?,
            ))
        }
    }

    impl PacketCompressor for Compressor {
        fn compress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
            let start = self.0.total_in();
            let mut out = Vec::with_capacity(data.len() + 128);
            loop {
                if out.len() == out.capacity() {
                    out.reserve(out.capacity().max(128));
                }
                let consumed = (self.0.total_in() - start) as usize;
                let status = self
                    .0
                    .process_vec(&data[consumed..], &mut out, Action::SyncFlush)
                    .map_err(lib_err)?;
                // liblzma signals a finished sync flush with STREAM_END
                if status == Status::StreamEnd {
                    return Ok(out);
                }
            }
        }
    }

    pub struct Decompressor(Stream);

    impl Decompressor {
        pub fn new() -> Result<Self, AdapterError> {
            Ok(Decompressor(
                Stream::new_stream_decoder(u64::MAX, 0).map_err(lib_err)?,
            ))
        }
    }

    impl PacketDecompressor for Decompressor {
        fn decompress_packet(&mut self, data: &[u8]) -> Result<Vec<u8>, AdapterError> {
            let start = self.0.total_in();
            let mut out = Vec::with_capacity(data.len() * 4 + 64);
            loop {
                if out.len() == out.capacity() {
                    out.reserve(out.capacity());
                }
                let consumed = (self.0.total_in() - start) as usize;
                let before = (consumed, out.len());
                self.0
                    .process_vec(&data[consumed..], &mut out, Action::Run)
                    .map_err(lib_err)?;
                let consumed = (self.0.total_in() - start) as usize;
                if consumed == data.len() && out.len() < out.capacity() {
                    return Ok(out);
                }
                if (consumed, out.len()) == before {
                    return Err(lib_err("decoder made no progress"));
                }
            }
        }
    }
}
