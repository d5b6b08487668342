//! APHC stream container: a config echo followed by length-prefixed blocks.
//!
//! ```text
//! "APHC" | version u8 = 1
//! block_size u32 | max_blocks u16 | ledger_size u16 | rebuild_cap u16
//! min_match u8 | (max_match - 3) u8
//! repeated: block_len u32 | block bytes
//! ```
//!
//! All integers little-endian.

use thiserror::Error;

use crate::codec::{CodecConfig, CodecError, ConfigError, Decoder, Encoder};
use crate::trace::PacketTrace;

pub const CONTAINER_MAGIC: &[u8; 4] = b"APHC";
pub const CONTAINER_VERSION: u8 = 1;
pub const CONTAINER_HEADER_LEN: usize = 17;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: usize, reason: String },
    #[error("invalid config in header: {0}")]
    Config(#[from] ConfigError),
    #[error("block {index} (byte {offset}): {source}")]
    Block {
        index: usize,
        offset: usize,
        source: CodecError,
    },
}

pub fn encode_header(cfg: &CodecConfig) -> [u8; CONTAINER_HEADER_LEN] {
    let mut h = [0u8; CONTAINER_HEADER_LEN];
    h[..4].copy_from_slice(CONTAINER_MAGIC);
    h[4] = CONTAINER_VERSION;
    h[5..9].copy_from_slice(&cfg.block_size.to_le_bytes());
    h[9..11].copy_from_slice(&cfg.max_blocks.to_le_bytes());
    h[11..13].copy_from_slice(&cfg.ledger_size.to_le_bytes());
    h[13..15].copy_from_slice(&cfg.rebuild_cap.to_le_bytes());
    h[15] = cfg.min_match;
    h[16] = (cfg.max_match - 3) as u8;
    h
}

pub fn decode_header(bytes: &[u8]) -> Result<CodecConfig, ContainerError> {
    let fmt = |offset, reason: &str| ContainerError::Format {
        offset,
        reason: reason.to_string(),
    };
    if bytes.len() < 4 || &bytes[..4] != CONTAINER_MAGIC {
        return Err(fmt(0, "bad magic, expected \"APHC\""));
    }
    match bytes.get(4) {
        Some(&CONTAINER_VERSION) => {}
        Some(_) => return Err(fmt(4, "unsupported version")),
        None => return Err(fmt(4, "truncated header")),
    }
    if bytes.len() < CONTAINER_HEADER_LEN {
        return Err(fmt(bytes.len(), "truncated config echo"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let cfg = CodecConfig {
        block_size: u32::from_le_bytes(bytes[5..9].try_into().unwrap()),
        max_blocks: u16_at(9),
        ledger_size: u16_at(11),
        rebuild_cap: u16_at(13),
        min_match: bytes[15],
        max_match: bytes[16] as u16 + 3,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Compresses every packet of `trace` as one block.
pub fn compress_trace(cfg: &CodecConfig, trace: &PacketTrace) -> Result<Vec<u8>, ContainerError> {
    let mut enc = Encoder::new(*cfg)?;
    let mut out = encode_header(cfg).to_vec();
    for (index, p) in trace.iter().enumerate() {
        let offset = out.len();
        let block = enc
            .encode_packet(p)
            .map_err(|source| ContainerError::Block {
                index,
                offset,
                source,
            })?;
        out.extend_from_slice(&(block.len() as u32).to_le_bytes());
        out.extend_from_slice(&block);
    }
    Ok(out)
}

pub fn decompress_container(bytes: &[u8]) -> Result<(CodecConfig, PacketTrace), ContainerError> {
    let cfg = decode_header(bytes)?;
    let mut dec = Decoder::new(cfg)?;
    let mut packets = Vec::new();
    let mut offset = CONTAINER_HEADER_LEN;
    while offset < bytes.len() {
        let len = bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| ContainerError::Format {
                offset,
                reason: "truncated block length".into(),
            })?;
        let start = offset + 4;
        let block = start
            .checked_add(len)
            .and_then(|end| bytes.get(start..end))
            .ok_or_else(|| ContainerError::Format {
                offset: bytes.len(),
                reason: format!("block {} needs {len} bytes from byte {start}", packets.len()),
            })?;
        let packet = dec
            .decode_packet(block)
            .map_err(|source| ContainerError::Block {
                index: packets.len(),
                offset: start,
                source,
            })?;
        packets.push(packet);
        offset = start + len;
    }
    Ok((cfg, PacketTrace::new(packets)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let h = encode_header(&CodecConfig::default());
        assert_eq!(
            h,
            [
                b'A', b'P', b'H', b'C', 1, 0x00, 0x20, 0, 0, 4, 0, 0x00, 0x10, 0x00, 0x02, 3, 255
            ]
        );
        assert_eq!(decode_header(&h).unwrap(), CodecConfig::default());
    }

    #[test]
    fn round_trip_and_errors() {
        let cfg = CodecConfig {
            block_size: 128,
            max_blocks: 2,
            ..CodecConfig::default()
        };
        let trace = PacketTrace::new(vec![
            b"alpha".to_vec(),
            vec![],
            b"alpha beta".to_vec(),
            vec![7; 400],
        ]);
        let bytes = compress_trace(&cfg, &trace).unwrap();
        let (got_cfg, got) = decompress_container(&bytes).unwrap();
        assert_eq!(got_cfg, cfg);
        assert_eq!(got, trace);

        assert!(matches!(
            decompress_container(&bytes[..bytes.len() - 1]),
            Err(ContainerError::Format { .. })
        ));
        let mut bad = bytes.clone();
        bad[15] = 1;
        assert!(matches!(
            decompress_container(&bad),
            Err(ContainerError::Config(_))
        ));
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(
            decompress_container(&bad),
            Err(ContainerError::Format { offset: 0, .. })
        ));
    }
}
