//! Packet-stream compression with per-packet flushing.
//!
//! The codec is LZ77 over a window of suffix-tree-indexed blocks, with
//! Huffman tables rebuilt on a fixed schedule from a ledger of recent tuples.
//! Each packet becomes one self-delimiting block that decodes as soon as it
//! arrives, provided every earlier block was decoded first.
//!
//! ```
//! use aphc_core::{CodecConfig, Decoder, Encoder};
//!
//! let cfg = CodecConfig::default();
//! let mut enc = Encoder::new(cfg).unwrap();
//! let mut dec = Decoder::new(cfg).unwrap();
//! for packet in [&b"hp 41/42"[..], b"hp 40/42", b"hp 40/42"] {
//!     let block = enc.encode_packet(packet).unwrap();
//!     assert_eq!(dec.decode_packet(&block).unwrap(), packet);
//! }
//! assert_eq!(enc.state_hash(), dec.state_hash());
//! ```

pub mod alphabet;
pub mod baselines;
pub mod bench;
pub mod bitstream;
pub mod codec;
pub mod container;
pub mod huffman;
pub mod par;
pub mod selftest;
pub mod suffix_tree;
pub mod synth;
pub mod trace;
pub mod window;

pub use baselines::{list_codecs, lookup, CodecSettings, CodecSpec, PacketCompressor, PacketDecompressor};
pub use bench::{render_report, run_bench, BenchConfig, BenchReport, ReportFormat};
pub use codec::{CodecConfig, CodecError, Decoder, Encoder, StateDigest, Tuple};
pub use container::{compress_trace, decompress_container, ContainerError};
pub use par::Execution;
pub use synth::{describe_profile, gen_trace, TrafficProfile};
pub use trace::{read_trace, trace_stats, write_trace, PacketTrace, SizeCategory, TraceStats};
