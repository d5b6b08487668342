use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aphc_core::baselines::{CodecSettings, DEFAULT_DEFLATE_LEVEL, DEFAULT_LZMA_LEVEL};
use aphc_core::bench::{render_report, run_bench, BenchConfig, ReportFormat};
use aphc_core::selftest::run_selftest;
use aphc_core::synth::generate;
use aphc_core::trace::{histogram_bucket_range, SizeCategory};
use aphc_core::{
    compress_trace, decompress_container, read_trace, trace_stats, write_trace, CodecConfig,
    Execution, TrafficProfile,
};
use clap::{Args, Parser, Subcommand};

/// Packet-stream compression toolkit: synthetic traces, the aphc codec and a
/// per-packet benchmark against zlib and liblzma.
#[derive(Parser, Debug)]
#[command(name = "aphc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic game-traffic trace
    Gen {
        /// Output trace file (PKT1)
        #[arg(long)]
        out: PathBuf,
        /// Number of packets
        #[arg(long, default_value_t = 32_000)]
        packets: usize,
        /// Generator seed; overrides the profile's seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Traffic profile file (key = value lines); built-in profile if omitted
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Print packet-length statistics of a trace
    Stats {
        /// Trace file (PKT1)
        trace: PathBuf,
    },
    /// Compress a trace into an APHC container
    Compress {
        /// Trace file (PKT1)
        trace: PathBuf,
        /// Output container
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        codec: CodecFlags,
    },
    /// Decompress an APHC container back into a trace
    Decompress {
        /// Container file (APHC)
        container: PathBuf,
        /// Output trace file (PKT1)
        #[arg(long)]
        out: PathBuf,
    },
    /// Compress every packet of a trace with each codec and report ratios
    Bench {
        /// Trace file (PKT1)
        trace: PathBuf,
        /// Comma-separated codecs; unavailable ones are reported as skipped
        #[arg(long, value_delimiter = ',', default_value = "null,aphc,deflate-sync,lzma-sync")]
        codecs: Vec<String>,
        /// Report format: csv or md
        #[arg(long, default_value = "md")]
        format: ReportFormat,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// zlib compression level for deflate-sync
        #[arg(long, default_value_t = DEFAULT_DEFLATE_LEVEL)]
        deflate_level: u32,
        /// liblzma preset for lzma-sync
        #[arg(long, default_value_t = DEFAULT_LZMA_LEVEL)]
        lzma_level: u32,
        /// Run codecs one after another instead of concurrently
        #[arg(long)]
        sequential: bool,
        #[command(flatten)]
        codec: CodecFlags,
    },
    /// Run the built-in oracle checks
    Selftest {
        /// Run checks on a single thread
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Args, Debug)]
struct CodecFlags {
    /// Window block size in bytes
    #[arg(long, default_value_t = 8192)]
    block_size: u32,
    /// Number of window blocks kept
    #[arg(long, default_value_t = 4)]
    max_blocks: u16,
    /// Recent entries used to build Huffman tables
    #[arg(long, default_value_t = 4096)]
    ledger_size: u16,
    /// Largest gap between table rebuilds, in tuples
    #[arg(long, default_value_t = 512)]
    rebuild_cap: u16,
    /// Shortest match worth encoding
    #[arg(long, default_value_t = 3)]
    min_match: u8,
    /// Longest match
    #[arg(long, default_value_t = 258)]
    max_match: u16,
}

impl CodecFlags {
    fn config(&self) -> Result<CodecConfig, Failure> {
        let cfg = CodecConfig {
            block_size: self.block_size,
            max_blocks: self.max_blocks,
            ledger_size: self.ledger_size,
            rebuild_cap: self.rebuild_cap,
            min_match: self.min_match,
            max_match: self.max_match,
        };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

enum Failure {
    Usage(String),
    Failed(String),
}

fn failed(e: impl std::fmt::Display) -> Failure {
    Failure::Failed(e.to_string())
}

fn mode(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| failed(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen {
            out,
            packets,
            seed,
            profile,
        } => {
            let mut p = match profile {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    TrafficProfile::from_config(&text)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
                }
                None => TrafficProfile::default(),
            };
            p.seed = seed;
            let g = generate(&p, packets).map_err(|e| Failure::Usage(e.to_string()))?;
            write_trace(&out, &g.trace).map_err(failed)?;
            eprintln!(
                "wrote {} packets, {} bytes ({:.1}% text) to {}",
                g.trace.len(),
                g.trace.total_bytes(),
                100.0 * g.text_fraction(),
                out.display()
            );
        }
        Command::Stats { trace } => {
            let t = read_trace(&trace).map_err(failed)?;
            let s = trace_stats(&t);
            println!("packets            {}", s.packet_count);
            println!("total bytes        {}", s.total_bytes);
            println!("mean length        {:.2}", s.mean_len());
            println!("<= 10 bytes        {:.2}%", 100.0 * s.fraction_at_most(10));
            println!("<= 20 bytes        {:.2}%", 100.0 * s.fraction_at_most(20));
            println!();
            println!("{:<12} {:>10} {:>10} {:>12}", "category", "range", "packets", "bytes");
            for c in SizeCategory::ALL {
                println!(
                    "{:<12} {:>10} {:>10} {:>12}",
                    c.name(),
                    c.range_label(),
                    s.category_counts[c.index()],
                    s.category_bytes[c.index()]
                );
            }
            println!();
            println!("{:<12} {:>10}", "length", "packets");
            for (b, n) in s.histogram.iter().enumerate().filter(|(_, &n)| n > 0) {
                let (lo, hi) = histogram_bucket_range(b);
                println!("{:<12} {:>10}", format!("{lo}-{hi}"), n);
            }
        }
        Command::Compress { trace, out, codec } => {
            let cfg = codec.config()?;
            let t = read_trace(&trace).map_err(failed)?;
            let bytes = compress_trace(&cfg, &t).map_err(failed)?;
            fs::write(&out, &bytes).map_err(|e| failed(format!("{}: {e}", out.display())))?;
            eprintln!(
                "{} packets, {} -> {} bytes",
                t.len(),
                t.total_bytes(),
                bytes.len()
            );
        }
        Command::Decompress { container, out } => {
            let bytes = fs::read(&container)
                .map_err(|e| failed(format!("{}: {e}", container.display())))?;
            let (_, t) = decompress_container(&bytes).map_err(failed)?;
            write_trace(&out, &t).map_err(failed)?;
            eprintln!("{} packets, {} bytes", t.len(), t.total_bytes());
        }
        Command::Bench {
            trace,
            codecs,
            format,
            out,
            deflate_level,
            lzma_level,
            sequential,
            codec,
        } => {
            let settings = CodecSettings {
                aphc: codec.config()?,
                deflate_level,
                lzma_level,
            };
            let t = read_trace(&trace).map_err(failed)?;
            let names: Vec<&str> = codecs.iter().map(String::as_str).collect();
            let cfg = BenchConfig {
                settings,
                execution: mode(sequential),
            };
            let report = run_bench(&t, &names, &cfg).map_err(|e| Failure::Usage(e.to_string()))?;
            write_output(out.as_deref(), &render_report(&report, format))?;
            let broken: Vec<String> = report
                .rows
                .iter()
                .filter_map(|r| match &r.status {
                    aphc_core::bench::RowStatus::Failed(msg) => Some(format!("{}: {msg}", r.codec)),
                    _ => None,
                })
                .collect();
            if !broken.is_empty() {
                return Err(Failure::Failed(broken.join("\n")));
            }
        }
        Command::Selftest { sequential } => {
            let results = run_selftest(mode(sequential));
            for r in &results {
                println!("{r}");
            }
            let bad = results.iter().filter(|r| !r.passed).count();
            if bad > 0 {
                return Err(Failure::Failed(format!("{bad} of {} checks failed", results.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
