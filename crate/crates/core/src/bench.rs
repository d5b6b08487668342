//! Per-packet benchmark: compress each packet with a flush, verify it with a
//! lockstep decompressor and attribute output bytes to size categories.

use std::fmt::Write as _;
use std::time::Instant;

use crate::baselines::{lookup, CodecSettings, CodecSpec, LookupError};
use crate::par::{self, Execution};
use crate::trace::{histogram_bucket_range, trace_stats, PacketTrace, SizeCategory, TraceStats};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BenchConfig {
    pub settings: CodecSettings,
    /// Codecs run concurrently, one stream per codec.
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Codec not compiled into this build.
    Skipped,
    /// Compression, decompression or verification failed; nothing is reported.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecRow {
    pub codec: &'static str,
    pub settings: String,
    pub status: RowStatus,
    pub input_bytes: [u64; 4],
    pub output_bytes: [u64; 4],
    pub packets: u64,
    pub seconds: f64,
}

impl CodecRow {
    fn empty(spec: &CodecSpec, status: RowStatus) -> Self {
        CodecRow {
            codec: spec.name(),
            settings: spec.settings(),
            status,
            input_bytes: [0; 4],
            output_bytes: [0; 4],
            packets: 0,
            seconds: 0.0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    pub fn total_input(&self) -> u64 {
        self.input_bytes.iter().sum()
    }

    pub fn total_output(&self) -> u64 {
        self.output_bytes.iter().sum()
    }

    /// Compressed ÷ original over the whole trace. `None` for rows without
    /// results or an empty trace.
    pub fn overall_ratio(&self) -> Option<f64> {
        ratio(self.is_ok(), self.total_output(), self.total_input())
    }

    pub fn category_ratio(&self, cat: SizeCategory) -> Option<f64> {
        let i = cat.index();
        ratio(self.is_ok(), self.output_bytes[i], self.input_bytes[i])
    }

    /// Packets compressed and verified per second, both directions included.
    pub fn throughput(&self) -> Option<f64> {
        (self.is_ok() && self.seconds > 0.0).then(|| self.packets as f64 / self.seconds)
    }
}

fn ratio(ok: bool, out: u64, input: u64) -> Option<f64> {
    (ok && input > 0).then(|| out as f64 / input as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub stats: TraceStats,
    pub rows: Vec<CodecRow>,
}

impl BenchReport {
    pub fn row(&self, codec: &str) -> Option<&CodecRow> {
        self.rows.iter().find(|r| r.codec == codec)
    }
}

pub fn run_bench(
    trace: &PacketTrace,
    codec_names: &[&str],
    cfg: &BenchConfig,
) -> Result<BenchReport, LookupError> {
    let specs = codec_names
        .iter()
        .map(|n| lookup(n, &cfg.settings))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = par::map(cfg.execution, &specs, |spec| bench_codec(trace, spec));
    Ok(BenchReport {
        stats: trace_stats(trace),
        rows,
    })
}

/// Runs one codec over the whole trace with a fresh stream pair.
pub fn bench_codec(trace: &PacketTrace, spec: &CodecSpec) -> CodecRow {
    if !spec.is_available() {
        return CodecRow::empty(spec, RowStatus::Skipped);
    }
    let failed = |msg: String| CodecRow::empty(spec, RowStatus::Failed(msg));
    let (mut enc, mut dec) = match (spec.compressor(), spec.decompressor()) {
        (Ok(e), Ok(d)) => (e, d),
        (Err(e), _) | (_, Err(e)) => return failed(e.to_string()),
    };
    let mut row = CodecRow::empty(spec, RowStatus::Ok);
    let start = Instant::now();
    for (i, p) in trace.iter().enumerate() {
        let z = match enc.compress_packet(p) {
            Ok(z) => z,
            Err(e) => return failed(format!("packet {i}: compression failed: {e}")),
        };
        match dec.decompress_packet(&z) {
            Ok(back) if back == p => {}
            Ok(back) => {
                return failed(format!(
                    "packet {i}: decompressed {} bytes do not match the {} input bytes",
                    back.len(),
                    p.len()
                ))
            }
            Err(e) => return failed(format!("packet {i}: decompression failed: {e}")),
        }
        let c = SizeCategory::of(p.len()).index();
        row.input_bytes[c] += p.len() as u64;
        row.output_bytes[c] += z.len() as u64;
        row.packets += 1;
    }
    row.seconds = start.elapsed().as_secs_f64();
    row
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown report format {s:?}; expected csv or md")),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 7] = [
    "codec",
    "overall",
    "very_small",
    "small",
    "medium",
    "large",
    "throughput",
];

fn cells(row: &CodecRow) -> Vec<String> {
    let fill = |v: Option<f64>| match (&row.status, v) {
        (RowStatus::Skipped, _) => "skipped".to_string(),
        (RowStatus::Failed(_), _) => "failed".to_string(),
        (RowStatus::Ok, Some(v)) => format!("{v:.3}"),
        (RowStatus::Ok, None) => "n/a".to_string(),
    };
    let mut out = vec![row.codec.to_string(), fill(row.overall_ratio())];
    out.extend(SizeCategory::ALL.iter().map(|&c| fill(row.category_ratio(c))));
    out.push(match row.throughput() {
        Some(t) => format!("{t:.0}"),
        None => fill(None),
    });
    out
}

pub fn render_report(report: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn render_csv(report: &BenchReport) -> String {
    // writing to a Vec cannot fail
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS).unwrap();
    for row in &report.rows {
        w.write_record(cells(row)).unwrap();
    }
    let mut out = w.into_inner().unwrap();
    out.push(b'\n');
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bucket", "min_len", "max_len", "packets"]).unwrap();
    for (b, count) in report.stats.histogram.iter().enumerate() {
        let (lo, hi) = histogram_bucket_range(b);
        w.write_record([b.to_string(), lo.to_string(), hi.to_string(), count.to_string()])
            .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn render_markdown(report: &BenchReport) -> String {
    let s = &report.stats;
    let mut out = String::new();
    out.push_str("# Per-packet compression benchmark\n\n");
    let _ = writeln!(
        out,
        "Trace: {} packets, {} bytes, {:.1}% of packets ≤ 10 bytes, {:.1}% ≤ 20 bytes.\n",
        s.packet_count,
        s.total_bytes,
        100.0 * s.fraction_at_most(10),
        100.0 * s.fraction_at_most(20)
    );
    out.push_str(
        "Ratio is compressed bytes ÷ original bytes (smaller is better). Every packet is \
         flushed on its own and every emitted byte is counted, stream headers included. \
         Every packet was decompressed and checked before its bytes were counted. \
         Throughput is packets per second for compress plus verify and is indicative only.\n\n",
    );
    for row in &report.rows {
        let _ = writeln!(out, "- `{}`: {}", row.codec, row.settings);
        if let RowStatus::Failed(msg) = &row.status {
            let _ = writeln!(out, "  - failed: {msg}");
        }
    }
    out.push('\n');
    let _ = writeln!(out, "| {} |", REPORT_COLUMNS.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(REPORT_COLUMNS.len()));
    for row in &report.rows {
        let _ = writeln!(out, "| {} |", cells(row).join(" | "));
    }
    out.push_str("\n## Packet length histogram\n\n| length | packets |\n|---|---|\n");
    for (b, count) in s.histogram.iter().enumerate() {
        let (lo, hi) = histogram_bucket_range(b);
        let _ = writeln!(out, "| {lo}-{hi} | {count} |");
    }
    out.push_str("\n## Size categories\n\n| category | range | packets | bytes |\n|---|---|---|---|\n");
    for c in SizeCategory::ALL {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            c.name(),
            c.range_label(),
            s.category_counts[c.index()],
            s.category_bytes[c.index()]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{APHC, DEFLATE_SYNC, LZMA_SYNC, NULL};

    fn small_trace() -> PacketTrace {
        PacketTrace::new(
            (0..300)
                .map(|i| {
                    let n = [4usize, 9, 15, 60, 400, 1500][i % 6];
                    (0..n).map(|j| b"status hp 42/42 "[(i + j) % 16]).collect()
                })
                .collect(),
        )
    }

    #[test]
    fn null_row_is_exactly_one() {
        let r = run_bench(&small_trace(), &[NULL], &BenchConfig::default()).unwrap();
        let row = r.row(NULL).unwrap();
        assert_eq!(row.overall_ratio(), Some(1.0));
        for c in SizeCategory::ALL {
            assert_eq!(row.category_ratio(c), Some(1.0));
        }
        let csv = render_report(&r, ReportFormat::Csv);
        assert!(csv.lines().nth(1).unwrap().starts_with("null,1.000,1.000,1.000,1.000,1.000,"));
    }

    #[test]
    fn conservation_and_modes_agree() {
        let t = small_trace();
        let names = [NULL, APHC, DEFLATE_SYNC, LZMA_SYNC];
        let mut cfg = BenchConfig::default();
        let a = run_bench(&t, &names, &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let b = run_bench(&t, &names, &cfg).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.output_bytes, y.output_bytes);
            assert_eq!(x.total_input(), t.total_bytes() * u64::from(x.is_ok()));
        }
        assert_eq!(a.stats.total_bytes, t.total_bytes());
    }

    #[test]
    fn skipped_rows_render_skipped() {
        let spec = CodecSpec::LzmaSync { level: 3 };
        let report = BenchReport {
            stats: trace_stats(&small_trace()),
            rows: vec![CodecRow::empty(&spec, RowStatus::Skipped)],
        };
        let csv = render_report(&report, ReportFormat::Csv);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "lzma-sync,skipped,skipped,skipped,skipped,skipped,skipped"
        );
        let md = render_report(&report, ReportFormat::Markdown);
        assert!(md.contains("| lzma-sync | skipped |"));
    }

    #[test]
    fn csv_reparses_to_same_numbers() {
        let r = run_bench(&small_trace(), &[NULL, APHC], &BenchConfig::default()).unwrap();
        let text = render_report(&r, ReportFormat::Csv);
        let mut rd = csv::ReaderBuilder::new()
            .flexible(true)
            .from_reader(text.as_bytes());
        let recs: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
        let aphc = &recs[1];
        let row = r.row(APHC).unwrap();
        let overall: f64 = aphc[1].parse().unwrap();
        assert!((overall - row.overall_ratio().unwrap()).abs() <= 0.0005);
        assert_eq!(&recs[2][0], "bucket");
    }

    #[test]
    fn unknown_codec_is_rejected() {
        assert!(run_bench(&small_trace(), &["zstd"], &BenchConfig::default()).is_err());
    }
}
