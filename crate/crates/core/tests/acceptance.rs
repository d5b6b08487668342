//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use aphc_core::baselines::{lookup, CodecSettings, APHC, DEFLATE_SYNC, KNOWN_CODECS, NULL};
use aphc_core::bench::{bench_codec, render_report, run_bench, BenchConfig, BenchReport, ReportFormat};
use aphc_core::selftest::{
    adversarial_packets, check_bitflip_fuzz, check_huffman_optimality, check_lockstep,
    check_longest_match, check_rebuild_schedule, check_round_trip,
};
use aphc_core::synth::{generate, GeneratedTrace};
use aphc_core::{trace_stats, CodecConfig, Execution, PacketTrace, SizeCategory, TrafficProfile};

const MIB: f64 = 1024.0 * 1024.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, ok: String) -> Outcome {
    if failures.is_empty() {
        Outcome {
            passed: true,
            detail: ok,
        }
    } else {
        Outcome {
            passed: false,
            detail: failures.join("; "),
        }
    }
}

struct Fixture {
    generated: GeneratedTrace,
    adversarial: Vec<Vec<u8>>,
    report: BenchReport,
}

fn default_trace() -> GeneratedTrace {
    generate(&TrafficProfile::default(), 32_000).expect("default profile is valid")
}

/// 1. Lossless round trip for aphc and every available adapter. Also
///    collects the Kraft check on every table aphc builds (criterion 3).
fn round_trip(fx: &Fixture) -> (Outcome, Outcome) {
    let trace = &fx.generated.trace;
    let aphc_default = check_round_trip(CodecConfig::default(), &trace.packets);
    let aphc_adv = check_round_trip(CodecConfig::default(), &fx.adversarial);
    let kraft = outcome(
        [&aphc_default, &aphc_adv]
            .iter()
            .filter(|r| !r.passed && r.detail.contains("Kraft"))
            .map(|r| r.detail.clone())
            .collect(),
        format!("every table built: {}; {}", aphc_default.detail, aphc_adv.detail),
    );

    let mut failures: Vec<String> = [&aphc_default, &aphc_adv]
        .iter()
        .filter(|r| !r.passed)
        .map(|r| format!("aphc: {}", r.detail))
        .collect();
    let settings = CodecSettings::default();
    let adversarial = PacketTrace::new(fx.adversarial.clone());
    let mut covered = vec![APHC];
    for name in KNOWN_CODECS.iter().filter(|&&n| n != APHC) {
        let spec = lookup(name, &settings).unwrap();
        if !spec.is_available() {
            continue;
        }
        covered.push(name);
        for (label, t) in [("default trace", trace), ("adversarial", &adversarial)] {
            let row = bench_codec(t, &spec);
            if !row.is_ok() {
                failures.push(format!("{name} on {label}: {:?}", row.status));
            }
        }
    }
    (
        outcome(
            failures,
            format!(
                "{} + {} packets exact for {}",
                trace.len(),
                fx.adversarial.len(),
                covered.join(", ")
            ),
        ),
        kraft,
    )
}

fn distribution(g: &GeneratedTrace) -> Outcome {
    let s = trace_stats(&g.trace);
    let le10 = s.fraction_at_most(10);
    let le20 = s.fraction_at_most(20);
    let mib = s.total_bytes as f64 / MIB;
    let text = g.text_fraction();
    let mut failures = Vec::new();
    if (le10 - 0.38).abs() > 0.02 {
        failures.push(format!("<=10 B fraction {le10:.4} outside 0.38 +- 0.02"));
    }
    if (le20 - 0.84).abs() > 0.02 {
        failures.push(format!("<=20 B fraction {le20:.4} outside 0.84 +- 0.02"));
    }
    if (mib - 1.0).abs() > 0.15 {
        failures.push(format!("total {mib:.3} MiB outside 1 +- 15%"));
    }
    if (text - 0.11).abs() > 0.03 {
        failures.push(format!("text share {text:.4} outside 0.11 +- 0.03"));
    }
    outcome(
        failures,
        format!(
            "<=10 B {le10:.4}, <=20 B {le20:.4}, {} bytes ({mib:.3} MiB), text {text:.4}",
            s.total_bytes
        ),
    )
}

fn ordering(report: &BenchReport) -> Outcome {
    let vs = SizeCategory::VerySmall;
    let aphc = report.row(APHC).expect("aphc row");
    let mut failures = Vec::new();
    let (Some(a_vs), Some(a_all)) = (aphc.category_ratio(vs), aphc.overall_ratio()) else {
        return outcome(vec![format!("aphc row has no ratios: {:?}", aphc.status)], String::new());
    };
    if a_vs >= 1.0 {
        failures.push(format!("aphc very-small ratio {a_vs:.3} not below 1"));
    }
    if a_all >= 0.9 {
        failures.push(format!("aphc overall ratio {a_all:.3} not below 0.9"));
    }
    if a_all >= a_vs {
        failures.push(format!("aphc overall {a_all:.3} not better than very-small {a_vs:.3}"));
    }
    let deflate = report.row(DEFLATE_SYNC).and_then(|r| r.category_ratio(vs));
    let deflate_note = match deflate {
        Some(d) => {
            if d <= 1.0 {
                failures.push(format!("deflate-sync very-small ratio {d:.3} not above 1"));
            }
            if d <= a_vs {
                failures.push(format!("deflate-sync very-small {d:.3} not worse than aphc {a_vs:.3}"));
            }
            format!(", deflate-sync very-small {d:.3}")
        }
        None => ", deflate-sync unavailable".to_string(),
    };
    outcome(
        failures,
        format!("aphc very-small {a_vs:.3}, aphc overall {a_all:.3}{deflate_note}"),
    )
}

fn conservation(fx: &Fixture) -> Outcome {
    let settings = CodecSettings::default();
    let mut failures = Vec::new();
    let mut checked = Vec::new();
    for row in fx.report.rows.iter().filter(|r| r.is_ok()) {
        // recount the overall output with a fresh stream, outside the bench
        let spec = lookup(row.codec, &settings).unwrap();
        let mut c = spec.compressor().unwrap();
        let total: u64 = fx
            .generated
            .trace
            .iter()
            .map(|p| c.compress_packet(p).unwrap().len() as u64)
            .sum();
        let by_category: u64 = row.output_bytes.iter().sum();
        if by_category != total {
            failures.push(format!("{}: categories sum to {by_category}, stream emitted {total}", row.codec));
        }
        if row.input_bytes.iter().sum::<u64>() != fx.generated.trace.total_bytes() {
            failures.push(format!("{}: input bytes not conserved", row.codec));
        }
        checked.push(row.codec);
    }
    let csv = render_report(&fx.report, ReportFormat::Csv);
    let null_line = csv.lines().find(|l| l.starts_with("null,")).unwrap_or("");
    if !null_line.starts_with("null,1.000,1.000,1.000,1.000,1.000,") {
        failures.push(format!("null row renders as {null_line:?}"));
    }
    let null = fx.report.row(NULL).unwrap();
    if null.total_output() != null.total_input() {
        failures.push("null output differs from input".into());
    }
    outcome(
        failures,
        format!("exact sums for {}; null row all 1.000", checked.join(", ")),
    )
}

type Line = (u32, &'static str, Outcome, f64);

fn timed(lines: &mut Vec<Line>, n: u32, name: &'static str, f: impl FnOnce() -> Outcome) {
    let t = Instant::now();
    let o = f();
    lines.push((n, name, o, t.elapsed().as_secs_f64()));
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mode = Execution::Parallel;
    let generated = default_trace();
    let report = run_bench(&generated.trace, &KNOWN_CODECS, &BenchConfig::default())
        .expect("known codec names");
    let fx = Fixture {
        adversarial: adversarial_packets(1000, 0xadd),
        generated,
        report,
    };
    let cfg = CodecConfig::default();

    let mut lines: Vec<Line> = Vec::new();
    let mut kraft = None;
    timed(&mut lines, 1, "lossless round trip", || {
        let (rt, k) = round_trip(&fx);
        kraft = Some(k);
        rt
    });
    let kraft = kraft.expect("criterion 1 ran");
    timed(&mut lines, 2, "lockstep state", || {
        let r = check_lockstep(cfg, &fx.generated.trace.packets[..5000]);
        outcome(if r.passed { vec![] } else { vec![r.detail.clone()] }, r.detail)
    });
    timed(&mut lines, 3, "huffman optimality", || {
        let r = check_huffman_optimality(200, 0x4855_4646, mode);
        let mut failures = Vec::new();
        if !r.passed {
            failures.push(r.detail.clone());
        }
        if !kraft.passed {
            failures.push(kraft.detail.clone());
        }
        outcome(failures, format!("{}; Kraft sum 1 on {}", r.detail, kraft.detail))
    });
    timed(&mut lines, 4, "longest match", || {
        let r = check_longest_match(500, 0x4c5a_3737, mode);
        outcome(if r.passed { vec![] } else { vec![r.detail.clone()] }, r.detail)
    });
    timed(&mut lines, 5, "rebuild schedule", || {
        let r = check_rebuild_schedule(512, 10_000, 0x5343_4844);
        outcome(if r.passed { vec![] } else { vec![r.detail.clone()] }, r.detail)
    });
    timed(&mut lines, 6, "distribution", || distribution(&fx.generated));
    timed(&mut lines, 7, "qualitative ordering", || ordering(&fx.report));
    timed(&mut lines, 8, "bench conservation", || conservation(&fx));
    timed(&mut lines, 9, "bit-flip robustness", || {
        let r = check_bitflip_fuzz(cfg, &fx.generated.trace.packets[..120], 10_000, 0xf11b, mode);
        outcome(if r.passed { vec![] } else { vec![r.detail.clone()] }, r.detail)
    });

    let mut failed = 0;
    for (n, name, o, secs) in &lines {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {n} [{tag}] {name}: {} ({secs:.1}s)", o.detail);
        failed += usize::from(!o.passed);
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1}s",
        lines.len() - failed,
        lines.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
