//! Reference oracles and the checks built on them.
//!
//! The oracles here are deliberately naive (byte scans, exhaustive search)
//! and share no code with the structures they check. The CLI `selftest`
//! command and the acceptance tests both run them.

use std::fmt;

use crate::codec::{CodecConfig, Decoder, Encoder, StateDigest};
use crate::huffman::{huffman_code_lengths, CodeTableSet};
use crate::par::{self, Execution};
use crate::synth::SplitMix64;
use crate::trace::PacketTrace;
use crate::window::{Match, Window};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, failure: Option<String>, ok_detail: String) -> Self {
        match failure {
            None => CheckResult {
                name,
                passed: true,
                detail: ok_detail,
            },
            Some(detail) => CheckResult {
                name,
                passed: false,
                detail,
            },
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Longest match by scanning every offset of every live block. Same
/// tie-break as the window: newest block, then smallest offset.
pub fn brute_force_match(window: &Window, lookahead: &[u8], min_len: usize, max_len: usize) -> Option<Match> {
    let want = lookahead.len().min(max_len);
    let mut best: Option<Match> = None;
    for block in window.blocks().rev() {
        let data = block.data();
        for off in 0..data.len() {
            let mut n = 0;
            while n < want && off + n < data.len() && data[off + n] == lookahead[n] {
                n += 1;
            }
            if n >= min_len.max(1) && best.is_none_or(|m| n > m.length) {
                best = Some(Match {
                    position: block.base_offset() + off,
                    length: n,
                });
            }
        }
    }
    best
}

/// Σ weight × length.
pub fn weighted_cost(weights: &[u64], lengths: &[u8]) -> u64 {
    weights.iter().zip(lengths).map(|(&w, &l)| w * l as u64).sum()
}

/// Smallest Σ weight × length over all complete prefix codes, by exhaustive
/// search over sorted length sequences. Only practical for small alphabets.
pub fn brute_force_optimal_cost(weights: &[u64]) -> u64 {
    let n = weights.len();
    if n <= 1 {
        return 0;
    }
    assert!(n <= 24, "alphabet too large for exhaustive search");
    let mut w = weights.to_vec();
    w.sort_unstable_by(|a, b| b.cmp(a));
    // heaviest symbols take the shortest lengths, so non-decreasing length
    // sequences over the sorted weights cover every optimum
    let max_depth = n - 1;
    let full = 1u64 << max_depth;
    let suffix_sum: Vec<u64> = (0..=n).map(|i| w[i..].iter().sum()).collect();
    let mut best = u64::MAX;

    #[allow(clippy::too_many_arguments)]
    fn search(
        i: usize,
        min_d: usize,
        used: u64,
        cost: u64,
        w: &[u64],
        suffix_sum: &[u64],
        max_depth: usize,
        full: u64,
        best: &mut u64,
    ) {
        let n = w.len();
        if i == n {
            if used == full {
                *best = (*best).min(cost);
            }
            return;
        }
        for d in min_d.max(1)..=max_depth {
            // every remaining symbol sits at depth ≥ d
            if cost + suffix_sum[i] * d as u64 >= *best {
                break;
            }
            let take = full >> d;
            if used + take > full {
                continue;
            }
            let left = full - used - take;
            if left > (n - i - 1) as u64 * take {
                continue;
            }
            search(i + 1, d, used + take, cost + w[i] * d as u64, w, suffix_sum, max_depth, full, best);
        }
    }

    search(0, 1, 0, 0, &w, &suffix_sum, max_depth, full, &mut best);
    best
}

/// Σ 2^-len == 1, by integer arithmetic scaled to the longest code.
pub fn kraft_sum_is_one(lengths: &[u8]) -> bool {
    if lengths.len() == 1 {
        return lengths[0] == 0;
    }
    let Some(&max) = lengths.iter().max() else {
        return false;
    };
    if lengths.contains(&0) || max > 64 {
        return false;
    }
    let sum: u128 = lengths.iter().map(|&l| 1u128 << (max - l)).sum();
    sum == 1u128 << max
}

pub fn tables_are_complete(tables: &CodeTableSet) -> bool {
    tables.tables().iter().all(|t| kraft_sum_is_one(t.lengths()))
}

/// Rebuild points implied by the doubling rule: the first at two tuples,
/// the k-th gap `min(2^k, cap)`. Only points ≤ `limit`.
pub fn expected_rebuild_points(cap: u64, limit: u64) -> Vec<u64> {
    let mut points = Vec::new();
    let mut at = 2u64;
    let mut k = 1u32;
    while at <= limit {
        points.push(at);
        at += 2u64.saturating_pow(k).min(cap);
        k = k.saturating_add(1);
    }
    points
}

/// Packets meant to stress the codec: empty, single bytes, runs, random
/// noise and exact repeats of earlier packets.
pub fn adversarial_packets(count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = SplitMix64::new(seed);
    let mut out: Vec<Vec<u8>> = Vec::with_capacity(count);
    for i in 0..count {
        let p = match i % 6 {
            0 => Vec::new(),
            1 => vec![rng.next_u64() as u8],
            2 => vec![rng.next_u64() as u8; rng.range(2, 3000) as usize],
            3 => {
                let n = rng.range(1, 1500) as usize;
                (0..n).map(|_| rng.next_u64() as u8).collect()
            }
            4 if !out.is_empty() => {
                let j = rng.below(out.len() as u64) as usize;
                out[j].clone()
            }
            _ => {
                let n = rng.range(1, 400) as usize;
                (0..n).map(|_| b"ab"[rng.below(2) as usize]).collect()
            }
        };
        out.push(p);
    }
    out
}

/// Compares the optimal-code builder against exhaustive search on `count`
/// random weight vectors over alphabets of 2 to 16 symbols.
pub fn check_huffman_optimality(count: usize, seed: u64, mode: Execution) -> CheckResult {
    let mut rng = SplitMix64::new(seed);
    let vectors: Vec<Vec<u64>> = (0..count)
        .map(|_| {
            let n = rng.range(2, 16) as usize;
            match rng.below(3) {
                0 => (0..n).map(|_| rng.range(1, 1000)).collect(),
                // steep weights give deep, skewed trees
                1 => (0..n).map(|_| 1u64 << rng.below(20)).collect(),
                _ => (0..n).map(|_| rng.range(1, 4)).collect(),
            }
        })
        .collect();
    let failures: Vec<String> = par::map(mode, &vectors, |w| {
        let lengths = huffman_code_lengths(w);
        let got = weighted_cost(w, &lengths);
        let want = brute_force_optimal_cost(w);
        if got != want {
            Some(format!("weights {w:?}: cost {got}, optimum {want}"))
        } else if !kraft_sum_is_one(&lengths) {
            Some(format!("weights {w:?}: lengths {lengths:?} not complete"))
        } else {
            None
        }
    })
    .into_iter()
    .flatten()
    .collect();
    CheckResult::new(
        "huffman-optimality",
        failures.into_iter().next(),
        format!("{count} weight vectors match the exhaustive optimum"),
    )
}

/// Compares window matches against a byte scan on `count` random windows of
/// at most 2 KiB, and checks the bytes a match copies.
pub fn check_longest_match(count: usize, seed: u64, mode: Execution) -> CheckResult {
    let failures: Vec<String> = par::map_range(mode, count, |i| {
        let mut rng = SplitMix64::new(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let block_size = rng.range(16, 512) as usize;
        let max_blocks = rng.range(1, 4) as usize;
        let alphabet = rng.range(2, 8) as u8;
        let byte = |rng: &mut SplitMix64| b'a' + rng.below(alphabet as u64) as u8;
        let mut window = Window::new(block_size, max_blocks);
        let fill = rng.range(0, 2048) as usize;
        let mut history = Vec::with_capacity(fill);
        while history.len() < fill {
            let n = rng.range(1, 200) as usize;
            let chunk: Vec<u8> = (0..n).map(|_| byte(&mut rng)).collect();
            window.append(&chunk);
            history.extend_from_slice(&chunk);
        }
        let look_len = rng.range(1, 300) as usize;
        let lookahead: Vec<u8> = if !history.is_empty() && rng.chance(0.5) {
            // splice a stretch of history so long matches occur
            let start = rng.below(history.len() as u64) as usize;
            let mut v: Vec<u8> = history[start..].iter().take(look_len).copied().collect();
            v.push(byte(&mut rng));
            v
        } else {
            (0..look_len).map(|_| byte(&mut rng)).collect()
        };
        let min_len = rng.range(2, 4) as usize;
        let max_len = rng.range(min_len as u64, 258) as usize;
        let got = window.find_match(&lookahead, min_len, max_len);
        let want = brute_force_match(&window, &lookahead, min_len, max_len);
        if got != want {
            return Some(format!("instance {i}: window gave {got:?}, scan gave {want:?}"));
        }
        if let Some(m) = got {
            let mut copied = Vec::new();
            if !window.copy_range(m.position, m.length, &mut copied) || copied != lookahead[..m.length] {
                return Some(format!("instance {i}: bytes at {m:?} differ from the lookahead"));
            }
        }
        None
    })
    .into_iter()
    .flatten()
    .collect();
    CheckResult::new(
        "longest-match",
        failures.into_iter().next(),
        format!("{count} windows match the byte scan"),
    )
}

/// Encodes random packets until `tuples` tuples have been emitted and
/// compares the recorded rebuild points with the doubling rule.
pub fn check_rebuild_schedule(cap: u16, tuples: u64, seed: u64) -> CheckResult {
    let cfg = CodecConfig {
        rebuild_cap: cap,
        ..CodecConfig::default()
    };
    let mut enc = Encoder::new(cfg).expect("default-derived config is valid");
    enc.record_rebuilds();
    let mut rng = SplitMix64::new(seed);
    while enc.ledger().tuples_seen() < tuples {
        let n = rng.range(1, 64) as usize;
        let p: Vec<u8> = (0..n).map(|_| rng.next_u64() as u8).collect();
        enc.encode_packet(&p).expect("small packets encode");
    }
    // the last packet may overshoot; rebuild checks happen before each tuple
    let seen = enc.ledger().tuples_seen();
    let limit = tuples.min(seen.saturating_sub(1));
    let got: Vec<u64> = enc.rebuild_points().iter().copied().filter(|&t| t <= limit).collect();
    let want = expected_rebuild_points(cap as u64, limit);
    let failure = (got != want).then(|| {
        let first = got
            .iter()
            .zip(&want)
            .position(|(a, b)| a != b)
            .unwrap_or(got.len().min(want.len()));
        format!(
            "cap {cap}: first difference at index {first}: got {:?}, expected {:?}",
            got.get(first),
            want.get(first)
        )
    });
    CheckResult::new(
        "rebuild-schedule",
        failure,
        format!("{} rebuilds over {limit} tuples follow the doubling rule (cap {cap})", want.len()),
    )
}

/// Encoder and decoder hashes after every packet.
pub fn check_lockstep(cfg: CodecConfig, packets: &[Vec<u8>]) -> CheckResult {
    let failure = (|| {
        let mut enc = Encoder::new(cfg).map_err(|e| e.to_string())?;
        let mut dec = Decoder::new(cfg).map_err(|e| e.to_string())?;
        for (i, p) in packets.iter().enumerate() {
            let z = enc.encode_packet(p).map_err(|e| format!("packet {i}: {e}"))?;
            let back = dec.decode_packet(&z).map_err(|e| format!("packet {i}: {e}"))?;
            if &back != p {
                return Err(format!("packet {i}: decoded bytes differ"));
            }
            let (a, b): (StateDigest, StateDigest) = (enc.state_hash(), dec.state_hash());
            if a != b {
                return Err(format!("packet {i}: encoder {a} vs decoder {b}"));
            }
        }
        Ok(())
    })()
    .err();
    CheckResult::new(
        "lockstep",
        failure,
        format!("state hashes agree after each of {} packets", packets.len()),
    )
}

/// What one bit flip did to the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipOutcome {
    /// The decoder reported corruption.
    Rejected,
    /// Decoded, but to different bytes.
    WrongOutput,
    /// Decoded to the right bytes, but the state no longer matches.
    StateDiverged,
    /// Nothing noticed the flip.
    Undetected,
}

/// Flips `iterations` random bits in compressed blocks of `packets`, each
/// against a decoder snapshot taken just before that block.
pub fn bitflip_fuzz(cfg: CodecConfig, packets: &[Vec<u8>], iterations: usize, seed: u64, mode: Execution) -> Result<[usize; 4], String> {
    let mut enc = Encoder::new(cfg).map_err(|e| e.to_string())?;
    let mut dec = Decoder::new(cfg).map_err(|e| e.to_string())?;
    let mut cases = Vec::new();
    for (i, p) in packets.iter().enumerate() {
        let z = enc.encode_packet(p).map_err(|e| format!("packet {i}: {e}"))?;
        let snapshot = dec.clone();
        dec.decode_packet(&z).map_err(|e| format!("packet {i}: {e}"))?;
        cases.push((snapshot, z, p, enc.state_hash()));
    }
    if cases.is_empty() {
        return Err("no packets to fuzz".into());
    }
    let outcomes = par::map_range(mode, iterations, |k| {
        let mut rng = SplitMix64::new(seed ^ (k as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
        let (snapshot, z, p, want_hash) = &cases[rng.below(cases.len() as u64) as usize];
        let mut bad = z.clone();
        let bit = rng.below(bad.len() as u64 * 8) as usize;
        bad[bit / 8] ^= 0x80 >> (bit % 8);
        let mut d = snapshot.clone();
        match d.decode_packet(&bad) {
            Err(_) => FlipOutcome::Rejected,
            Ok(out) if &out != *p => FlipOutcome::WrongOutput,
            Ok(_) if d.state_hash() != *want_hash => FlipOutcome::StateDiverged,
            Ok(_) => FlipOutcome::Undetected,
        }
    });
    let mut counts = [0usize; 4];
    for o in outcomes {
        counts[o as usize] += 1;
    }
    Ok(counts)
}

pub fn check_bitflip_fuzz(cfg: CodecConfig, packets: &[Vec<u8>], iterations: usize, seed: u64, mode: Execution) -> CheckResult {
    match bitflip_fuzz(cfg, packets, iterations, seed, mode) {
        Err(e) => CheckResult::new("bitflip-fuzz", Some(e), String::new()),
        Ok(c) => CheckResult::new(
            "bitflip-fuzz",
            (c[3] > 0).then(|| format!("{} of {iterations} flips went unnoticed", c[3])),
            format!(
                "{iterations} flips: {} rejected, {} wrong output, {} state divergence",
                c[0], c[1], c[2]
            ),
        ),
    }
}

/// Round trip of a whole trace, checking every table built on the way.
pub fn check_round_trip(cfg: CodecConfig, packets: &[Vec<u8>]) -> CheckResult {
    let failure = (|| {
        let mut enc = Encoder::new(cfg).map_err(|e| e.to_string())?;
        let mut dec = Decoder::new(cfg).map_err(|e| e.to_string())?;
        let mut incomplete = 0usize;
        let mut tables = 0usize;
        if !tables_are_complete(enc.tables()) {
            incomplete += 1;
        }
        for (i, p) in packets.iter().enumerate() {
            let z = enc
                .encode_packet_observed(p, &mut |t| {
                    tables += 1;
                    if !tables_are_complete(t) {
                        incomplete += 1;
                    }
                })
                .map_err(|e| format!("packet {i}: {e}"))?;
            let back = dec.decode_packet(&z).map_err(|e| format!("packet {i}: {e}"))?;
            if &back != p {
                return Err(format!("packet {i}: decoded bytes differ"));
            }
        }
        if incomplete > 0 {
            return Err(format!("{incomplete} of {tables} table sets fail the Kraft check"));
        }
        Ok(tables)
    })();
    let tables = *failure.as_ref().unwrap_or(&0);
    CheckResult::new(
        "round-trip",
        failure.err(),
        format!("{} packets round-trip, {tables} table rebuilds all complete", packets.len()),
    )
}

/// The suite behind `aphc selftest`.
pub fn run_selftest(mode: Execution) -> Vec<CheckResult> {
    let cfg = CodecConfig::default();
    let trace: PacketTrace = crate::synth::gen_trace(&crate::synth::TrafficProfile::default(), 2000)
        .expect("default profile is valid");
    let mut mixed = trace.packets.clone();
    mixed.extend(adversarial_packets(300, 11));
    vec![
        check_huffman_optimality(200, 1, mode),
        check_longest_match(500, 2, mode),
        check_rebuild_schedule(512, 10_000, 3),
        check_round_trip(cfg, &mixed),
        check_lockstep(cfg, &trace.packets),
        check_bitflip_fuzz(cfg, &trace.packets[..120], 2000, 4, mode),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_optimum_small_cases() {
        assert_eq!(brute_force_optimal_cost(&[5, 2, 1, 1]), 5 + 4 + 3 + 3);
        assert_eq!(brute_force_optimal_cost(&[1, 1, 1, 1]), 8);
        assert_eq!(brute_force_optimal_cost(&[7]), 0);
        assert_eq!(brute_force_optimal_cost(&[3, 9]), 12);
    }

    #[test]
    fn kraft_oracle() {
        assert!(kraft_sum_is_one(&[1, 2, 3, 3]));
        assert!(!kraft_sum_is_one(&[1, 2, 3]));
        assert!(!kraft_sum_is_one(&[1, 1, 2]));
        assert!(kraft_sum_is_one(&[0]));
    }

    #[test]
    fn doubling_rule_points() {
        assert_eq!(expected_rebuild_points(8, 40), vec![2, 4, 8, 16, 24, 32, 40]);
        let p = expected_rebuild_points(512, 2048);
        assert_eq!(&p[..9], &[2, 4, 8, 16, 32, 64, 128, 256, 512]);
        assert_eq!(&p[9..], &[1024, 1536, 2048]);
    }

    #[test]
    fn adversarial_mix() {
        let p = adversarial_packets(60, 1);
        assert!(p.iter().any(|x| x.is_empty()));
        assert!(p.iter().any(|x| x.len() == 1));
    }

    #[test]
    fn brute_match_tie_break() {
        let mut w = Window::new(8, 4);
        w.append(b"abcdabcd");
        w.append(b"xxabcd");
        assert_eq!(
            brute_force_match(&w, b"abcz", 3, 258),
            Some(Match { position: 10, length: 3 })
        );
    }
}
