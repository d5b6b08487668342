//! Deterministic synthetic server→client game traffic.
//!
//! Each network packet is one server flush: a run of game packets, each
//! starting with a one-byte type followed by small little-endian binary
//! fields, RLE-coded screen rows, or text. The packet kinds and their mix are
//! invented stand-ins tuned to match aggregate shape targets (share of
//! packets up to 10 and 20 bytes, mean length, share of text bytes); they do
//! not reproduce any real game's wire format.
//!
//! Randomness comes from SplitMix64 so a (profile, count) pair regenerates
//! byte-identical traces anywhere:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! `below(n)` is `(out * n) >> 64` on 128-bit integers; `unit()` is
//! `(out >> 11) * 2^-53`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::trace::PacketTrace;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform in `[lo, hi]`.
    pub fn range(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.below(hi - lo + 1)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len() as u64) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("size mix weights sum to {0}, expected 1")]
    MixSum(f64),
    #[error("{key} = {value} is outside [0, 1]")]
    Probability { key: String, value: f64 },
    #[error("template_pool must be between 1 and {max} (got {got})")]
    TemplatePool { got: usize, max: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Packet kinds, each confined to one length stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    /// single or paired cell redraws and meter ticks, 3–10 bytes
    Movement,
    /// redraws plus vital-stat updates, 11–20 bytes
    Status,
    /// text messages, 21 bytes and up
    Message,
    /// full character-sheet refresh, 21–100 bytes
    StatBlock,
    /// a few RLE screen rows, 101–1000 bytes
    ScreenRow,
    /// whole-screen redraw, over 1000 bytes
    MapRefresh,
}

impl PacketKind {
    pub const ALL: [PacketKind; 6] = [
        PacketKind::Movement,
        PacketKind::Status,
        PacketKind::Message,
        PacketKind::StatBlock,
        PacketKind::ScreenRow,
        PacketKind::MapRefresh,
    ];

    pub fn key(self) -> &'static str {
        match self {
            PacketKind::Movement => "movement",
            PacketKind::Status => "status",
            PacketKind::Message => "message",
            PacketKind::StatBlock => "stat_block",
            PacketKind::ScreenRow => "screen_row",
            PacketKind::MapRefresh => "map_refresh",
        }
    }

    pub fn length_range(self) -> (usize, usize) {
        match self {
            PacketKind::Movement => (3, 10),
            PacketKind::Status => (11, 20),
            PacketKind::Message => (21, usize::MAX),
            PacketKind::StatBlock => (21, 100),
            PacketKind::ScreenRow => (101, 1000),
            PacketKind::MapRefresh => (1001, usize::MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficProfile {
    /// Probability of each packet kind, in [`PacketKind::ALL`] order.
    pub size_mix: [f64; 6],
    /// Target share of text bytes in the whole trace.
    pub text_byte_fraction: f64,
    /// Chance a stat update resends unchanged values.
    pub stat_repeat_prob: f64,
    /// Distinct message templates in use.
    pub template_pool: usize,
    pub seed: u64,
}

impl Default for TrafficProfile {
    fn default() -> Self {
        TrafficProfile {
            size_mix: [0.385, 0.455, 0.085, 0.03, 0.04, 0.005],
            text_byte_fraction: 0.11,
            stat_repeat_prob: 0.8,
            template_pool: 32,
            seed: 1,
        }
    }
}

const MIX_TOLERANCE: f64 = 1e-6;

impl TrafficProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        for (kind, &w) in PacketKind::ALL.iter().zip(&self.size_mix) {
            check_prob(&format!("mix.{}", kind.key()), w)?;
        }
        let sum: f64 = self.size_mix.iter().sum();
        if (sum - 1.0).abs() > MIX_TOLERANCE {
            return Err(ProfileError::MixSum(sum));
        }
        check_prob("text_byte_fraction", self.text_byte_fraction)?;
        check_prob("stat_repeat_prob", self.stat_repeat_prob)?;
        if self.template_pool == 0 || self.template_pool > TEMPLATES.len() {
            return Err(ProfileError::TemplatePool {
                got: self.template_pool,
                max: TEMPLATES.len(),
            });
        }
        Ok(())
    }

    /// Flat `key = value` text; `#` starts a comment.
    pub fn to_config(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed = {}", self.seed).unwrap();
        for (kind, w) in PacketKind::ALL.iter().zip(&self.size_mix) {
            writeln!(s, "mix.{} = {}", kind.key(), w).unwrap();
        }
        writeln!(s, "text_byte_fraction = {}", self.text_byte_fraction).unwrap();
        writeln!(s, "stat_repeat_prob = {}", self.stat_repeat_prob).unwrap();
        writeln!(s, "template_pool = {}", self.template_pool).unwrap();
        s
    }

    /// Parses the `key = value` format; unspecified keys keep their defaults.
    pub fn from_config(text: &str) -> Result<Self, ProfileError> {
        let mut p = TrafficProfile::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| ProfileError::Parse {
                line: line_no,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|e| err(format!("{key}: {e}")))
            };
            let int = || {
                value
                    .parse::<u64>()
                    .map_err(|e| err(format!("{key}: {e}")))
            };
            match key {
                "seed" => p.seed = int()?,
                "text_byte_fraction" => p.text_byte_fraction = float()?,
                "stat_repeat_prob" => p.stat_repeat_prob = float()?,
                "template_pool" => p.template_pool = int()? as usize,
                _ => {
                    let idx = key
                        .strip_prefix("mix.")
                        .and_then(|k| PacketKind::ALL.iter().position(|kind| kind.key() == k))
                        .ok_or_else(|| err(format!("unknown key {key:?}")))?;
                    p.size_mix[idx] = float()?;
                }
            }
        }
        p.validate()?;
        Ok(p)
    }
}

fn check_prob(key: &str, value: f64) -> Result<(), ProfileError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ProfileError::Probability {
            key: key.to_string(),
            value,
        })
    }
}

/// Human-readable dump of every knob, for report headers.
pub fn describe_profile(profile: &TrafficProfile) -> Result<String, ProfileError> {
    profile.validate()?;
    let mix = |kinds: &[PacketKind]| -> f64 {
        kinds
            .iter()
            .map(|k| profile.size_mix[PacketKind::ALL.iter().position(|x| x == k).unwrap()])
            .sum()
    };
    let mut s = String::new();
    writeln!(s, "synthetic traffic profile (invented packet kinds, seed {})", profile.seed).unwrap();
    writeln!(
        s,
        "  target share of packets <= 10 bytes: {:.3}",
        mix(&[PacketKind::Movement])
    )
    .unwrap();
    writeln!(
        s,
        "  target share of packets <= 20 bytes: {:.3}",
        mix(&[PacketKind::Movement, PacketKind::Status])
    )
    .unwrap();
    writeln!(s, "  target share of text bytes: {:.2}", profile.text_byte_fraction).unwrap();
    for (kind, w) in PacketKind::ALL.iter().zip(&profile.size_mix) {
        let (lo, hi) = kind.length_range();
        let hi = if hi == usize::MAX {
            "+".to_string()
        } else {
            format!("-{hi}")
        };
        writeln!(s, "  mix.{:<12} {:.3}  ({lo}{hi} bytes)", kind.key(), w).unwrap();
    }
    writeln!(s, "  stat_repeat_prob {:.2}", profile.stat_repeat_prob).unwrap();
    writeln!(s, "  template_pool {}", profile.template_pool).unwrap();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedTrace {
    pub trace: PacketTrace,
    /// Bytes belonging to message text.
    pub text_bytes: u64,
}

impl GeneratedTrace {
    pub fn text_fraction(&self) -> f64 {
        let total = self.trace.total_bytes();
        if total == 0 {
            0.0
        } else {
            self.text_bytes as f64 / total as f64
        }
    }
}

pub fn gen_trace(profile: &TrafficProfile, n_packets: usize) -> Result<PacketTrace, ProfileError> {
    Ok(generate(profile, n_packets)?.trace)
}

pub fn generate(profile: &TrafficProfile, n_packets: usize) -> Result<GeneratedTrace, ProfileError> {
    profile.validate()?;
    let mut world = World::new(profile);
    let mut packets = Vec::with_capacity(n_packets);
    for _ in 0..n_packets {
        let kind = world.pick_kind();
        let p = world.packet(kind);
        let (lo, hi) = kind.length_range();
        debug_assert!(
            (lo..=hi).contains(&p.len()),
            "{kind:?} produced {} bytes",
            p.len()
        );
        world.total_bytes += p.len() as u64;
        packets.push(p);
    }
    Ok(GeneratedTrace {
        trace: PacketTrace::new(packets),
        text_bytes: world.text_bytes,
    })
}

// game packet type bytes
const PKT_CHAR: u8 = 0x0c;
const PKT_STAMINA: u8 = 0x1f;
const PKT_TURN: u8 = 0x2b;
const PKT_HP: u8 = 0x22;
const PKT_SP: u8 = 0x23;
const PKT_GOLD: u8 = 0x25;
const PKT_STAT: u8 = 0x27;
const PKT_EXP: u8 = 0x28;
const PKT_MESSAGE: u8 = 0x2d;
const PKT_LINE: u8 = 0x31;
const PKT_CLEAR: u8 = 0x32;
const RLE_MARK: u8 = 0xff;

const MAP_W: usize = 80;
const MAP_H: usize = 22;

const MONSTERS: &[&str] = &[
    "kobold",
    "cave spider",
    "jackal",
    "giant frog",
    "orc archer",
    "snaga",
    "cave orc",
    "wolf",
    "hill giant",
    "dark elven priest",
    "wormtongue",
    "bullroarer",
];

const ITEMS: &[&str] = &[
    "a Potion of Cure Light Wounds",
    "a Scroll of Phase Door",
    "3 Flasks of oil",
    "a Dagger (1d4) (+0,+0)",
    "a Ring of Protection [+5]",
    "some Rations of Food",
];

// `{m}` monster, `{n}` number, `{i}` item
const TEMPLATES: &[&str] = &[
    "You hit the {m}.",
    "You miss the {m}.",
    "The {m} misses you.",
    "The {m} hits you. ({n} damage)",
    "The {m} bites you.",
    "You have slain the {m}.",
    "The {m} flees in terror!",
    "You feel something in your pack.",
    "You have {n} gold pieces worth of treasure.",
    "You see {i}.",
    "You have {i} (c).",
    "You hear a door burst open!",
    "The {m} casts a spell.",
    "You feel less thirsty.",
    "You are hungry.",
    "Your pack overflows!",
    "The {m} is unaffected!",
    "You feel better. ({n} hp)",
    "You have no more {i}.",
    "The {m} wakes up.",
    "You learn a new spell (level {n}).",
    "It is too dark to read here.",
    "You are no longer confused.",
    "The {m} dies a horrible death.",
    "You hear a grinding sound.",
    "You feel yourself moving faster!",
    "You feel yourself slow down.",
    "There is a wall in the way!",
    "The {m} shrieks.",
    "You have found a secret door.",
    "You attain level {n}.",
    "Welcome to level {n} of the dungeon.",
    "You enter a maze of down staircases.",
    "The {m} growls angrily.",
    "You block the {m}'s attack.",
    "You are too afraid to attack the {m}!",
    "You are poisoned!",
    "You resist the effects!",
    "The {m} picks up an object.",
    "You have {n} charges remaining.",
];

#[derive(Clone, Copy, PartialEq, Eq)]
struct Cell {
    attr: u8,
    ch: u8,
}

struct Mob {
    x: usize,
    y: usize,
    glyph: Cell,
}

struct World {
    rng: SplitMix64,
    cum_mix: [f64; 6],
    text_target: f64,
    stat_repeat: f64,
    templates: Vec<&'static str>,
    recent_templates: Vec<usize>,
    map: Vec<Cell>,
    px: usize,
    py: usize,
    mobs: Vec<Mob>,
    hp: u16,
    mhp: u16,
    sp: u16,
    msp: u16,
    stamina: u16,
    gold: u32,
    exp: u32,
    level: u16,
    stats: [(u16, u16); 6],
    turn: u32,
    text_bytes: u64,
    total_bytes: u64,
}

impl World {
    fn new(profile: &TrafficProfile) -> Self {
        let mut rng = SplitMix64::new(profile.seed);
        let mut cum_mix = [0.0; 6];
        let mut acc = 0.0;
        for (c, w) in cum_mix.iter_mut().zip(&profile.size_mix) {
            acc += w;
            *c = acc;
        }
        let mut order: Vec<usize> = (0..TEMPLATES.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            order.swap(i, j);
        }
        let templates = order[..profile.template_pool]
            .iter()
            .map(|&i| TEMPLATES[i])
            .collect();
        let map = build_map(&mut rng);
        let mut w = World {
            rng,
            cum_mix,
            text_target: profile.text_byte_fraction,
            stat_repeat: profile.stat_repeat_prob,
            templates,
            recent_templates: Vec::new(),
            map,
            px: MAP_W / 2,
            py: MAP_H / 2,
            mobs: Vec::new(),
            hp: 84,
            mhp: 84,
            sp: 20,
            msp: 20,
            stamina: 100,
            gold: 412,
            exp: 1520,
            level: 12,
            stats: [(16, 16), (14, 14), (12, 12), (17, 17), (15, 15), (10, 10)],
            turn: 100_000,
            text_bytes: 0,
            total_bytes: 0,
        };
        w.place_player();
        for _ in 0..4 {
            w.spawn_mob();
        }
        w
    }

    fn cell(&self, x: usize, y: usize) -> Cell {
        self.map[y * MAP_W + x]
    }

    fn walkable(&self, x: usize, y: usize) -> bool {
        x < MAP_W && y < MAP_H && self.cell(x, y).ch != b'#' && self.cell(x, y).ch != b' '
    }

    fn place_player(&mut self) {
        while !self.walkable(self.px, self.py) {
            self.px = self.rng.range(1, MAP_W as u64 - 2) as usize;
            self.py = self.rng.range(1, MAP_H as u64 - 2) as usize;
        }
    }

    fn spawn_mob(&mut self) {
        let letters = *b"kSCRooCPp";
        let attrs = [2u8, 4, 6, 3, 10, 10];
        for _ in 0..100 {
            let x = self.rng.range(1, MAP_W as u64 - 2) as usize;
            let y = self.rng.range(1, MAP_H as u64 - 2) as usize;
            if self.walkable(x, y) {
                let glyph = Cell {
                    attr: *self.rng.pick(&attrs),
                    ch: *self.rng.pick(&letters),
                };
                self.mobs.push(Mob { x, y, glyph });
                return;
            }
        }
    }

    fn pick_kind(&mut self) -> PacketKind {
        let u = self.rng.unit();
        let idx = self.cum_mix.iter().position(|&c| u < c).unwrap_or(5);
        PacketKind::ALL[idx]
    }

    fn packet(&mut self, kind: PacketKind) -> Vec<u8> {
        self.turn += self.rng.range(1, 12) as u32;
        let mut p = Vec::new();
        match kind {
            PacketKind::Movement => self.movement(&mut p),
            PacketKind::Status => self.status(&mut p),
            PacketKind::Message => self.message(&mut p),
            PacketKind::StatBlock => self.stat_block(&mut p),
            PacketKind::ScreenRow => self.screen_rows(&mut p),
            PacketKind::MapRefresh => self.map_refresh(&mut p),
        }
        p
    }

    fn draw(&self, p: &mut Vec<u8>, x: usize, y: usize) {
        let c = if (x, y) == (self.px, self.py) {
            Cell { attr: 1, ch: b'@' }
        } else if let Some(m) = self.mobs.iter().find(|m| (m.x, m.y) == (x, y)) {
            m.glyph
        } else {
            self.cell(x, y)
        };
        p.extend_from_slice(&[PKT_CHAR, x as u8, y as u8, c.attr, c.ch]);
    }

    /// Moves the player or a monster one step; returns (old, new) cells.
    fn step_actor(&mut self) -> ((usize, usize), (usize, usize)) {
        const DIRS: [(isize, isize); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        let who = if self.mobs.is_empty() || self.rng.chance(0.55) {
            None
        } else {
            Some(self.rng.below(self.mobs.len() as u64) as usize)
        };
        let (x, y) = match who {
            None => (self.px, self.py),
            Some(i) => (self.mobs[i].x, self.mobs[i].y),
        };
        for _ in 0..8 {
            let (dx, dy) = *self.rng.pick(&DIRS);
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            if nx < 0 || ny < 0 || !self.walkable(nx as usize, ny as usize) {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            match who {
                None => (self.px, self.py) = (nx, ny),
                Some(i) => (self.mobs[i].x, self.mobs[i].y) = (nx, ny),
            }
            return ((x, y), (nx, ny));
        }
        ((x, y), (x, y))
    }

    fn movement(&mut self, p: &mut Vec<u8>) {
        match self.rng.below(100) {
            0..=39 => {
                let (old, new) = self.step_actor();
                self.draw(p, old.0, old.1);
                self.draw(p, new.0, new.1);
            }
            40..=69 => {
                let (_, new) = self.step_actor();
                self.draw(p, new.0, new.1);
            }
            70..=84 => {
                self.stamina = self.stamina.saturating_sub(self.rng.below(3) as u16).max(40);
                if self.rng.chance(0.1) {
                    self.stamina = 100;
                }
                p.push(PKT_STAMINA);
                p.extend_from_slice(&self.stamina.to_le_bytes());
            }
            _ => {
                p.push(PKT_TURN);
                p.extend_from_slice(&self.turn.to_le_bytes());
            }
        }
    }

    fn push_vital(&mut self, p: &mut Vec<u8>, which: u8) {
        if !self.rng.chance(self.stat_repeat) {
            if which == PKT_HP {
                let delta = self.rng.range(0, 9) as u16;
                self.hp = if self.rng.chance(0.5) {
                    self.hp.saturating_sub(delta).max(1)
                } else {
                    (self.hp + delta).min(self.mhp)
                };
            } else {
                self.sp = (self.sp + 1).min(self.msp);
                if self.rng.chance(0.3) {
                    self.sp = self.sp.saturating_sub(self.rng.range(1, 6) as u16);
                }
            }
        }
        let (cur, max) = if which == PKT_HP {
            (self.hp, self.mhp)
        } else {
            (self.sp, self.msp)
        };
        p.push(which);
        p.extend_from_slice(&cur.to_le_bytes());
        p.extend_from_slice(&max.to_le_bytes());
        p.push(1);
    }

    fn status(&mut self, p: &mut Vec<u8>) {
        match self.rng.below(100) {
            // redraw pair + vital: 16
            0..=34 => {
                let (old, new) = self.step_actor();
                self.draw(p, old.0, old.1);
                self.draw(p, new.0, new.1);
                self.push_vital(p, PKT_HP);
            }
            // two vitals: 12
            35..=54 => {
                self.push_vital(p, PKT_HP);
                self.push_vital(p, PKT_SP);
            }
            // three redraws: 15
            55..=74 => {
                for _ in 0..3 {
                    let (_, new) = self.step_actor();
                    self.draw(p, new.0, new.1);
                }
            }
            // redraw + stamina + vital: 14
            75..=89 => {
                let (_, new) = self.step_actor();
                self.draw(p, new.0, new.1);
                p.push(PKT_STAMINA);
                p.extend_from_slice(&self.stamina.to_le_bytes());
                self.push_vital(p, PKT_HP);
            }
            // gold + exp: 5 + 7 = 12
            _ => {
                if !self.rng.chance(self.stat_repeat) {
                    self.gold += self.rng.range(1, 60) as u32;
                    self.exp += self.rng.range(1, 40) as u32;
                }
                p.push(PKT_GOLD);
                p.extend_from_slice(&self.gold.to_le_bytes());
                p.push(PKT_EXP);
                p.extend_from_slice(&self.exp.to_le_bytes());
                p.extend_from_slice(&self.level.to_le_bytes());
            }
        }
    }

    fn message_text(&mut self) -> String {
        // recently used templates come back often, like combat spam
        let idx = if !self.recent_templates.is_empty() && self.rng.chance(0.6) {
            *self.rng.pick(&self.recent_templates)
        } else {
            self.rng.below(self.templates.len() as u64) as usize
        };
        self.recent_templates.push(idx);
        if self.recent_templates.len() > 6 {
            self.recent_templates.remove(0);
        }
        let monster = self
            .mobs
            .first()
            .map(|m| m.glyph.ch as usize)
            .unwrap_or(0);
        let mut out = self.templates[idx].to_string();
        if out.contains("{m}") {
            let m = if self.rng.chance(0.7) {
                MONSTERS[monster % MONSTERS.len()]
            } else {
                *self.rng.pick(MONSTERS)
            };
            out = out.replace("{m}", m);
        }
        if out.contains("{n}") {
            let n = self.rng.range(1, 60).to_string();
            out = out.replace("{n}", &n);
        }
        if out.contains("{i}") {
            out = out.replace("{i}", self.rng.pick(ITEMS));
        }
        out
    }

    fn message(&mut self, p: &mut Vec<u8>) {
        let mut text = String::new();
        loop {
            let line = self.message_text();
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(&line);
            let projected_total = (self.total_bytes + text.len() as u64 + 3) as f64;
            let projected_text = (self.text_bytes + text.len() as u64) as f64;
            let short = text.len() < 18;
            if !short && (projected_text >= self.text_target * projected_total || text.len() > 160) {
                break;
            }
        }
        p.push(PKT_MESSAGE);
        p.extend_from_slice(&(text.len() as u16).to_le_bytes());
        p.extend_from_slice(text.as_bytes());
        self.text_bytes += text.len() as u64;
    }

    fn stat_block(&mut self, p: &mut Vec<u8>) {
        for (i, (cur, max)) in self.stats.iter_mut().enumerate() {
            if !self.rng.chance(self.stat_repeat) && self.rng.chance(0.2) {
                *cur = if *cur < *max { *max } else { cur.saturating_sub(1) };
            }
            p.extend_from_slice(&[PKT_STAT, i as u8]);
            p.extend_from_slice(&cur.to_le_bytes());
            p.extend_from_slice(&max.to_le_bytes());
        }
        self.push_vital(p, PKT_HP);
        self.push_vital(p, PKT_SP);
    }

    fn encode_row(&self, p: &mut Vec<u8>, y: usize) {
        p.extend_from_slice(&[PKT_LINE, y as u8]);
        let row: Vec<Cell> = (0..MAP_W)
            .map(|x| {
                if (x, y) == (self.px, self.py) {
                    Cell { attr: 1, ch: b'@' }
                } else if let Some(m) = self.mobs.iter().find(|m| (m.x, m.y) == (x, y)) {
                    m.glyph
                } else {
                    self.cell(x, y)
                }
            })
            .collect();
        let mut x = 0;
        while x < row.len() {
            let c = row[x];
            let run = row[x..].iter().take_while(|&&d| d == c).count();
            if run >= 3 {
                p.extend_from_slice(&[RLE_MARK, run as u8, c.attr, c.ch]);
                x += run;
            } else {
                p.extend_from_slice(&[c.attr, c.ch]);
                x += 1;
            }
        }
    }

    fn screen_rows(&mut self, p: &mut Vec<u8>) {
        let rows = self.rng.range(3, 16) as usize;
        let start = self.py.saturating_sub(rows / 2).min(MAP_H - rows);
        for y in start..start + rows {
            self.encode_row(p, y);
        }
        while p.len() <= 100 {
            let y = self.rng.below(MAP_H as u64) as usize;
            self.encode_row(p, y);
        }
    }

    fn map_refresh(&mut self, p: &mut Vec<u8>) {
        // occasionally the level changes before the redraw
        if self.rng.chance(0.25) {
            self.map = build_map(&mut self.rng);
            self.place_player();
            self.mobs.clear();
            for _ in 0..4 {
                self.spawn_mob();
            }
        }
        p.push(PKT_CLEAR);
        for y in 0..MAP_H {
            self.encode_row(p, y);
        }
        self.stat_block(p);
        while p.len() <= 1000 {
            self.encode_row(p, self.py);
        }
    }
}

fn build_map(rng: &mut SplitMix64) -> Vec<Cell> {
    let rock = Cell { attr: 0, ch: b' ' };
    let wall = Cell { attr: 8, ch: b'#' };
    let floor = Cell { attr: 7, ch: b'.' };
    let mut map = vec![rock; MAP_W * MAP_H];
    let rooms = rng.range(5, 8);
    let mut centers = Vec::new();
    for _ in 0..rooms {
        let w = rng.range(6, 18) as usize;
        let h = rng.range(4, 8) as usize;
        let x0 = rng.range(0, (MAP_W - w - 1) as u64) as usize;
        let y0 = rng.range(0, (MAP_H - h - 1) as u64) as usize;
        for y in y0..=y0 + h {
            for x in x0..=x0 + w {
                let edge = y == y0 || y == y0 + h || x == x0 || x == x0 + w;
                let cur = map[y * MAP_W + x];
                if edge && cur.ch != b'.' {
                    map[y * MAP_W + x] = wall;
                } else if !edge {
                    map[y * MAP_W + x] = floor;
                }
            }
        }
        centers.push((x0 + w / 2, y0 + h / 2));
    }
    for pair in centers.windows(2) {
        let ((ax, ay), (bx, by)) = (pair[0], pair[1]);
        for x in ax.min(bx)..=ax.max(bx) {
            map[ay * MAP_W + x] = floor;
        }
        for y in ay.min(by)..=ay.max(by) {
            map[y * MAP_W + bx] = floor;
        }
    }
    let objects = [
        Cell { attr: 11, ch: b'!' },
        Cell { attr: 14, ch: b'?' },
        Cell { attr: 6, ch: b'$' },
        Cell { attr: 9, ch: b'+' },
        Cell { attr: 7, ch: b'>' },
    ];
    for _ in 0..rng.range(8, 20) {
        let i = rng.below((MAP_W * MAP_H) as u64) as usize;
        if map[i] == floor {
            map[i] = *rng.pick(&objects);
        }
    }
    map
}
