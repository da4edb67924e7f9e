//! Encryption over a table pair with per-call set selection, and
//! computational trace recording.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::format::{frame, unframe, Reader};
use crate::gf::shifted_source;
use crate::nibenc::Half;
use crate::tablegen::{nibble_at, TableSet, TableSetPair, ENCODED_ROUNDS, XOR_STAGES};

/// Positions of the recorded lookup outputs within a trace.
pub mod layout {
    use crate::nibenc::Half;

    /// Samples per column and round: 16 UT bytes then 24 XOR nibbles.
    pub const COLUMN_SPAN: usize = 40;
    pub const ROUND_SPAN: usize = 4 * COLUMN_SPAN;
    pub const T10_BASE: usize = 9 * ROUND_SPAN;
    pub const SAMPLES: usize = T10_BASE + 16;

    #[inline]
    pub const fn ut(r: usize, i: usize, j: usize, k: usize) -> usize {
        (r * 4 + j) * COLUMN_SPAN + i * 4 + k
    }

    #[inline]
    pub const fn xor(r: usize, j: usize, k: usize, stage: usize, half: Half) -> usize {
        let h = match half {
            Half::Upper => 0,
            Half::Lower => 1,
        };
        (r * 4 + j) * COLUMN_SPAN + 16 + k * 6 + stage * 2 + h
    }

    #[inline]
    pub const fn t10(i: usize, j: usize) -> usize {
        T10_BASE + 4 * j + i
    }

    /// Every sample of encoded round `r` (zero-based).
    pub fn round(r: usize) -> Vec<usize> {
        (r * ROUND_SPAN..(r + 1) * ROUND_SPAN).collect()
    }

    /// The 64 UT output samples of encoded round `r`.
    pub fn round_ut(r: usize) -> Vec<usize> {
        let mut v = Vec::with_capacity(64);
        for j in 0..4 {
            for i in 0..4 {
                for k in 0..4 {
                    v.push(ut(r, i, j, k));
                }
            }
        }
        v
    }

    /// Whether sample `s` holds a 4-bit value.
    pub fn is_nibble(s: usize) -> bool {
        s < T10_BASE && s % COLUMN_SPAN >= 16
    }
}

/// Observer of the table walk: one `lookup` per table access and one
/// `sample` per recorded output value.
pub trait Probe {
    #[inline(always)]
    fn lookup(&mut self) {}

    #[inline(always)]
    fn sample(&mut self, _slot: usize, _value: u8) {}
}

/// Records nothing.
pub struct NoProbe;

impl Probe for NoProbe {}

/// Counts table accesses.
#[derive(Default)]
pub struct LookupCounter(pub usize);

impl Probe for LookupCounter {
    #[inline]
    fn lookup(&mut self) {
        self.0 += 1;
    }
}

/// Writes each output into its trace slot.
pub struct Recorder<'a>(pub &'a mut [u8]);

impl Probe for Recorder<'_> {
    #[inline]
    fn sample(&mut self, slot: usize, value: u8) {
        self.0[slot] = value;
    }
}

/// One column of encoded round `r`; `state` is the encoded input state.
#[inline]
fn column<P: Probe>(ts: &TableSet, r: usize, j: usize, state: &[u8; 16], probe: &mut P) -> [u8; 4] {
    let mut y = [[0u8; 4]; 4];
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = ts.ut(r, i, j)[state[shifted_source(i, j)] as usize];
        probe.lookup();
        for (k, &v) in yi.iter().enumerate() {
            probe.sample(layout::ut(r, i, j, k), v);
        }
    }
    std::array::from_fn(|k| {
        let mut acc = y[0][k];
        for stage in 0..XOR_STAGES {
            let b = y[stage + 1][k];
            let hi = nibble_at(
                ts.tx(r, j, k, stage, Half::Upper),
                ((acc >> 4) << 4 | (b >> 4)) as usize,
            );
            let lo = nibble_at(
                ts.tx(r, j, k, stage, Half::Lower),
                ((acc & 0xF) << 4 | (b & 0xF)) as usize,
            );
            probe.lookup();
            probe.lookup();
            probe.sample(layout::xor(r, j, k, stage, Half::Upper), hi);
            probe.sample(layout::xor(r, j, k, stage, Half::Lower), lo);
            acc = (hi << 4) | lo;
        }
        acc
    })
}

/// Runs the full network of one table set.
pub fn run<P: Probe>(ts: &TableSet, pt: &[u8; 16], probe: &mut P) -> [u8; 16] {
    let mut state = *pt;
    for r in 0..ENCODED_ROUNDS {
        let mut next = [0u8; 16];
        for j in 0..4 {
            next[4 * j..4 * j + 4].copy_from_slice(&column(ts, r, j, &state, probe));
        }
        state = next;
    }
    let mut ct = [0u8; 16];
    for j in 0..4 {
        for i in 0..4 {
            let v = ts.t10(i, j)[state[shifted_source(i, j)] as usize];
            probe.lookup();
            probe.sample(layout::t10(i, j), v);
            ct[4 * j + i] = v;
        }
    }
    ct
}

pub fn encrypt_with_tables(ts: &TableSet, pt: &[u8; 16]) -> [u8; 16] {
    run(ts, pt, &mut NoProbe)
}

/// Plaintext byte varied as `p1` on the analysis grid.
pub const GRID_P1: usize = 0;
/// Plaintext byte varied as `p2`: the byte ShiftRows moves next to `p1`.
pub const GRID_P2: usize = shifted_source(1, 0);

#[inline]
pub fn grid_plaintext(p1: u8, p2: u8) -> [u8; 16] {
    let mut pt = [0u8; 16];
    pt[GRID_P1] = p1;
    pt[GRID_P2] = p2;
    pt
}

/// Encoded first round-output byte of column 1 over the whole grid,
/// indexed `p1 * 256 + p2`.
pub fn grid_round_output(ts: &TableSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 << 16);
    for p1 in 0..=255u8 {
        for p2 in 0..=255u8 {
            out.push(column(ts, 0, 0, &grid_plaintext(p1, p2), &mut NoProbe)[0]);
        }
    }
    out
}

/// Rule choosing Q0 (bit 0) or Q1 (bit 1) for each encryption.
#[derive(Clone, Debug, PartialEq)]
pub enum SelectorPolicy {
    FixedQ0,
    FixedQ1,
    /// Q0 with probability `alpha`.
    RandomBit {
        alpha: f64,
    },
    /// `b[(xor of all plaintext bytes) mod n]`.
    PlaintextDerived {
        alpha: f64,
        b: Vec<u8>,
    },
}

impl SelectorPolicy {
    pub fn random(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidPolicy(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        Ok(SelectorPolicy::RandomBit { alpha })
    }

    /// Selector table of length `n` holding `n (1 - alpha)` ones in a
    /// seeded random order.
    pub fn plaintext_derived(n: usize, alpha: f64, seed: u64) -> Result<Self> {
        if !(1..=256).contains(&n) {
            return Err(Error::InvalidPolicy(format!("n = {n} outside [1, 256]")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidPolicy(format!(
                "alpha {alpha} outside [0, 1]"
            )));
        }
        let zeros = n as f64 * alpha;
        if (zeros - zeros.round()).abs() > 1e-9 {
            return Err(Error::InvalidPolicy(format!(
                "n * alpha = {zeros} is not an integer"
            )));
        }
        let zeros = zeros.round() as usize;
        let mut b: Vec<u8> = (0..n).map(|x| (x >= zeros) as u8).collect();
        b.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::with_table(alpha, b)
    }

    pub fn with_table(alpha: f64, b: Vec<u8>) -> Result<Self> {
        if b.is_empty() || b.len() > 256 || b.iter().any(|&x| x > 1) {
            return Err(Error::InvalidPolicy(
                "selector table must hold 1..=256 bits".into(),
            ));
        }
        Ok(SelectorPolicy::PlaintextDerived { alpha, b })
    }

    /// Parses `q0`, `q1`, `random:ALPHA` or `pt-derived:N[:ALPHA]`; `seed`
    /// fixes the selector table of the last form.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| -> Result<f64> {
            x.parse::<f64>()
                .map_err(|_| Error::InvalidPolicy(format!("bad number {x:?} in {s:?}")))
        };
        match parts.as_slice() {
            ["q0"] => Ok(SelectorPolicy::FixedQ0),
            ["q1"] => Ok(SelectorPolicy::FixedQ1),
            ["random"] => Self::random(0.5),
            ["random", a] => Self::random(num(a)?),
            ["pt-derived", n] | ["pt-derived", n, _] => {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::InvalidPolicy(format!("bad count {n:?} in {s:?}")))?;
                let alpha = if parts.len() == 3 {
                    num(parts[2])?
                } else {
                    0.5
                };
                Self::plaintext_derived(n, alpha, seed)
            }
            _ => Err(Error::InvalidPolicy(format!("unknown policy {s:?}"))),
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, pt: &[u8; 16], rng: &mut R) -> u8 {
        match self {
            SelectorPolicy::FixedQ0 => 0,
            SelectorPolicy::FixedQ1 => 1,
            SelectorPolicy::RandomBit { alpha } => (rng.gen::<f64>() >= *alpha) as u8,
            SelectorPolicy::PlaintextDerived { b, .. } => {
                let x = pt.iter().fold(0u8, |a, &v| a ^ v) as usize;
                b[x % b.len()]
            }
        }
    }
}

impl fmt::Display for SelectorPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectorPolicy::FixedQ0 => write!(f, "q0"),
            SelectorPolicy::FixedQ1 => write!(f, "q1"),
            SelectorPolicy::RandomBit { alpha } => write!(f, "random:{alpha}"),
            SelectorPolicy::PlaintextDerived { alpha, b } => {
                write!(f, "pt-derived:{}:{alpha}", b.len())
            }
        }
    }
}

pub fn select_set<R: Rng + ?Sized>(policy: &SelectorPolicy, pt: &[u8; 16], rng: &mut R) -> u8 {
    policy.select(pt, rng)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub plaintext: [u8; 16],
    pub set_bit: u8,
    pub samples: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct Encryption {
    pub ciphertext: [u8; 16],
    pub set_bit: u8,
    pub trace: Option<Trace>,
}

/// Encrypts one block with the set chosen by `policy`.
pub fn encrypt<R: Rng + ?Sized>(
    pt: &[u8; 16],
    pair: &TableSetPair,
    policy: &SelectorPolicy,
    rng: &mut R,
    record: bool,
) -> Encryption {
    let set_bit = policy.select(pt, rng);
    let ts = pair.get(set_bit);
    if record {
        let mut samples = vec![0u8; layout::SAMPLES];
        let ciphertext = run(ts, pt, &mut Recorder(&mut samples));
        Encryption {
            ciphertext,
            set_bit,
            trace: Some(Trace {
                plaintext: *pt,
                set_bit,
                samples,
            }),
        }
    } else {
        Encryption {
            ciphertext: run(ts, pt, &mut NoProbe),
            set_bit,
            trace: None,
        }
    }
}

/// Where plaintexts come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlaintextSource {
    Random,
    Fixed([u8; 16]),
    /// All 65,536 combinations of the two grid bytes, the rest zero,
    /// `p1`-major.
    Grid,
    List(Vec<[u8; 16]>),
}

impl PlaintextSource {
    /// Number of plaintexts the source yields for a requested count.
    pub fn len(&self, count: usize) -> usize {
        match self {
            PlaintextSource::Grid => 1 << 16,
            PlaintextSource::List(v) => v.len(),
            _ => count,
        }
    }

    pub fn is_empty(&self, count: usize) -> bool {
        self.len(count) == 0
    }

    pub fn generate<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<[u8; 16]> {
        match self {
            PlaintextSource::Random => (0..count).map(|_| rng.gen()).collect(),
            PlaintextSource::Fixed(pt) => vec![*pt; count],
            PlaintextSource::Grid => (0..1usize << 16)
                .map(|x| grid_plaintext((x >> 8) as u8, x as u8))
                .collect(),
            PlaintextSource::List(v) => v.clone(),
        }
    }
}

impl FromStr for PlaintextSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "random" => Ok(PlaintextSource::Random),
            None if s == "grid" => Ok(PlaintextSource::Grid),
            Some(("fixed", hex)) => {
                let pt = parse_block(hex).ok_or_else(|| {
                    Error::Format(FormatError::Invalid(format!(
                        "fixed plaintext {hex:?} is not 32 hex digits"
                    )))
                })?;
                Ok(PlaintextSource::Fixed(pt))
            }
            _ => Err(Error::Format(FormatError::Invalid(format!(
                "unknown plaintext source {s:?}"
            )))),
        }
    }
}

fn parse_block(hex: &str) -> Option<[u8; 16]> {
    if hex.len() != 32 || !hex.is_ascii() {
        return None;
    }
    let mut out = [0u8; 16];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

/// Descriptive data carried alongside a trace campaign.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    /// First four bytes of the encryption of the zero block, as a key tag.
    pub key_check: u32,
    pub seed: u64,
    pub policy: String,
    pub source: String,
}

/// A campaign of equally shaped traces, samples stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceSet {
    pub plaintexts: Vec<[u8; 16]>,
    pub set_bits: Vec<u8>,
    samples: Vec<u8>,
    pub meta: TraceMeta,
}

const TRACE_MAGIC: [u8; 4] = *b"BTR1";
const TRACE_VERSION: u16 = 1;

impl TraceSet {
    pub fn new(meta: TraceMeta) -> Self {
        TraceSet {
            plaintexts: Vec::new(),
            set_bits: Vec::new(),
            samples: Vec::new(),
            meta,
        }
    }

    pub fn push(&mut self, t: Trace) -> Result<()> {
        if t.samples.len() != layout::SAMPLES {
            return Err(Error::LayoutMismatch(format!(
                "trace has {} samples, expected {}",
                t.samples.len(),
                layout::SAMPLES
            )));
        }
        self.plaintexts.push(t.plaintext);
        self.set_bits.push(t.set_bit);
        self.samples.extend_from_slice(&t.samples);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.plaintexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plaintexts.is_empty()
    }

    pub fn sample_count(&self) -> usize {
        layout::SAMPLES
    }

    #[inline]
    pub fn samples(&self, n: usize) -> &[u8] {
        &self.samples[n * layout::SAMPLES..(n + 1) * layout::SAMPLES]
    }

    #[inline]
    pub fn sample(&self, n: usize, s: usize) -> u8 {
        self.samples[n * layout::SAMPLES + s]
    }

    /// Values of sample `s` across all traces.
    pub fn column(&self, s: usize) -> Vec<u8> {
        (0..self.len()).map(|n| self.sample(n, s)).collect()
    }

    pub fn trace(&self, n: usize) -> Trace {
        Trace {
            plaintext: self.plaintexts[n],
            set_bit: self.set_bits[n],
            samples: self.samples(n).to_vec(),
        }
    }

    /// Encoded first round-output byte of column 1 in trace `n`.
    #[inline]
    pub fn round_output_byte(&self, n: usize) -> u8 {
        (self.sample(n, layout::xor(0, 0, 0, XOR_STAGES - 1, Half::Upper)) << 4)
            | self.sample(n, layout::xor(0, 0, 0, XOR_STAGES - 1, Half::Lower))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let count = u32::try_from(self.len())
            .map_err(|_| Error::LayoutMismatch("too many traces for the file format".into()))?;
        let mut body = Vec::with_capacity(6 + self.len() * (17 + layout::SAMPLES));
        body.extend_from_slice(&count.to_le_bytes());
        body.extend_from_slice(&(layout::SAMPLES as u16).to_le_bytes());
        for n in 0..self.len() {
            body.extend_from_slice(&self.plaintexts[n]);
            body.push(self.set_bits[n]);
            body.extend_from_slice(self.samples(n));
        }
        Ok(frame(&TRACE_MAGIC, TRACE_VERSION, &body))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader::new(unframe(&TRACE_MAGIC, TRACE_VERSION, bytes)?);
        let count = rd.u32()? as usize;
        let width = rd.u16()? as usize;
        if width != layout::SAMPLES {
            return Err(Error::LayoutMismatch(format!(
                "file holds {width} samples per trace"
            )));
        }
        let mut set = TraceSet::new(TraceMeta {
            source: "file".into(),
            ..TraceMeta::default()
        });
        for _ in 0..count {
            let plaintext: [u8; 16] = rd.take(16)?.try_into().unwrap();
            let set_bit = rd.u8()?;
            let samples = rd.take(width)?.to_vec();
            set.push(Trace {
                plaintext,
                set_bit,
                samples,
            })?;
        }
        rd.finish()?;
        Ok(set)
    }
}

/// Runs one encryption per plaintext of `source`. Plaintexts and set bits
/// are drawn sequentially from `rng`; the encryptions then run in parallel
/// and are stored in source order.
pub fn collect_traces<R: Rng + ?Sized>(
    pair: &TableSetPair,
    policy: &SelectorPolicy,
    source: &PlaintextSource,
    count: usize,
    rng: &mut R,
) -> TraceSet {
    let pts = source.generate(count, rng);
    let bits: Vec<u8> = pts.iter().map(|pt| policy.select(pt, rng)).collect();
    let rows: Vec<Vec<u8>> = pts
        .par_iter()
        .zip(bits.par_iter())
        .map(|(pt, &b)| {
            let mut samples = vec![0u8; layout::SAMPLES];
            run(pair.get(b), pt, &mut Recorder(&mut samples));
            samples
        })
        .collect();
    let kc = encrypt_with_tables(&pair.q0, &[0; 16]);
    let mut set = TraceSet::new(TraceMeta {
        key_check: u32::from_be_bytes(kc[..4].try_into().unwrap()),
        seed: 0,
        policy: policy.to_string(),
        source: match source {
            PlaintextSource::Random => "random".into(),
            PlaintextSource::Fixed(pt) => format!(
                "fixed:{}",
                pt.iter().map(|b| format!("{b:02x}")).collect::<String>()
            ),
            PlaintextSource::Grid => "grid".into(),
            PlaintextSource::List(_) => "list".into(),
        },
    });
    set.samples.reserve(rows.len() * layout::SAMPLES);
    for ((pt, b), s) in pts.into_iter().zip(bits).zip(rows) {
        set.plaintexts.push(pt);
        set.set_bits.push(b);
        set.samples.extend_from_slice(&s);
    }
    set
}

/// [`collect_traces`] with a fresh generator seeded by `seed`; the seed is
/// kept in the metadata.
pub fn collect_traces_seeded(
    pair: &TableSetPair,
    policy: &SelectorPolicy,
    source: &PlaintextSource,
    count: usize,
    seed: u64,
) -> TraceSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = collect_traces(pair, policy, source, count, &mut rng);
    set.meta.seed = seed;
    set
}
