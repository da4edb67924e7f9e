//! Statistical analyses over tables and computational traces: Walsh
//! spectra, correlation ranking, collision and cluster scores, mutual
//! information and fixed-versus-random t-tests.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, Sub};

use num_traits::{Float, FromPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::binmat::{assemble_m, blacklists, sample_f, sample_g, EncodingPair};
use crate::cipher::{layout, TraceSet, GRID_P1, GRID_P2};
use crate::error::{Error, Result};
use crate::gf::{bit, gf_mul, s_ell, sbox, shifted_source, Coefficient, MIX};
use crate::tablegen::{gen_ut, EncodingSpec, TableSet};

/// Floating-point type the statistics are computed in.
pub trait Scalar: Float + FromPrimitive + Sum + Send + Sync + Debug + Serialize + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + Sum + Send + Sync + Debug + Serialize + 'static
{}

#[inline]
fn sc<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("representable")
}

// ---------------------------------------------------------------------------
// Walsh transforms

/// In-place fast Walsh-Hadamard transform (unnormalised).
pub fn fwht<T>(a: &mut [T])
where
    T: Copy + Add<Output = T> + Sub<Output = T>,
{
    let n = a.len();
    assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// `W_f(ω) = Σ_x (-1)^{f(x) ^ x·ω}` by direct summation.
pub fn walsh(f: &[bool; 256], omega: u8) -> i32 {
    (0..256usize)
        .map(|x| {
            let dot = (x as u8 & omega).count_ones() & 1 == 1;
            if f[x] ^ dot {
                -1
            } else {
                1
            }
        })
        .sum()
}

/// All 256 Walsh coefficients of `f`.
pub fn walsh_spectrum(f: &[bool; 256]) -> [i32; 256] {
    let mut a: [i32; 256] = std::array::from_fn(|x| if f[x] { -1 } else { 1 });
    fwht(&mut a);
    a
}

/// Accumulated imbalance `Σ_ω Σ_i |W_{f_i}(ω)|` of a family.
pub fn delta_imbalance(family: &[[bool; 256]]) -> i64 {
    family
        .iter()
        .map(|f| {
            walsh_spectrum(f)
                .iter()
                .map(|w| w.unsigned_abs() as i64)
                .sum::<i64>()
        })
        .sum()
}

/// Largest `d` such that `W_f(ω) = 0` for every `ω` of weight `1..=d`
/// (0 when some weight-one coefficient is nonzero). Balance is not
/// included.
pub fn correlation_immunity(f: &[bool; 256]) -> u32 {
    let w = walsh_spectrum(f);
    for d in 1..=8u32 {
        if (1..256usize).any(|o| (o as u8).count_ones() == d && w[o] != 0) {
            return d - 1;
        }
    }
    8
}

/// `grid[out_bit][i'][ℓ']`: Walsh sum of a first-round UT output bit
/// (`out_bit = 8k + b`) against bit `i'` of `ℓ' S(p ^ guess)`.
pub type UtWalshGrid = [[[i32; 3]; 8]; 32];

/// Walsh grid for a 256-entry table of four-byte outputs indexed by the
/// plain input byte.
pub fn walsh_ut_outputs(outputs: &[[u8; 4]; 256], guess: u8) -> UtWalshGrid {
    let mut grid = [[[0i32; 3]; 8]; 32];
    for ell in Coefficient::ALL {
        let hyp: [u8; 256] = std::array::from_fn(|p| s_ell(p as u8, ell, guess));
        for (ob, row) in grid.iter_mut().enumerate() {
            let (k, b) = (ob / 8, ob % 8);
            for (ip, cell) in row.iter_mut().enumerate() {
                cell[ell.index()] = (0..256)
                    .map(|p| {
                        if bit(outputs[p][k], b) == bit(hyp[p], ip) {
                            1
                        } else {
                            -1
                        }
                    })
                    .sum();
            }
        }
    }
    grid
}

/// Walsh grid of the first-round table `UT_{i,j}` read straight from `ts`.
pub fn walsh_ut_static(ts: &TableSet, i: usize, j: usize, guess: u8) -> UtWalshGrid {
    walsh_ut_outputs(ts.ut(0, i, j), guess)
}

/// Same grid rebuilt from traces: for every value of the plaintext byte
/// feeding `UT_{i,j}`, the `repetition`-th trace holding that value is used.
pub fn walsh_ut_traces(
    traces: &TraceSet,
    i: usize,
    j: usize,
    guess: u8,
    repetition: usize,
) -> Result<UtWalshGrid> {
    let src = shifted_source(i, j);
    let mut seen = [0usize; 256];
    let mut outputs = [[0u8; 4]; 256];
    let mut filled = [false; 256];
    for n in 0..traces.len() {
        let p = traces.plaintexts[n][src] as usize;
        if seen[p] == repetition {
            outputs[p] = std::array::from_fn(|k| traces.sample(n, layout::ut(0, i, j, k)));
            filled[p] = true;
        }
        seen[p] += 1;
    }
    if let Some(p) = filled.iter().position(|&f| !f) {
        return Err(Error::Unobserved(p as u8));
    }
    Ok(walsh_ut_outputs(&outputs, guess))
}

// ---------------------------------------------------------------------------
// First round-output byte over the (p1, p2) grid

/// `γ(p1, p2) = 2 S(p1 ^ k0) ^ 3 S(p2 ^ guess)`.
#[inline]
pub fn gamma(p1: u8, p2: u8, known_k0: u8, guess: u8) -> u8 {
    gf_mul(2, sbox(p1 ^ known_k0)) ^ gf_mul(3, sbox(p2 ^ guess))
}

/// Encoded first round-output byte `ε∘δ(p1, p2)` of column 1, indexed
/// `p1 * 256 + p2`.
#[derive(Clone, Debug)]
pub struct RoundOutputGrid {
    delta: Vec<u8>,
}

impl RoundOutputGrid {
    pub fn from_delta(delta: Vec<u8>) -> Result<Self> {
        if delta.len() != 1 << 16 {
            return Err(Error::IncompleteGrid(format!(
                "{} of 65536 points",
                delta.len()
            )));
        }
        Ok(RoundOutputGrid { delta })
    }

    /// Extracts the grid from a campaign over the grid source. Every point
    /// must be present; repeated points keep the first trace.
    pub fn from_traces(traces: &TraceSet) -> Result<Self> {
        let mut delta = vec![0u8; 1 << 16];
        let mut have = vec![false; 1 << 16];
        for n in 0..traces.len() {
            let pt = &traces.plaintexts[n];
            if pt
                .iter()
                .enumerate()
                .any(|(b, &v)| v != 0 && b != GRID_P1 && b != GRID_P2)
            {
                return Err(Error::IncompleteGrid(format!("trace {n} is off the grid")));
            }
            let idx = (pt[GRID_P1] as usize) << 8 | pt[GRID_P2] as usize;
            if !have[idx] {
                have[idx] = true;
                delta[idx] = traces.round_output_byte(n);
            }
        }
        let missing = have.iter().filter(|&&h| !h).count();
        if missing > 0 {
            return Err(Error::IncompleteGrid(format!(
                "{missing} of 65536 points missing"
            )));
        }
        Ok(RoundOutputGrid { delta })
    }

    #[inline]
    pub fn at(&self, p1: u8, p2: u8) -> u8 {
        self.delta[(p1 as usize) << 8 | p2 as usize]
    }

    pub fn delta(&self) -> &[u8] {
        &self.delta
    }
}

/// `W_εγ` for every `(i, i')`.
pub fn walsh_eps_gamma_grid(delta: &[u8], known_k0: u8, guess: u8) -> [[i64; 8]; 8] {
    let mut out = [[0i64; 8]; 8];
    let mut inner = [[0i32; 8]; 8];
    let s3: [u8; 256] = std::array::from_fn(|p| gf_mul(3, sbox(p as u8 ^ guess)));
    for p1 in 0..256usize {
        let a = gf_mul(2, sbox(p1 as u8 ^ known_k0));
        inner.iter_mut().flatten().for_each(|v| *v = 0);
        for p2 in 0..256usize {
            let d = delta[p1 << 8 | p2];
            let g = a ^ s3[p2];
            for (i, row) in inner.iter_mut().enumerate() {
                let di = bit(d, i);
                for (ip, v) in row.iter_mut().enumerate() {
                    *v += if di == bit(g, ip) { 1 } else { -1 };
                }
            }
        }
        for (o, r) in out.iter_mut().zip(inner.iter()) {
            for (a, b) in o.iter_mut().zip(r.iter()) {
                *a += b.unsigned_abs() as i64;
            }
        }
    }
    out
}

/// `W_εγ = Σ_{p1} |Σ_{p2} (-1)^{ε∘δ_i ^ γ_i'}|` for one bit pair.
pub fn walsh_eps_gamma(delta: &[u8], known_k0: u8, guess: u8, i: usize, ip: usize) -> i64 {
    (0..256usize)
        .map(|p1| {
            let s: i32 = (0..256usize)
                .map(|p2| {
                    let g = gamma(p1 as u8, p2 as u8, known_k0, guess);
                    if bit(delta[p1 << 8 | p2], i) == bit(g, ip) {
                        1
                    } else {
                        -1
                    }
                })
                .sum();
            s.unsigned_abs() as i64
        })
        .sum()
}

pub fn walsh_round_output(
    grid: &RoundOutputGrid,
    known_k0: u8,
    guess: u8,
    i: usize,
    ip: usize,
) -> i64 {
    walsh_eps_gamma(&grid.delta, known_k0, guess, i, ip)
}

/// Per guess, the cluster sizes and per-bit one counts of the observed
/// byte, clustered by `γ`.
fn clusters(grid: &RoundOutputGrid, known_k0: u8, guess: u8) -> (Vec<u32>, Vec<[u32; 8]>) {
    let mut n = vec![0u32; 256];
    let mut ones = vec![[0u32; 8]; 256];
    for p1 in 0..=255u8 {
        for p2 in 0..=255u8 {
            let v = gamma(p1, p2, known_k0, guess) as usize;
            let c = grid.at(p1, p2);
            n[v] += 1;
            for (i, o) in ones[v].iter_mut().enumerate() {
                *o += bit(c, i) as u32;
            }
        }
    }
    (n, ones)
}

/// `Δ^coll = Σ_v Σ_i |Σ_{j ∈ I_v} (-1)^{c^j_i ^ v_i}|`.
pub fn collision_score(grid: &RoundOutputGrid, known_k0: u8, guess: u8) -> i64 {
    let (n, ones) = clusters(grid, known_k0, guess);
    let mut total = 0i64;
    for v in 0..256usize {
        for i in 0..8 {
            let agree = if bit(v as u8, i) == 0 {
                n[v] as i64 - ones[v][i] as i64
            } else {
                ones[v][i] as i64
            };
            total += (2 * agree - n[v] as i64).abs();
        }
    }
    total
}

/// `Δ^sse = Σ_v Σ_i Σ_j (c^j_i - m_i)^2` with `m_i` the cluster mean.
pub fn cluster_sse_score<T: Scalar>(grid: &RoundOutputGrid, known_k0: u8, guess: u8) -> T {
    let (n, ones) = clusters(grid, known_k0, guess);
    let mut total = T::zero();
    for v in 0..256usize {
        if n[v] == 0 {
            continue;
        }
        let nv: T = sc(n[v] as f64);
        for &o in &ones[v] {
            let o: T = sc(o as f64);
            total = total + o - o * o / nv;
        }
    }
    total
}

/// Cluster sizes `ℓ_v` for a guess; they always sum to 65,536.
pub fn cluster_sizes(grid: &RoundOutputGrid, known_k0: u8, guess: u8) -> Vec<u32> {
    clusters(grid, known_k0, guess).0
}

// ---------------------------------------------------------------------------
// Hypotheses and sample columns

/// Predicted intermediate bit for a key guess.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HypothesisModel {
    /// Bit `bit` (0 = MSB) of `ℓ S(pt[byte] ^ guess)`.
    SboxTimesL { ell: u8, byte: usize, bit: usize },
    /// Bit `bit` of MixColumns output byte `row` of column `column` in the
    /// first round, with the key byte of input row `guessed` unknown and
    /// the other three (in row order) known.
    RoundOutputByte {
        column: usize,
        row: usize,
        guessed: usize,
        known: [u8; 3],
        bit: usize,
    },
}

impl HypothesisModel {
    pub fn sbox(byte: usize, bit: usize) -> Self {
        HypothesisModel::SboxTimesL { ell: 1, byte, bit }
    }

    /// Round-output model for output byte `row` of `column`, guessing the
    /// key byte of input row `guessed`; the other three come from `key`.
    pub fn round_output(
        key: &[u8; 16],
        column: usize,
        row: usize,
        guessed: usize,
        bit: usize,
    ) -> Self {
        let mut known = [0u8; 3];
        let mut n = 0;
        for i in (0..4).filter(|&i| i != guessed) {
            known[n] = key[shifted_source(i, column)];
            n += 1;
        }
        HypothesisModel::RoundOutputByte {
            column,
            row,
            guessed,
            known,
            bit,
        }
    }

    /// Plaintext byte whose key the model guesses.
    pub fn target_byte(&self) -> usize {
        match *self {
            HypothesisModel::SboxTimesL { byte, .. } => byte,
            HypothesisModel::RoundOutputByte {
                column, guessed, ..
            } => shifted_source(guessed, column),
        }
    }

    pub fn value(&self, pt: &[u8; 16], guess: u8) -> u8 {
        match *self {
            HypothesisModel::SboxTimesL { ell, byte, .. } => gf_mul(ell, sbox(pt[byte] ^ guess)),
            HypothesisModel::RoundOutputByte {
                column,
                row,
                guessed,
                known,
                ..
            } => {
                let mut acc = 0u8;
                let mut n = 0;
                for i in 0..4 {
                    let k = if i == guessed {
                        guess
                    } else {
                        n += 1;
                        known[n - 1]
                    };
                    acc ^= gf_mul(MIX[row][i], sbox(pt[shifted_source(i, column)] ^ k));
                }
                acc
            }
        }
    }

    #[inline]
    pub fn bit(&self, pt: &[u8; 16], guess: u8) -> u8 {
        let b = match *self {
            HypothesisModel::SboxTimesL { bit: b, .. }
            | HypothesisModel::RoundOutputByte { bit: b, .. } => b,
        };
        bit(self.value(pt, guess), b)
    }

    /// For single-byte models, the hypothesis bit as a function of the
    /// plaintext byte XOR the guess.
    fn xor_table(&self) -> Option<(usize, [u8; 256])> {
        match *self {
            HypothesisModel::SboxTimesL { ell, byte, bit: b } => Some((
                byte,
                std::array::from_fn(|x| bit(gf_mul(ell, sbox(x as u8)), b)),
            )),
            HypothesisModel::RoundOutputByte { .. } => None,
        }
    }
}

/// How sample bytes enter the statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum SampleView {
    /// Raw values, one bin per byte value.
    #[default]
    Bytes,
    /// Each meaningful bit as its own 0/1 column.
    Bits,
}

/// One analysed column: a sample, optionally reduced to one of its bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Column {
    pub sample: usize,
    /// Bit index, 0 = most significant bit of the stored width.
    pub bit: Option<u8>,
}

impl Column {
    #[inline]
    pub fn get(&self, v: u8) -> u8 {
        match self.bit {
            None => v,
            Some(b) if layout::is_nibble(self.sample) => (v >> (3 - b)) & 1,
            Some(b) => (v >> (7 - b)) & 1,
        }
    }

    pub fn levels(&self) -> usize {
        match self.bit {
            Some(_) => 2,
            None => 256,
        }
    }
}

pub fn columns(samples: &[usize], view: SampleView) -> Vec<Column> {
    match view {
        SampleView::Bytes => samples
            .iter()
            .map(|&s| Column {
                sample: s,
                bit: None,
            })
            .collect(),
        SampleView::Bits => samples
            .iter()
            .flat_map(|&s| {
                let w = if layout::is_nibble(s) { 4 } else { 8 };
                (0..w).map(move |b| Column {
                    sample: s,
                    bit: Some(b),
                })
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Correlation

fn pearson<T: Scalar>(n: f64, sh: f64, sv: f64, svv: f64, shv: f64) -> T {
    // h is binary, so Σh² = Σh.
    let cov = n * shv - sh * sv;
    let vh = n * sh - sh * sh;
    let vv = n * svv - sv * sv;
    if vh <= 0.0 || vv <= 0.0 {
        return T::zero();
    }
    sc(cov / (vh.sqrt() * vv.sqrt()))
}

/// Pearson correlation of an arbitrary per-trace 0/1 hypothesis with
/// every column. Constant inputs give 0.
pub fn correlate<T: Scalar>(traces: &TraceSet, cols: &[Column], h: &[u8]) -> Vec<T> {
    let n = traces.len() as f64;
    let sh: f64 = h.iter().map(|&x| x as f64).sum();
    cols.iter()
        .map(|c| {
            let (mut sv, mut svv, mut shv) = (0.0, 0.0, 0.0);
            for (t, &ht) in h.iter().enumerate() {
                let v = c.get(traces.sample(t, c.sample)) as f64;
                sv += v;
                svv += v * v;
                shv += ht as f64 * v;
            }
            pearson(n, sh, sv, svv, shv)
        })
        .collect()
}

/// Correlation between the model bit under `guess` and each column, by
/// direct summation.
pub fn cpa_monobit<T: Scalar>(
    traces: &TraceSet,
    samples: &[usize],
    view: SampleView,
    model: &HypothesisModel,
    guess: u8,
) -> Vec<T> {
    let h: Vec<u8> = traces
        .plaintexts
        .iter()
        .map(|pt| model.bit(pt, guess))
        .collect();
    correlate(traces, &columns(samples, view), &h)
}

/// Correlations for all 256 guesses, `out[guess][column]`. Single-byte
/// models use per-value sums and Walsh-domain XOR convolution; the result
/// equals [`cpa_monobit`] up to rounding.
pub fn cpa_all_guesses<T: Scalar>(
    traces: &TraceSet,
    samples: &[usize],
    view: SampleView,
    model: &HypothesisModel,
) -> Vec<Vec<T>> {
    let cols = columns(samples, view);
    let Some((byte, table)) = model.xor_table() else {
        return (0..=255u8)
            .into_par_iter()
            .map(|g| {
                let h: Vec<u8> = traces
                    .plaintexts
                    .iter()
                    .map(|pt| model.bit(pt, g))
                    .collect();
                correlate(traces, &cols, &h)
            })
            .collect();
    };
    let n = traces.len() as f64;
    let mut count = [0i64; 256];
    for pt in &traces.plaintexts {
        count[pt[byte] as usize] += 1;
    }
    let mut wh: [i64; 256] = std::array::from_fn(|x| table[x] as i64);
    fwht(&mut wh);
    let sh = xor_conv(&wh, &count);

    let per_col: Vec<Vec<T>> = cols
        .par_iter()
        .map(|c| {
            let mut sums = [0i64; 256];
            let (mut sv, mut svv) = (0i64, 0i64);
            for t in 0..traces.len() {
                let v = c.get(traces.sample(t, c.sample)) as i64;
                sums[traces.plaintexts[t][byte] as usize] += v;
                sv += v;
                svv += v * v;
            }
            let shv = xor_conv(&wh, &sums);
            (0..256)
                .map(|g| pearson(n, sh[g] as f64, sv as f64, svv as f64, shv[g] as f64))
                .collect()
        })
        .collect();
    (0..256)
        .map(|g| per_col.iter().map(|col| col[g]).collect())
        .collect()
}

/// `out[g] = Σ_u h(u ^ g) b(u)` given the transformed `h`.
fn xor_conv(wh: &[i64; 256], b: &[i64; 256]) -> [i64; 256] {
    let mut wb = *b;
    fwht(&mut wb);
    let mut prod: [i64; 256] = std::array::from_fn(|x| wh[x] * wb[x]);
    fwht(&mut prod);
    prod.map(|v| v / 256)
}

// ---------------------------------------------------------------------------
// Ranking

/// A key-recovery target: a model and the true key byte it guesses.
#[derive(Clone, Debug, Serialize)]
pub struct Target {
    pub label: String,
    pub model: HypothesisModel,
    pub correct: u8,
}

impl Target {
    /// `SubBytes` targets for every key byte and bit.
    pub fn sbox_all(key: &[u8; 16]) -> Vec<Target> {
        let mut v = Vec::with_capacity(128);
        for byte in 0..16 {
            for b in 0..8 {
                v.push(Target {
                    label: format!("sbox k{:02} bit{}", byte, b + 1),
                    model: HypothesisModel::sbox(byte, b),
                    correct: key[byte],
                });
            }
        }
        v
    }

    /// Round-output targets on the first output byte of column 1, guessing
    /// the key byte of input row 2.
    pub fn round_output_all(key: &[u8; 16]) -> Vec<Target> {
        let guessed = 1;
        (0..8)
            .map(|b| Target {
                label: format!(
                    "round-out c1r1 k{:02} bit{}",
                    shifted_source(guessed, 0),
                    b + 1
                ),
                model: HypothesisModel::round_output(key, 0, 0, guessed, b),
                correct: key[shifted_source(guessed, 0)],
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetRanking<T> {
    pub label: String,
    pub correct: u8,
    pub scores: Vec<T>,
    pub correct_score: T,
    /// 1 = highest score, 256 = lowest.
    pub correct_rank: usize,
    /// Column index (into the analysed columns) of each guess's score.
    pub best_column: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KeyRankingReport<T> {
    pub method: String,
    pub view: SampleView,
    pub columns: Vec<Column>,
    pub targets: Vec<TargetRanking<T>>,
}

impl<T: Scalar> KeyRankingReport<T> {
    pub fn ranks(&self) -> Vec<usize> {
        self.targets.iter().map(|t| t.correct_rank).collect()
    }
}

/// Guesses ordered by descending score, ties by ascending guess.
pub fn ranking_order<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Rank (1-based) of `guess` under [`ranking_order`].
pub fn rank_of<T: Scalar>(scores: &[T], guess: u8) -> usize {
    ranking_order(scores)
        .iter()
        .position(|&g| g == guess as usize)
        .unwrap()
        + 1
}

fn max_abs<T: Scalar>(v: &[T]) -> (T, usize) {
    v.iter()
        .enumerate()
        .fold((T::zero(), 0), |(m, mi), (i, &x)| {
            if x.abs() > m {
                (x.abs(), i)
            } else {
                (m, mi)
            }
        })
}

/// Mono-bit correlation attack: each guess scores the largest `|r|` over
/// the analysed columns.
pub fn dca_rank<T: Scalar>(
    traces: &TraceSet,
    samples: &[usize],
    view: SampleView,
    targets: &[Target],
) -> KeyRankingReport<T> {
    rank_report(traces, samples, view, targets, Stat::Correlation)
}

fn rank_report<T: Scalar>(
    traces: &TraceSet,
    samples: &[usize],
    view: SampleView,
    targets: &[Target],
    stat: Stat,
) -> KeyRankingReport<T> {
    let cols = columns(samples, view);
    let best = best_scores(traces, &cols, targets, stat);
    let targets = targets
        .iter()
        .zip(best)
        .map(|(t, b)| {
            let scores: Vec<T> = b.score.iter().map(|&x| sc(x)).collect();
            TargetRanking {
                label: t.label.clone(),
                correct: t.correct,
                correct_score: scores[t.correct as usize],
                correct_rank: rank_of(&scores, t.correct),
                scores,
                best_column: b.column.to_vec(),
            }
        })
        .collect();
    KeyRankingReport {
        method: stat.name().into(),
        view,
        columns: cols,
        targets,
    }
}

// ---------------------------------------------------------------------------
// Ranking engine
//
// Scores every (target, guess) by its best column without materialising
// the full guess x column matrices. Single-byte models share, per column
// and plaintext byte, the Walsh transform of the per-value statistics;
// each target then costs one inverse transform.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stat {
    Correlation,
    MutualInformation,
}

impl Stat {
    fn name(self) -> &'static str {
        match self {
            Stat::Correlation => "dca",
            Stat::MutualInformation => "mia",
        }
    }
}

#[derive(Clone)]
struct Best {
    score: [f64; 256],
    column: [usize; 256],
}

impl Best {
    fn new() -> Self {
        Best {
            score: [f64::NEG_INFINITY; 256],
            column: [usize::MAX; 256],
        }
    }

    #[inline]
    fn offer(&mut self, g: usize, score: f64, column: usize) {
        // Ties go to the lower column so the result is independent of the
        // parallel split.
        if score > self.score[g] || (score == self.score[g] && column < self.column[g]) {
            self.score[g] = score;
            self.column[g] = column;
        }
    }

    fn merge(mut self, other: &Best) -> Self {
        for g in 0..256 {
            self.offer(g, other.score[g], other.column[g]);
        }
        self
    }
}

/// `c log2 c` for every integer count up to `n`.
fn xlogx_table(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|c| {
            if c == 0 {
                0.0
            } else {
                c as f64 * (c as f64).log2()
            }
        })
        .collect()
}

struct Prepared {
    wh: [f64; 256],
    /// Traces whose hypothesis bit is 1, per guess.
    sh: [f64; 256],
    /// 1 / sqrt(n·sh - sh²), or 0 when the hypothesis is constant.
    inv_sd: [f64; 256],
}

fn best_scores(traces: &TraceSet, cols: &[Column], targets: &[Target], stat: Stat) -> Vec<Best> {
    let n = traces.len();
    let nf = n as f64;
    let mut samples: Vec<usize> = cols.iter().map(|c| c.sample).collect();
    samples.sort_unstable();
    samples.dedup();
    let values: Vec<Vec<u8>> = samples.par_iter().map(|&s| traces.column(s)).collect();
    let col_values = |c: &Column| -> Vec<u8> {
        let v = &values[samples
            .binary_search(&c.sample)
            .expect("column sample gathered")];
        v.iter().map(|&x| c.get(x)).collect()
    };
    let xlx = xlogx_table(n);

    let mut out: Vec<Option<Best>> = vec![None; targets.len()];

    // Single-byte models, grouped by plaintext byte.
    let mut groups: Vec<(usize, Vec<(usize, Prepared)>)> = Vec::new();
    for (ti, t) in targets.iter().enumerate() {
        let Some((byte, table)) = t.model.xor_table() else {
            continue;
        };
        let mut count = [0f64; 256];
        for pt in &traces.plaintexts {
            count[pt[byte] as usize] += 1.0;
        }
        let mut wh: [f64; 256] = std::array::from_fn(|x| table[x] as f64);
        fwht(&mut wh);
        let sh = xor_conv_f(&wh, &count);
        let inv_sd = sh.map(|s| {
            let v = nf * s - s * s;
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                0.0
            }
        });
        let p = Prepared { wh, sh, inv_sd };
        match groups.iter_mut().find(|g| g.0 == byte) {
            Some(g) => g.1.push((ti, p)),
            None => groups.push((byte, vec![(ti, p)])),
        }
    }
    for (byte, group) in &groups {
        let pbyte: Vec<usize> = traces
            .plaintexts
            .iter()
            .map(|pt| pt[*byte] as usize)
            .collect();
        let fresh = || vec![Best::new(); group.len()];
        let bests = (0..cols.len())
            .into_par_iter()
            .fold(fresh, |mut acc, ci| {
                let v = col_values(&cols[ci]);
                match stat {
                    Stat::Correlation => corr_column(&pbyte, &v, nf, group, ci, &mut acc),
                    Stat::MutualInformation => {
                        mi_column(&pbyte, &v, cols[ci].levels(), &xlx, group, ci, &mut acc)
                    }
                }
                acc
            })
            .reduce(fresh, |a, b| {
                a.into_iter().zip(&b).map(|(x, y)| x.merge(y)).collect()
            });
        for ((ti, _), b) in group.iter().zip(bests) {
            out[*ti] = Some(b);
        }
    }

    // Everything else: one hypothesis vector per guess.
    for (ti, t) in targets.iter().enumerate() {
        if out[ti].is_some() {
            continue;
        }
        let per_guess: Vec<Vec<f64>> = (0..=255u8)
            .into_par_iter()
            .map(|g| {
                let h: Vec<u8> = traces
                    .plaintexts
                    .iter()
                    .map(|pt| t.model.bit(pt, g))
                    .collect();
                match stat {
                    Stat::Correlation => correlate::<f64>(traces, cols, &h)
                        .into_iter()
                        .map(f64::abs)
                        .collect(),
                    Stat::MutualInformation => mutual_information::<f64>(traces, cols, &h),
                }
            })
            .collect();
        let mut b = Best::new();
        for (g, row) in per_guess.iter().enumerate() {
            for (ci, &x) in row.iter().enumerate() {
                b.offer(g, x, ci);
            }
        }
        out[ti] = Some(b);
    }
    out.into_iter()
        .map(|b| b.expect("every target scored"))
        .collect()
}

fn xor_conv_f(wh: &[f64; 256], b: &[f64; 256]) -> [f64; 256] {
    let mut wb = *b;
    fwht(&mut wb);
    xor_conv_transformed(wh, &wb)
}

#[inline]
fn xor_conv_transformed(wh: &[f64; 256], wb: &[f64; 256]) -> [f64; 256] {
    let mut prod: [f64; 256] = std::array::from_fn(|x| wh[x] * wb[x]);
    fwht(&mut prod);
    prod.map(|v| v / 256.0)
}

fn corr_column(
    pbyte: &[usize],
    v: &[u8],
    nf: f64,
    group: &[(usize, Prepared)],
    ci: usize,
    acc: &mut [Best],
) {
    let mut sums = [0f64; 256];
    let (mut sv, mut svv) = (0f64, 0f64);
    for (&u, &x) in pbyte.iter().zip(v) {
        let x = x as f64;
        sums[u] += x;
        sv += x;
        svv += x * x;
    }
    let vv = nf * svv - sv * sv;
    if vv <= 0.0 {
        for (_, b) in group.iter().zip(acc.iter_mut()) {
            for g in 0..256 {
                b.offer(g, 0.0, ci);
            }
        }
        return;
    }
    let inv_sv = 1.0 / vv.sqrt();
    fwht(&mut sums);
    for ((_, p), b) in group.iter().zip(acc.iter_mut()) {
        let shv = xor_conv_transformed(&p.wh, &sums);
        for g in 0..256 {
            let r = (nf * shv[g] - p.sh[g] * sv) * p.inv_sd[g] * inv_sv;
            b.offer(g, r.abs(), ci);
        }
    }
}

fn mi_column(
    pbyte: &[usize],
    v: &[u8],
    levels: usize,
    xlx: &[f64],
    group: &[(usize, Prepared)],
    ci: usize,
    acc: &mut [Best],
) {
    let n = pbyte.len();
    let nf = n as f64;
    let mut tab = vec![[0f64; 256]; levels];
    let mut col_y = vec![0usize; levels];
    for (&u, &x) in pbyte.iter().zip(v) {
        tab[x as usize][u] += 1.0;
        col_y[x as usize] += 1;
    }
    let present: Vec<usize> = (0..levels).filter(|&y| col_y[y] > 0).collect();
    let sy: f64 = present.iter().map(|&y| xlx[col_y[y]]).sum();
    for &y in &present {
        fwht(&mut tab[y]);
    }
    let idx = |x: f64| x.round() as usize;
    for ((_, p), b) in group.iter().zip(acc.iter_mut()) {
        let mut sxy = [0f64; 256];
        for &y in &present {
            let n1 = xor_conv_transformed(&p.wh, &tab[y]);
            for g in 0..256 {
                let c1 = idx(n1[g]);
                sxy[g] += xlx[c1] + xlx[col_y[y] - c1];
            }
        }
        for g in 0..256 {
            let ones = idx(p.sh[g]);
            let sx = xlx[ones] + xlx[n - ones];
            let mi = (nf.log2() - (sx + sy - sxy[g]) / nf).max(0.0);
            b.offer(g, mi, ci);
        }
    }
}

// ---------------------------------------------------------------------------
// Mutual information

fn entropy_bits(counts: impl Iterator<Item = u32>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Plug-in `I(X; Y)` in bits from a 2 x L contingency table.
fn mi_from_counts(joint: &[[u32; 2]], n: f64) -> f64 {
    let hx = entropy_bits(
        [
            joint.iter().map(|j| j[0]).sum(),
            joint.iter().map(|j| j[1]).sum(),
        ]
        .into_iter(),
        n,
    );
    let hy = entropy_bits(joint.iter().map(|j| j[0] + j[1]), n);
    let hxy = entropy_bits(joint.iter().flatten().copied(), n);
    (hx + hy - hxy).max(0.0)
}

/// MI between an arbitrary per-trace bit and each column.
pub fn mutual_information<T: Scalar>(traces: &TraceSet, cols: &[Column], h: &[u8]) -> Vec<T> {
    let n = traces.len() as f64;
    cols.iter()
        .map(|c| {
            let mut joint = vec![[0u32; 2]; c.levels()];
            for (t, &ht) in h.iter().enumerate() {
                joint[c.get(traces.sample(t, c.sample)) as usize][ht as usize] += 1;
            }
            sc(mi_from_counts(&joint, n))
        })
        .collect()
}

/// Plug-in mutual information between the model bit under `guess` and each
/// column, in bits.
pub fn mia<T: Scalar>(
    traces: &TraceSet,
    samples: &[usize],
    view: SampleView,
    model: &HypothesisModel,
    guess: u8,
) -> Vec<T> {
    let h: Vec<u8> = traces
        .plaintexts
        .iter()
        .map(|pt| model.bit(pt, guess))
        .collect();
    mutual_information(traces, &columns(samples, view), &h)
}

/// MI for all guesses, `out[guess][column]`. Single-byte models tabulate
/// (plaintext byte, value) once per column.
pub fn mia_all_guesses<T: Scalar>(
    traces: &TraceSet,
    samples: &[usize],
    view: SampleView,
    model: &HypothesisModel,
) -> Vec<Vec<T>> {
    let cols = columns(samples, view);
    let n = traces.len() as f64;
    let Some((byte, table)) = model.xor_table() else {
        return (0..=255u8)
            .into_par_iter()
            .map(|g| {
                let h: Vec<u8> = traces
                    .plaintexts
                    .iter()
                    .map(|pt| model.bit(pt, g))
                    .collect();
                mutual_information(traces, &cols, &h)
            })
            .collect();
    };
    let per_col: Vec<Vec<T>> = cols
        .par_iter()
        .map(|c| {
            let levels = c.levels();
            let mut tab = vec![0u32; 256 * levels];
            for t in 0..traces.len() {
                let u = traces.plaintexts[t][byte] as usize;
                tab[u * levels + c.get(traces.sample(t, c.sample)) as usize] += 1;
            }
            let present: Vec<usize> = (0..256)
                .filter(|&u| tab[u * levels..(u + 1) * levels].iter().any(|&x| x > 0))
                .collect();
            let mut joint = vec![[0u32; 2]; levels];
            (0..256usize)
                .map(|g| {
                    joint.iter_mut().for_each(|j| *j = [0, 0]);
                    for &u in &present {
                        let h = table[u ^ g] as usize;
                        for (y, j) in joint.iter_mut().enumerate() {
                            j[h] += tab[u * levels + y];
                        }
                    }
                    sc(mi_from_counts(&joint, n))
                })
                .collect()
        })
        .collect();
    (0..256)
        .map(|g| per_col.iter().map(|col| col[g]).collect())
        .collect()
}

/// Mutual-information attack: each guess scores its largest MI.
pub fn mia_rank<T: Scalar>(
    traces: &TraceSet,
    samples: &[usize],
    view: SampleView,
    targets: &[Target],
) -> KeyRankingReport<T> {
    rank_report(traces, samples, view, targets, Stat::MutualInformation)
}

// ---------------------------------------------------------------------------
// TVLA

pub const TVLA_THRESHOLD: f64 = 4.5;

#[derive(Clone, Debug, Serialize)]
pub struct TvlaReport<T> {
    pub samples: Vec<usize>,
    pub t: Vec<T>,
    /// Samples where both variances vanish; `t` is reported as 0 there.
    pub degenerate: Vec<bool>,
    pub max_abs_t: T,
    pub max_sample: usize,
    pub threshold: T,
    pub pass: bool,
}

/// Welch t statistic of raw sample values, fixed set against random set.
pub fn welch_t<T: Scalar>(fixed: &[f64], random: &[f64]) -> Option<T> {
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (n, m, var)
    };
    let (nf, mf, vf) = stats(fixed);
    let (nr, mr, vr) = stats(random);
    let den = (vf / nf + vr / nr).sqrt();
    if den == 0.0 {
        None
    } else {
        Some(sc((mf - mr) / den))
    }
}

pub fn tvla<T: Scalar>(
    fixed: &TraceSet,
    random: &TraceSet,
    samples: &[usize],
) -> Result<TvlaReport<T>> {
    if fixed.is_empty() || random.is_empty() {
        return Err(Error::LayoutMismatch("TVLA needs two nonempty sets".into()));
    }
    if fixed.sample_count() != random.sample_count() {
        return Err(Error::LayoutMismatch("trace widths differ".into()));
    }
    if let Some(&s) = samples.iter().find(|&&s| s >= fixed.sample_count()) {
        return Err(Error::LayoutMismatch(format!(
            "sample {s} outside the trace"
        )));
    }
    let res: Vec<Option<T>> = samples
        .par_iter()
        .map(|&s| {
            let a: Vec<f64> = (0..fixed.len())
                .map(|n| fixed.sample(n, s) as f64)
                .collect();
            let b: Vec<f64> = (0..random.len())
                .map(|n| random.sample(n, s) as f64)
                .collect();
            welch_t(&a, &b)
        })
        .collect();
    let degenerate: Vec<bool> = res.iter().map(Option::is_none).collect();
    let t: Vec<T> = res.into_iter().map(|x| x.unwrap_or(T::zero())).collect();
    let (max_abs_t, idx) = max_abs(&t);
    let threshold = sc(TVLA_THRESHOLD);
    Ok(TvlaReport {
        samples: samples.to_vec(),
        max_sample: samples.get(idx).copied().unwrap_or(0),
        pass: max_abs_t < threshold,
        t,
        degenerate,
        max_abs_t,
        threshold,
    })
}

// ---------------------------------------------------------------------------
// Unbalanced baseline

#[derive(Clone, Debug, Serialize)]
pub struct Leak {
    /// One-based output bit of the table byte.
    pub out_bit: usize,
    /// One-based hypothesis bit.
    pub hyp_bit: usize,
    pub ell: u8,
    pub ell_prime: u8,
    pub walsh: i32,
}

#[derive(Clone, Debug, Serialize)]
pub struct WrongKeyStats {
    pub count: usize,
    pub mean_abs: f64,
    pub max_abs: i32,
    pub sd_abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaselineReport {
    pub key_byte: u8,
    pub f: [u8; 4],
    pub g: [u8; 4],
    /// Rows of the assembled M as bytes (MSB = index 1).
    pub m_rows: [u8; 8],
    /// Entries with |W| = 256 under the correct key.
    pub leaks: Vec<Leak>,
    /// `W` at the predicted position: output bit 8, hypothesis bit 1,
    /// ℓ = 2, ℓ' = 1.
    pub predicted: i32,
    /// |W| of the predicted output bit against the predicted hypothesis
    /// bit over the 255 wrong guesses.
    pub wrong_keys: WrongKeyStats,
    /// Same table built after resampling the offending row of g.
    pub restored_all_zero: bool,
}

/// Builds a first-round table whose linear layer has row 8 of M equal to
/// the unit vector `{8}`, which the blacklist forbids because row 8 of
/// `S^2` equals row 1 of `S^1`, and measures the leak.
pub fn baseline_unbalanced_demo(seed: u64) -> Result<BaselineReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lists = blacklists();
    let key: [u8; 16] = rand::Rng::gen(&mut rng);
    let f = sample_f(&mut rng, &lists.f);
    let good = sample_g(&mut rng, &f, &lists.w)?;
    let mut g = good;
    g.rows[3] = 0;
    let bad = EncodingPair::new(f, g);

    // UT_{1,1} output byte 1 carries 2 S(p ^ k).
    let table = |pair: EncodingPair| {
        let mut spec = EncodingSpec::identity(key);
        spec.set_pair(0, 0, 0, pair);
        gen_ut(1, 0, 0, &spec)
    };
    let key_byte = key[shifted_source(0, 0)];
    let leaky = table(bad);
    let grid = walsh_ut_outputs(&leaky, key_byte);
    let mut leaks = Vec::new();
    for b in 0..8 {
        for (ip, cell) in grid[b].iter().enumerate() {
            for (l, &w) in cell.iter().enumerate() {
                if w.abs() == 256 {
                    leaks.push(Leak {
                        out_bit: b + 1,
                        hyp_bit: ip + 1,
                        ell: MIX[0][0],
                        ell_prime: l as u8 + 1,
                        walsh: w,
                    });
                }
            }
        }
    }
    let predicted = grid[7][0][0];
    let wrong: Vec<i32> = (0..=255u8)
        .filter(|&g| g != key_byte)
        .map(|g| walsh_ut_outputs(&leaky, g)[7][0][0].abs())
        .collect();
    let mean = wrong.iter().map(|&w| w as f64).sum::<f64>() / wrong.len() as f64;
    let sd = (wrong
        .iter()
        .map(|&w| (w as f64 - mean).powi(2))
        .sum::<f64>()
        / (wrong.len() - 1) as f64)
        .sqrt();
    let restored = walsh_ut_outputs(&table(EncodingPair::new(f, good)), key_byte);
    let restored_all_zero = restored[..8].iter().flatten().flatten().all(|&w| w == 0);
    Ok(BaselineReport {
        key_byte,
        f: f.rows,
        g: g.rows,
        m_rows: assemble_m(&bad).rows,
        leaks,
        predicted,
        wrong_keys: WrongKeyStats {
            count: wrong.len(),
            mean_abs: mean,
            max_abs: wrong.iter().copied().max().unwrap_or(0),
            sd_abs: sd,
        },
        restored_all_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{collect_traces_seeded, PlaintextSource, SelectorPolicy, Trace, TraceMeta};
    use crate::tablegen::build_pair;
    use proptest::prelude::*;
    use rand::Rng;

    fn synthetic(
        n: usize,
        seed: u64,
        f: impl Fn(&[u8; 16], &mut ChaCha8Rng) -> Vec<(usize, u8)>,
    ) -> TraceSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = TraceSet::new(TraceMeta::default());
        for _ in 0..n {
            let pt: [u8; 16] = rng.gen();
            let mut samples: Vec<u8> = (0..layout::SAMPLES).map(|_| rng.gen()).collect();
            for (s, v) in f(&pt, &mut rng) {
                samples[s] = v;
            }
            set.push(Trace {
                plaintext: pt,
                set_bit: 0,
                samples,
            })
            .unwrap();
        }
        set
    }

    #[test]
    fn walsh_basics() {
        let zero = [false; 256];
        assert_eq!(walsh(&zero, 0), 256);
        assert_eq!(walsh(&zero, 0x11), 0);
        let lin: [bool; 256] = std::array::from_fn(|x| (x as u8 & 0x5A).count_ones() & 1 == 1);
        assert_eq!(walsh(&lin, 0x5A), 256);
        let sb: [bool; 256] = std::array::from_fn(|x| bit(sbox(x as u8), 0) == 1);
        let spec = walsh_spectrum(&sb);
        for o in 0..=255u8 {
            assert_eq!(spec[o as usize], walsh(&sb, o));
            assert_eq!(spec[o as usize] % 2, 0);
        }
        // S-box component functions are balanced with nonzero linear bias.
        assert_eq!(spec[0], 0);
        assert!(spec.iter().all(|w| w.abs() <= 32));
    }

    #[test]
    fn imbalance_of_families() {
        assert_eq!(delta_imbalance(&[[false; 256]]), 256);
        let family: Vec<[bool; 256]> = (0..4)
            .map(|b| std::array::from_fn(|x| bit(sbox(x as u8), b) == 1))
            .collect();
        let brute: i64 = family
            .iter()
            .map(|f| (0..=255u8).map(|o| walsh(f, o).abs() as i64).sum::<i64>())
            .sum();
        assert_eq!(delta_imbalance(&family), brute);
        // x1 ^ x2 ^ x3 is balanced and 2-resilient.
        let f: [bool; 256] = std::array::from_fn(|x| (x as u8 & 0xE0).count_ones() & 1 == 1);
        assert_eq!(correlation_immunity(&f), 2);
        assert_eq!(walsh_spectrum(&f)[0], 0);
    }

    proptest! {
        #[test]
        fn walsh_values_even_and_bounded(seed in any::<u64>(), omega in any::<u8>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: [bool; 256] = std::array::from_fn(|_| rng.gen());
            let w = walsh(&f, omega);
            prop_assert!(w % 2 == 0 && w.abs() <= 256);
        }

        #[test]
        fn ranking_is_scale_invariant(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scores: Vec<f64> = (0..256).map(|_| (rng.gen_range(0..50) as f64) / 7.0).collect();
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            let mut ranks: Vec<usize> = (0..=255u8).map(|g| rank_of(&scores, g)).collect();
            for g in 0..=255u8 {
                prop_assert_eq!(rank_of(&scaled, g), ranks[g as usize]);
            }
            ranks.sort();
            prop_assert_eq!(ranks, (1..=256).collect::<Vec<_>>());
        }
    }

    #[test]
    fn ties_break_by_candidate() {
        let scores = vec![1.0f64; 256];
        assert_eq!(rank_of(&scores, 0), 1);
        assert_eq!(rank_of(&scores, 255), 256);
    }

    #[test]
    fn correlation_sanity() {
        let model = HypothesisModel::sbox(3, 2);
        let key = 0x4Bu8;
        let set = synthetic(4000, 1, |pt, rng| {
            let h = model.bit(pt, key);
            vec![(10, h), (11, 1 - h), (12, 200 + 3 * h), (13, rng.gen())]
        });
        let r: Vec<f64> = cpa_monobit(&set, &[10, 11, 12, 13, 14], SampleView::Bytes, &model, key);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] + 1.0).abs() < 1e-12);
        assert!((r[2] - 1.0).abs() < 1e-12);
        assert!(r[3].abs() < 4.0 / (4000f64).sqrt());
        // Constant column.
        let set2 = synthetic(100, 2, |_, _| vec![(20, 7)]);
        let r: Vec<f64> = cpa_monobit(&set2, &[20], SampleView::Bytes, &model, key);
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn pearson_is_affine_invariant() {
        let model = HypothesisModel::sbox(0, 0);
        let set = synthetic(2000, 3, |pt, rng| {
            let v: u8 = rng.gen_range(0..40) + 30 * model.bit(pt, 9);
            vec![(0, v), (1, v.wrapping_mul(3).wrapping_add(5)), (2, 255 - v)]
        });
        let r: Vec<f64> = cpa_monobit(&set, &[0, 1, 2], SampleView::Bytes, &model, 9);
        assert!((r[0] - r[1]).abs() < 1e-12);
        assert!((r[0] + r[2]).abs() < 1e-12);
    }

    #[test]
    fn fast_correlation_matches_direct() {
        let set = synthetic(1500, 4, |pt, _| vec![(5, sbox(pt[2] ^ 0x33)), (6, pt[2])]);
        let model = HypothesisModel::SboxTimesL {
            ell: 3,
            byte: 2,
            bit: 5,
        };
        let cols = [0usize, 5, 6, 20, 1000];
        for view in [SampleView::Bytes, SampleView::Bits] {
            let fast: Vec<Vec<f64>> = cpa_all_guesses(&set, &cols, view, &model);
            for g in [0u8, 0x33, 0x80, 0xFF] {
                let slow: Vec<f64> = cpa_monobit(&set, &cols, view, &model, g);
                for (a, b) in fast[g as usize].iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-9, "{a} {b}");
                }
            }
            let fast_mi: Vec<Vec<f64>> = mia_all_guesses(&set, &cols, view, &model);
            for g in [1u8, 0x33] {
                let slow: Vec<f64> = mia(&set, &cols, view, &model, g);
                for (a, b) in fast_mi[g as usize].iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
        let f32s: Vec<Vec<f32>> = cpa_all_guesses(&set, &cols, SampleView::Bits, &model);
        let f64s: Vec<Vec<f64>> = cpa_all_guesses(&set, &cols, SampleView::Bits, &model);
        assert!((f32s[7][3] as f64 - f64s[7][3]).abs() < 1e-5);
    }

    #[test]
    fn rank_engine_matches_guess_matrices() {
        let set = synthetic(1200, 6, |pt, rng| {
            vec![
                (5, sbox(pt[2] ^ 0x33) ^ (rng.gen::<u8>() & 0x0F)),
                (6, pt[2]),
                (17, pt[9]),
            ]
        });
        let key = [0x33u8; 16];
        let mut targets: Vec<Target> = (0..8)
            .map(|b| Target {
                label: format!("b{b}"),
                model: HypothesisModel::SboxTimesL {
                    ell: 2,
                    byte: 2,
                    bit: b,
                },
                correct: 0x33,
            })
            .collect();
        targets.push(Target::round_output_all(&key).remove(0));
        let samples = [3usize, 5, 6, 17, 18];
        for view in [SampleView::Bytes, SampleView::Bits] {
            let cpa: KeyRankingReport<f64> = dca_rank(&set, &samples, view, &targets);
            let mi: KeyRankingReport<f64> = mia_rank(&set, &samples, view, &targets);
            for (ti, t) in targets.iter().enumerate() {
                let m: Vec<Vec<f64>> = cpa_all_guesses(&set, &samples, view, &t.model);
                let mm: Vec<Vec<f64>> = mia_all_guesses(&set, &samples, view, &t.model);
                for g in 0..256 {
                    let best = m[g].iter().fold(0.0f64, |a, &x| a.max(x.abs()));
                    assert!((cpa.targets[ti].scores[g] - best).abs() < 1e-9);
                    let best = mm[g].iter().fold(0.0f64, |a, &x| a.max(x));
                    assert!(
                        (mi.targets[ti].scores[g] - best).abs() < 1e-9,
                        "{} {}",
                        mi.targets[ti].scores[g],
                        best
                    );
                }
            }
        }
    }

    #[test]
    fn dca_finds_planted_leak() {
        let key = 0xA7u8;
        let set = synthetic(3000, 5, |pt, _| vec![(40, sbox(pt[7] ^ key))]);
        let targets: Vec<Target> = (0..8)
            .map(|b| Target {
                label: format!("b{b}"),
                model: HypothesisModel::sbox(7, b),
                correct: key,
            })
            .collect();
        let rep: KeyRankingReport<f64> = dca_rank(&set, &[39, 40, 41], SampleView::Bits, &targets);
        assert!(rep.targets.iter().all(|t| t.correct_rank == 1));
        assert!(rep
            .targets
            .iter()
            .all(|t| (t.correct_score - 1.0).abs() < 1e-12));
    }

    #[test]
    fn round_output_model_matches_mix_columns() {
        let key: [u8; 16] = std::array::from_fn(|i| (i * 17 + 3) as u8);
        let pt: [u8; 16] = std::array::from_fn(|i| (i * 29 + 1) as u8);
        let m = HypothesisModel::round_output(&key, 0, 0, 1, 0);
        let s: [u8; 4] =
            std::array::from_fn(|i| sbox(pt[shifted_source(i, 0)] ^ key[shifted_source(i, 0)]));
        let want = gf_mul(2, s[0]) ^ gf_mul(3, s[1]) ^ s[2] ^ s[3];
        assert_eq!(m.value(&pt, key[5]), want);
        assert_eq!(m.target_byte(), 5);
    }

    #[test]
    fn mutual_information_bounds() {
        let model = HypothesisModel::sbox(1, 4);
        let set = synthetic(5000, 6, |pt, _| vec![(0, model.bit(pt, 0x10)), (1, pt[1])]);
        let mi: Vec<f64> = mia(&set, &[0, 1, 2], SampleView::Bytes, &model, 0x10);
        let h: Vec<u8> = set
            .plaintexts
            .iter()
            .map(|pt| model.bit(pt, 0x10))
            .collect();
        let ones = h.iter().filter(|&&x| x == 1).count() as f64 / h.len() as f64;
        let hx = -(ones * ones.log2() + (1.0 - ones) * (1.0 - ones).log2());
        assert!((mi[0] - hx).abs() < 1e-9);
        assert!((mi[1] - hx).abs() < 1e-9);
        assert!(mi[2] < 0.05);
        for v in mi {
            assert!(v >= 0.0 && v <= hx + 1e-12);
        }
        let big = synthetic(20000, 7, |_, _| vec![]);
        let mi: Vec<f64> = mia(&big, &[3], SampleView::Bits, &model, 0x10);
        assert!(mi[0] < 1e-3);
    }

    #[test]
    fn welch_behaviour() {
        let a = synthetic(3000, 8, |_, _| vec![]);
        let b = synthetic(3000, 9, |_, _| vec![]);
        let rep: TvlaReport<f64> = tvla(&a, &b, &(0..200).collect::<Vec<_>>()).unwrap();
        assert!(rep.pass && rep.max_abs_t < 4.5);
        // A column equal to plaintext byte 0, fixed vs random plaintexts.
        let fixed = {
            let mut s = TraceSet::new(TraceMeta::default());
            for t in 0..1000 {
                let mut tr = a.trace(t);
                tr.plaintext = [0x11; 16];
                tr.samples[0] = 0x11;
                s.push(tr).unwrap();
            }
            s
        };
        let random = synthetic(1000, 10, |pt, _| vec![(0, pt[0])]);
        let rep: TvlaReport<f64> = tvla(&fixed, &random, &[0, 1]).unwrap();
        assert!(rep.t[0].abs() > 20.0);
        assert!(!rep.pass);
        let cst = synthetic(50, 11, |_, _| vec![(9, 4)]);
        let rep: TvlaReport<f32> = tvla(&cst, &cst, &[9]).unwrap();
        assert!(rep.degenerate[0] && rep.t[0] == 0.0);
        assert!(tvla::<f64>(&cst, &TraceSet::new(TraceMeta::default()), &[0]).is_err());
    }

    #[test]
    fn baseline_demo_leaks_where_predicted() {
        let rep = baseline_unbalanced_demo(2).unwrap();
        assert_eq!(rep.m_rows[7], 0x01);
        assert_eq!(rep.predicted.abs(), 256);
        assert!(rep
            .leaks
            .iter()
            .any(|l| l.out_bit == 8 && l.hyp_bit == 1 && l.ell_prime == 1));
        assert!(rep.restored_all_zero);
        assert!(
            (8.0..=20.0).contains(&rep.wrong_keys.mean_abs),
            "{:?}",
            rep.wrong_keys
        );
    }

    #[test]
    fn grid_statistics_on_real_tables() {
        let key: [u8; 16] = std::array::from_fn(|i| (i * 11 + 5) as u8);
        let (pair, spec) = build_pair(key, 12).unwrap();
        let set = collect_traces_seeded(
            &pair,
            &SelectorPolicy::FixedQ0,
            &PlaintextSource::Grid,
            0,
            1,
        );
        let grid = RoundOutputGrid::from_traces(&set).unwrap();
        assert_eq!(
            grid.delta(),
            crate::cipher::grid_round_output(&pair.q0).as_slice()
        );
        let (k0, k5) = (spec.key[0], spec.key[5]);
        let w = walsh_eps_gamma_grid(grid.delta(), k0, k5);
        assert!(w.iter().flatten().all(|&v| v == 0));
        assert_eq!(walsh_round_output(&grid, k0, k5, 2, 3), 0);
        let wrong = walsh_eps_gamma_grid(grid.delta(), k0, k5 ^ 1);
        assert_eq!(walsh_eps_gamma(grid.delta(), k0, k5 ^ 1, 4, 6), wrong[4][6]);
        assert!(wrong.iter().flatten().any(|&v| v > 0));
        for g in [0u8, k5, 200] {
            assert_eq!(cluster_sizes(&grid, k0, g).iter().sum::<u32>(), 65536);
        }
        assert_eq!(collision_score(&grid, k0, k5), 8 * 65536);
        assert_eq!(cluster_sse_score::<f64>(&grid, k0, k5), 0.0);
        assert!(collision_score(&grid, k0, k5 ^ 0x40) < 8 * 65536);

        let partial = collect_traces_seeded(
            &pair,
            &SelectorPolicy::FixedQ0,
            &PlaintextSource::Random,
            10,
            1,
        );
        assert!(matches!(
            RoundOutputGrid::from_traces(&partial),
            Err(Error::IncompleteGrid(_))
        ));
    }

    #[test]
    fn trace_mode_walsh_matches_static() {
        let key: [u8; 16] = std::array::from_fn(|i| (i * 7 + 1) as u8);
        let (pair, spec) = build_pair(key, 3).unwrap();
        let set = collect_traces_seeded(
            &pair,
            &SelectorPolicy::FixedQ0,
            &PlaintextSource::Random,
            3000,
            2,
        );
        let (i, j) = (2, 1);
        let g = spec.key[shifted_source(i, j)];
        assert_eq!(
            walsh_ut_traces(&set, i, j, g, 0).unwrap(),
            walsh_ut_static(&pair.q0, i, j, g)
        );
        assert_eq!(
            walsh_ut_traces(&set, i, j, g ^ 9, 0).unwrap(),
            walsh_ut_static(&pair.q0, i, j, g ^ 9)
        );
        assert!(walsh_ut_static(&pair.q0, i, j, g)
            .iter()
            .flatten()
            .flatten()
            .all(|&w| w == 0));
        let few = collect_traces_seeded(
            &pair,
            &SelectorPolicy::FixedQ0,
            &PlaintextSource::Random,
            20,
            2,
        );
        assert!(matches!(
            walsh_ut_traces(&few, i, j, g, 0),
            Err(Error::Unobserved(_))
        ));
    }
}
