//! GF(2) matrices for the balanced linear layer.
//!
//! A row of an 8x8 matrix is stored as a byte whose MSB is column 1, so the
//! row byte doubles as the index set `Idx(row)` over `[1, 8]`. The same holds
//! for the 4-bit rows of [`BitMat4`] with bit 3 as column 1.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gf::{bit, Coefficient, SMatrix};

#[inline]
fn parity8(x: u8) -> u8 {
    (x.count_ones() & 1) as u8
}

/// 4x4 binary matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitMat4 {
    pub rows: [u8; 4],
}

impl BitMat4 {
    pub const ZERO: BitMat4 = BitMat4 { rows: [0; 4] };
    pub const IDENTITY: BitMat4 = BitMat4 {
        rows: [0b1000, 0b0100, 0b0010, 0b0001],
    };

    pub fn from_rows(rows: [u8; 4]) -> Self {
        BitMat4 {
            rows: rows.map(|r| r & 0xF),
        }
    }

    /// Matrix-vector product over GF(2); `v` is a nibble.
    #[inline]
    pub fn mul_vec(&self, v: u8) -> u8 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &r)| acc | (parity8(r & v) << (3 - i)))
    }

    /// Row vector `v` times this matrix: XOR of the rows selected by `v`.
    #[inline]
    pub fn row_vec_mul(&self, v: u8) -> u8 {
        (0..4)
            .filter(|&t| (v >> (3 - t)) & 1 == 1)
            .fold(0, |acc, t| acc ^ self.rows[t])
    }

    pub fn mul(&self, rhs: &BitMat4) -> BitMat4 {
        BitMat4 {
            rows: self.rows.map(|r| rhs.row_vec_mul(r)),
        }
    }

    pub fn add(&self, rhs: &BitMat4) -> BitMat4 {
        BitMat4 {
            rows: std::array::from_fn(|i| self.rows[i] ^ rhs.rows[i]),
        }
    }
}

/// 8x8 binary matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct BitMat8 {
    pub rows: [u8; 8],
}

impl BitMat8 {
    pub const IDENTITY: BitMat8 = BitMat8 {
        rows: [0x80, 0x40, 0x20, 0x10, 0x08, 0x04, 0x02, 0x01],
    };

    #[inline]
    pub fn mul_vec(&self, v: u8) -> u8 {
        self.rows
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &r)| acc | (parity8(r & v) << (7 - i)))
    }

    /// Gaussian elimination rank over GF(2).
    pub fn rank(&self) -> usize {
        let mut rows = self.rows;
        let mut rank = 0;
        for col in 0..8 {
            let pivot_bit = 0x80u8 >> col;
            let Some(p) = (rank..8).find(|&r| rows[r] & pivot_bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            for r in 0..8 {
                if r != rank && rows[r] & pivot_bit != 0 {
                    rows[r] ^= rows[rank];
                }
            }
            rank += 1;
        }
        rank
    }
}

/// The (f, g) shear pair defining one balanced linear transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodingPair {
    pub f: BitMat4,
    pub g: BitMat4,
}

impl EncodingPair {
    pub const IDENTITY: EncodingPair = EncodingPair {
        f: BitMat4::ZERO,
        g: BitMat4::ZERO,
    };

    pub fn new(f: BitMat4, g: BitMat4) -> Self {
        EncodingPair { f, g }
    }
}

/// M = [[I4, f], [g, I4 ^ g f]].
pub fn assemble_m(pair: &EncodingPair) -> BitMat8 {
    let gf = pair.g.mul(&pair.f).add(&BitMat4::IDENTITY);
    let mut rows = [0u8; 8];
    for i in 0..4 {
        rows[i] = (BitMat4::IDENTITY.rows[i] << 4) | pair.f.rows[i];
        rows[i + 4] = (pair.g.rows[i] << 4) | gf.rows[i];
    }
    BitMat8 { rows }
}

/// Z^H = X^H ^ f X^L, then Z^L = X^L ^ g Z^H.
#[inline]
pub fn linear_encode(x: u8, pair: &EncodingPair) -> u8 {
    let zh = (x >> 4) ^ pair.f.mul_vec(x & 0xF);
    let zl = (x & 0xF) ^ pair.g.mul_vec(zh);
    (zh << 4) | zl
}

/// Inverse of [`linear_encode`]; valid for singular f and g alike.
#[inline]
pub fn linear_decode(z: u8, pair: &EncodingPair) -> u8 {
    let zh = z >> 4;
    let yl = (z & 0xF) ^ pair.g.mul_vec(zh);
    let yh = zh ^ pair.f.mul_vec(yl);
    (yh << 4) | yl
}

/// One entry of the row-combination blacklist: XOR of the rows of `S^ell`
/// selected by `rows` equals row `target` of `S^ell_prime`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlacklistEntry {
    pub ell: Coefficient,
    pub ell_prime: Coefficient,
    /// One-based target row of `S^ell_prime`.
    pub target: u8,
    /// Index set as a row byte (MSB = index 1).
    pub rows: u8,
}

/// The set W of forbidden row index sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlacklistW {
    pub entries: Vec<BlacklistEntry>,
    forbidden: [bool; 256],
}

impl BlacklistW {
    /// Exhaustive scan over the 255 nonempty row subsets for every (ℓ, ℓ').
    /// The matrices are built with key byte 0; a key only permutes columns.
    pub fn derive() -> Self {
        let s: Vec<SMatrix> = Coefficient::ALL
            .iter()
            .map(|&ell| SMatrix::build(ell, 0))
            .collect();
        let mut entries = Vec::new();
        for src in &s {
            for dst in &s {
                for mask in 1..=255u8 {
                    let combo = src.xor_rows(mask);
                    for target in 0..8 {
                        if combo == *dst.row(target) {
                            entries.push(BlacklistEntry {
                                ell: src.ell,
                                ell_prime: dst.ell,
                                target: target as u8 + 1,
                                rows: mask,
                            });
                        }
                    }
                }
            }
        }
        entries.sort();
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<BlacklistEntry>) -> Self {
        let mut forbidden = [false; 256];
        for e in &entries {
            forbidden[e.rows as usize] = true;
        }
        BlacklistW { entries, forbidden }
    }

    /// Whether `Idx(row)` belongs to W.
    #[inline]
    pub fn contains(&self, row: u8) -> bool {
        self.forbidden[row as usize]
    }

    pub fn group(&self, ell: Coefficient, ell_prime: Coefficient) -> Vec<BlacklistEntry> {
        self.entries
            .iter()
            .filter(|e| e.ell == ell && e.ell_prime == ell_prime)
            .copied()
            .collect()
    }

    /// Index set of an entry as one-based positions.
    pub fn indices(rows: u8) -> Vec<u8> {
        (0..8)
            .filter(|&i| bit(rows, i) == 1)
            .map(|i| i as u8 + 1)
            .collect()
    }
}

/// Reference row-index table: for each off-diagonal (ℓ, ℓ'), the index sets
/// whose XOR reproduces rows 1..8 of `S^ℓ'`. The diagonal ℓ = ℓ' maps row j to {j}.
pub const REFERENCE_W: [(u8, u8, [&[u8]; 8]); 6] = [
    (
        1,
        2,
        [&[2], &[3], &[4], &[1, 5], &[1, 6], &[7], &[1, 8], &[1]],
    ),
    (
        1,
        3,
        [
            &[1, 2],
            &[2, 3],
            &[3, 4],
            &[1, 4, 5],
            &[1, 5, 6],
            &[6, 7],
            &[1, 7, 8],
            &[1, 8],
        ],
    ),
    (
        2,
        1,
        [&[8], &[1], &[2], &[3], &[4, 8], &[5, 8], &[6], &[7, 8]],
    ),
    (
        2,
        3,
        [
            &[1, 8],
            &[1, 2],
            &[2, 3],
            &[3, 4],
            &[4, 5, 8],
            &[5, 6, 8],
            &[6, 7],
            &[7],
        ],
    ),
    (
        3,
        1,
        [
            &[1, 2, 3, 4, 5, 6, 7, 8],
            &[2, 3, 4, 5, 6, 7, 8],
            &[3, 4, 5, 6, 7, 8],
            &[4, 5, 6, 7, 8],
            &[1, 2, 3, 4],
            &[6, 7, 8],
            &[7, 8],
            &[1, 2, 3, 4, 5, 6, 7],
        ],
    ),
    (
        3,
        2,
        [
            &[2, 3, 4, 5, 6, 7, 8],
            &[3, 4, 5, 6, 7, 8],
            &[4, 5, 6, 7, 8],
            &[5, 6, 7, 8],
            &[1, 2, 3, 4, 5],
            &[7, 8],
            &[8],
            &[1, 2, 3, 4, 5, 6, 7, 8],
        ],
    ),
];

/// Row byte for a one-based index set.
pub fn mask_from_indices(indices: &[u8]) -> u8 {
    indices.iter().fold(0u8, |acc, &i| acc | (0x80 >> (i - 1)))
}

/// The reference table expanded into blacklist entries, diagonal included.
pub fn reference_blacklist() -> BlacklistW {
    let mut entries = Vec::new();
    for ell in Coefficient::ALL {
        for j in 1..=8u8 {
            entries.push(BlacklistEntry {
                ell,
                ell_prime: ell,
                target: j,
                rows: mask_from_indices(&[j]),
            });
        }
    }
    for (ell, ell_prime, sets) in REFERENCE_W {
        for (v, set) in sets.iter().enumerate() {
            entries.push(BlacklistEntry {
                ell: Coefficient::new(ell).expect("table coefficient"),
                ell_prime: Coefficient::new(ell_prime).expect("table coefficient"),
                target: v as u8 + 1,
                rows: mask_from_indices(set),
            });
        }
    }
    entries.sort();
    BlacklistW::from_entries(entries)
}

/// Per-row sets of nibbles forbidden in `f`: `b` is forbidden in row `i`
/// when `Idx(e_i || b)` is in W.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlacklistF {
    forbidden: [[bool; 16]; 4],
}

impl BlacklistF {
    pub fn derive(w: &BlacklistW) -> Self {
        let mut forbidden = [[false; 16]; 4];
        for (i, row) in forbidden.iter_mut().enumerate() {
            let unit = BitMat4::IDENTITY.rows[i] << 4;
            for b in 0..16u8 {
                row[b as usize] = w.contains(unit | b);
            }
        }
        BlacklistF { forbidden }
    }

    #[inline]
    pub fn is_forbidden(&self, row: usize, value: u8) -> bool {
        self.forbidden[row][value as usize]
    }

    /// Forbidden values of row `row` (0-based), ascending.
    pub fn forbidden(&self, row: usize) -> Vec<u8> {
        (0..16u8).filter(|&b| self.is_forbidden(row, b)).collect()
    }

    pub fn allowed(&self, row: usize) -> Vec<u8> {
        (0..16u8).filter(|&b| !self.is_forbidden(row, b)).collect()
    }

    /// |F|: product of the allowed counts per row.
    pub fn family_size(&self) -> u64 {
        (0..4).map(|i| self.allowed(i).len() as u64).product()
    }
}

/// Both blacklists, derived once per process.
#[derive(Debug)]
pub struct Blacklists {
    pub w: BlacklistW,
    pub f: BlacklistF,
}

pub fn blacklists() -> &'static Blacklists {
    static CELL: OnceLock<Blacklists> = OnceLock::new();
    CELL.get_or_init(|| {
        let w = BlacklistW::derive();
        let f = BlacklistF::derive(&w);
        Blacklists { w, f }
    })
}

/// Uniform rejection sampling of each row of `f` outside its blacklist.
pub fn sample_f<R: Rng + ?Sized>(rng: &mut R, blacklist: &BlacklistF) -> BitMat4 {
    let mut f = BitMat4::ZERO;
    for i in 0..4 {
        let mut b = rng.gen_range(0..16u8);
        while blacklist.is_forbidden(i, b) {
            b = rng.gen_range(0..16u8);
        }
        f.rows[i] = b;
    }
    f
}

/// Row `i + 4` of M for a candidate `g` row: `g_i || (e_i ^ g_i f)`.
#[inline]
fn lower_row(f: &BitMat4, i: usize, g_row: u8) -> u8 {
    (g_row << 4) | (BitMat4::IDENTITY.rows[i] ^ f.row_vec_mul(g_row))
}

/// Values of row `i` of g that keep the assembled row outside W.
pub fn valid_g_rows(f: &BitMat4, i: usize, w: &BlacklistW) -> Vec<u8> {
    (0..16u8)
        .filter(|&b| !w.contains(lower_row(f, i, b)))
        .collect()
}

/// Rejection sampling of `g` given `f`, row by row.
pub fn sample_g<R: Rng + ?Sized>(
    rng: &mut R,
    f: &BitMat4,
    w: &BlacklistW,
) -> Result<BitMat4, Error> {
    let mut g = BitMat4::ZERO;
    for i in 0..4 {
        if valid_g_rows(f, i, w).is_empty() {
            return Err(Error::NoValidG { row: i + 1 });
        }
        let mut b = rng.gen_range(0..16u8);
        while w.contains(lower_row(f, i, b)) {
            b = rng.gen_range(0..16u8);
        }
        g.rows[i] = b;
    }
    Ok(g)
}

/// Draw a fresh valid pair from the process-wide blacklists.
pub fn sample_pair<R: Rng + ?Sized>(rng: &mut R) -> Result<EncodingPair, Error> {
    let lists = blacklists();
    let f = sample_f(rng, &lists.f);
    let g = sample_g(rng, &f, &lists.w)?;
    Ok(EncodingPair { f, g })
}

/// Whether every row of the assembled M avoids W.
pub fn pair_is_valid(pair: &EncodingPair, w: &BlacklistW) -> bool {
    assemble_m(pair).rows.iter().all(|&r| !w.contains(r))
}

/// Result of enumerating every (f, g) with f in F and g in all of 2^16.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCount {
    pub total: u64,
    pub f_count: u64,
    /// Mean number of valid values for each row of g, averaged over f.
    pub mean_row_choices: [f64; 4],
}

/// Exhaustive count of valid pairs. The condition on row `i` of g depends
/// only on that row and f, so the count factorises per row.
pub fn count_valid_pairs(lists: &Blacklists) -> PairCount {
    let allowed: Vec<Vec<u8>> = (0..4).map(|i| lists.f.allowed(i)).collect();
    let mut total = 0u64;
    let mut f_count = 0u64;
    let mut sums = [0u64; 4];
    for &a in &allowed[0] {
        for &b in &allowed[1] {
            for &c in &allowed[2] {
                for &d in &allowed[3] {
                    let f = BitMat4::from_rows([a, b, c, d]);
                    let counts: [u64; 4] =
                        std::array::from_fn(|i| valid_g_rows(&f, i, &lists.w).len() as u64);
                    for i in 0..4 {
                        sums[i] += counts[i];
                    }
                    total += counts.iter().product::<u64>();
                    f_count += 1;
                }
            }
        }
    }
    PairCount {
        total,
        f_count,
        mean_row_choices: sums.map(|s| s as f64 / f_count as f64),
    }
}

/// Walsh coefficients `grid[i][i'][ℓ][ℓ']` of row `i` of `M S^ℓ` against row
/// `i'` of `S^ℓ'`, all built with `key_byte`.
pub type WalshGrid = [[[[i32; 3]; 3]; 8]; 8];

pub fn walsh_balance_check(pair: &EncodingPair, key_byte: u8) -> WalshGrid {
    walsh_balance_check_m(&assemble_m(pair), key_byte)
}

/// Same as [`walsh_balance_check`] for an arbitrary 8x8 matrix.
pub fn walsh_balance_check_m(m: &BitMat8, key_byte: u8) -> WalshGrid {
    let s: Vec<SMatrix> = Coefficient::ALL
        .iter()
        .map(|&ell| SMatrix::build(ell, key_byte))
        .collect();
    let mut grid = [[[[0i32; 3]; 3]; 8]; 8];
    for (li, src) in s.iter().enumerate() {
        for (i, &mrow) in m.rows.iter().enumerate() {
            let r = src.xor_rows(mrow);
            for (lpi, dst) in s.iter().enumerate() {
                for ip in 0..8 {
                    grid[i][ip][li][lpi] = r.walsh_against(dst.row(ip));
                }
            }
        }
    }
    grid
}

pub fn grid_is_zero(grid: &WalshGrid) -> bool {
    grid.iter().flatten().flatten().flatten().all(|&v| v == 0)
}
