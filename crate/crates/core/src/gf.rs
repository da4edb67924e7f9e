//! GF(2^8) arithmetic, AES-128 primitives and the S^ℓ bit matrices.
//!
//! Bit numbering follows the MSB-first convention used throughout the crate:
//! bit 1 of a byte is its most significant bit. Internally indices are
//! zero-based, so "row 0" is the MSB.

use std::fmt;
use std::ops::{Add, Mul};

use crate::error::Error;

/// Rijndael reduction polynomial x^8 + x^4 + x^3 + x + 1 (without the x^8 term).
const REDUCTION: u8 = 0x1B;

/// Element of GF(2^8) under the Rijndael polynomial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Gf256(pub u8);

impl Add for Gf256 {
    type Output = Gf256;
    // Addition in characteristic 2 is XOR.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        Gf256(gf_mul(self.0, rhs.0))
    }
}

/// Multiply by x, reducing modulo the Rijndael polynomial.
#[inline]
pub const fn xtime(a: u8) -> u8 {
    (a << 1) ^ (((a >> 7) & 1) * REDUCTION)
}

/// Product in GF(2^8).
#[inline]
pub const fn gf_mul(a: u8, b: u8) -> u8 {
    let mut acc = 0u8;
    let mut a = a;
    let mut b = b;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a = xtime(a);
        b >>= 1;
    }
    acc
}

/// Multiplicative inverse, with 0 mapped to 0 as in SubBytes.
pub fn gf_inv(a: u8) -> u8 {
    if a == 0 {
        return 0;
    }
    // a^254 = a^-1
    let mut result = 1u8;
    let mut base = a;
    let mut exp = 254u8;
    while exp != 0 {
        if exp & 1 != 0 {
            result = gf_mul(result, base);
        }
        base = gf_mul(base, base);
        exp >>= 1;
    }
    result
}

#[rustfmt::skip]
pub const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

const INV_SBOX: [u8; 256] = {
    let mut inv = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        inv[SBOX[i] as usize] = i as u8;
        i += 1;
    }
    inv
};

/// AES SubBytes.
#[inline]
pub fn sbox(x: u8) -> u8 {
    SBOX[x as usize]
}

#[inline]
pub fn inv_sbox(x: u8) -> u8 {
    INV_SBOX[x as usize]
}

/// S-box value from its definition: field inversion followed by the affine map.
pub fn sbox_affine(x: u8) -> u8 {
    let b = gf_inv(x);
    b ^ b.rotate_left(1) ^ b.rotate_left(2) ^ b.rotate_left(3) ^ b.rotate_left(4) ^ 0x63
}

/// Checks the constant table against the affine construction. Runs once.
pub fn sbox_is_valid() -> bool {
    static CHECK: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *CHECK.get_or_init(|| (0..=255u8).all(|x| SBOX[x as usize] == sbox_affine(x)))
}

/// A MixColumns coefficient: 1, 2 or 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coefficient {
    One = 1,
    Two = 2,
    Three = 3,
}

impl Coefficient {
    pub const ALL: [Coefficient; 3] = [Coefficient::One, Coefficient::Two, Coefficient::Three];

    pub fn new(value: u8) -> Result<Self, Error> {
        match value {
            1 => Ok(Coefficient::One),
            2 => Ok(Coefficient::Two),
            3 => Ok(Coefficient::Three),
            other => Err(Error::InvalidCoefficient(other)),
        }
    }

    #[inline]
    pub fn value(self) -> u8 {
        self as u8
    }

    /// Zero-based position in [`Coefficient::ALL`].
    #[inline]
    pub fn index(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// SubBytes output of `x ^ key_byte` multiplied by `ell`.
#[inline]
pub fn s_ell(x: u8, ell: Coefficient, key_byte: u8) -> u8 {
    gf_mul(ell.value(), sbox(x ^ key_byte))
}

/// MixColumns matrix; `MIX[row][col]`.
pub const MIX: [[u8; 4]; 4] = [[2, 3, 1, 1], [1, 2, 3, 1], [1, 1, 2, 3], [3, 1, 1, 2]];

/// Coefficient multiplying input row `i` into output byte `k` of a column.
#[inline]
pub fn mix_coefficient(i: usize, k: usize) -> Coefficient {
    match MIX[k][i] {
        1 => Coefficient::One,
        2 => Coefficient::Two,
        _ => Coefficient::Three,
    }
}

/// Extract bit `i` (0 = MSB) of a byte.
#[inline]
pub fn bit(x: u8, i: usize) -> u8 {
    (x >> (7 - i)) & 1
}

/// State byte index for (row, column) in the column-major AES layout.
#[inline]
pub const fn state_index(row: usize, col: usize) -> usize {
    4 * col + row
}

/// Index of the byte that ShiftRows moves into `(row, col)`.
#[inline]
pub const fn shifted_source(row: usize, col: usize) -> usize {
    state_index(row, (col + row) % 4)
}

pub fn shift_rows(state: &[u8; 16]) -> [u8; 16] {
    let mut out = [0u8; 16];
    for row in 0..4 {
        for col in 0..4 {
            out[state_index(row, col)] = state[shifted_source(row, col)];
        }
    }
    out
}

fn inv_shift_rows(state: &[u8; 16]) -> [u8; 16] {
    let mut out = [0u8; 16];
    for row in 0..4 {
        for col in 0..4 {
            out[shifted_source(row, col)] = state[state_index(row, col)];
        }
    }
    out
}

fn mix_columns(state: &mut [u8; 16]) {
    for col in 0..4 {
        let c: [u8; 4] = std::array::from_fn(|r| state[state_index(r, col)]);
        for (k, coeffs) in MIX.iter().enumerate() {
            state[state_index(k, col)] = coeffs
                .iter()
                .zip(c.iter())
                .fold(0, |acc, (&m, &x)| acc ^ gf_mul(m, x));
        }
    }
}

fn inv_mix_columns(state: &mut [u8; 16]) {
    const INV: [[u8; 4]; 4] = [
        [14, 11, 13, 9],
        [9, 14, 11, 13],
        [13, 9, 14, 11],
        [11, 13, 9, 14],
    ];
    for col in 0..4 {
        let c: [u8; 4] = std::array::from_fn(|r| state[state_index(r, col)]);
        for (k, coeffs) in INV.iter().enumerate() {
            state[state_index(k, col)] = coeffs
                .iter()
                .zip(c.iter())
                .fold(0, |acc, (&m, &x)| acc ^ gf_mul(m, x));
        }
    }
}

fn add_round_key(state: &mut [u8; 16], key: &[u8; 16]) {
    state.iter_mut().zip(key).for_each(|(s, k)| *s ^= k);
}

fn sub_bytes(state: &mut [u8; 16]) {
    state.iter_mut().for_each(|s| *s = sbox(*s));
}

/// AES-128 round keys. `k[r]` is stored in the column-major state layout;
/// `khat[r]` is ShiftRows applied to `k[r]` for `r` in `0..10`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundKeys {
    pub k: [[u8; 16]; 11],
    pub khat: [[u8; 16]; 10],
}

impl RoundKeys {
    pub fn expand(key: &[u8; 16]) -> Self {
        let mut words = [[0u8; 4]; 44];
        for (i, w) in words.iter_mut().take(4).enumerate() {
            w.copy_from_slice(&key[4 * i..4 * i + 4]);
        }
        let mut rcon = 1u8;
        for i in 4..44 {
            let mut t = words[i - 1];
            if i % 4 == 0 {
                t.rotate_left(1);
                t.iter_mut().for_each(|b| *b = sbox(*b));
                t[0] ^= rcon;
                rcon = xtime(rcon);
            }
            for b in 0..4 {
                words[i][b] = words[i - 4][b] ^ t[b];
            }
        }
        let k: [[u8; 16]; 11] = std::array::from_fn(|r| {
            let mut rk = [0u8; 16];
            for c in 0..4 {
                rk[4 * c..4 * c + 4].copy_from_slice(&words[4 * r + c]);
            }
            rk
        });
        let khat = std::array::from_fn(|r| shift_rows(&k[r]));
        RoundKeys { k, khat }
    }
}

/// Textbook AES-128 encryption.
pub fn reference_encrypt(pt: &[u8; 16], key: &[u8; 16]) -> [u8; 16] {
    let keys = RoundKeys::expand(key);
    let mut state = *pt;
    add_round_key(&mut state, &keys.k[0]);
    for r in 1..10 {
        sub_bytes(&mut state);
        state = shift_rows(&state);
        mix_columns(&mut state);
        add_round_key(&mut state, &keys.k[r]);
    }
    sub_bytes(&mut state);
    state = shift_rows(&state);
    add_round_key(&mut state, &keys.k[10]);
    state
}

/// Textbook AES-128 decryption, used only to check round trips.
pub fn reference_decrypt(ct: &[u8; 16], key: &[u8; 16]) -> [u8; 16] {
    let keys = RoundKeys::expand(key);
    let mut state = *ct;
    add_round_key(&mut state, &keys.k[10]);
    state = inv_shift_rows(&state);
    state.iter_mut().for_each(|s| *s = inv_sbox(*s));
    for r in (1..10).rev() {
        add_round_key(&mut state, &keys.k[r]);
        inv_mix_columns(&mut state);
        state = inv_shift_rows(&state);
        state.iter_mut().for_each(|s| *s = inv_sbox(*s));
    }
    add_round_key(&mut state, &keys.k[0]);
    state
}

/// AES-128 with the initial key addition folded into the first round and
/// ShiftRows moved ahead of AddRoundKey, keyed by the shifted round keys.
pub fn rearranged_encrypt(pt: &[u8; 16], keys: &RoundKeys) -> [u8; 16] {
    let mut state = *pt;
    for r in 1..10 {
        state = shift_rows(&state);
        add_round_key(&mut state, &keys.khat[r - 1]);
        sub_bytes(&mut state);
        mix_columns(&mut state);
    }
    state = shift_rows(&state);
    add_round_key(&mut state, &keys.khat[9]);
    sub_bytes(&mut state);
    add_round_key(&mut state, &keys.k[10]);
    state
}

/// A 256-bit row vector, bit `j` holding column `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Row256(pub [u64; 4]);

impl Row256 {
    #[inline]
    pub fn get(&self, j: usize) -> bool {
        (self.0[j >> 6] >> (j & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize) {
        self.0[j >> 6] |= 1 << (j & 63);
    }

    #[inline]
    pub fn weight(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    #[inline]
    pub fn xor(&self, other: &Row256) -> Row256 {
        Row256(std::array::from_fn(|w| self.0[w] ^ other.0[w]))
    }

    /// Walsh coefficient of the pair: 256 - 2 HW(self ^ other).
    #[inline]
    pub fn walsh_against(&self, other: &Row256) -> i32 {
        256 - 2 * self.xor(other).weight() as i32
    }
}

/// The 8x256 bit matrix whose column `j` is `ell * S(j ^ key_byte)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SMatrix {
    pub ell: Coefficient,
    pub key_byte: u8,
    rows: [Row256; 8],
}

impl SMatrix {
    pub fn build(ell: Coefficient, key_byte: u8) -> Self {
        let mut rows = [Row256::default(); 8];
        for j in 0..256 {
            let v = s_ell(j as u8, ell, key_byte);
            for (i, row) in rows.iter_mut().enumerate() {
                if bit(v, i) == 1 {
                    row.set(j);
                }
            }
        }
        SMatrix {
            ell,
            key_byte,
            rows,
        }
    }

    /// Row `i` (0 = MSB).
    #[inline]
    pub fn row(&self, i: usize) -> &Row256 {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Row256; 8] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> u8 {
        (0..8).fold(0u8, |acc, i| acc | ((self.rows[i].get(j) as u8) << (7 - i)))
    }

    /// XOR of the rows selected by `mask`, whose MSB selects row 0.
    pub fn xor_rows(&self, mask: u8) -> Row256 {
        (0..8)
            .filter(|&i| bit(mask, i) == 1)
            .fold(Row256::default(), |acc, i| acc.xor(&self.rows[i]))
    }
}

/// Convenience wrapper returning the matrix for a raw coefficient value.
pub fn build_s_matrix(ell: u8, key_byte: u8) -> Result<SMatrix, Error> {
    Ok(SMatrix::build(Coefficient::new(ell)?, key_byte))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Carry-less multiply then reduce bit by bit; independent of `xtime`.
    fn peasant_mul(a: u8, b: u8) -> u8 {
        let mut product: u16 = 0;
        for i in 0..8 {
            if (b >> i) & 1 == 1 {
                product ^= (a as u16) << i;
            }
        }
        for i in (8..16).rev() {
            if (product >> i) & 1 == 1 {
                product ^= 0x11B << (i - 8);
            }
        }
        product as u8
    }

    #[test]
    fn gf_mul_known_product() {
        assert_eq!(peasant_mul(0x57, 0x83), 0xC1);
        assert_eq!(gf_mul(0x57, 0x83), 0xC1);
        assert_eq!(Gf256(0x57) * Gf256(0x83), Gf256(0xC1));
    }

    #[test]
    fn gf_mul_matches_oracle_exhaustively() {
        for a in 0..=255u8 {
            assert_eq!(gf_mul(a, 1), a);
            assert_eq!(gf_mul(a, 0), 0);
            for b in 0..=255u8 {
                assert_eq!(gf_mul(a, b), peasant_mul(a, b));
            }
        }
    }

    #[test]
    fn nonzero_constant_multiplication_is_bijective() {
        for c in 1..=255u8 {
            let mut seen = [false; 256];
            for a in 0..=255u8 {
                seen[gf_mul(a, c) as usize] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn sbox_table_matches_affine_construction() {
        assert!(sbox_is_valid());
        assert_eq!(sbox(0x00), 0x63);
        assert_eq!(sbox(0x53), 0xED);
        assert_eq!(sbox_affine(0x53), 0xED);
        let mut values: Vec<u8> = (0..=255u8).map(sbox).collect();
        values.sort_unstable();
        assert!(values.iter().enumerate().all(|(i, &v)| v as usize == i));
    }

    #[test]
    fn fips197_known_answer() {
        let key: [u8; 16] = std::array::from_fn(|i| i as u8);
        let pt: [u8; 16] = std::array::from_fn(|i| (i as u8) * 0x11);
        let expect = [
            0x69, 0xc4, 0xe0, 0xd8, 0x6a, 0x7b, 0x04, 0x30, 0xd8, 0xcd, 0xb7, 0x80, 0x70, 0xb4,
            0xc5, 0x5a,
        ];
        assert_eq!(reference_encrypt(&pt, &key), expect);
        assert_eq!(rearranged_encrypt(&pt, &RoundKeys::expand(&key)), expect);
        assert_eq!(reference_decrypt(&expect, &key), pt);
    }

    #[test]
    fn fips197_key_expansion_last_round_key() {
        // FIPS-197 appendix A.1 final round key.
        let key = [
            0x2b, 0x7e, 0x15, 0x16, 0x28, 0xae, 0xd2, 0xa6, 0xab, 0xf7, 0x15, 0x88, 0x09, 0xcf,
            0x4f, 0x3c,
        ];
        let keys = RoundKeys::expand(&key);
        assert_eq!(
            keys.k[10],
            [
                0xd0, 0x14, 0xf9, 0xa8, 0xc9, 0xee, 0x25, 0x89, 0xe1, 0x3f, 0x0c, 0xc8, 0xb6, 0x63,
                0x0c, 0xa6
            ]
        );
        for r in 0..10 {
            assert_eq!(keys.khat[r], shift_rows(&keys.k[r]));
        }
    }

    #[test]
    fn rearranged_matches_reference_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let key: [u8; 16] = rng.gen();
            let pt: [u8; 16] = rng.gen();
            assert_eq!(
                rearranged_encrypt(&pt, &RoundKeys::expand(&key)),
                reference_encrypt(&pt, &key)
            );
        }
        let zero = [0u8; 16];
        assert_eq!(
            rearranged_encrypt(&zero, &RoundKeys::expand(&zero)),
            reference_encrypt(&zero, &zero)
        );
    }

    #[test]
    fn distinct_plaintexts_give_distinct_ciphertexts() {
        let key = [0x42u8; 16];
        let a = reference_encrypt(&[0u8; 16], &key);
        let mut pt = [0u8; 16];
        pt[15] = 1;
        assert_ne!(a, reference_encrypt(&pt, &key));
    }

    #[test]
    fn s_ell_values() {
        for x in 0..=255u8 {
            assert_eq!(s_ell(x, Coefficient::One, 0), sbox(x));
        }
        assert_eq!(s_ell(0, Coefficient::Two, 0), 0xC6);
        assert!(matches!(
            Coefficient::new(4),
            Err(Error::InvalidCoefficient(4))
        ));
        assert!(Coefficient::new(0).is_err());
        assert!(build_s_matrix(5, 0).is_err());
    }

    #[test]
    fn s_matrix_columns_enumerate_all_bytes() {
        for ell in Coefficient::ALL {
            for key in [0u8, 0x3c, 0xff] {
                let s = SMatrix::build(ell, key);
                let mut seen = [false; 256];
                for j in 0..256 {
                    assert_eq!(s.column(j), s_ell(j as u8, ell, key));
                    seen[s.column(j) as usize] = true;
                }
                assert!(seen.iter().all(|&b| b));
                assert!(s.rows().iter().all(|r| r.weight() == 128));
            }
        }
        let s = SMatrix::build(Coefficient::One, 0);
        assert_eq!(s.column(0), 0x63);
        assert!([0, 128].contains(&s.xor_rows(0b1100_0000).weight()));
    }

    proptest! {
        #[test]
        fn row_xor_weight_is_zero_or_half(ell in 1u8..=3, key in any::<u8>(), mask in 1u8..=255) {
            let s = build_s_matrix(ell, key).unwrap();
            let w = s.xor_rows(mask).weight();
            prop_assert!(w == 0 || w == 128);
        }

        #[test]
        fn key_byte_permutes_columns(ell in 1u8..=3, key in any::<u8>()) {
            let base = build_s_matrix(ell, 0).unwrap();
            let keyed = build_s_matrix(ell, key).unwrap();
            for j in 0..256 {
                prop_assert_eq!(keyed.column(j), base.column(j ^ key as usize));
            }
        }
    }
}
