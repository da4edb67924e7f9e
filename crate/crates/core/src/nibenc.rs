//! Zero-swap nibble codecs.
//!
//! A codec exchanges 0 with one partner value `e` and fixes every other
//! nibble. The partner is chosen so that the swap keeps the first-order
//! Walsh sums of the linear layer at zero.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::binmat::{linear_encode, EncodingPair};
use crate::gf::{bit, s_ell, Coefficient};

/// Involution on nibbles swapping 0 and `e`. `e = 0` is the identity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NibbleCodec {
    e: u8,
}

impl NibbleCodec {
    pub const IDENTITY: NibbleCodec = NibbleCodec { e: 0 };

    pub fn new(e: u8) -> Self {
        NibbleCodec { e: e & 0xF }
    }

    pub fn partner(&self) -> u8 {
        self.e
    }

    pub fn is_identity(&self) -> bool {
        self.e == 0
    }

    #[inline]
    pub fn encode(&self, x: u8) -> u8 {
        if x == 0 {
            self.e
        } else if x == self.e {
            0
        } else {
            x
        }
    }

    #[inline]
    pub fn decode(&self, x: u8) -> u8 {
        self.encode(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Half {
    Upper,
    Lower,
}

impl Half {
    pub const BOTH: [Half; 2] = [Half::Upper, Half::Lower];

    #[inline]
    pub fn of(self, x: u8) -> u8 {
        match self {
            Half::Upper => x >> 4,
            Half::Lower => x & 0xF,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Half::Upper => 0,
            Half::Lower => 1,
        }
    }
}

/// Codecs for the two halves of a byte.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodecPair {
    pub upper: NibbleCodec,
    pub lower: NibbleCodec,
}

impl CodecPair {
    pub const IDENTITY: CodecPair = CodecPair {
        upper: NibbleCodec::IDENTITY,
        lower: NibbleCodec::IDENTITY,
    };

    pub fn new(upper: u8, lower: u8) -> Self {
        CodecPair {
            upper: NibbleCodec::new(upper),
            lower: NibbleCodec::new(lower),
        }
    }

    #[inline]
    pub fn half(&self, half: Half) -> NibbleCodec {
        match half {
            Half::Upper => self.upper,
            Half::Lower => self.lower,
        }
    }

    #[inline]
    pub fn encode_byte(&self, x: u8) -> u8 {
        (self.upper.encode(x >> 4) << 4) | self.lower.encode(x & 0xF)
    }

    #[inline]
    pub fn decode_byte(&self, x: u8) -> u8 {
        self.encode_byte(x)
    }

    /// Packed form: upper partner in the high nibble.
    pub fn to_byte(&self) -> u8 {
        (self.upper.e << 4) | self.lower.e
    }

    pub fn from_byte(b: u8) -> Self {
        CodecPair::new(b >> 4, b & 0xF)
    }
}

/// Set of admissible partners as a 16-bit mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CandidateSet(pub u16);

impl CandidateSet {
    #[inline]
    pub fn contains(&self, e: u8) -> bool {
        (self.0 >> e) & 1 == 1
    }

    /// Number of candidates, the trivial partner 0 included.
    pub fn count(&self) -> u32 {
        self.0.count_ones()
    }

    /// Candidates other than the identity.
    pub fn nonzero(&self) -> Vec<u8> {
        (1..16u8).filter(|&e| self.contains(e)).collect()
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..16u8).filter(|&e| self.contains(e)).collect()
    }
}

/// Byte `i` of `SPREAD[v]` (from the top) holds bit `i` of `v`.
const SPREAD: [u64; 256] = {
    let mut t = [0u64; 256];
    let mut v = 0;
    while v < 256 {
        let mut i = 0;
        while i < 8 {
            t[v] |= (((v >> (7 - i)) & 1) as u64) << (8 * (7 - i));
            i += 1;
        }
        v += 1;
    }
    t
};

/// Core search: `encoded[j]` is the linear layer output for column `j`,
/// `hypotheses[l'][j]` the value whose bits are checked. A partner `e`
/// qualifies when, for every row of every hypothesis, the number of ones
/// over the columns whose selected half is 0 equals the number over the
/// columns whose selected half is `e`.
fn search(encoded: &[u8; 256], hypotheses: &[[u8; 256]], half: Half) -> CandidateSet {
    // Swapping 0 with itself changes nothing, so bit 0 always stays set.
    let mut mask = 0xFFFFu16;
    for hyp in hypotheses {
        // Per-row counts packed one byte per row. A balanced layer puts 16
        // columns in each nibble class, so the lanes cannot overflow.
        let mut ones = [0u64; 16];
        for j in 0..256 {
            ones[half.of(encoded[j]) as usize] += SPREAD[hyp[j] as usize];
        }
        for e in 1..16 {
            if ones[e] != ones[0] {
                mask &= !(1 << e);
            }
        }
    }
    CandidateSet(mask)
}

/// `ℓ S(x)` for the three coefficients, key byte 0.
fn base_hypotheses() -> &'static [[u8; 256]; 3] {
    static CELL: OnceLock<[[u8; 256]; 3]> = OnceLock::new();
    CELL.get_or_init(|| Coefficient::ALL.map(|ell| std::array::from_fn(|j| s_ell(j as u8, ell, 0))))
}

fn hypotheses(key_byte: u8) -> [[u8; 256]; 3] {
    base_hypotheses().map(|h| std::array::from_fn(|j| h[j ^ key_byte as usize]))
}

/// Partners for the `half` codec on outputs of `L(ℓ S(x ^ key))`, checked
/// against every bit of `ℓ' S(x ^ key)` for ℓ' in {1, 2, 3}.
pub fn find_candidates(
    pair: &EncodingPair,
    key_byte: u8,
    ell: Coefficient,
    half: Half,
) -> CandidateSet {
    let hyps = hypotheses(key_byte);
    let encoded = hyps[ell.index()].map(|v| linear_encode(v, pair));
    search(&encoded, &hyps, half)
}

/// Partners for a codec placed after an XOR-table stage. The stage carries
/// `L(v)` for a partial sum `v`, and the relevant hypothesis is `v` itself.
pub fn find_xor_candidates(pair: &EncodingPair, half: Half) -> CandidateSet {
    let identity: [u8; 256] = std::array::from_fn(|j| j as u8);
    let encoded = identity.map(|v| linear_encode(v, pair));
    search(&encoded, &[identity], half)
}

/// Recomputes the 8x8x3 Walsh grid of `cp(L(ℓ S))` against every `S^ℓ'`
/// and reports whether every entry is still zero.
pub fn verify_swap_balance(
    pair: &EncodingPair,
    key_byte: u8,
    ell: Coefficient,
    cp: &CodecPair,
) -> bool {
    let hyps = hypotheses(key_byte);
    let enc = hyps[ell.index()].map(|v| cp.encode_byte(linear_encode(v, pair)));
    for hyp in &hyps {
        for i in 0..8 {
            for ip in 0..8 {
                let w: i32 = (0..256)
                    .map(|j| {
                        if bit(enc[j], i) == bit(hyp[j], ip) {
                            1
                        } else {
                            -1
                        }
                    })
                    .sum();
                if w != 0 {
                    return false;
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binmat::sample_pair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn codec_is_an_involution_moving_two_points() {
        for e in 0..16u8 {
            let c = NibbleCodec::new(e);
            let moved = (0..16u8).filter(|&x| c.encode(x) != x).count();
            assert!(moved == 0 || moved == 2);
            for x in 0..16u8 {
                assert_eq!(c.decode(c.encode(x)), x);
            }
            assert_eq!(c.encode(0), e);
        }
    }

    #[test]
    fn byte_codec_examples() {
        let cp = CodecPair::new(5, 3);
        assert_eq!(cp.encode_byte(0x00), 0x53);
        assert_eq!(cp.encode_byte(0x53), 0x00);
        assert_eq!(cp.encode_byte(0x7A), 0x7A);
        assert_eq!(CodecPair::from_byte(cp.to_byte()), cp);
    }

    #[test]
    fn candidate_classes_hold_sixteen_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pair = sample_pair(&mut rng).unwrap();
        for ell in Coefficient::ALL {
            for half in Half::BOTH {
                let mut counts = [0u32; 16];
                for x in 0..=255u8 {
                    counts[half.of(linear_encode(s_ell(x, ell, 0x91), &pair)) as usize] += 1;
                }
                assert!(counts.iter().all(|&c| c == 16));
            }
        }
    }

    #[test]
    fn candidates_are_key_independent_and_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let pair = sample_pair(&mut rng).unwrap();
            for ell in Coefficient::ALL {
                for half in Half::BOTH {
                    let a = find_candidates(&pair, 0, ell, half);
                    let b = find_candidates(&pair, 0xC3, ell, half);
                    assert_eq!(a, b);
                    assert!(a.contains(0));
                    assert!(a.count().is_power_of_two());
                    // The UT-output condition covers the XOR-stage one.
                    let x = find_xor_candidates(&pair, half);
                    assert_eq!(a.0 & !x.0, 0);
                }
                let up = find_candidates(&pair, 0, ell, Half::Upper);
                let lo = find_candidates(&pair, 0, ell, Half::Lower);
                for &eh in &up.to_vec() {
                    for &el in &lo.to_vec() {
                        assert!(verify_swap_balance(
                            &pair,
                            0x17,
                            ell,
                            &CodecPair::new(eh, el)
                        ));
                    }
                }
            }
        }
    }

    #[test]
    fn non_candidate_breaks_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        for _ in 0..50 {
            let pair = sample_pair(&mut rng).unwrap();
            let up = find_candidates(&pair, 0, Coefficient::Two, Half::Upper);
            if let Some(bad) = (1..16u8).find(|&e| !up.contains(e)) {
                assert!(!verify_swap_balance(
                    &pair,
                    0,
                    Coefficient::Two,
                    &CodecPair::new(bad, 0)
                ));
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn identity_codec_preserves_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let pair = sample_pair(&mut rng).unwrap();
        for ell in Coefficient::ALL {
            assert!(verify_swap_balance(&pair, 0x55, ell, &CodecPair::IDENTITY));
        }
    }

    #[test]
    fn zero_is_hidden_when_both_partners_are_nonzero() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pair = sample_pair(&mut rng).unwrap();
        let cp = CodecPair::new(9, 4);
        assert_ne!(cp.encode_byte(linear_encode(0, &pair)), 0);
    }
}
