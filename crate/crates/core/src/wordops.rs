//! Word-level primitives on keys of at most 64 bits: prefix/suffix
//! splitting, whole-character common prefixes, single-word multi-key rank
//! and per-character hashing.
//!
//! Words are simulated with `u128`, so packed nodes may span up to 128 bits
//! even though keys never exceed 64.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Largest simulated word length.
pub const MAX_WORD_BITS: u32 = 128;
/// Largest supported key length.
pub const MAX_KEY_BITS: u32 = 64;

#[inline]
pub fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[inline]
pub(crate) fn shr(x: u64, s: u32) -> u64 {
    x.checked_shr(s).unwrap_or(0)
}

#[inline]
pub(crate) fn shl(x: u64, s: u32) -> u64 {
    x.checked_shl(s).unwrap_or(0)
}

/// `high · low` where `low` occupies `low_bits` bits.
#[inline]
pub fn concat(high: u64, low: u64, low_bits: u32) -> u64 {
    shl(high, low_bits) | (low & mask(low_bits))
}

/// Smallest power of two `>= x` (with `x = 0` mapping to 1).
pub fn ceil_pow2(x: u64) -> u64 {
    x.max(1).next_power_of_two()
}

/// Largest power of two `<= x`; `x` must be positive.
pub fn floor_pow2(x: u64) -> u64 {
    debug_assert!(x > 0);
    1u64 << (63 - x.leading_zeros())
}

/// `⌈log₂ x⌉` for `x >= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x > 0);
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Index of the most significant set bit; `x` must be nonzero.
#[inline]
pub fn msb(x: u64) -> u32 {
    debug_assert!(x != 0);
    63 - x.leading_zeros()
}

/// Word and key geometry for one level of a structure.
///
/// `char_bits · char_count == key_bits`; the character view is only
/// meaningful inside the length/cardinality reduction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpec {
    pub word_bits: u32,
    pub key_bits: u32,
    pub char_bits: u32,
    pub char_count: u32,
}

impl WordSpec {
    pub fn new(word_bits: u32, key_bits: u32, char_count: u32) -> Result<Self> {
        if !word_bits.is_power_of_two() || word_bits > MAX_WORD_BITS {
            return param(format!(
                "word length {word_bits} must be a power of two <= {MAX_WORD_BITS}"
            ));
        }
        if !key_bits.is_power_of_two() || key_bits > MAX_KEY_BITS || key_bits > word_bits {
            return param(format!(
                "key length {key_bits} must be a power of two <= min({MAX_KEY_BITS}, word length {word_bits})"
            ));
        }
        if char_count == 0 || !key_bits.is_multiple_of(char_count) {
            return param(format!("{char_count} characters do not divide key length {key_bits}"));
        }
        Ok(WordSpec {
            word_bits,
            key_bits,
            char_bits: key_bits / char_count,
            char_count,
        })
    }

    /// Character view of `key_bits`-bit keys, ignoring the word length.
    pub fn chars(key_bits: u32, char_count: u32) -> Result<Self> {
        Self::new(MAX_WORD_BITS, key_bits, char_count)
    }

    /// Character `i` (0 = most significant).
    #[inline]
    pub fn char_at(&self, x: u64, i: u32) -> u64 {
        shr(x, self.key_bits - (i + 1) * self.char_bits) & mask(self.char_bits)
    }

    /// The first `r` characters of `x` as an `r·c`-bit integer.
    #[inline]
    pub fn prefix(&self, x: u64, r: u32) -> u64 {
        shr(x, self.key_bits - r * self.char_bits)
    }
}

/// Splits an `key_bits`-bit key into its top `p` bits and the remaining suffix.
pub fn split_prefix(x: u64, key_bits: u32, p: u32) -> Result<(u64, u64)> {
    if p > key_bits {
        return param(format!("prefix length {p} exceeds key length {key_bits}"));
    }
    if key_bits > MAX_KEY_BITS {
        return param(format!("key length {key_bits} exceeds {MAX_KEY_BITS}"));
    }
    Ok(split_unchecked(x, key_bits, p))
}

#[inline]
pub(crate) fn split_unchecked(x: u64, key_bits: u32, p: u32) -> (u64, u64) {
    let low = key_bits - p;
    (shr(x, low), x & mask(low))
}

/// Number of leading whole characters on which `x` and `y` agree.
pub fn lcp_chars(x: u64, y: u64, spec: &WordSpec) -> u32 {
    let diff = (x ^ y) & mask(spec.key_bits);
    if diff == 0 {
        return spec.char_count;
    }
    let equal_bits = spec.key_bits - 1 - msb(diff);
    equal_bits / spec.char_bits
}

/// Width of one packed field: the key plus a sentinel bit.
#[inline]
pub fn field_bits(key_bits: u32) -> u32 {
    key_bits + 1
}

/// Keys per word for sentinel-bit packing: `⌊w/(ℓ+1)⌋` rounded down to a
/// power of two, or 0 when not even one field fits.
pub fn packing_degree(word_bits: u32, key_bits: u32) -> usize {
    let raw = word_bits / field_bits(key_bits);
    if raw == 0 {
        0
    } else {
        floor_pow2(raw as u64) as usize
    }
}

/// Packs sorted keys into one word, field `i` at bit offset `i·(ℓ+1)`.
pub fn pack_keys(keys: &[u64], key_bits: u32) -> Result<u128> {
    let f = field_bits(key_bits);
    if keys.len() as u64 * f as u64 > MAX_WORD_BITS as u64 {
        return param(format!("{} keys of {key_bits} bits do not fit one word", keys.len()));
    }
    let mut word = 0u128;
    for (i, &k) in keys.iter().enumerate() {
        if k > mask(key_bits) {
            return param(format!("key {k} exceeds {key_bits} bits"));
        }
        word |= (k as u128) << (i as u32 * f);
    }
    Ok(word)
}

fn field_pattern(count: usize, f: u32, value: u128) -> u128 {
    let mut p = 0u128;
    for i in 0..count as u32 {
        p |= value << (i * f);
    }
    p
}

/// Number of packed keys `<= x`, computed with a constant number of word
/// operations.
///
/// Each field gets its sentinel bit set and `x + 1` is subtracted from all
/// fields at once; a field keeps its sentinel exactly when its key exceeds
/// `x`, and no borrow crosses field boundaries.
pub fn packed_rank(node: u128, count: usize, x: u64, key_bits: u32) -> Result<usize> {
    let f = field_bits(key_bits);
    if count as u64 * f as u64 > MAX_WORD_BITS as u64 {
        return param(format!("{count} fields of {f} bits exceed the word"));
    }
    if x > mask(key_bits) {
        return param(format!("query {x} exceeds {key_bits} bits"));
    }
    Ok(packed_rank_unchecked(node, count, x, key_bits))
}

#[inline]
pub(crate) fn packed_rank_unchecked(node: u128, count: usize, x: u64, key_bits: u32) -> usize {
    if count == 0 {
        return 0;
    }
    let f = field_bits(key_bits);
    // The pattern multiplications below are the broadcast; callers on a hot
    // path would cache `ones` per node shape.
    let ones = field_pattern(count, f, 1);
    let sentinels = ones << key_bits;
    let diff = (node | sentinels).wrapping_sub(ones.wrapping_mul(x as u128 + 1));
    let greater = (diff & sentinels).count_ones() as usize;
    count - greater
}

/// Per-position universal hashing of characters into `hash_bits` bits.
///
/// Position `i` uses multiply-shift with its own odd multiplier. When
/// `hash_bits == char_bits` the family is the identity, which is how the
/// signature falls back to tabulating every key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharHashFamily {
    pub spec: WordSpec,
    pub hash_bits: u32,
    /// Empty for the identity family.
    pub multipliers: Vec<u64>,
}

impl CharHashFamily {
    pub fn identity(spec: WordSpec) -> Self {
        CharHashFamily {
            spec,
            hash_bits: spec.char_bits,
            multipliers: Vec::new(),
        }
    }

    pub fn random<R: Rng + ?Sized>(spec: WordSpec, hash_bits: u32, rng: &mut R) -> Result<Self> {
        if hash_bits > spec.char_bits {
            return param(format!(
                "hash width {hash_bits} exceeds character width {}; tabulate instead",
                spec.char_bits
            ));
        }
        if hash_bits == 0 {
            return param("hash width must be positive");
        }
        let multipliers = (0..spec.char_count).map(|_| rng.gen::<u64>() | 1).collect();
        Ok(CharHashFamily {
            spec,
            hash_bits,
            multipliers,
        })
    }

    pub fn with_multipliers(spec: WordSpec, hash_bits: u32, multipliers: Vec<u64>) -> Result<Self> {
        if hash_bits > spec.char_bits || hash_bits == 0 {
            return param(format!(
                "hash width {hash_bits} invalid for {}-bit characters",
                spec.char_bits
            ));
        }
        if multipliers.len() != spec.char_count as usize || multipliers.iter().any(|m| m & 1 == 0) {
            return param("need one odd multiplier per character position");
        }
        Ok(CharHashFamily {
            spec,
            hash_bits,
            multipliers,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.multipliers.is_empty()
    }

    #[inline]
    pub fn hash_char(&self, position: u32, ch: u64) -> u64 {
        if self.is_identity() {
            ch
        } else {
            self.multipliers[position as usize].wrapping_mul(ch) >> (64 - self.hash_bits)
        }
    }

    /// Width of a hashed key.
    pub fn hashed_bits(&self) -> u32 {
        self.hash_bits * self.spec.char_count
    }

    /// Regenerates the multiplier of one position.
    pub(crate) fn reseed_position<R: Rng + ?Sized>(&mut self, position: u32, rng: &mut R) {
        if !self.is_identity() {
            self.multipliers[position as usize] = rng.gen::<u64>() | 1;
        }
    }
}

/// Hashes every character of `x` with its position's function and
/// concatenates the `b`-bit results, first character most significant.
pub fn parallel_char_hash(x: u64, family: &CharHashFamily) -> u64 {
    let spec = &family.spec;
    let b = family.hash_bits;
    let mut out = 0u64;
    for i in 0..spec.char_count {
        out = shl(out, b) | family.hash_char(i, spec.char_at(x, i));
    }
    out
}
