//! Static two-level perfect hashing over integer keys.
//!
//! The top level spreads `n` keys over `2^⌈log₂ n⌉` buckets with a random
//! multiply-shift function, retrying until the squared bucket sizes sum to at
//! most `4n`. A bucket holding `b` keys then gets `2^⌈log₂ b²⌉` slots and its
//! own function, retried until it is injective. Lookups read one bucket
//! descriptor and one slot.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wordops::ceil_log2;

const MAX_ATTEMPTS: u32 = 10_000;

/// Bits of one bucket descriptor: 128-bit multiplier, 32-bit offset, 8-bit width.
pub const DESCRIPTOR_BITS: u64 = 128 + 32 + 8;

#[inline]
fn mul_shift(key: u128, mult: u128, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        (mult.wrapping_mul(key) >> (128 - bits)) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Bucket {
    mult: u128,
    offset: u32,
    bits: u8,
    len: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfectHash<V> {
    key_bits: u32,
    value_bits: u32,
    top_mult: u128,
    top_bits: u32,
    buckets: Vec<Bucket>,
    slots: Vec<Option<(u128, V)>>,
}

impl<V> PerfectHash<V> {
    /// Builds a table over distinct keys. `key_bits` and `value_bits` are the
    /// logical widths charged per slot in the space audit.
    pub fn build<R: Rng + ?Sized>(
        entries: Vec<(u128, V)>,
        key_bits: u32,
        value_bits: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Ok(PerfectHash {
                key_bits,
                value_bits,
                top_mult: 1,
                top_bits: 0,
                buckets: Vec::new(),
                slots: Vec::new(),
            });
        }
        let top_bits = ceil_log2(n as u64);
        let nb = 1usize << top_bits;

        let mut attempts = 0;
        let (top_mult, groups) = loop {
            attempts += 1;
            if attempts > MAX_ATTEMPTS {
                return Err(Error::Build(
                    "perfect hash: no acceptable top-level function (duplicate keys?)".into(),
                ));
            }
            let mult = rng.gen::<u128>() | 1;
            let mut sizes = vec![0usize; nb];
            for (k, _) in &entries {
                sizes[mul_shift(*k, mult, top_bits)] += 1;
            }
            let sq: usize = sizes.iter().map(|s| s * s).sum();
            if sq <= 4 * n {
                let mut groups: Vec<Vec<usize>> = sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
                for (i, (k, _)) in entries.iter().enumerate() {
                    groups[mul_shift(*k, mult, top_bits)].push(i);
                }
                break (mult, groups);
            }
        };

        let mut buckets = Vec::with_capacity(nb);
        let mut placement = vec![0usize; n];
        let mut offset = 0usize;
        for group in &groups {
            if group.is_empty() {
                buckets.push(Bucket {
                    mult: 1,
                    offset: offset as u32,
                    bits: 0,
                    len: 0,
                });
                continue;
            }
            let b = group.len() as u64;
            let bits = ceil_log2(b * b);
            let size = 1usize << bits;
            let mut tries = 0;
            let mult = loop {
                tries += 1;
                if tries > MAX_ATTEMPTS {
                    return Err(Error::Build("perfect hash: bucket has colliding keys".into()));
                }
                let mult = rng.gen::<u128>() | 1;
                let mut used = vec![false; size];
                let ok = group.iter().all(|&i| {
                    let s = mul_shift(entries[i].0, mult, bits);
                    !std::mem::replace(&mut used[s], true)
                });
                if ok {
                    break mult;
                }
            };
            for &i in group {
                placement[i] = offset + mul_shift(entries[i].0, mult, bits);
            }
            buckets.push(Bucket {
                mult,
                offset: offset as u32,
                bits: bits as u8,
                len: size as u32,
            });
            offset += size;
        }

        let mut slots: Vec<Option<(u128, V)>> = (0..offset).map(|_| None).collect();
        for (i, entry) in entries.into_iter().enumerate() {
            slots[placement[i]] = Some(entry);
        }
        Ok(PerfectHash {
            key_bits,
            value_bits,
            top_mult,
            top_bits,
            buckets,
            slots,
        })
    }

    pub fn get(&self, key: u128) -> Option<&V> {
        if self.buckets.is_empty() {
            return None;
        }
        let b = &self.buckets[mul_shift(key, self.top_mult, self.top_bits)];
        if b.len == 0 {
            return None;
        }
        match &self.slots[b.offset as usize + mul_shift(key, b.mult, b.bits as u32)] {
            Some((k, v)) if *k == key => Some(v),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn values(&self) -> impl Iterator<Item = &V> {
        self.slots.iter().flatten().map(|(_, v)| v)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut V> {
        self.slots.iter_mut().flatten().map(|(_, v)| v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (u128, &V)> {
        self.slots.iter().flatten().map(|(k, v)| (*k, v))
    }

    /// Bits of one slot: occupancy flag, key and value.
    pub fn slot_bits(&self) -> u64 {
        1 + self.key_bits as u64 + self.value_bits as u64
    }

    pub fn bits_used(&self) -> u64 {
        if self.buckets.is_empty() {
            return 0;
        }
        128 + self.buckets.len() as u64 * DESCRIPTOR_BITS + self.slots.len() as u64 * self.slot_bits()
    }

    /// Cells read by one lookup: the descriptor plus the slot.
    pub fn lookup_cells(&self, word_bits: u32) -> u32 {
        crate::structure::cells(DESCRIPTOR_BITS, word_bits) + crate::structure::cells(self.slot_bits(), word_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn finds_every_key_and_rejects_others() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [0usize, 1, 2, 3, 17, 1000] {
            let keys: Vec<u128> = (0..n as u128).map(|i| i * 7919 + (i << 70)).collect();
            let t = PerfectHash::build(keys.iter().map(|&k| (k, k as u64)).collect(), 80, 64, &mut rng).unwrap();
            assert_eq!(t.len(), n);
            for &k in &keys {
                assert_eq!(t.get(k), Some(&(k as u64)));
            }
            for k in 0..200u128 {
                if !keys.contains(&(k * 13 + 1)) {
                    assert_eq!(t.get(k * 13 + 1), None);
                }
            }
            assert!(t.slot_count() <= 8 * n.max(1));
        }
    }

    #[test]
    fn duplicate_keys_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(PerfectHash::build(vec![(5u128, ()), (5u128, ())], 8, 0, &mut rng).is_err());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let entries: Vec<(u128, u32)> = (0..300).map(|i| (i as u128 * 31, i)).collect();
        let a = PerfectHash::build(entries.clone(), 16, 32, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = PerfectHash::build(entries, 16, 32, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
