//! Static B-tree whose nodes are single words of packed keys.
//!
//! The bottom level holds the sorted keys in blocks of `d`; each level above
//! holds the first key of every block below it. A node is resolved with one
//! packed rank, and the rank picks the child block implicitly, so nodes store
//! no references. When not even two keys fit in a word the tree degrades to
//! binary search over the sorted array.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::oracle::KeySet;
use crate::pred::Pred;
use crate::structure::{cells, NodeOps, QueryCtx, QueryStats};
use crate::wordops::{field_bits, mask, pack_keys, packed_rank_unchecked, packing_degree, WordSpec, MAX_WORD_BITS};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum Layout {
    /// Levels top to bottom; each level is its nodes' packed words and the
    /// number of keys on that level.
    Packed {
        levels: Vec<(Vec<u128>, usize)>,
    },
    Sorted {
        keys: Vec<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedBTree {
    key_bits: u32,
    word_bits: u32,
    degree: usize,
    len: usize,
    layout: Layout,
}

fn unpack(word: u128, i: usize, key_bits: u32) -> u64 {
    ((word >> (i as u32 * field_bits(key_bits))) as u64) & mask(key_bits)
}

impl PackedBTree {
    /// Builds over sorted distinct keys.
    pub fn from_keys(keys: &[u64], key_bits: u32, word_bits: u32) -> Result<Self> {
        if word_bits == 0 || word_bits > MAX_WORD_BITS {
            return param(format!("word length {word_bits} out of range"));
        }
        let degree = packing_degree(word_bits, key_bits);
        let layout = if degree < 2 {
            Layout::Sorted { keys: keys.to_vec() }
        } else {
            let mut levels = Vec::new();
            let mut cur = keys.to_vec();
            loop {
                let words = cur
                    .chunks(degree)
                    .map(|c| pack_keys(c, key_bits))
                    .collect::<Result<Vec<_>>>()?;
                let len = cur.len();
                levels.push((words, len));
                if len <= degree {
                    break;
                }
                cur = cur.chunks(degree).map(|c| c[0]).collect();
            }
            levels.reverse();
            Layout::Packed { levels }
        };
        Ok(PackedBTree {
            key_bits,
            word_bits,
            degree,
            len: keys.len(),
            layout,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn is_binary_search(&self) -> bool {
        matches!(self.layout, Layout::Sorted { .. })
    }

    /// Number of nodes on a root-to-leaf path (probes of the binary-search
    /// fallback in the worst case).
    pub fn height(&self) -> u32 {
        match &self.layout {
            Layout::Packed { levels } => levels.len() as u32,
            Layout::Sorted { keys } => usize::BITS - keys.len().leading_zeros(),
        }
    }

    /// Worst-case probes allowed for `n` keys at degree `d`:
    /// `⌈log_d n⌉ + 1`, with `d = 2` for the fallback.
    pub fn probe_bound(&self) -> u32 {
        let d = self.degree.max(2) as u64;
        let mut levels = 0;
        let mut reach = 1u64;
        while reach < self.len as u64 {
            reach = reach.saturating_mul(d);
            levels += 1;
        }
        levels + 1
    }

    /// Leaf keys in order.
    pub fn keys(&self) -> Vec<u64> {
        match &self.layout {
            Layout::Sorted { keys } => keys.clone(),
            Layout::Packed { levels } => {
                let (words, len) = levels.last().expect("at least one level");
                (0..*len)
                    .map(|i| unpack(words[i / self.degree], i % self.degree, self.key_bits))
                    .collect()
            }
        }
    }

    /// Predecessor search with instrumentation.
    pub fn search(&self, x: u64, stats: &mut QueryStats) -> Pred {
        if self.len == 0 {
            return Pred::NegInf;
        }
        let node_cells = cells(
            (self.degree * field_bits(self.key_bits) as usize) as u64,
            self.word_bits,
        );
        match &self.layout {
            Layout::Sorted { keys } => {
                let key_cells = cells(self.key_bits as u64, self.word_bits);
                let (mut lo, mut hi) = (0usize, keys.len());
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    stats.read(key_cells);
                    if keys[mid] <= x {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                lo.checked_sub(1).map(|i| keys[i]).into()
            }
            Layout::Packed { levels } => {
                let mut node = 0usize;
                for (depth, (words, len)) in levels.iter().enumerate() {
                    if depth > 0 {
                        stats.depth += 1;
                    }
                    stats.read(node_cells);
                    let count = (len - node * self.degree).min(self.degree);
                    let rank = packed_rank_unchecked(words[node], count, x, self.key_bits);
                    if rank == 0 {
                        // Only possible at the root: below every key.
                        return Pred::NegInf;
                    }
                    if depth + 1 == levels.len() {
                        return Pred::Key(unpack(words[node], rank - 1, self.key_bits));
                    }
                    node = node * self.degree + rank - 1;
                }
                Pred::NegInf
            }
        }
    }
}

impl NodeOps for PackedBTree {
    fn query(&self, _ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        self.search(x, stats)
    }

    fn own_bits(&self, _word_bits: u32) -> u64 {
        match &self.layout {
            Layout::Sorted { keys } => keys.len() as u64 * self.key_bits as u64,
            Layout::Packed { levels } => {
                levels.iter().map(|(w, _)| w.len() as u64).sum::<u64>()
                    * (self.degree as u64 * field_bits(self.key_bits) as u64)
            }
        }
    }
}

/// Largest number of level descents a query makes in a tree over `n` keys.
pub fn depth_bound(n: usize, key_bits: u32, word_bits: u32) -> u32 {
    let d = packing_degree(word_bits, key_bits);
    if d < 2 {
        return 0;
    }
    let mut levels = 0;
    let mut count = n;
    while count > d {
        count = count.div_ceil(d);
        levels += 1;
    }
    levels
}

/// Builds a B-tree of degree `⌊w/(ℓ+1)⌋` (rounded down to a power of two).
pub fn build_btree(set: &KeySet, spec: WordSpec) -> Result<PackedBTree> {
    if set.key_bits() != spec.key_bits {
        return param(format!(
            "key set has {} bits, word spec {}",
            set.key_bits(),
            spec.key_bits
        ));
    }
    PackedBTree::from_keys(set.keys(), set.key_bits(), spec.word_bits)
}

pub fn query_btree(tree: &PackedBTree, x: u64) -> (Pred, QueryStats) {
    let mut stats = QueryStats::default();
    let ans = tree.search(x, &mut stats);
    (ans, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::pred_sorted;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(seed: u64, n: usize, bits: u32) -> KeySet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keys: Vec<u64> = (0..n).map(|_| rng.gen::<u64>() & mask(bits)).collect();
        keys.sort_unstable();
        keys.dedup();
        KeySet::new(keys, bits).unwrap()
    }

    #[test]
    fn degree_and_height() {
        // 8-bit keys in a 64-bit word: 64/9 = 7 fields, rounded down to 4.
        let y = KeySet::new((0..256).collect(), 8).unwrap();
        let t = build_btree(&y, WordSpec::new(64, 8, 1).unwrap()).unwrap();
        assert_eq!(t.degree(), 4);
        assert_eq!(t.height(), 4);
        // 512 keys cannot be distinct at 8 bits; 10-bit keys give the same degree.
        let t = PackedBTree::from_keys(&(0..512).collect::<Vec<_>>(), 10, 64).unwrap();
        assert_eq!(t.degree(), 4);
        assert_eq!(t.height(), 5);
        assert_eq!(t.probe_bound(), 6);
        assert_eq!(depth_bound(512, 10, 64), 4);
        assert_eq!(depth_bound(4, 10, 64), 0);
    }

    #[test]
    fn empty_and_small() {
        let y = KeySet::new(vec![], 8).unwrap();
        let t = build_btree(&y, WordSpec::new(64, 8, 1).unwrap()).unwrap();
        assert_eq!(query_btree(&t, 200).0, Pred::NegInf);
        let y = KeySet::new(vec![3, 9, 40], 8).unwrap();
        let t = build_btree(&y, WordSpec::new(64, 8, 1).unwrap()).unwrap();
        assert_eq!(t.height(), 1);
        let (ans, st) = query_btree(&t, 2);
        assert_eq!(ans, Pred::NegInf);
        assert_eq!(st.probes, 1);
        assert_eq!(query_btree(&t, 40).0, Pred::Key(40));
        assert_eq!(query_btree(&t, 39).0, Pred::Key(9));
    }

    #[test]
    fn random_sweep_matches_oracle() {
        let y = random_set(7, 10_000, 16);
        let t = build_btree(&y, WordSpec::new(64, 16, 1).unwrap()).unwrap();
        assert_eq!(t.keys(), y.keys());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100_000 {
            let x = rng.gen::<u64>() & 0xFFFF;
            let (ans, st) = query_btree(&t, x);
            assert_eq!(ans, pred_sorted(&y, x));
            assert!(st.probes <= t.probe_bound());
        }
        let (ans, _) = query_btree(&t, *y.keys().last().unwrap());
        assert_eq!(ans, Pred::Key(*y.keys().last().unwrap()));
    }

    #[test]
    fn wide_words_and_fallback() {
        let y = random_set(3, 5000, 32);
        for w in [32u32, 64, 128] {
            let t = PackedBTree::from_keys(y.keys(), 32, w).unwrap();
            assert_eq!(t.is_binary_search(), w < 66);
            for x in (0..2000u64).map(|i| i.wrapping_mul(0x9E37_79B9) & mask(32)) {
                let mut st = QueryStats::default();
                assert_eq!(t.search(x, &mut st), pred_sorted(&y, x));
                assert!(st.probes <= t.probe_bound());
            }
        }
    }

    proptest! {
        #[test]
        fn equals_scalar_search(mut keys in proptest::collection::vec(0u64..4096, 0..300), x in 0u64..4096, w in prop::sample::select(vec![16u32, 32, 64, 128])) {
            keys.sort_unstable();
            keys.dedup();
            let y = KeySet::new(keys, 12).unwrap();
            let t = PackedBTree::from_keys(y.keys(), 12, w).unwrap();
            let mut st = QueryStats::default();
            prop_assert_eq!(t.search(x, &mut st), pred_sorted(&y, x));
            prop_assert!(st.probes <= t.probe_bound());
            prop_assert!(st.depth <= st.probes);
        }
    }
}
