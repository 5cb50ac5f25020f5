//! Complete tabulation of every query key, and tabulation over a key prefix
//! with recursive structures for the suffixes.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::oracle::KeySet;
use crate::pred::Pred;
use crate::structure::{answer_bits, Arena, Child, Node, NodeId, NodeOps, QueryCtx, QueryStats, REF_BITS};
use crate::wordops::{concat, mask, split_unchecked};

/// Hard cap on the key length of a complete table (2^24 entries).
pub const MAX_FULL_TABLE_BITS: u32 = 24;
/// Hard cap on the prefix length of a prefix table.
pub const MAX_PREFIX_BITS: u32 = 26;

const EMPTY: u32 = u32::MAX;

/// `pred_Y[x]` for every `x` in `[0, 2^ℓ)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullTable {
    key_bits: u32,
    entries: Vec<u32>,
}

impl FullTable {
    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, x: u64) -> Pred {
        match self.entries[x as usize] {
            EMPTY => Pred::NegInf,
            k => Pred::Key(k as u64),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = Pred> + '_ {
        (0..self.entries.len() as u64).map(|x| self.entry(x))
    }

    /// Overwrites one entry. Only used to inject faults in tests.
    #[doc(hidden)]
    pub fn set_entry(&mut self, x: u64, value: Pred) {
        self.entries[x as usize] = match value {
            Pred::NegInf => EMPTY,
            Pred::Key(k) => k as u32,
        };
    }

    pub(crate) fn from_keys(keys: &[u64], key_bits: u32, max_bits: u32) -> Result<Self> {
        let limit = max_bits.min(MAX_FULL_TABLE_BITS);
        if key_bits > limit {
            return Err(Error::Build(format!(
                "complete table over {key_bits}-bit keys exceeds the {limit}-bit table limit"
            )));
        }
        let size = 1usize << key_bits;
        let mut entries = Vec::with_capacity(size);
        let mut cur = EMPTY;
        let mut next = keys.iter().peekable();
        for x in 0..size as u64 {
            while let Some(&&k) = next.peek() {
                if k > x {
                    break;
                }
                cur = k as u32;
                next.next();
            }
            entries.push(cur);
        }
        Ok(FullTable { key_bits, entries })
    }
}

impl NodeOps for FullTable {
    fn query(&self, _ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        // Entries are packed so that none straddles a cell boundary.
        stats.read(1);
        self.entry(x)
    }

    fn own_bits(&self, _word_bits: u32) -> u64 {
        self.entries.len() as u64 * answer_bits(self.key_bits)
    }
}

/// Builds the complete table for `set`. `max_bits` bounds the key length the
/// caller is willing to tabulate.
pub fn build_full(set: &KeySet, max_bits: u32) -> Result<FullTable> {
    FullTable::from_keys(set.keys(), set.key_bits(), max_bits)
}

/// Single table read.
pub fn query_full(table: &FullTable, x: u64) -> Pred {
    table.entry(x)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixRecord {
    /// Strict predecessor of `u·0…0`.
    pub strict_pred: Pred,
    /// Structure over the suffixes of keys with prefix `u`.
    pub child: Child,
}

/// Tabulation over the first `p` bits of every key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixSplit {
    key_bits: u32,
    prefix_bits: u32,
    records: Vec<PrefixRecord>,
}

impl PrefixSplit {
    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn prefix_bits(&self) -> u32 {
        self.prefix_bits
    }

    pub fn suffix_bits(&self) -> u32 {
        self.key_bits - self.prefix_bits
    }

    pub fn record(&self, u: u64) -> &PrefixRecord {
        &self.records[u as usize]
    }

    pub fn records(&self) -> &[PrefixRecord] {
        &self.records
    }

    fn record_bits(&self) -> u64 {
        answer_bits(self.key_bits) + REF_BITS
    }
}

impl NodeOps for PrefixSplit {
    fn query(&self, ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        let (x0, x1) = split_unchecked(x, self.key_bits, self.prefix_bits);
        let rec = &self.records[x0 as usize];
        stats.read(ctx.cells(self.record_bits()));
        match ctx.descend(rec.child, x1, stats) {
            Pred::NegInf => rec.strict_pred,
            Pred::Key(y1) => Pred::Key(concat(x0, y1, self.suffix_bits())),
        }
    }

    fn own_bits(&self, _word_bits: u32) -> u64 {
        self.records.len() as u64 * self.record_bits()
    }

    fn for_each_child(&self, f: &mut dyn FnMut(NodeId)) {
        self.records.iter().filter_map(|r| r.child).for_each(f);
    }

    fn remap_children(&mut self, f: &mut dyn FnMut(NodeId) -> NodeId) {
        for r in &mut self.records {
            if let Some(c) = r.child.as_mut() {
                *c = f(*c);
            }
        }
    }
}

/// Builds the structure over one suffix set of the given length.
pub type ChildBuilder<'a> = dyn FnMut(&mut Arena, &[u64], u32) -> Result<Child> + 'a;

/// Builds a prefix table over `keys` (sorted, `key_bits` wide). The child
/// builder receives each nonempty suffix set with the suffix length.
pub fn build_prefix_split(
    arena: &mut Arena,
    keys: &[u64],
    key_bits: u32,
    prefix_bits: u32,
    child_builder: &mut ChildBuilder<'_>,
) -> Result<NodeId> {
    if prefix_bits == 0 || prefix_bits > key_bits {
        return param(format!("prefix length {prefix_bits} must be in 1..={key_bits}"));
    }
    if prefix_bits > MAX_PREFIX_BITS {
        return param(format!("prefix length {prefix_bits} exceeds {MAX_PREFIX_BITS}"));
    }
    let suffix_bits = key_bits - prefix_bits;
    let groups = 1u64 << prefix_bits;
    let mut records = Vec::with_capacity(groups as usize);
    let mut i = 0usize;
    let mut suffixes = Vec::new();
    for u in 0..groups {
        let strict_pred = i.checked_sub(1).map(|j| keys[j]).into();
        suffixes.clear();
        while i < keys.len() && split_unchecked(keys[i], key_bits, prefix_bits).0 == u {
            suffixes.push(keys[i] & mask(suffix_bits));
            i += 1;
        }
        let child = if suffixes.is_empty() {
            None
        } else {
            child_builder(arena, &suffixes, suffix_bits)?
        };
        records.push(PrefixRecord { strict_pred, child });
    }
    debug_assert_eq!(i, keys.len());
    Ok(arena.push(Node::PrefixSplit(PrefixSplit {
        key_bits,
        prefix_bits,
        records,
    })))
}

/// Prefix length for the first tabulation step: the largest `p <= ⌊log₂ n⌋`
/// leaving a power-of-two suffix length, or 0 if there is none.
pub fn choose_prefix_bits(n: usize, key_bits: u32) -> u32 {
    if n < 2 {
        return 0;
    }
    let limit = (63 - (n as u64).leading_zeros()).min(MAX_PREFIX_BITS);
    (1..=limit.min(key_bits - 1))
        .rev()
        .find(|&p| (key_bits - p).is_power_of_two())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exhaustive_equiv, pred_sorted};
    use crate::structure::{trivial, Searcher};

    fn full_node(arena: &mut Arena, keys: &[u64], bits: u32) -> Result<Child> {
        if let Some(c) = trivial(arena, keys, bits) {
            return Ok(c);
        }
        Ok(Some(arena.push(Node::FullTable(FullTable::from_keys(keys, bits, 24)?))))
    }

    #[test]
    fn full_table_examples() {
        let y = KeySet::new(vec![2, 5], 3).unwrap();
        let t = build_full(&y, 8).unwrap();
        let p = |k| Pred::Key(k);
        assert_eq!(
            t.entries().collect::<Vec<_>>(),
            vec![Pred::NegInf, Pred::NegInf, p(2), p(2), p(2), p(5), p(5), p(5)]
        );
        assert_eq!(query_full(&t, 4), p(2));
        assert_eq!(query_full(&t, 5), p(5));
        assert_eq!(query_full(&t, 0), Pred::NegInf);
        assert_eq!(t.own_bits(64), 8 * 4);

        let empty = build_full(&KeySet::new(vec![], 4).unwrap(), 8).unwrap();
        assert!(empty.entries().all(Pred::is_neg_inf));
        let zero = build_full(&KeySet::new(vec![0], 1).unwrap(), 8).unwrap();
        assert_eq!(zero.entries().collect::<Vec<_>>(), vec![p(0), p(0)]);
    }

    #[test]
    fn full_table_respects_limit() {
        let y = KeySet::new(vec![1], 12).unwrap();
        assert!(matches!(build_full(&y, 10), Err(Error::Build(_))));
    }

    #[test]
    fn prefix_split_example() {
        let keys = [0b0010, 0b0101, 0b1100];
        let mut arena = Arena::new(64);
        let mut seen = Vec::new();
        let root = build_prefix_split(&mut arena, &keys, 4, 2, &mut |a, s, b| {
            seen.push(s.to_vec());
            full_node(a, s, b)
        })
        .unwrap();
        let s = arena.finish(Some(root), 4);
        let Node::PrefixSplit(ps) = s.root_node().unwrap() else {
            panic!()
        };
        assert_eq!(ps.record(0b01).strict_pred, Pred::Key(0b0010));
        assert_eq!(ps.record(0b00).strict_pred, Pred::NegInf);
        assert_eq!(ps.record(0b10).strict_pred, Pred::Key(0b0101));
        assert_eq!(ps.record(0b11).strict_pred, Pred::Key(0b0101));
        assert!(ps.record(0b10).child.is_none());
        assert_eq!(seen, vec![vec![0b10], vec![0b01], vec![0b00]]);
        assert_eq!(seen.iter().map(Vec::len).sum::<usize>(), keys.len());

        // The child of prefix 01 answers -inf for suffix 00, so the strict
        // predecessor is used.
        assert_eq!(s.query(0b0100).0, Pred::Key(0b0010));
        assert_eq!(s.query(0b0101).0, Pred::Key(0b0101));
        assert_eq!(s.query(0).0, Pred::NegInf);
        let set = KeySet::new(keys.to_vec(), 4).unwrap();
        assert!(exhaustive_equiv(&s, &set).unwrap().is_equivalent());
    }

    #[test]
    fn prefix_split_degenerate_cases() {
        // p = ℓ: every child is a singleton over 0-bit suffixes.
        let keys = [1u64, 6, 7, 12];
        let mut arena = Arena::new(64);
        let root = build_prefix_split(&mut arena, &keys, 4, 4, &mut |a, s, b| {
            assert_eq!(b, 0);
            assert_eq!(s, &[0]);
            full_node(a, s, b)
        })
        .unwrap();
        let s = arena.finish(Some(root), 4);
        let set = KeySet::new(keys.to_vec(), 4).unwrap();
        assert!(exhaustive_equiv(&s, &set).unwrap().is_equivalent());

        let mut arena = Arena::new(64);
        let root = build_prefix_split(&mut arena, &[], 6, 3, &mut |_, _, _| unreachable!()).unwrap();
        let s = arena.finish(Some(root), 6);
        let Node::PrefixSplit(ps) = s.root_node().unwrap() else {
            panic!()
        };
        assert!(ps
            .records()
            .iter()
            .all(|r| r.strict_pred.is_neg_inf() && r.child.is_none()));
        assert!((0..64).all(|x| s.query(x).0.is_neg_inf()));
    }

    #[test]
    fn prefix_split_exhaustive_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let bits = 16;
            let n = rng.gen_range(0..2000);
            let mut keys: Vec<u64> = (0..n).map(|_| rng.gen_range(0..1u64 << bits)).collect();
            keys.sort_unstable();
            keys.dedup();
            let p = 1 + trial % 12;
            let mut arena = Arena::new(64);
            let root = build_prefix_split(&mut arena, &keys, bits, p, &mut full_node).unwrap();
            let own = match arena.get(root) {
                Node::PrefixSplit(ps) => ps.own_bits(64),
                _ => unreachable!(),
            };
            assert_eq!(own, (1u64 << p) * (bits as u64 + 1 + REF_BITS));
            let s = arena.finish(Some(root), bits);
            let set = KeySet::new(keys, bits).unwrap();
            for x in 0..1u64 << bits {
                assert_eq!(s.search(x).0, pred_sorted(&set, x), "x={x} p={p}");
            }
        }
    }

    #[test]
    fn prefix_choice() {
        assert_eq!(choose_prefix_bits(4096, 16), 12);
        assert_eq!(choose_prefix_bits(300, 16), 8);
        assert_eq!(choose_prefix_bits(200, 16), 0);
        assert_eq!(choose_prefix_bits(1 << 16, 16), 15);
        assert_eq!(choose_prefix_bits(1, 16), 0);
        assert_eq!(choose_prefix_bits(1 << 20, 64), 0);
        assert_eq!(choose_prefix_bits(1 << 20, 32), 16);
    }
}
