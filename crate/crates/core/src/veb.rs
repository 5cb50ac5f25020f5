//! Tuned van Emde Boas structure.
//!
//! The root tabulates a prefix of at most `⌊log₂ n⌋` bits, leaving a
//! power-of-two suffix length `ℓ'`. Below it every node halves the key
//! length: a perfect-hash directory over the distinct top halves `U` stores
//! the strict predecessor and maximum of each group plus a structure over the
//! group's bottom halves with the maximum removed, and a recursive structure
//! over `U` itself handles queries whose top half is absent. Recursion stops
//! at key length `a`, where subproblems are tabulated completely.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::hashing::PerfectHash;
use crate::oracle::KeySet;
use crate::pred::Pred;
use crate::structure::{
    answer_bits, trivial, Arena, Child, Node, NodeId, NodeOps, PredStructure, QueryCtx, QueryStats, REF_BITS,
};
use crate::tabulation::{build_prefix_split, choose_prefix_bits, FullTable};
use crate::wordops::{concat, mask, split_unchecked};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VebRecord {
    pub strict_pred: Pred,
    pub max: u64,
    pub child: Child,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VebNode {
    key_bits: u32,
    directory: PerfectHash<VebRecord>,
    prefix_index: NodeId,
}

impl VebNode {
    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn half_bits(&self) -> u32 {
        self.key_bits / 2
    }

    pub fn directory(&self) -> &PerfectHash<VebRecord> {
        &self.directory
    }

    pub fn prefix_index(&self) -> NodeId {
        self.prefix_index
    }
}

impl NodeOps for VebNode {
    fn query(&self, ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        let half = self.half_bits();
        let (x0, x1) = split_unchecked(x, self.key_bits, half);
        let lookup = self.directory.lookup_cells(ctx.word_bits);
        stats.read(lookup);
        let Some(rec) = self.directory.get(x0 as u128) else {
            return match ctx.descend(Some(self.prefix_index), x0, stats) {
                Pred::NegInf => Pred::NegInf,
                Pred::Key(u) => {
                    stats.read(lookup);
                    let rec = self
                        .directory
                        .get(u as u128)
                        .expect("prefix index returned a prefix outside U");
                    Pred::Key(rec.max)
                }
            };
        };
        if x >= rec.max {
            return Pred::Key(rec.max);
        }
        match ctx.descend(rec.child, x1, stats) {
            Pred::NegInf => rec.strict_pred,
            Pred::Key(y1) => Pred::Key(concat(x0, y1, half)),
        }
    }

    fn own_bits(&self, _word_bits: u32) -> u64 {
        self.directory.bits_used() + REF_BITS
    }

    fn for_each_child(&self, f: &mut dyn FnMut(NodeId)) {
        f(self.prefix_index);
        self.directory.values().filter_map(|r| r.child).for_each(f);
    }

    fn remap_children(&mut self, f: &mut dyn FnMut(NodeId) -> NodeId) {
        self.prefix_index = f(self.prefix_index);
        for r in self.directory.values_mut() {
            if let Some(c) = r.child.as_mut() {
                *c = f(*c);
            }
        }
    }
}

/// Key length left after the root prefix table, for `n` keys of `key_bits`
/// bits with tabulation threshold `a`.
pub fn reduced_key_bits(n: usize, key_bits: u32, a: u32) -> u32 {
    if key_bits <= a {
        key_bits
    } else {
        key_bits - choose_prefix_bits(n, key_bits)
    }
}

/// Worst-case recursion depth below the root: one descent for the prefix
/// table (if any) plus one per halving from `ℓ'` down to `a`.
pub fn depth_bound(n: usize, key_bits: u32, a: u32) -> u32 {
    if key_bits <= a {
        return 0;
    }
    let reduced = reduced_key_bits(n, key_bits, a);
    let halvings = if reduced <= a {
        0
    } else {
        (reduced / a).next_power_of_two().trailing_zeros()
    };
    halvings + u32::from(reduced != key_bits)
}

/// Recursive halving without the root prefix table.
pub(crate) fn build_halving(
    arena: &mut Arena,
    keys: &[u64],
    key_bits: u32,
    a: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Child> {
    if let Some(c) = trivial(arena, keys, key_bits) {
        return Ok(c);
    }
    if key_bits <= a {
        return Ok(Some(
            arena.push(Node::FullTable(FullTable::from_keys(keys, key_bits, a)?)),
        ));
    }
    if !key_bits.is_power_of_two() {
        return param(format!("van Emde Boas key length {key_bits} is not a power of two"));
    }
    let half = key_bits / 2;
    let mut prefixes = Vec::new();
    let mut entries = Vec::new();
    let mut suffix_total = 0usize;
    let mut start = 0usize;
    while start < keys.len() {
        let u = split_unchecked(keys[start], key_bits, half).0;
        let mut end = start + 1;
        while end < keys.len() && split_unchecked(keys[end], key_bits, half).0 == u {
            end += 1;
        }
        let strict_pred = start.checked_sub(1).map(|j| keys[j]).into();
        let max = keys[end - 1];
        let reduced: Vec<u64> = keys[start..end - 1].iter().map(|&k| k & mask(half)).collect();
        suffix_total += reduced.len();
        let child = build_halving(arena, &reduced, half, a, rng)?;
        prefixes.push(u);
        entries.push((
            u as u128,
            VebRecord {
                strict_pred,
                max,
                child,
            },
        ));
        start = end;
    }
    if prefixes.len() + suffix_total != keys.len() {
        return Err(Error::Invariant(format!(
            "veb key conservation: |U|={} + suffixes={} != n={}",
            prefixes.len(),
            suffix_total,
            keys.len()
        )));
    }
    let prefix_index = build_halving(arena, &prefixes, half, a, rng)?.expect("U is nonempty for nonempty Y");
    let value_bits = (answer_bits(key_bits) + key_bits as u64 + REF_BITS) as u32;
    let directory = PerfectHash::build(entries, half, value_bits, rng)?;
    Ok(Some(arena.push(Node::Veb(VebNode {
        key_bits,
        directory,
        prefix_index,
    }))))
}

/// Full construction into an existing arena: prefix table, then halving.
pub(crate) fn build_into(
    arena: &mut Arena,
    keys: &[u64],
    key_bits: u32,
    a: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Child> {
    if let Some(c) = trivial(arena, keys, key_bits) {
        return Ok(c);
    }
    if key_bits <= a {
        return build_halving(arena, keys, key_bits, a, rng);
    }
    if !key_bits.is_power_of_two() {
        return param(format!("van Emde Boas key length {key_bits} is not a power of two"));
    }
    let p = choose_prefix_bits(keys.len(), key_bits);
    if p == 0 {
        return build_halving(arena, keys, key_bits, a, rng);
    }
    let root = build_prefix_split(arena, keys, key_bits, p, &mut |ar, suff, bits| {
        build_halving(ar, suff, bits, a, rng)
    })?;
    Ok(Some(root))
}

/// Builds the tuned van Emde Boas structure for `set` with tabulation
/// threshold `a` (a power of two).
pub fn build_veb(set: &KeySet, a: u32, word_bits: u32, seed: u64) -> Result<PredStructure> {
    if a == 0 || !a.is_power_of_two() {
        return param(format!("tabulation threshold {a} must be a power of two"));
    }
    let mut arena = Arena::new(word_bits);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = build_into(&mut arena, set.keys(), set.key_bits(), a, &mut rng)?;
    Ok(arena.finish(root, set.key_bits()))
}
