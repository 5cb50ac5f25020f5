//! Length/cardinality reduction for large universes and the two recursion
//! schedules built on it.
//!
//! A reduction node samples a set `Z` of keys so that every run of `⌈n/q⌉`
//! consecutive keys contains one, and stores a signature answering
//! longest-common-prefix queries against `Z` in whole characters. Keys whose
//! extended common prefix `v` with `Z` is not a prefix of any `z` are grouped
//! by `v` into cardinality-reduced children (fewer keys, same length). For
//! the prefixes `u` of keys in `Z`, the distinct next characters form
//! length-reduced children (keys one character wide).

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
use crate::tabulation::FullTable;
use crate::wordops::{ceil_log2, floor_pow2, lcp_chars, parallel_char_hash, CharHashFamily, WordSpec};

/// Largest signature table, in index bits.
pub const MAX_SIGNATURE_BITS: u32 = 24;

const MAX_RESEEDS: u32 = 1000;

/// Hash-table key for a prefix of `len` whole characters.
#[inline]
fn prefix_key(spec: &WordSpec, x: u64, len: u32) -> u128 {
    (1u128 << (len * spec.char_bits)) | spec.prefix(x, len) as u128
}

// ---------------------------------------------------------------------------
// Signature

/// Longest-common-prefix structure over a small sample `Z`.
///
/// Characters are hashed position by position into `b` bits with functions
/// that are injective on the sample's characters. The table, indexed by the
/// concatenated hashed characters, stores for every pattern the index of a
/// sample key whose hashed key shares the longest prefix with it. When
/// `b ≥ c` the hash is the identity and the table covers every key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZSignature {
    z: Vec<u64>,
    family: CharHashFamily,
    table: Vec<u16>,
}

impl ZSignature {
    pub fn keys(&self) -> &[u64] {
        &self.z
    }

    pub fn family(&self) -> &CharHashFamily {
        &self.family
    }

    pub fn spec(&self) -> &WordSpec {
        &self.family.spec
    }

    pub fn is_tabulated(&self) -> bool {
        self.family.is_identity()
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    pub fn bits_used(&self) -> u64 {
        let spec = self.spec();
        let index_bits = ceil_log2(self.z.len() as u64).max(1) as u64;
        self.table.len() as u64 * index_bits
            + self.z.len() as u64 * spec.key_bits as u64
            + self.family.multipliers.len() as u64 * 64
    }

    /// Hash constants, one table entry, and the witness key.
    pub const PROBES: u32 = 3;

    fn lookup(&self, x: u64) -> (u32, usize) {
        let j = self.table[parallel_char_hash(x, &self.family) as usize] as usize;
        (lcp_chars(x, self.z[j], self.spec()), j)
    }
}

/// Builds the signature over the sample `z` (sorted, distinct), viewed as
/// keys of `spec.char_count` characters.
pub fn build_signature(z: &KeySet, spec: WordSpec, rng: &mut ChaCha8Rng) -> Result<ZSignature> {
    let q = z.len();
    if q == 0 {
        return param("signature needs at least one sample key");
    }
    if q > u16::MAX as usize {
        return param(format!("sample of {q} keys is too large"));
    }
    if z.key_bits() != spec.key_bits {
        return param(format!(
            "sample keys have {} bits, spec {}",
            z.key_bits(),
            spec.key_bits
        ));
    }
    let b = 2 * ceil_log2(q as u64);
    let family = if b >= spec.char_bits || b == 0 {
        CharHashFamily::identity(spec)
    } else {
        let mut family = CharHashFamily::random(spec, b, rng)?;
        for i in 0..spec.char_count {
            let mut chars: Vec<u64> = z.keys().iter().map(|&k| spec.char_at(k, i)).collect();
            chars.sort_unstable();
            chars.dedup();
            let mut tries = 0;
            loop {
                let mut hashed: Vec<u64> = chars.iter().map(|&c| family.hash_char(i, c)).collect();
                hashed.sort_unstable();
                hashed.dedup();
                if hashed.len() == chars.len() {
                    break;
                }
                tries += 1;
                if tries > MAX_RESEEDS {
                    return Err(Error::Invariant(format!(
                        "no injective hash for character position {i}"
                    )));
                }
                family.reseed_position(i, rng);
            }
        }
        family
    };
    let bits = family.hashed_bits();
    if bits > MAX_SIGNATURE_BITS {
        return Err(Error::Build(format!(
            "signature table of 2^{bits} entries exceeds 2^{MAX_SIGNATURE_BITS}"
        )));
    }
    let hb = family.hash_bits;
    let mut table = vec![0u16; 1usize << bits];
    let hashed: Vec<u64> = z.keys().iter().map(|&k| parallel_char_hash(k, &family)).collect();
    // Fill the pattern range of each hashed r-character prefix, shortest
    // first, so the longest agreement overwrites.
    for r in 1..=spec.char_count {
        let low = (spec.char_count - r) * hb;
        let mut last = None;
        for (j, &hk) in hashed.iter().enumerate() {
            let p = hk >> low;
            if last == Some(p) {
                continue;
            }
            last = Some(p);
            let start = (p << low) as usize;
            table[start..start + (1usize << low)].fill(j as u16);
        }
    }
    Ok(ZSignature {
        z: z.keys().to_vec(),
        family,
        table,
    })
}

/// Whole characters shared between `x` and the best sample key, and that key's index.
pub fn query_signature(sig: &ZSignature, x: u64) -> (u32, usize) {
    sig.lookup(x)
}

/// The first `lcp + 1` characters of `x`, as `(prefix, length)`.
pub fn comm_pref_plus(sig: &ZSignature, x: u64) -> Result<(u64, u32)> {
    let spec = sig.spec();
    let (lcp, _) = sig.lookup(x);
    if lcp >= spec.char_count {
        return param("query key is in the sample");
    }
    Ok((spec.prefix(x, lcp + 1), lcp + 1))
}

// ---------------------------------------------------------------------------
// Reduction node

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    /// Strict predecessor of the prefix followed by zeros.
    pub strict_pred: Pred,
    /// Largest key with the prefix.
    pub max: u64,
    pub child: Child,
}

/// Sizes recorded while building one reduction node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionCounts {
    pub n: usize,
    pub q: usize,
    pub z: usize,
    pub v: usize,
    pub u: usize,
    /// Keys in cardinality-reduced children.
    pub card_keys: usize,
    pub largest_card: usize,
    /// Keys in length-reduced children, before median splits.
    pub len_keys: usize,
    /// Largest length-reduced child after median splits.
    pub largest_len: usize,
    pub median_splits: usize,
}

impl ReductionCounts {
    pub fn m(&self) -> usize {
        self.z + self.v
    }

    pub fn window(&self) -> usize {
        self.n.div_ceil(self.q)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionNode {
    signature: ZSignature,
    v_table: PerfectHash<GroupRecord>,
    u_table: PerfectHash<GroupRecord>,
    ext_max: PerfectHash<u64>,
    counts: ReductionCounts,
}

impl ReductionNode {
    pub fn signature(&self) -> &ZSignature {
        &self.signature
    }

    pub fn spec(&self) -> &WordSpec {
        self.signature.spec()
    }

    pub fn counts(&self) -> &ReductionCounts {
        &self.counts
    }

    pub fn v_records(&self) -> impl Iterator<Item = &GroupRecord> {
        self.v_table.values()
    }

    pub fn u_records(&self) -> impl Iterator<Item = &GroupRecord> {
        self.u_table.values()
    }
}

impl NodeOps for ReductionNode {
    fn query(&self, ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        let spec = *self.spec();
        stats.read(ZSignature::PROBES);
        let (lcp, _) = self.signature.lookup(x);
        if lcp == spec.char_count {
            return Pred::Key(x);
        }
        stats.read(self.v_table.lookup_cells(ctx.word_bits));
        if let Some(rec) = self.v_table.get(prefix_key(&spec, x, lcp + 1)) {
            if x >= rec.max {
                return Pred::Key(rec.max);
            }
            return match ctx.descend(rec.child, x, stats) {
                Pred::NegInf => rec.strict_pred,
                y => y,
            };
        }
        stats.read(self.u_table.lookup_cells(ctx.word_bits));
        let rec = self
            .u_table
            .get(prefix_key(&spec, x, lcp))
            .expect("prefix of a sample key missing from U");
        if x >= rec.max {
            return Pred::Key(rec.max);
        }
        let u = spec.prefix(x, lcp);
        let d = spec.char_at(x, lcp);
        match ctx.descend(rec.child, d, stats) {
            Pred::NegInf => rec.strict_pred,
            Pred::Key(c) => {
                stats.read(self.ext_max.lookup_cells(ctx.word_bits));
                let uc = (1u128 << ((lcp + 1) * spec.char_bits)) | (((u << spec.char_bits) | c) as u128);
                Pred::Key(*self.ext_max.get(uc).expect("next character without a maximum"))
            }
        }
    }

    fn own_bits(&self, _word_bits: u32) -> u64 {
        self.signature.bits_used() + self.v_table.bits_used() + self.u_table.bits_used() + self.ext_max.bits_used()
    }

    fn for_each_child(&self, f: &mut dyn FnMut(NodeId)) {
        self.v_table.values().filter_map(|r| r.child).for_each(&mut *f);
        self.u_table.values().filter_map(|r| r.child).for_each(f);
    }

    fn remap_children(&mut self, f: &mut dyn FnMut(NodeId) -> NodeId) {
        for r in self.v_table.values_mut().chain(self.u_table.values_mut()) {
            if let Some(c) = r.child.as_mut() {
                *c = f(*c);
            }
        }
    }
}

/// Splits an oversized length-reduced subproblem around its median.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedianSplit {
    pub key_bits: u32,
    pub pivot: u64,
    /// Keys below the pivot.
    pub left: Child,
    /// Keys from the pivot up; never empty.
    pub right: Child,
}

impl NodeOps for MedianSplit {
    fn query(&self, ctx: &QueryCtx<'_>, x: u64, stats: &mut QueryStats) -> Pred {
        stats.read(1);
        if x >= self.pivot {
            ctx.descend(self.right, x, stats)
        } else {
            ctx.descend(self.left, x, stats)
        }
    }

    fn own_bits(&self, _word_bits: u32) -> u64 {
        self.key_bits as u64 + 2 * REF_BITS
    }

    fn for_each_child(&self, f: &mut dyn FnMut(NodeId)) {
        self.left.into_iter().chain(self.right).for_each(f);
    }

    fn remap_children(&mut self, f: &mut dyn FnMut(NodeId) -> NodeId) {
        for c in [&mut self.left, &mut self.right].into_iter().flatten() {
            *c = f(*c);
        }
    }
}

/// Builds the subproblems a reduction node hands off.
pub trait ReductionChildren {
    /// Fewer keys of the same length.
    fn cardinality(&mut self, arena: &mut Arena, keys: &[u64], key_bits: u32) -> Result<Child>;
    /// Keys one character wide.
    fn length(&mut self, arena: &mut Arena, keys: &[u64], key_bits: u32) -> Result<Child>;
    fn rng(&mut self) -> &mut ChaCha8Rng;
}

/// Indices of the sample: `Y[min(j·⌈n/q⌉, n−1)]` for `j < q`, deduplicated.
pub fn sample_indices(n: usize, q: usize) -> Vec<usize> {
    let step = n.div_ceil(q).max(1);
    let mut idx: Vec<usize> = (0..q).map(|j| (j * step).min(n - 1)).collect();
    idx.dedup();
    idx
}

fn invariant<T>(msg: String) -> Result<T> {
    Err(Error::Invariant(msg))
}

/// Builds one reduction node over `keys` (sorted, distinct, at least two)
/// with `h` characters per key and sampling rate `q`.
pub fn build_reduction(
    arena: &mut Arena,
    keys: &[u64],
    key_bits: u32,
    h: u32,
    q: usize,
    children: &mut dyn ReductionChildren,
) -> Result<NodeId> {
    let n = keys.len();
    if q < 2 || h < 2 || n < 2 {
        return param(format!(
            "reduction needs q >= 2, h >= 2, n >= 2 (got q={q}, h={h}, n={n})"
        ));
    }
    if !key_bits.is_multiple_of(h) {
        return param(format!("{h} characters do not divide {key_bits}-bit keys"));
    }
    let spec = WordSpec::chars(key_bits, h)?;
    let c = spec.char_bits;
    let idx = sample_indices(n, q);
    let z_keys: Vec<u64> = idx.iter().map(|&i| keys[i]).collect();
    let z_set = KeySet::new(z_keys.clone(), key_bits)?;
    let signature = build_signature(&z_set, spec, children.rng())?;

    let mut counts = ReductionCounts {
        n,
        q,
        z: z_keys.len(),
        ..Default::default()
    };
    let window = counts.window();
    let ref_and_answers = (2 * answer_bits(key_bits) + REF_BITS) as u32;

    // Cardinality reduction: runs of keys sharing their extended prefix.
    let mut in_z = vec![false; n];
    for &i in &idx {
        in_z[i] = true;
    }
    let mut v_entries = Vec::new();
    let mut i = 0;
    while i < n {
        if in_z[i] {
            i += 1;
            continue;
        }
        let (lcp, _) = signature.lookup(keys[i]);
        let len = lcp + 1;
        let v = spec.prefix(keys[i], len);
        let mut end = i + 1;
        while end < n && spec.prefix(keys[end], len) == v {
            if in_z[end] {
                return invariant(format!(
                    "sample key {} has extended prefix of a non-sample key",
                    keys[end]
                ));
            }
            end += 1;
        }
        let group = &keys[i..end];
        if group.len() >= window {
            return invariant(format!(
                "agree group of {} keys reaches the window {window}",
                group.len()
            ));
        }
        let rest = &group[..group.len() - 1];
        counts.card_keys += rest.len();
        counts.largest_card = counts.largest_card.max(rest.len());
        let child = if rest.is_empty() {
            None
        } else {
            children.cardinality(arena, rest, key_bits)?
        };
        v_entries.push((
            prefix_key(&spec, keys[i], len),
            GroupRecord {
                strict_pred: i.checked_sub(1).map(|j| keys[j]).into(),
                max: group[group.len() - 1],
                child,
            },
        ));
        i = end;
    }
    counts.v = v_entries.len();

    // Length reduction: prefixes of sample keys of 0..h-1 characters.
    let mut u_prefixes: Vec<(u32, u64)> = Vec::new();
    for &zk in &z_keys {
        for r in 0..h {
            u_prefixes.push((r, spec.prefix(zk, r)));
        }
    }
    u_prefixes.sort_unstable();
    u_prefixes.dedup();
    counts.u = u_prefixes.len();
    let mut u_entries = Vec::with_capacity(u_prefixes.len());
    let mut ext_entries = Vec::new();
    for &(r, u) in &u_prefixes {
        let lo = keys.partition_point(|&k| spec.prefix(k, r) < u);
        let hi = keys.partition_point(|&k| spec.prefix(k, r) <= u);
        let mut next: Vec<u64> = Vec::new();
        for (j, &k) in keys[lo..hi].iter().enumerate() {
            let ch = spec.char_at(k, r);
            if next.last() != Some(&ch) {
                next.push(ch);
            }
            let last_of_run = lo + j + 1 == hi || spec.char_at(keys[lo + j + 1], r) != ch;
            if last_of_run {
                let uc = (1u128 << ((r + 1) * c)) | (((u << c) | ch) as u128);
                ext_entries.push((uc, k));
            }
        }
        next.pop();
        counts.len_keys += next.len();
        let child = build_length_child(arena, &next, c, n, &mut counts, children)?;
        u_entries.push((
            (1u128 << (r * c)) | u as u128,
            GroupRecord {
                strict_pred: lo.checked_sub(1).map(|j| keys[j]).into(),
                max: keys[hi - 1],
                child,
            },
        ));
    }

    if counts.card_keys != n - counts.m() {
        return invariant(format!(
            "cardinality-reduced keys {} != n - m = {}",
            counts.card_keys,
            n - counts.m()
        ));
    }
    if counts.len_keys > counts.m() {
        return invariant(format!(
            "length-reduced keys {} exceed m = {}",
            counts.len_keys,
            counts.m()
        ));
    }

    let rng = children.rng();
    let v_table = PerfectHash::build(v_entries, key_bits + 1, ref_and_answers, rng)?;
    let u_table = PerfectHash::build(u_entries, key_bits + 1, ref_and_answers, rng)?;
    let ext_max = PerfectHash::build(ext_entries, key_bits + 1, key_bits, rng)?;
    Ok(arena.push(Node::Reduction(Box::new(ReductionNode {
        signature,
        v_table,
        u_table,
        ext_max,
        counts,
    }))))
}

fn build_length_child(
    arena: &mut Arena,
    chars: &[u64],
    char_bits: u32,
    n: usize,
    counts: &mut ReductionCounts,
    children: &mut dyn ReductionChildren,
) -> Result<Child> {
    if chars.is_empty() {
        return Ok(None);
    }
    if 2 * chars.len() <= n {
        counts.largest_len = counts.largest_len.max(chars.len());
        return children.length(arena, chars, char_bits);
    }
    let mid = chars.len() / 2;
    let (lo, hi) = chars.split_at(mid);
    if 2 * lo.len() > n || 2 * hi.len() > n {
        return invariant(format!(
            "median split of {} keys leaves a half above n/2 = {}",
            chars.len(),
            n / 2
        ));
    }
    counts.median_splits += 1;
    counts.largest_len = counts.largest_len.max(hi.len());
    let left = children.length(arena, lo, char_bits)?;
    let right = children.length(arena, hi, char_bits)?;
    Ok(Some(arena.push(Node::Split(MedianSplit {
        key_bits: char_bits,
        pivot: hi[0],
        left,
        right,
    }))))
}

// ---------------------------------------------------------------------------
// Schedules

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleKind {
    /// Fixed `q = 2^{a/(2h)}`, for `a ≥ ⌈log₂ n⌉`.
    Large,
    /// `q = ⌊n^{1/(4h)}⌋` while `n ≥ 2^{a/2}`, then `2^{a/(4h)}`.
    Small,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Large => "large",
            ScheduleKind::Small => "small",
        }
    }
}

/// Parameters of a recursive reduction build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecursionPlan {
    pub kind: ScheduleKind,
    pub n: usize,
    pub key_bits: u32,
    /// Tabulation threshold.
    pub a: u32,
    /// Characters per key at the top level.
    pub h: u32,
}

fn log2f(x: f64) -> f64 {
    x.max(1.0).log2()
}

/// Nearest power of two on a log scale.
fn round_pow2(x: f64) -> u32 {
    if x <= 1.0 {
        return 1;
    }
    let e = x.log2().round().min(31.0);
    1u32 << (e as u32)
}

fn balance(x: f64) -> f64 {
    if x <= 2.0 {
        2.0
    } else {
        x / x.log2()
    }
}

fn check_plan_args(n: usize, key_bits: u32, a: u32) -> Result<()> {
    if a == 0 || !a.is_power_of_two() {
        return param(format!("tabulation threshold {a} must be a power of two"));
    }
    if !key_bits.is_power_of_two() || key_bits > 64 {
        return param(format!("key length {key_bits} must be a power of two <= 64"));
    }
    if n == 0 {
        return param("schedule needs at least one key");
    }
    Ok(())
}

fn lg_n(n: usize) -> u32 {
    ceil_log2(n as u64)
}

/// Plan for the large-space regime.
pub fn schedule_large(n: usize, key_bits: u32, a: u32) -> Result<RecursionPlan> {
    check_plan_args(n, key_bits, a)?;
    if a < lg_n(n) {
        return param(format!("large schedule needs a >= ⌈log₂ n⌉ ({a} < {})", lg_n(n)));
    }
    let x = a as f64 * log2f(key_bits as f64 / a as f64) / log2f(n as f64).max(1.0);
    let hi = 2.max((key_bits / 2).min(a / 2));
    let h = round_pow2(balance(x)).clamp(2, hi);
    Ok(RecursionPlan {
        kind: ScheduleKind::Large,
        n,
        key_bits,
        a,
        h,
    })
}

/// Plan for the small-space regime.
pub fn schedule_small(n: usize, key_bits: u32, a: u32) -> Result<RecursionPlan> {
    check_plan_args(n, key_bits, a)?;
    if 2 * lg_n(n) < a {
        return param(format!("small schedule needs ⌈log₂ n⌉ >= a/2 ({} < {a}/2)", lg_n(n)));
    }
    let denom = log2f(log2f(n as f64) / a as f64).max(1.0);
    let y = log2f(key_bits as f64 / a as f64) / denom;
    let hi = 2.max((key_bits / 2).min(a / 4));
    let h = round_pow2(balance(y)).clamp(2, hi);
    Ok(RecursionPlan {
        kind: ScheduleKind::Small,
        n,
        key_bits,
        a,
        h,
    })
}

impl RecursionPlan {
    /// Nothing to reduce: the whole set is tabulated.
    pub fn is_trivial(&self) -> bool {
        self.key_bits <= self.a
    }

    /// Characters per key at a level with `key_bits`-bit keys.
    pub fn h_at(&self, key_bits: u32) -> u32 {
        self.h.clamp(2, 2.max(key_bits / 2))
    }

    /// Sampling rate for a node with `n` keys and `h` characters.
    pub fn q_at(&self, n: usize, h: u32) -> usize {
        let q = match self.kind {
            ScheduleKind::Large => 1u64 << (self.a / (2 * h)),
            ScheduleKind::Small => {
                if 2 * lg_n(n) >= self.a {
                    let root = (n as f64).powf(1.0 / (4 * h) as f64).floor() as u64;
                    floor_pow2(root.max(1))
                } else {
                    1u64 << (self.a / (4 * h))
                }
            }
        };
        q.max(2) as usize
    }

    /// The asymptotic depth expression for this regime, without constants.
    pub fn formula_depth(&self) -> f64 {
        let length = log2f(self.key_bits as f64 / self.a as f64) / (self.h as f64).log2();
        let card = match self.kind {
            ScheduleKind::Large => 2.0 * self.h as f64 * log2f(self.n as f64) / self.a as f64,
            ScheduleKind::Small => {
                4.0 * self.h as f64 * log2f(log2f(self.n as f64) / (self.a as f64 / 2.0)).ceil() + self.h as f64
            }
        };
        length + card
    }

    /// Worst-case query depth of the build, by dynamic programming over the
    /// reduction rules: a cardinality step costs one level and leaves fewer
    /// than `⌈n/q⌉` keys; a length step costs at most two levels (median
    /// split plus descent) and leaves at most `n/2` keys of `ℓ/h` bits.
    pub fn predicted_depth(&self) -> u32 {
        if self.n <= 1 || self.key_bits <= self.a {
            return 0;
        }
        // Key lengths along any branch, top first.
        let mut lengths = vec![self.key_bits];
        while *lengths.last().unwrap() > self.a {
            let l = *lengths.last().unwrap();
            lengths.push(l / self.h_at(l));
        }
        let n = self.n;
        // best[n'] for the current length: max depth over sets of at most n' keys.
        let mut below: Vec<u32> = vec![0; n + 1];
        for &l in lengths.iter().rev().skip(1) {
            let h = self.h_at(l);
            let mut cur: Vec<u32> = vec![0; n + 1];
            for m in 2..=n {
                let q = self.q_at(m, h);
                let card = m.div_ceil(q).saturating_sub(1);
                let d_card = if card == 0 { 0 } else { 1 + cur[card] };
                let d_len = 2 + below[m / 2];
                cur[m] = cur[m - 1].max(d_card).max(d_len);
            }
            below = cur;
        }
        below[n]
    }
}

/// Totals over every reduction node of a build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleAudit {
    pub reduction_nodes: usize,
    pub sum_m: u64,
    /// `Σ m · ℓ` with `ℓ` the key length at each node.
    pub sum_m_bits: u64,
    pub median_splits: usize,
    pub tables: usize,
}

impl ScheduleAudit {
    /// Every key in `Z ∪ V` loses at least half of its bits, so the
    /// bit-weighted total is at most twice the input bits.
    pub fn weighted_bound_holds(&self, n: usize, key_bits: u32) -> bool {
        self.sum_m_bits <= 2 * n as u64 * key_bits as u64
    }

    pub fn plain_bound_holds(&self, n: usize) -> bool {
        self.sum_m <= 2 * n as u64
    }
}

pub(crate) struct ScheduleBuilder<'r> {
    plan: RecursionPlan,
    rng: &'r mut ChaCha8Rng,
    pub(crate) audit: ScheduleAudit,
}

impl<'r> ScheduleBuilder<'r> {
    pub(crate) fn new(plan: RecursionPlan, rng: &'r mut ChaCha8Rng) -> Self {
        ScheduleBuilder {
            plan,
            rng,
            audit: ScheduleAudit::default(),
        }
    }

    pub(crate) fn build(&mut self, arena: &mut Arena, keys: &[u64], key_bits: u32) -> Result<Child> {
        if let Some(c) = trivial(arena, keys, key_bits) {
            return Ok(c);
        }
        if key_bits <= self.plan.a {
            self.audit.tables += 1;
            let t = FullTable::from_keys(keys, key_bits, self.plan.a)?;
            return Ok(Some(arena.push(Node::FullTable(t))));
        }
        let h = self.plan.h_at(key_bits);
        let q = self.plan.q_at(keys.len(), h);
        let id = build_reduction(arena, keys, key_bits, h, q, self)?;
        if let Node::Reduction(r) = arena.get(id) {
            let m = r.counts().m() as u64;
            self.audit.reduction_nodes += 1;
            self.audit.sum_m += m;
            self.audit.sum_m_bits += m * key_bits as u64;
            self.audit.median_splits += r.counts().median_splits;
        }
        Ok(Some(id))
    }
}

impl ReductionChildren for ScheduleBuilder<'_> {
    fn cardinality(&mut self, arena: &mut Arena, keys: &[u64], key_bits: u32) -> Result<Child> {
        self.build(arena, keys, key_bits)
    }

    fn length(&mut self, arena: &mut Arena, keys: &[u64], key_bits: u32) -> Result<Child> {
        self.build(arena, keys, key_bits)
    }

    fn rng(&mut self) -> &mut ChaCha8Rng {
        self.rng
    }
}

/// Builds a complete structure following `plan`.
pub fn build_scheduled(
    set: &KeySet,
    plan: &RecursionPlan,
    word_bits: u32,
    seed: u64,
) -> Result<(PredStructure, ScheduleAudit)> {
    if set.key_bits() != plan.key_bits {
        return param(format!(
            "plan is for {}-bit keys, set has {}",
            plan.key_bits,
            set.key_bits()
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arena = Arena::new(word_bits);
    let mut builder = ScheduleBuilder::new(*plan, &mut rng);
    let root = builder.build(&mut arena, set.keys(), set.key_bits())?;
    let audit = builder.audit;
    Ok((arena.finish(root, set.key_bits()), audit))
}

/// Brute-force longest common prefix against a sample, in whole characters.
pub fn max_lcp_brute(z: &[u64], x: u64, spec: &WordSpec) -> u32 {
    z.iter().map(|&k| lcp_chars(x, k, spec)).max().unwrap_or(0)
}
