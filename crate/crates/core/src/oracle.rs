//! Ground truth: predecessor by binary search over the sorted key array, and
//! equivalence checks of any structure against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::pred::Pred;
use crate::structure::Searcher;
use crate::wordops::{mask, MAX_KEY_BITS};

/// Largest key length for which [`exhaustive_equiv`] will sweep every query.
pub const EXHAUSTIVE_MAX_BITS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Red,
    Blue,
}

/// A strictly ascending set of `key_bits`-bit keys, optionally colored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeySet {
    keys: Vec<u64>,
    key_bits: u32,
    colors: Option<Vec<Color>>,
}

impl KeySet {
    /// Validates ordering and range. The error names the first offending
    /// position (0-based).
    pub fn new(keys: Vec<u64>, key_bits: u32) -> Result<Self> {
        if key_bits == 0 || key_bits > MAX_KEY_BITS {
            return param(format!("key length {key_bits} outside 1..={MAX_KEY_BITS}"));
        }
        for (i, &k) in keys.iter().enumerate() {
            if k > mask(key_bits) {
                return Err(Error::Ingest {
                    line: i + 1,
                    msg: format!("key {k} does not fit in {key_bits} bits"),
                });
            }
            if i > 0 && keys[i - 1] >= k {
                let what = if keys[i - 1] == k { "duplicate" } else { "unsorted" };
                return Err(Error::Ingest {
                    line: i + 1,
                    msg: format!("{what} key {k} after {}", keys[i - 1]),
                });
            }
        }
        Ok(KeySet {
            keys,
            key_bits,
            colors: None,
        })
    }

    pub fn with_colors(mut self, colors: Vec<Color>) -> Result<Self> {
        if colors.len() != self.keys.len() {
            return param(format!("{} colors for {} keys", colors.len(), self.keys.len()));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn key_bits(&self) -> u32 {
        self.key_bits
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn colors(&self) -> Option<&[Color]> {
        self.colors.as_deref()
    }

    fn pred_index(&self, x: u64) -> Option<usize> {
        self.keys.partition_point(|&k| k <= x).checked_sub(1)
    }
}

/// The largest key `<= x`, or `-inf`.
pub fn pred_sorted(set: &KeySet, x: u64) -> Pred {
    set.pred_index(x).map(|i| set.keys[i]).into()
}

/// Color of the predecessor; `Ok(None)` stands for `-inf`.
pub fn colored_pred(set: &KeySet, x: u64) -> Result<Option<Color>> {
    let colors = match &set.colors {
        Some(c) => c,
        None => return param("key set carries no colors"),
    };
    Ok(set.pred_index(x).map(|i| colors[i]))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub x: u64,
    pub expected: Pred,
    pub got: Pred,
}

/// Outcome of an equivalence sweep.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EquivReport {
    pub queries: u64,
    pub mismatches: Vec<Mismatch>,
    /// Total mismatches; `mismatches` keeps only the first [`MAX_REPORTED`].
    pub mismatch_count: u64,
    pub max_probes: u32,
    pub max_depth: u32,
}

pub const MAX_REPORTED: usize = 64;

impl EquivReport {
    pub fn is_equivalent(&self) -> bool {
        self.mismatch_count == 0
    }

    fn record<S: Searcher + ?Sized>(&mut self, structure: &S, set: &KeySet, x: u64) {
        let (got, stats) = structure.search(x);
        let expected = pred_sorted(set, x);
        self.queries += 1;
        self.max_probes = self.max_probes.max(stats.probes);
        self.max_depth = self.max_depth.max(stats.depth);
        if got != expected {
            self.mismatch_count += 1;
            if self.mismatches.len() < MAX_REPORTED {
                self.mismatches.push(Mismatch { x, expected, got });
            }
        }
    }
}

/// Queries every `x` in `[0, 2^ℓ)` against the structure and the oracle.
pub fn exhaustive_equiv<S: Searcher + ?Sized>(structure: &S, set: &KeySet) -> Result<EquivReport> {
    let bits = set.key_bits;
    if bits > EXHAUSTIVE_MAX_BITS {
        return param(format!(
            "exhaustive check needs key length <= {EXHAUSTIVE_MAX_BITS}, got {bits}; sample instead"
        ));
    }
    let mut report = EquivReport::default();
    for x in 0..=mask(bits) {
        report.record(structure, set, x);
    }
    Ok(report)
}

/// Checks `samples` seeded uniform queries, plus every stored key and its
/// neighbours, which is where off-by-one errors live.
pub fn sampled_equiv<S: Searcher + ?Sized>(structure: &S, set: &KeySet, samples: u64, seed: u64) -> EquivReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = mask(set.key_bits);
    let mut report = EquivReport::default();
    for _ in 0..samples {
        let x = rng.gen::<u64>() & top;
        report.record(structure, set, x);
    }
    for &k in &set.keys {
        report.record(structure, set, k);
        if k > 0 {
            report.record(structure, set, k - 1);
        }
        if k < top {
            report.record(structure, set, k + 1);
        }
    }
    report
}
