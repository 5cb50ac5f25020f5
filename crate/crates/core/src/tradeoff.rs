//! Exact evaluation of the four-branch time/space trade-off.
//!
//! All logarithms use `lg x = ⌈log₂(x + 2)⌉`, evaluated exactly on
//! rationals, so every quantity is a ratio of small integers and the argmin
//! is decided without rounding.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// A nonnegative rational with a positive denominator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

impl Ratio {
    pub fn new(num: u128, den: u128) -> Self {
        assert!(den > 0, "zero denominator");
        Ratio { num, den }
    }

    pub fn int(v: u128) -> Self {
        Ratio { num: v, den: 1 }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.as_f64();
        if v.fract() == 0.0 {
            write!(f, "{v:.0}")
        } else {
            let s = format!("{v:.6}");
            write!(f, "{}", s.trim_end_matches('0'))
        }
    }
}

/// `⌈log₂(r + 2)⌉` for a rational `r`.
pub fn lg_ratio(r: Ratio) -> u32 {
    // Smallest k with 2^k · den ≥ num + 2·den.
    let target = r.num + 2 * r.den;
    let mut k = 0;
    while (r.den << k) < target {
        k += 1;
    }
    k
}

pub fn lg_int(x: u128) -> u32 {
    lg_ratio(Ratio::int(x))
}

/// `⌈log₂(x + 2)⌉` for a real `x ≥ 0`.
pub fn lg_paper(x: f64) -> Result<u32> {
    if !x.is_finite() || x < 0.0 {
        return param(format!("lg is undefined for {x}"));
    }
    let v = x + 2.0;
    let mut k = v.log2().ceil() as i32;
    // Guard against rounding in log2 near powers of two.
    while k > 0 && 2f64.powi(k - 1) >= v {
        k -= 1;
    }
    while 2f64.powi(k) < v {
        k += 1;
    }
    Ok(k as u32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeoffParams {
    pub n: u64,
    pub key_bits: u64,
    pub word_bits: u64,
    /// Space budget in words.
    pub space: u64,
}

impl TradeoffParams {
    pub fn new(n: u64, key_bits: u64, word_bits: u64, space: u64) -> Result<Self> {
        if n == 0 {
            return param("n must be at least 1");
        }
        if key_bits == 0 {
            return param("key length must be at least 1");
        }
        if word_bits < key_bits {
            return param(format!("word length {word_bits} is below key length {key_bits}"));
        }
        if space < n {
            return param(format!("space {space} is below n = {n}"));
        }
        Ok(TradeoffParams {
            n,
            key_bits,
            word_bits,
            space,
        })
    }

    /// `a = lg(S/n) + lg w`.
    pub fn a(&self) -> u32 {
        lg_ratio(Ratio::new(self.space as u128, self.n as u128)) + lg_int(self.word_bits as u128)
    }
}

/// The four branch values and their parameter `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branches {
    pub a: u32,
    pub values: [Ratio; 4],
}

impl Branches {
    /// Minimum value and its 1-based branch, ties to the lower branch.
    pub fn optimal(&self) -> (Ratio, u8) {
        let mut best = 0;
        for i in 1..4 {
            if self.values[i] < self.values[best] {
                best = i;
            }
        }
        (self.values[best], best as u8 + 1)
    }
}

pub fn branches(p: &TradeoffParams) -> Branches {
    let a = p.a() as u128;
    let lg_n = lg_int(p.n as u128) as u128;
    let lg_w = lg_int(p.word_bits as u128) as u128;
    let l = p.key_bits as u128;

    let b1 = Ratio::new(lg_n, lg_w);
    let b2 = Ratio::int(lg_ratio(Ratio::new(l.saturating_sub(lg_n), a)) as u128);
    let la = lg_ratio(Ratio::new(l, a)) as u128;
    let b3 = Ratio::new(la, lg_ratio(Ratio::new(a * la, lg_n)) as u128);
    let inner = lg_ratio(Ratio::new(lg_n, a)) as u128;
    let b4 = Ratio::new(la, lg_ratio(Ratio::new(la, inner)) as u128);
    Branches {
        a: a as u32,
        values: [b1, b2, b3, b4],
    }
}

pub fn optimal(p: &TradeoffParams) -> (Ratio, u8) {
    branches(p).optimal()
}

pub const CSV_HEADER: &str = "n,key_bits,word_bits,space,a,b1,b2,b3,b4,min,argmin";

pub fn csv_row(p: &TradeoffParams) -> String {
    let b = branches(p);
    let (min, arg) = b.optimal();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        p.n, p.key_bits, p.word_bits, p.space, b.a, b.values[0], b.values[1], b.values[2], b.values[3], min, arg
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: u128, d: u128) -> Ratio {
        Ratio::new(n, d)
    }

    #[test]
    fn lg_values() {
        let xs = [
            0.0, 0.5, 1.0, 2.0, 3.0, 6.0, 7.0, 14.0, 30.0, 62.0, 64.0, 100.0, 126.0, 1e6,
        ];
        let want = [1, 2, 2, 2, 3, 3, 4, 4, 5, 6, 7, 7, 7, 20];
        for (x, w) in xs.iter().zip(want) {
            assert_eq!(lg_paper(*x).unwrap(), w, "lg({x})");
        }
        assert!(lg_paper(-1.0).is_err());
        assert!(lg_paper(f64::NAN).is_err());
        assert_eq!(lg_ratio(r(1, 2)), 2);
        assert_eq!(lg_int(0), 1);
        assert_eq!(lg_int(6), 3);
    }

    #[test]
    fn frozen_branch_values() {
        // (n, ℓ, w, S) → a, [b1..b4] as ratios, argmin.
        type Case = ((u64, u64, u64, u64), u32, [(u128, u128); 4], u8);
        let cases: [Case; 10] = [
            ((1 << 20, 64, 64, 1 << 26), 14, [(3, 1), (3, 1), (3, 2), (3, 2)], 3),
            ((16, 64, 64, 256), 12, [(5, 7), (3, 1), (3, 4), (3, 2)], 1),
            ((1 << 16, 32, 64, 1 << 20), 12, [(17, 7), (2, 1), (1, 1), (3, 2)], 3),
            ((256, 8, 64, 256), 9, [(9, 7), (1, 1), (1, 1), (1, 1)], 2),
            ((1 << 16, 64, 64, 1 << 18), 10, [(17, 7), (3, 1), (4, 3), (2, 1)], 3),
            ((1 << 16, 64, 64, 1 << 19), 11, [(17, 7), (3, 1), (3, 2), (3, 2)], 3),
            ((1, 1, 1, 1), 4, [(1, 1), (1, 1), (2, 3), (1, 1)], 3),
            ((1000, 32, 64, 4000), 10, [(10, 7), (3, 1), (1, 1), (3, 2)], 3),
            ((4096, 16, 16, 4096), 7, [(13, 5), (2, 1), (3, 2), (3, 2)], 3),
            ((1 << 10, 64, 128, 1 << 30), 29, [(11, 8), (2, 1), (3, 4), (3, 2)], 3),
        ];
        for ((n, l, w, s), a, vals, arg) in cases {
            let p = TradeoffParams::new(n, l, w, s).unwrap();
            let b = branches(&p);
            assert_eq!(b.a, a, "{p:?}");
            for (got, want) in b.values.iter().zip(vals) {
                assert_eq!(*got, r(want.0, want.1), "{p:?}");
            }
            assert_eq!(b.optimal().1, arg, "{p:?}");
        }
    }

    #[test]
    fn b1_example_and_clamp() {
        let p = TradeoffParams::new(1 << 20, 64, 64, 1 << 26).unwrap();
        assert_eq!(branches(&p).values[0], Ratio::int(3));
        // ℓ below lg n: numerator clamps to zero and lg(0) = 1.
        let p = TradeoffParams::new(1 << 20, 16, 64, 1 << 20).unwrap();
        assert_eq!(branches(&p).values[1], Ratio::int(1));
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(TradeoffParams::new(0, 8, 8, 8).is_err());
        assert!(TradeoffParams::new(4, 16, 8, 8).is_err());
        assert!(TradeoffParams::new(8, 8, 8, 4).is_err());
        assert!(TradeoffParams::new(8, 0, 8, 8).is_err());
    }

    #[test]
    fn csv_format() {
        let p = TradeoffParams::new(1 << 20, 64, 64, 1 << 26).unwrap();
        assert_eq!(csv_row(&p), "1048576,64,64,67108864,14,3,3,1.5,1.5,1.5,3");
        assert_eq!(CSV_HEADER.split(',').count(), csv_row(&p).split(',').count());
    }

    proptest! {
        #[test]
        fn lg_nondecreasing(x in 0.0f64..1e12, y in 0.0f64..1e12) {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(lg_paper(lo).unwrap() <= lg_paper(hi).unwrap());
            prop_assert!(lg_paper(lo).unwrap() >= 1);
        }

        #[test]
        fn lg_ratio_matches_float(num in 0u128..1_000_000, den in 1u128..1000) {
            prop_assert_eq!(lg_ratio(Ratio::new(num, den)), lg_paper(num as f64 / den as f64).unwrap());
        }

        #[test]
        fn optimal_is_min(ln in 0u32..40, l in 1u64..=64, wx in 0u64..64, sx in 0u32..40) {
            let n = 1u64 << ln;
            let w = l + wx;
            let p = TradeoffParams::new(n, l, w, n << sx.min(63 - ln)).unwrap();
            let b = branches(&p);
            let (m, arg) = b.optimal();
            prop_assert!(b.values.iter().all(|v| m <= *v));
            prop_assert_eq!(b.values[arg as usize - 1], m);
            prop_assert!(b.values[..arg as usize - 1].iter().all(|v| m < *v));
        }
    }
}
