use std::fmt;

use serde::{Deserialize, Serialize};

/// Answer to a predecessor query: a stored key, or the value below every key.
///
/// `NegInf` orders before every `Key`, so comparisons between answers behave
/// like comparisons on the extended key range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pred {
    NegInf,
    Key(u64),
}

impl Pred {
    pub fn key(self) -> Option<u64> {
        match self {
            Pred::NegInf => None,
            Pred::Key(k) => Some(k),
        }
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, Pred::NegInf)
    }

    /// Concatenates a high part in front of this answer. `-inf` absorbs.
    pub fn prepend(self, high: u64, low_bits: u32) -> Pred {
        match self {
            Pred::NegInf => Pred::NegInf,
            Pred::Key(low) => Pred::Key(crate::wordops::concat(high, low, low_bits)),
        }
    }
}

impl From<Option<u64>> for Pred {
    fn from(v: Option<u64>) -> Self {
        v.map_or(Pred::NegInf, Pred::Key)
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::NegInf => f.write_str("-inf"),
            Pred::Key(k) => write!(f, "{k}"),
        }
    }
}
