//! Static predecessor search over integer keys.
//!
//! Structures cover the whole time/space trade-off: packed B-trees, a tuned
//! van Emde Boas recursion with tabulation, and a length/cardinality
//! reduction for large universes, with optional space amplification. Every
//! query reports the memory cells it read and its recursion depth, and every
//! build reports the bits it occupies.

pub mod beame_fich;
pub mod btree;
pub mod cli;
pub mod error;
pub mod hashing;
pub mod oracle;
pub mod persist;
pub mod pred;
pub mod strategy;
pub mod structure;
pub mod tabulation;
pub mod tradeoff;
pub mod veb;
pub mod wordops;

pub use error::{Error, Result};
pub use oracle::KeySet;
pub use pred::Pred;
pub use strategy::{build, plan, BuildConfig, BuiltStructure, Plan, StructureKind};
pub use structure::{PredStructure, QueryStats, Searcher};
