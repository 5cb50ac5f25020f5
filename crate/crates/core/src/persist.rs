//! On-disk format for built structures.
//!
//! Layout, little-endian: the magic `PRED`, a `u16` format version, the
//! payload length as `u64`, the payload, and a 64-bit FNV-1a checksum of the
//! payload. The payload is the bincode encoding of [`BuiltStructure`]:
//! configuration and seed, the plan with its branch tag, and the level-ordered
//! node pool with its bit total.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::strategy::BuiltStructure;
use crate::structure::{NodeId, PredStructure};

pub const MAGIC: &[u8; 4] = b"PRED";
pub const VERSION: u16 = 1;
/// Bytes before the payload.
pub const HEADER_LEN: usize = 4 + 2 + 8;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn integrity<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Integrity(msg.into()))
}

pub fn to_bytes(s: &BuiltStructure) -> Result<Vec<u8>> {
    let payload = bincode::serialize(s).map_err(|e| Error::Build(format!("serialization failed: {e}")))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
    Ok(out)
}

/// Rewrites the trailing checksum to match the current payload.
pub fn reseal(bytes: &mut [u8]) -> Result<()> {
    if bytes.len() < HEADER_LEN + 8 {
        return integrity("file too short");
    }
    let end = bytes.len() - 8;
    let sum = fnv1a64(&bytes[HEADER_LEN..end]);
    bytes[end..].copy_from_slice(&sum.to_le_bytes());
    Ok(())
}

pub fn from_bytes(bytes: &[u8]) -> Result<BuiltStructure> {
    if bytes.len() < HEADER_LEN + 8 {
        return integrity(format!("file of {} bytes is too short", bytes.len()));
    }
    if &bytes[..4] != MAGIC {
        return integrity("bad magic");
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return integrity(format!("unsupported format version {version}"));
    }
    let len = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    if len != (bytes.len() - HEADER_LEN - 8) as u64 {
        return integrity(format!("payload length {len} does not match file size {}", bytes.len()));
    }
    let payload = &bytes[HEADER_LEN..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let actual = fnv1a64(payload);
    if stored != actual {
        return integrity(format!(
            "checksum mismatch: stored {stored:#018x}, computed {actual:#018x}"
        ));
    }
    let s: BuiltStructure =
        bincode::deserialize(payload).map_err(|e| Error::Integrity(format!("payload does not decode: {e}")))?;
    check_pool(&s.structure)?;
    Ok(s)
}

/// Rejects pools whose references would make queries go out of bounds.
fn check_pool(s: &PredStructure) -> Result<()> {
    let len = s.nodes().len();
    match s.root() {
        None if len != 0 => return integrity("nodes without a root"),
        Some(NodeId(r)) if r as usize >= len => return integrity("root out of range"),
        _ => {}
    }
    let mut parents = vec![0u32; len];
    for (i, node) in s.nodes().iter().enumerate() {
        for c in node.children() {
            let c = c.0 as usize;
            if c >= len || c <= i {
                return integrity(format!("node {i} references node {c} out of level order"));
            }
            parents[c] += 1;
        }
    }
    if parents.iter().skip(1).any(|&p| p != 1) {
        return integrity("node pool is not a tree");
    }
    if s.recount_bits() != s.bits_used() {
        return integrity(format!(
            "bit total {} does not match recount {}",
            s.bits_used(),
            s.recount_bits()
        ));
    }
    Ok(())
}

pub fn save(s: &BuiltStructure, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(s)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<BuiltStructure> {
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::KeySet;
    use crate::strategy::{build, BuildConfig};

    fn sample() -> BuiltStructure {
        let y = KeySet::new(vec![3, 7, 9, 100, 2000, 40000], 16).unwrap();
        build(&y, &BuildConfig::new(16, 64, 64).with_branch(2).with_seed(5)).unwrap()
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
    }

    #[test]
    fn round_trip() {
        let s = sample();
        let bytes = to_bytes(&s).unwrap();
        assert_eq!(&bytes[..4], b"PRED");
        let t = from_bytes(&bytes).unwrap();
        assert_eq!(s, t);
        assert_eq!(to_bytes(&t).unwrap(), bytes);
    }

    #[test]
    fn detects_corruption() {
        let bytes = to_bytes(&sample()).unwrap();
        let mut bad = bytes.clone();
        bad[HEADER_LEN + 3] ^= 0x40;
        assert!(matches!(from_bytes(&bad), Err(Error::Integrity(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Integrity(_))));
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Integrity(_))
        ));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(from_bytes(&bad), Err(Error::Integrity(_))));
    }

    #[test]
    fn reseal_accepts_edited_payload() {
        let mut bytes = to_bytes(&sample()).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 1;
        assert!(from_bytes(&bytes).is_err());
        reseal(&mut bytes).unwrap();
        assert!(from_bytes(&bytes).is_ok());
    }
}
