//! On-disk character tables.
//!
//! One file per modulus, `chars-<q>.bin`, little-endian:
//! `q: u64`, `φ(q): u64`, group exponent `L: u64`, then the `φ(q) × q`
//! exponent matrix row-major as `u32` (`u32::MAX` marks non-units).
//! Loaded tables are checked against the canonical construction, so a
//! stale or corrupted file is rebuilt rather than trusted.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use momentlab_core::characters::CharacterGroup;

use crate::error::{AppError, AppResult, IoContext};

/// Cache directory used when no `--cache-dir` is given.
pub const CACHE_DIR_ENV: &str = "MOMENTLAB_CACHE_DIR";

const HEADER: usize = 24;

#[derive(Debug, Clone)]
pub struct CharacterCache {
    dir: Option<PathBuf>,
}

impl CharacterCache {
    /// No persistence: every group is built in memory.
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    /// `dir` if given, else `$MOMENTLAB_CACHE_DIR`, else disabled.
    pub fn from_config(dir: Option<&Path>) -> Self {
        match dir {
            Some(d) => Self::at(d),
            None => std::env::var_os(CACHE_DIR_ENV).map_or_else(Self::disabled, Self::at),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path_for(&self, q: u64) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("chars-{q}.bin")))
    }

    /// Loads the table for `q`, building and storing it on a miss.
    pub fn group(&self, q: u64) -> AppResult<CharacterGroup> {
        let Some(path) = self.path_for(q) else {
            return Ok(CharacterGroup::new(q)?);
        };
        if let Ok(bytes) = fs::read(&path) {
            if let Some(g) = decode(&bytes).and_then(|(q0, l, t)| (q0 == q).then(|| CharacterGroup::from_table(q, l, &t).ok()).flatten()) {
                return Ok(g);
            }
        }
        let group = CharacterGroup::new(q)?;
        store(&path, &group)?;
        Ok(group)
    }
}

pub fn encode(group: &CharacterGroup) -> Vec<u8> {
    let table = group.exponent_table();
    let mut out = Vec::with_capacity(HEADER + 4 * table.len());
    out.extend_from_slice(&group.modulus().to_le_bytes());
    out.extend_from_slice(&(group.len() as u64).to_le_bytes());
    out.extend_from_slice(&group.exponent().to_le_bytes());
    for &e in table {
        out.extend_from_slice(&e.to_le_bytes());
    }
    out
}

/// (q, exponent, table), or `None` when the layout is inconsistent.
pub fn decode(bytes: &[u8]) -> Option<(u64, u64, Vec<u32>)> {
    let word = |i: usize| -> Option<u64> { Some(u64::from_le_bytes(bytes.get(8 * i..8 * i + 8)?.try_into().ok()?)) };
    let (q, phi, l) = (word(0)?, word(1)?, word(2)?);
    let body = &bytes[HEADER..];
    let len = usize::try_from(phi.checked_mul(q)?).ok()?;
    if body.len() != 4 * len {
        return None;
    }
    let table = body.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Some((q, l, table))
}

fn store(path: &Path, group: &CharacterGroup) -> AppResult<()> {
    let dir = path.parent().ok_or_else(|| AppError::Config(format!("bad cache path {}", path.display())))?;
    fs::create_dir_all(dir).at(dir)?;
    // write then rename, so readers never see a partial file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp).at(&tmp)?;
    file.write_all(&encode(group)).at(&tmp)?;
    file.sync_all().at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout() {
        let g = CharacterGroup::new(5).unwrap();
        let bytes = encode(&g);
        assert_eq!(bytes.len(), 24 + 4 * 4 * 5);
        assert_eq!(&bytes[..8], &5u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &4u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &4u64.to_le_bytes());
        // residue 0 is a non-unit for every character
        assert_eq!(&bytes[24..28], &u32::MAX.to_le_bytes());
        let (q, l, t) = decode(&bytes).unwrap();
        assert_eq!((q, l), (5, 4));
        assert_eq!(t, g.exponent_table());
        assert!(decode(&bytes[..30]).is_none());
    }
}
