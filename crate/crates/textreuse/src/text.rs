//! Small text utilities shared by the detectors and the generator: character
//! counting, char-offset slicing, a stable 64-bit hash, and atomic file
//! writes.

use crate::error::{Error, Result};
use crate::span::Span;
use std::fs;
use std::io::Write;
use std::path::Path;

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte range corresponding to a character span, or None when the span
/// reaches past the end of the text.
pub fn byte_range(text: &str, span: Span) -> Option<std::ops::Range<usize>> {
    let mut start_byte = None;
    let mut count = 0usize;
    for (byte, _) in text.char_indices() {
        if count == span.start {
            start_byte = Some(byte);
        }
        if count == span.end() {
            return Some(start_byte?..byte);
        }
        count += 1;
    }
    if span.end() == count {
        return Some(start_byte?..text.len());
    }
    None
}

/// Substring addressed by a character span.
pub fn slice(text: &str, span: Span) -> Option<&str> {
    byte_range(text, span).map(|r| &text[r])
}

/// FNV-1a over raw bytes; the stable hash used for seeding and n-gram
/// bucketing (deterministic across runs, unlike `DefaultHasher`).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Incremental FNV-1a, for hashing token sequences without concatenating.
pub struct Fnv1a(u64);

impl Fnv1a {
    pub fn new() -> Fnv1a {
        Fnv1a(0xcbf29ce484222325)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a::new()
    }
}

/// Write via a temp file in the target directory plus rename, so readers
/// never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("unnamed");
    let tmp = dir.join(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}
