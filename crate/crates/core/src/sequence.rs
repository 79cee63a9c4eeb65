//! Directory-of-PLY sequences addressed by a printf-style frame pattern
//! such as `name_%04d.ply`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::FrameSequence;
use crate::ply::{load_ply, save_ply, PlyFormat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePattern {
    prefix: String,
    suffix: String,
    width: usize,
}

impl FramePattern {
    pub fn parse(pattern: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("frame pattern '{pattern}' needs exactly one %d or %0Nd"));
        let start = pattern.find('%').ok_or_else(bad)?;
        let rest = &pattern[start + 1..];
        let d = rest.find('d').ok_or_else(bad)?;
        let flags = &rest[..d];
        let width = if flags.is_empty() {
            0
        } else if flags.starts_with('0') && flags[1..].chars().all(|c| c.is_ascii_digit()) && flags.len() > 1 {
            flags[1..].parse().map_err(|_| bad())?
        } else {
            return Err(bad());
        };
        let suffix = &rest[d + 1..];
        if suffix.contains('%') || pattern[..start].contains('/') || suffix.contains('/') {
            return Err(bad());
        }
        Ok(Self {
            prefix: pattern[..start].to_string(),
            suffix: suffix.to_string(),
            width,
        })
    }

    pub fn file_name(&self, frame: u64) -> String {
        format!("{}{:0width$}{}", self.prefix, frame, self.suffix, width = self.width)
    }

    /// Frame number encoded in `name`, if it matches.
    pub fn frame_number(&self, name: &str) -> Option<u64> {
        let middle = name.strip_prefix(&self.prefix)?.strip_suffix(&self.suffix)?;
        if middle.is_empty() || !middle.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if self.width > 0 && middle.len() < self.width {
            return None;
        }
        middle.parse().ok()
    }

    /// Matching files in `dir`, ordered by frame number.
    pub fn scan(&self, dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut found = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name();
            if let Some(n) = name.to_str().and_then(|s| self.frame_number(s)) {
                found.push((n, entry.path()));
            }
        }
        found.sort();
        Ok(found)
    }
}

/// Loads every frame matching `pattern` in `dir`. Returns the sequence and
/// the frame numbers found, in order.
pub fn load_sequence(dir: &Path, pattern: &FramePattern) -> Result<(FrameSequence, Vec<u64>)> {
    let files = pattern.scan(dir)?;
    if files.is_empty() {
        return Err(Error::Argument(format!(
            "no files in {} match the frame pattern",
            dir.display()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    let mut numbers = Vec::with_capacity(files.len());
    for (n, path) in files {
        frames.push(load_ply(&path)?);
        numbers.push(n);
    }
    Ok((FrameSequence::new(frames), numbers))
}

pub fn save_sequence(
    seq: &FrameSequence,
    dir: &Path,
    pattern: &FramePattern,
    numbers: &[u64],
    format: PlyFormat,
) -> Result<()> {
    if numbers.len() != seq.len() {
        return Err(Error::Shape(format!(
            "{} frame numbers for {} frames",
            numbers.len(),
            seq.len()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (cloud, &n) in seq.frames.iter().zip(numbers) {
        save_ply(cloud, dir.join(pattern.file_name(n)), format)?;
    }
    Ok(())
}
