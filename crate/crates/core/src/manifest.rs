//! Run manifests: the exact invocation recorded inside every output file,
//! sufficient to reproduce the file byte for byte. No timestamps, no
//! environment capture; determinism is seed + parameters only.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    /// Canonical parameter map (flag name without dashes -> rendered value).
    pub params: BTreeMap<String, String>,
    /// Exact argv after the program name; replaying it reproduces the outputs.
    pub argv: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Find an embedded manifest in a text artifact (`c manifest {...}` in formula
/// files, `# manifest {...}` in sample and weight files).
pub fn extract_manifest(text: &str) -> Option<RunManifest> {
    for line in text.lines() {
        let line = line.trim();
        let json = line
            .strip_prefix("c manifest ")
            .or_else(|| line.strip_prefix("# manifest "))?;
        return RunManifest::from_json(json).ok();
    }
    None
}

/// Append a length-prefixed manifest block (u32 little-endian length, then
/// JSON bytes; length 0 when absent) to a binary artifact under construction.
pub fn push_manifest_block(buf: &mut Vec<u8>, manifest: Option<&RunManifest>) {
    match manifest {
        None => buf.extend_from_slice(&0u32.to_le_bytes()),
        Some(m) => {
            let json = m.to_json();
            buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
            buf.extend_from_slice(json.as_bytes());
        }
    }
}

/// Read a manifest block written by `push_manifest_block`; returns the
/// manifest (if any) and the number of bytes consumed.
pub fn read_manifest_block(bytes: &[u8]) -> Result<(Option<RunManifest>, usize)> {
    if bytes.len() < 4 {
        return Err(Error::Parse("truncated manifest block".into()));
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    if len == 0 {
        return Ok((None, 4));
    }
    if bytes.len() < 4 + len {
        return Err(Error::Parse("truncated manifest block".into()));
    }
    let json = std::str::from_utf8(&bytes[4..4 + len])
        .map_err(|_| Error::Parse("manifest block is not UTF-8".into()))?;
    Ok((Some(RunManifest::from_json(json)?), 4 + len))
}
