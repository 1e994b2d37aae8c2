//! Weight serialization. The text form is line-oriented and prints floats
//! with `{:?}` so reading back reproduces the exact bit pattern; the binary
//! form stores raw little-endian f64 payloads behind a magic tag and an
//! optional embedded run manifest.

use std::path::Path;

use crate::error::{Error, Result};
use crate::manifest::{push_manifest_block, read_manifest_block, RunManifest};
use crate::neural::{CnnFilter, FcWeights, NetworkWeights};

const BIN_MAGIC: &[u8; 8] = b"NNWTS\x00v1";

pub fn write_weights(w: &NetworkWeights) -> String {
    write_weights_with_manifest(w, None)
}

pub fn write_weights_with_manifest(w: &NetworkWeights, manifest: Option<&RunManifest>) -> String {
    let mut out = String::new();
    if let Some(m) = manifest {
        out.push_str(&format!("# manifest {}\n", m.to_json()));
    }
    out.push_str("weights v1\n");
    match w {
        NetworkWeights::Fc(fc) => {
            out.push_str(&format!("form fc {} {}\n", fc.n(), fc.m()));
            for col in fc.columns() {
                let line: Vec<String> = col.iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        NetworkWeights::Cnn(f) => {
            out.push_str(&format!("form cnn {}\n", f.t()));
            let line: Vec<String> = f.weights().iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn read_weights(text: &str) -> Result<NetworkWeights> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match lines.next() {
        Some("weights v1") => {}
        other => {
            return Err(Error::Parse(format!(
                "expected 'weights v1' header, found {other:?}"
            )))
        }
    }
    let form_line = lines
        .next()
        .ok_or_else(|| Error::Parse("missing form line".into()))?;
    let parts: Vec<&str> = form_line.split_whitespace().collect();
    match parts.as_slice() {
        ["form", "fc", n, m] => {
            let n: usize = n
                .parse()
                .map_err(|_| Error::Parse(format!("bad fc dimension {n:?}")))?;
            let m: usize = m
                .parse()
                .map_err(|_| Error::Parse(format!("bad fc width {m:?}")))?;
            let mut cols = Vec::with_capacity(m);
            for j in 0..m {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse(format!("missing column {j}")))?;
                cols.push(parse_floats(line, n, &format!("column {j}"))?);
            }
            Ok(NetworkWeights::Fc(FcWeights::new(cols, n)?))
        }
        ["form", "cnn", t] => {
            let t: usize = t
                .parse()
                .map_err(|_| Error::Parse(format!("bad patch size {t:?}")))?;
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("missing filter line".into()))?;
            let weights = parse_floats(line, t, "filter")?;
            Ok(NetworkWeights::Cnn(CnnFilter::new(weights)?))
        }
        _ => Err(Error::Parse(format!("unrecognized form line {form_line:?}"))),
    }
}

fn parse_floats(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad float {tok:?} in {what}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::Parse(format!(
            "{what} has {} values, expected {expected}",
            vals.len()
        )));
    }
    Ok(vals)
}

pub fn write_weights_binary(w: &NetworkWeights, manifest: Option<&RunManifest>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(BIN_MAGIC);
    push_manifest_block(&mut buf, manifest);
    match w {
        NetworkWeights::Fc(fc) => {
            buf.push(0u8);
            buf.extend_from_slice(&(fc.n() as u64).to_le_bytes());
            buf.extend_from_slice(&(fc.m() as u64).to_le_bytes());
            for col in fc.columns() {
                for v in col {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        NetworkWeights::Cnn(f) => {
            buf.push(1u8);
            buf.extend_from_slice(&(f.t() as u64).to_le_bytes());
            for v in f.weights() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    buf
}

pub fn read_weights_binary(bytes: &[u8]) -> Result<(NetworkWeights, Option<RunManifest>)> {
    if bytes.len() < BIN_MAGIC.len() || &bytes[..BIN_MAGIC.len()] != BIN_MAGIC {
        return Err(Error::Parse("bad weights magic".into()));
    }
    let rest = &bytes[BIN_MAGIC.len()..];
    let (manifest, used) = read_manifest_block(rest)?;
    let mut cur = &rest[used..];
    let form = take_u8(&mut cur)?;
    let weights = match form {
        0 => {
            let n = take_u64(&mut cur)? as usize;
            let m = take_u64(&mut cur)? as usize;
            if m > n {
                return Err(Error::Parse(format!("fc width {m} exceeds dimension {n}")));
            }
            let mut cols = Vec::with_capacity(m);
            for _ in 0..m {
                let mut col = Vec::with_capacity(n);
                for _ in 0..n {
                    col.push(take_f64(&mut cur)?);
                }
                cols.push(col);
            }
            NetworkWeights::Fc(FcWeights::new(cols, n)?)
        }
        1 => {
            let t = take_u64(&mut cur)? as usize;
            let mut w = Vec::with_capacity(t);
            for _ in 0..t {
                w.push(take_f64(&mut cur)?);
            }
            NetworkWeights::Cnn(CnnFilter::new(w)?)
        }
        other => return Err(Error::Parse(format!("unknown weight form tag {other}"))),
    };
    if !cur.is_empty() {
        return Err(Error::Parse(format!(
            "{} trailing bytes after weights payload",
            cur.len()
        )));
    }
    Ok((weights, manifest))
}

fn take_u8(cur: &mut &[u8]) -> Result<u8> {
    if cur.is_empty() {
        return Err(Error::Parse("truncated weights payload".into()));
    }
    let v = cur[0];
    *cur = &cur[1..];
    Ok(v)
}

fn take_u64(cur: &mut &[u8]) -> Result<u64> {
    if cur.len() < 8 {
        return Err(Error::Parse("truncated weights payload".into()));
    }
    let v = u64::from_le_bytes(cur[..8].try_into().unwrap());
    *cur = &cur[8..];
    Ok(v)
}

fn take_f64(cur: &mut &[u8]) -> Result<f64> {
    if cur.len() < 8 {
        return Err(Error::Parse("truncated weights payload".into()));
    }
    let v = f64::from_le_bytes(cur[..8].try_into().unwrap());
    *cur = &cur[8..];
    Ok(v)
}

pub fn write_weights_file<P: AsRef<Path>>(
    path: P,
    w: &NetworkWeights,
    manifest: Option<&RunManifest>,
) -> Result<()> {
    std::fs::write(path, write_weights_with_manifest(w, manifest))?;
    Ok(())
}

pub fn read_weights_file<P: AsRef<Path>>(path: P) -> Result<NetworkWeights> {
    let text = std::fs::read_to_string(path)?;
    read_weights(&text)
}
