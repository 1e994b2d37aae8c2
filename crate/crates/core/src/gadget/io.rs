//! Labeled-sample serialization. Text is line-oriented with `{:?}` floats
//! (bit-exact round trips); binary stores little-endian payloads behind a
//! magic tag. Both carry provenance, the norm bound, optional block shape,
//! and an optional embedded run manifest.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gadget::{GadgetShape, LabeledSample, Provenance, SamplePoint};
use crate::manifest::{push_manifest_block, read_manifest_block, RunManifest};

const BIN_MAGIC: &[u8; 8] = b"NNSMP\x00v1";

pub fn write_sample(s: &LabeledSample, manifest: Option<&RunManifest>) -> String {
    let mut out = String::new();
    if let Some(m) = manifest {
        out.push_str(&format!("# manifest {}\n", m.to_json()));
    }
    out.push_str("sample v1\n");
    out.push_str(&format!("dim {}\n", s.dim()));
    out.push_str(&format!("points {}\n", s.len()));
    out.push_str(&format!("normbound {:?}\n", s.norm_bound()));
    match s.shape() {
        Some(sh) => out.push_str(&format!(
            "shape {} {} {}\n",
            sh.n_prime, sh.q, sh.clause_size
        )),
        None => out.push_str("shape none\n"),
    }
    out.push_str(&format!(
        "provenance {}\n",
        serde_json::to_string(s.provenance()).expect("provenance serializes")
    ));
    for p in s.points() {
        out.push_str(&format!("{}", p.y));
        for v in &p.x {
            out.push_str(&format!(" {v:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_sample(text: &str) -> Result<(LabeledSample, Option<RunManifest>)> {
    let manifest = crate::manifest::extract_manifest(text);
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some("sample v1") => {}
        other => {
            return Err(Error::Parse(format!(
                "expected 'sample v1' header, found {other:?}"
            )))
        }
    }
    let dim = parse_kv_usize(lines.next(), "dim")?;
    let n_points = parse_kv_usize(lines.next(), "points")?;
    let norm_bound = {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing normbound line".into()))?;
        let rest = line
            .strip_prefix("normbound ")
            .ok_or_else(|| Error::Parse(format!("expected normbound line, found {line:?}")))?;
        rest.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad norm bound {rest:?}")))?
    };
    let shape = {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing shape line".into()))?;
        let rest = line
            .strip_prefix("shape ")
            .ok_or_else(|| Error::Parse(format!("expected shape line, found {line:?}")))?;
        if rest == "none" {
            None
        } else {
            let parts: Vec<usize> = rest
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Parse(format!("bad shape field {t:?}")))
                })
                .collect::<Result<_>>()?;
            if parts.len() != 3 {
                return Err(Error::Parse(format!(
                    "shape needs 3 fields, found {}",
                    parts.len()
                )));
            }
            Some(GadgetShape {
                n_prime: parts[0],
                q: parts[1],
                clause_size: parts[2],
            })
        }
    };
    let provenance = {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing provenance line".into()))?;
        let rest = line
            .strip_prefix("provenance ")
            .ok_or_else(|| Error::Parse(format!("expected provenance line, found {line:?}")))?;
        serde_json::from_str::<Provenance>(rest)
            .map_err(|e| Error::Parse(format!("bad provenance: {e}")))?
    };
    let mut points = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing point line {i}")))?;
        let mut toks = line.split_whitespace();
        let y: u8 = toks
            .next()
            .ok_or_else(|| Error::Parse(format!("empty point line {i}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad label on point {i}")))?;
        let x: Vec<f64> = toks
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad coordinate {t:?} on point {i}")))
            })
            .collect::<Result<_>>()?;
        if x.len() != dim {
            return Err(Error::Parse(format!(
                "point {i} has {} coordinates, expected {dim}",
                x.len()
            )));
        }
        points.push(SamplePoint { x, y });
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing content after declared points".into()));
    }
    Ok((
        LabeledSample::new(dim, points, provenance, norm_bound, shape)?,
        manifest,
    ))
}

fn parse_kv_usize(line: Option<&str>, key: &str) -> Result<usize> {
    let line = line.ok_or_else(|| Error::Parse(format!("missing {key} line")))?;
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| Error::Parse(format!("expected {key} line, found {line:?}")))?;
    rest.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {key} value {rest:?}")))
}

pub fn write_sample_binary(s: &LabeledSample, manifest: Option<&RunManifest>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(BIN_MAGIC);
    push_manifest_block(&mut buf, manifest);
    buf.extend_from_slice(&(s.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
    buf.extend_from_slice(&s.norm_bound().to_le_bytes());
    match s.shape() {
        None => buf.push(0),
        Some(sh) => {
            buf.push(1);
            buf.extend_from_slice(&(sh.n_prime as u64).to_le_bytes());
            buf.extend_from_slice(&(sh.q as u64).to_le_bytes());
            buf.extend_from_slice(&(sh.clause_size as u64).to_le_bytes());
        }
    }
    let prov = serde_json::to_vec(s.provenance()).expect("provenance serializes");
    buf.extend_from_slice(&(prov.len() as u32).to_le_bytes());
    buf.extend_from_slice(&prov);
    for p in s.points() {
        buf.push(p.y);
        for v in &p.x {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

pub fn read_sample_binary(bytes: &[u8]) -> Result<(LabeledSample, Option<RunManifest>)> {
    if bytes.len() < BIN_MAGIC.len() || &bytes[..BIN_MAGIC.len()] != BIN_MAGIC {
        return Err(Error::Parse("bad sample magic".into()));
    }
    let rest = &bytes[BIN_MAGIC.len()..];
    let (manifest, used) = read_manifest_block(rest)?;
    let mut cur = &rest[used..];
    let dim = take_u64(&mut cur)? as usize;
    let n_points = take_u64(&mut cur)? as usize;
    let norm_bound = take_f64(&mut cur)?;
    let shape = match take_u8(&mut cur)? {
        0 => None,
        1 => Some(GadgetShape {
            n_prime: take_u64(&mut cur)? as usize,
            q: take_u64(&mut cur)? as usize,
            clause_size: take_u64(&mut cur)? as usize,
        }),
        other => return Err(Error::Parse(format!("unknown shape tag {other}"))),
    };
    let prov_len = take_u32(&mut cur)? as usize;
    if cur.len() < prov_len {
        return Err(Error::Parse("truncated provenance".into()));
    }
    let provenance: Provenance = serde_json::from_slice(&cur[..prov_len])
        .map_err(|e| Error::Parse(format!("bad provenance: {e}")))?;
    cur = &cur[prov_len..];
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let y = take_u8(&mut cur)?;
        let mut x = Vec::with_capacity(dim);
        for _ in 0..dim {
            x.push(take_f64(&mut cur)?);
        }
        points.push(SamplePoint { x, y });
    }
    if !cur.is_empty() {
        return Err(Error::Parse(format!(
            "{} trailing bytes after sample payload",
            cur.len()
        )));
    }
    Ok((
        LabeledSample::new(dim, points, provenance, norm_bound, shape)?,
        manifest,
    ))
}

fn take_u8(cur: &mut &[u8]) -> Result<u8> {
    if cur.is_empty() {
        return Err(Error::Parse("truncated sample payload".into()));
    }
    let v = cur[0];
    *cur = &cur[1..];
    Ok(v)
}

fn take_u32(cur: &mut &[u8]) -> Result<u32> {
    if cur.len() < 4 {
        return Err(Error::Parse("truncated sample payload".into()));
    }
    let v = u32::from_le_bytes(cur[..4].try_into().unwrap());
    *cur = &cur[4..];
    Ok(v)
}

fn take_u64(cur: &mut &[u8]) -> Result<u64> {
    if cur.len() < 8 {
        return Err(Error::Parse("truncated sample payload".into()));
    }
    let v = u64::from_le_bytes(cur[..8].try_into().unwrap());
    *cur = &cur[8..];
    Ok(v)
}

fn take_f64(cur: &mut &[u8]) -> Result<f64> {
    if cur.len() < 8 {
        return Err(Error::Parse("truncated sample payload".into()));
    }
    let v = f64::from_le_bytes(cur[..8].try_into().unwrap());
    *cur = &cur[8..];
    Ok(v)
}

pub fn write_sample_file<P: AsRef<Path>>(
    path: P,
    s: &LabeledSample,
    manifest: Option<&RunManifest>,
) -> Result<()> {
    std::fs::write(path, write_sample(s, manifest))?;
    Ok(())
}

pub fn read_sample_file<P: AsRef<Path>>(path: P) -> Result<(LabeledSample, Option<RunManifest>)> {
    let text = std::fs::read_to_string(path)?;
    read_sample(&text)
}
