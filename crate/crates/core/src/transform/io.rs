//! Binary serialization for transform chains: little-endian dimensions and
//! raw f64 payloads behind a magic tag, with an optional embedded manifest.
//! Block stages store only their position matrices; caches are rebuilt
//! deterministically on load.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::manifest::{push_manifest_block, read_manifest_block, RunManifest};
use crate::transform::{BlockTransform, CnnTransform, Correlator, TransformChain};

const BIN_MAGIC: &[u8; 8] = b"NNTRF\x00v1";

pub fn write_chain(chain: &TransformChain, manifest: Option<&RunManifest>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(BIN_MAGIC);
    push_manifest_block(&mut buf, manifest);
    match chain {
        TransformChain::Fc { block, dense } => {
            buf.push(0);
            push_block(&mut buf, block);
            match dense {
                None => buf.push(0),
                Some(c) => {
                    buf.push(1);
                    push_correlator(&mut buf, c);
                }
            }
        }
        TransformChain::Cnn { stages } => {
            buf.push(1);
            buf.extend_from_slice(&(stages.len() as u64).to_le_bytes());
            for s in stages {
                match s {
                    CnnTransform::Diagonal { z } => {
                        buf.push(0);
                        buf.extend_from_slice(&(z.len() as u64).to_le_bytes());
                        for v in z {
                            buf.extend_from_slice(&v.to_le_bytes());
                        }
                    }
                    CnnTransform::Dense(c) => {
                        buf.push(1);
                        push_correlator(&mut buf, c);
                    }
                    CnnTransform::ScaledOrthogonal { q, radius } => {
                        buf.push(2);
                        buf.extend_from_slice(&(q.nrows() as u64).to_le_bytes());
                        buf.extend_from_slice(&radius.to_le_bytes());
                        push_matrix(&mut buf, q);
                    }
                }
            }
        }
    }
    buf
}

pub fn read_chain(bytes: &[u8]) -> Result<(TransformChain, Option<RunManifest>)> {
    if bytes.len() < BIN_MAGIC.len() || &bytes[..BIN_MAGIC.len()] != BIN_MAGIC {
        return Err(Error::Parse("bad transform magic".into()));
    }
    let rest = &bytes[BIN_MAGIC.len()..];
    let (manifest, used) = read_manifest_block(rest)?;
    let mut cur = &rest[used..];
    let chain = match take_u8(&mut cur)? {
        0 => {
            let block = take_block(&mut cur)?;
            let dense = match take_u8(&mut cur)? {
                0 => None,
                1 => Some(take_correlator(&mut cur)?),
                other => return Err(Error::Parse(format!("unknown dense flag {other}"))),
            };
            TransformChain::Fc { block, dense }
        }
        1 => {
            let n_stages = take_u64(&mut cur)? as usize;
            let mut stages = Vec::with_capacity(n_stages);
            for _ in 0..n_stages {
                stages.push(match take_u8(&mut cur)? {
                    0 => {
                        let t = take_u64(&mut cur)? as usize;
                        let mut z = Vec::with_capacity(t);
                        for _ in 0..t {
                            z.push(take_f64(&mut cur)?);
                        }
                        CnnTransform::Diagonal { z }
                    }
                    1 => CnnTransform::Dense(take_correlator(&mut cur)?),
                    2 => {
                        let t = take_u64(&mut cur)? as usize;
                        let radius = take_f64(&mut cur)?;
                        let q = take_matrix(&mut cur, t, t)?;
                        CnnTransform::ScaledOrthogonal { q, radius }
                    }
                    other => return Err(Error::Parse(format!("unknown stage tag {other}"))),
                });
            }
            TransformChain::Cnn { stages }
        }
        other => return Err(Error::Parse(format!("unknown chain tag {other}"))),
    };
    if !cur.is_empty() {
        return Err(Error::Parse(format!(
            "{} trailing bytes after transform payload",
            cur.len()
        )));
    }
    chain.validate()?;
    Ok((chain, manifest))
}

fn push_block(buf: &mut Vec<u8>, block: &BlockTransform) {
    buf.extend_from_slice(&(block.k() as u64).to_le_bytes());
    buf.extend_from_slice(&(block.s() as u64).to_le_bytes());
    for z in block.diagonals() {
        push_matrix(buf, z);
    }
}

fn take_block(cur: &mut &[u8]) -> Result<BlockTransform> {
    let k = take_u64(cur)? as usize;
    let s = take_u64(cur)? as usize;
    if k == 0 || s == 0 || k > 1 << 20 || s > 1 << 20 {
        return Err(Error::Parse(format!("implausible block dimensions {k}x{s}")));
    }
    let mut diagonals = Vec::with_capacity(s);
    for _ in 0..s {
        diagonals.push(take_matrix(cur, k, k)?);
    }
    BlockTransform::new(k, s, diagonals)
}

fn push_correlator(buf: &mut Vec<u8>, c: &Correlator) {
    buf.extend_from_slice(&(c.dim() as u64).to_le_bytes());
    push_matrix(buf, c.matrix());
    push_matrix(buf, c.inverse_transpose());
    buf.extend_from_slice(&c.smin().to_le_bytes());
    buf.extend_from_slice(&c.smax().to_le_bytes());
}

fn take_correlator(cur: &mut &[u8]) -> Result<Correlator> {
    let dim = take_u64(cur)? as usize;
    if dim == 0 || dim > 1 << 20 {
        return Err(Error::Parse(format!("implausible correlator dimension {dim}")));
    }
    let m = take_matrix(cur, dim, dim)?;
    let inv_t = take_matrix(cur, dim, dim)?;
    let smin = take_f64(cur)?;
    let smax = take_f64(cur)?;
    Ok(Correlator::from_parts(m, inv_t, smin, smax))
}

fn push_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

fn take_matrix(cur: &mut &[u8], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let needed = rows * cols * 8;
    if cur.len() < needed {
        return Err(Error::Parse("truncated transform payload".into()));
    }
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = take_f64(cur)?;
        }
    }
    Ok(m)
}

fn take_u8(cur: &mut &[u8]) -> Result<u8> {
    if cur.is_empty() {
        return Err(Error::Parse("truncated transform payload".into()));
    }
    let v = cur[0];
    *cur = &cur[1..];
    Ok(v)
}

fn take_u64(cur: &mut &[u8]) -> Result<u64> {
    if cur.len() < 8 {
        return Err(Error::Parse("truncated transform payload".into()));
    }
    let v = u64::from_le_bytes(cur[..8].try_into().unwrap());
    *cur = &cur[8..];
    Ok(v)
}

fn take_f64(cur: &mut &[u8]) -> Result<f64> {
    if cur.len() < 8 {
        return Err(Error::Parse("truncated transform payload".into()));
    }
    let v = f64::from_le_bytes(cur[..8].try_into().unwrap());
    *cur = &cur[8..];
    Ok(v)
}

pub fn write_chain_file<P: AsRef<Path>>(
    path: P,
    chain: &TransformChain,
    manifest: Option<&RunManifest>,
) -> Result<()> {
    std::fs::write(path, write_chain(chain, manifest))?;
    Ok(())
}

pub fn read_chain_file<P: AsRef<Path>>(path: P) -> Result<(TransformChain, Option<RunManifest>)> {
    let bytes = std::fs::read(path)?;
    read_chain(&bytes)
}
