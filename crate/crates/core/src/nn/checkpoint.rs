//! Little-endian binary network checkpoints.
//!
//! ```text
//! offset  size        field
//! 0       4           magic  b"EDNN"
//! 4       4           format version (u32), currently 1
//! 8       1           output head (0 = actor, 1 = linear)
//! 9       4           number of layer sizes S (u32)
//! 13      4*S         layer sizes, input first (u32 each)
//! ..      8           genome length P (u64)
//! ..      8*P         genome in flatten order (f64 each)
//! ```

use std::io::{Read, Write};

use super::{Genome, MlpNet, NetShape, OutputHead};
use crate::error::{Error, Result};

pub const NET_MAGIC: [u8; 4] = *b"EDNN";
pub const NET_FORMAT_VERSION: u32 = 1;

pub fn write_net<W: Write>(w: &mut W, net: &MlpNet) -> Result<()> {
    w.write_all(&NET_MAGIC)?;
    write_u32(w, NET_FORMAT_VERSION)?;
    w.write_all(&[net.shape().head.as_code()])?;
    write_u32(w, net.shape().sizes.len() as u32)?;
    for &s in &net.shape().sizes {
        write_u32(w, s as u32)?;
    }
    write_f64s(w, net.params())
}

pub fn read_net<R: Read>(r: &mut R) -> Result<MlpNet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != NET_MAGIC {
        return Err(Error::Checkpoint(format!("bad network magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != NET_FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported network format version {version}"
        )));
    }
    let mut head = [0u8; 1];
    r.read_exact(&mut head)?;
    let head = OutputHead::from_code(head[0])
        .ok_or_else(|| Error::Checkpoint(format!("unknown output head code {}", head[0])))?;
    let count = read_u32(r)? as usize;
    if count > 1024 {
        return Err(Error::Checkpoint(format!("implausible layer count {count}")));
    }
    let sizes = (0..count)
        .map(|_| read_u32(r).map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let shape = NetShape::new(sizes, head).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let genome = Genome(read_f64s(r)?);
    MlpNet::from_genome(shape, &genome).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn net_to_bytes(net: &MlpNet) -> Vec<u8> {
    let mut buf = Vec::new();
    write_net(&mut buf, net).expect("writing to a Vec cannot fail");
    buf
}

pub fn net_from_bytes(mut bytes: &[u8]) -> Result<MlpNet> {
    read_net(&mut bytes)
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Length-prefixed (u64) run of little-endian f64 values.
pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    write_u64(w, values.len() as u64)?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let len = read_u64(r)? as usize;
    let mut buf = Vec::new();
    r.take(len as u64 * 8).read_to_end(&mut buf)?;
    if buf.len() != len * 8 {
        return Err(Error::Checkpoint(format!(
            "truncated parameter block: expected {} bytes, got {}",
            len * 8,
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
